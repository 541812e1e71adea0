#pragma once

#include "toprank/data.hpp"
#include "toprank/dense.hpp"
#include "toprank/errors.hpp"
#include "toprank/kernel.hpp"
#include "toprank/metrics.hpp"
#include "toprank/model.hpp"
#include "toprank/primal.hpp"
#include "toprank/problem.hpp"
#include "toprank/serialize.hpp"
#include "toprank/solver.hpp"
#include "toprank/state.hpp"
#include "toprank/surrogate.hpp"
