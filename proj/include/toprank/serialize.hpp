#pragma once

#include <string>

#include <json.hpp>

#include "toprank/kernel.hpp"
#include "toprank/problem.hpp"
#include "toprank/surrogate.hpp"

namespace toprank {

using json = nlohmann::json;

inline json to_json(const SurrogateSpec& s) {
    return json{{"family", to_string(s.family)}, {"theta", s.theta}};
}

inline SurrogateSpec surrogate_from_json(const json& j) {
    return SurrogateSpec(surrogate_family_from_string(j.at("family").get<std::string>()),
                         j.at("theta").get<double>());
}

inline json to_json(const KernelSpec& k) {
    return json{{"family", to_string(k.family)}, {"sigma", k.sigma}};
}

inline KernelSpec kernel_from_json(const json& j) {
    const auto family = kernel_family_from_string(j.at("family").get<std::string>());
    const double sigma = j.value("sigma", 1.0);
    return KernelSpec(family, family == KernelFamily::Gaussian ? sigma : 1.0);
}

inline json to_json(const ProblemSpec& p) {
    return json{{"kind", to_string(p.kind)},
                {"K", p.K},
                {"tau", p.tau},
                {"C", p.C},
                {"surrogate_pos", to_json(p.surrogate_pos)},
                {"surrogate_neg", to_json(p.surrogate_neg)}};
}

inline ProblemSpec problem_from_json(const json& j) {
    std::string kind = j.at("kind").get<std::string>();
    const double C = j.at("C").get<double>();
    SurrogateSpec pos = j.contains("surrogate_pos") ? surrogate_from_json(j.at("surrogate_pos"))
                                                    : SurrogateSpec::quadratic();
    if (kind == "toppush") return ProblemSpec::top_push(C, pos);
    if (kind == "toppushk")
        return ProblemSpec::top_push_k(j.value("K", std::size_t{1}), C, pos);
    if (kind == "patmat") {
        SurrogateSpec neg = j.contains("surrogate_neg") ? surrogate_from_json(j.at("surrogate_neg"))
                                                        : pos;
        return ProblemSpec::pat_mat(j.at("tau").get<double>(), C, pos, neg);
    }
    throw invalid_spec("unknown problem kind: " + kind);
}

}  // namespace toprank
