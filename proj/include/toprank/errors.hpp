#pragma once

#include <stdexcept>
#include <string>

namespace toprank {

// Error taxonomy. The CLI maps these onto exit codes:
//   invalid_spec / config errors -> 2, data errors -> 3, numeric errors -> 4.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// -- configuration / specification problems -------------------------------
struct invalid_spec : error {
    using error::error;
};

// -- data problems ---------------------------------------------------------
struct data_error : error {
    using error::error;
};
struct parse_error : data_error {
    parse_error(const std::string& what, std::size_t line)
        : data_error(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
    std::size_t line_number;
};
struct empty_file : data_error {
    using data_error::data_error;
};
struct degenerate_class : data_error {
    using data_error::data_error;
};
struct too_few_samples : data_error {
    using data_error::data_error;
};
struct dimension_mismatch : data_error {
    using data_error::data_error;
};

// -- numeric / feasibility problems ----------------------------------------
struct numeric_error : error {
    using error::error;
};
struct infeasible_config : numeric_error {
    using numeric_error::numeric_error;
};
struct infeasible_state : numeric_error {
    using numeric_error::numeric_error;
};
struct degenerate_quantile : numeric_error {
    using numeric_error::numeric_error;
};
struct allocation_too_large : numeric_error {
    using numeric_error::numeric_error;
};

// -- I/O and file-format problems ------------------------------------------
struct io_error : error {
    using error::error;
};
struct format_error : io_error {
    using io_error::io_error;
};
struct schema_version_error : format_error {
    using format_error::format_error;
};
struct index_out_of_range : error {
    using error::error;
};

}  // namespace toprank
