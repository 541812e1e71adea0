#pragma once

#include <algorithm>
#include <optional>
#include <string>

#include "toprank/errors.hpp"

namespace toprank {

enum class SurrogateFamily { Hinge, TruncatedQuadratic };

// Scaled surrogate loss l(s) = max{0, 1 + theta*s} (hinge) or its square
// (truncated quadratic). Both satisfy l(0) = 1 and are convex, non-negative
// and non-decreasing.
struct SurrogateSpec {
    SurrogateFamily family = SurrogateFamily::Hinge;
    double theta = 1.0;

    SurrogateSpec() = default;
    SurrogateSpec(SurrogateFamily f, double th) : family(f), theta(th) {
        if (!(theta > 0.0)) throw invalid_spec("surrogate theta must be positive");
    }

    static SurrogateSpec hinge(double theta = 1.0) {
        return SurrogateSpec(SurrogateFamily::Hinge, theta);
    }
    static SurrogateSpec quadratic(double theta = 1.0) {
        return SurrogateSpec(SurrogateFamily::TruncatedQuadratic, theta);
    }
};

inline double loss(const SurrogateSpec& spec, double s) {
    const double h = std::max(0.0, 1.0 + spec.theta * s);
    return spec.family == SurrogateFamily::Hinge ? h : h * h;
}

// Slack absorbing rounding at the conjugate-domain boundary (y == theta).
inline constexpr double kConjugateDomainSlack = 1e-12;

// Convex conjugate l*(y). Returns nullopt where the conjugate is +infinity
// (hinge: y outside [0, theta]; quadratic: y < 0); callers must treat the
// corresponding dual objective as -infinity.
inline std::optional<double> conjugate(const SurrogateSpec& spec, double y) {
    if (spec.family == SurrogateFamily::Hinge) {
        if (y < -kConjugateDomainSlack || y > spec.theta + kConjugateDomainSlack)
            return std::nullopt;
        return -y / spec.theta;
    }
    if (y < -kConjugateDomainSlack) return std::nullopt;
    return y * y / (4.0 * spec.theta * spec.theta) - y / spec.theta;
}

inline bool in_conjugate_domain(const SurrogateSpec& spec, double y) {
    return conjugate(spec, y).has_value();
}

inline const char* to_string(SurrogateFamily f) {
    return f == SurrogateFamily::Hinge ? "hinge" : "quadratic";
}

inline SurrogateFamily surrogate_family_from_string(const std::string& s) {
    if (s == "hinge") return SurrogateFamily::Hinge;
    if (s == "quadratic") return SurrogateFamily::TruncatedQuadratic;
    throw invalid_spec("unknown surrogate family: " + s);
}

}  // namespace toprank
