#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "coneflow/errors.hpp"

namespace coneflow {

// Positive weight a(r, θ) multiplying the nonlinearity.
//   constant:         a = value
//   radial_profile:   a = 1 + epsilon * x^exponent,   x = (r - R0) / (R1 - R0)
//   angular_profile:  a = 1 + epsilon * cos(θ)^exponent
struct WeightFamily {
    enum class Kind { constant, radial_profile, angular_profile };

    Kind kind = Kind::constant;
    double value = 1.0;
    double epsilon = 0.0;
    double exponent = 1.0;

    static WeightFamily constant(double v = 1.0) { return {Kind::constant, v, 0.0, 1.0}; }
    static WeightFamily radial(double eps = 1.0, double k = 1.0) {
        return {Kind::radial_profile, 1.0, eps, k};
    }
    static WeightFamily angular(double eps = 0.5, double k = 2.0) {
        return {Kind::angular_profile, 1.0, eps, k};
    }

    bool is_unit_constant() const { return kind == Kind::constant && value == 1.0; }

    friend bool operator==(const WeightFamily&, const WeightFamily&) = default;
};

inline std::string_view to_string(WeightFamily::Kind k) {
    switch (k) {
    case WeightFamily::Kind::constant: return "constant";
    case WeightFamily::Kind::radial_profile: return "radial-profile";
    case WeightFamily::Kind::angular_profile: return "angular-profile";
    }
    return "unknown";
}

inline WeightFamily::Kind weight_kind_from_string(std::string_view s) {
    if (s == "constant") return WeightFamily::Kind::constant;
    if (s == "radial-profile" || s == "radial") return WeightFamily::Kind::radial_profile;
    if (s == "angular-profile" || s == "angular") return WeightFamily::Kind::angular_profile;
    throw ValidationError("unknown weight kind '" + std::string(s) + "'");
}

// Data of the Dirichlet problem on the annulus R0 < |x| < R1.
struct ProblemParams {
    int N = 3;
    double p = 4.0;
    double R0 = 1.0;
    double R1 = 2.0;
    WeightFamily weight{};

    void validate() const {
        CONEFLOW_REQUIRE(N >= 3, "dimension N must be >= 3 (got " + std::to_string(N) + ")");
        CONEFLOW_REQUIRE(std::isfinite(p) && p > 2.0,
                         "exponent p must be > 2 (got " + std::to_string(p) + ")");
        CONEFLOW_REQUIRE(std::isfinite(R0) && std::isfinite(R1) && R0 > 0.0 && R0 < R1,
                         "radii must satisfy 0 < R0 < R1 (got R0=" + std::to_string(R0) +
                             ", R1=" + std::to_string(R1) + ")");
    }

    friend bool operator==(const ProblemParams&, const ProblemParams&) = default;
};

} // namespace coneflow
