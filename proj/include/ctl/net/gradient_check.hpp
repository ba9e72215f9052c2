#pragma once

#include "ctl/common.hpp"

namespace ctl::net {

struct GradientCheckResult {
    double max_relative_error = 0;
    Eigen::Index worst_coordinate = -1;
};

/// Compares `analytic` against central differences of `f` at `point`,
/// coordinate by coordinate. The relative error of a coordinate is
/// |a - n| / max(|a|, |n|, floor); the floor keeps coordinates whose true
/// gradient is ~0 from dividing round-off by round-off.
template <class F>
GradientCheckResult gradient_check(F&& f, VectorT<double> point, const VectorT<double>& analytic, double eps,
                                   double floor = 1e-6) {
    require(eps > 0, ErrorCode::InvalidArgument, "finite-difference step must be positive");
    require(analytic.size() == point.size(), ErrorCode::DimensionMismatch, "gradient size differs from point size");
    GradientCheckResult res;
    for (Eigen::Index i = 0; i < point.size(); ++i) {
        const double orig = point[i];
        point[i] = orig + eps;
        const double up = f(point);
        point[i] = orig - eps;
        const double down = f(point);
        point[i] = orig;
        const double numeric = (up - down) / (2 * eps);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
        const double err = std::abs(analytic[i] - numeric) / denom;
        if (err > res.max_relative_error || res.worst_coordinate < 0) {
            res.max_relative_error = err;
            res.worst_coordinate = i;
        }
    }
    return res;
}

}  // namespace ctl::net
