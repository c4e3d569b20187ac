#pragma once

#include "dmid/types.hpp"

namespace dmid {

/// Thrown when a metric fails the positive-definiteness guard
/// lambda_min > eps_sing * lambda_max.
struct SingularMetricError : std::runtime_error {
  double lambda_min, lambda_max;
  SingularMetricError(double lmin, double lmax)
      : std::runtime_error("metric not positive definite: lambda_min=" + std::to_string(lmin) +
                           " lambda_max=" + std::to_string(lmax)),
        lambda_min(lmin), lambda_max(lmax) {}
};

constexpr double kSingularityRatio = 1e-8;  // lambda_min must exceed this times lambda_max

/// (A + A^T)/2. Throws if the asymmetry exceeds 1e-9 relative.
Mat symmetrized(const Mat& A);

/// True iff lambda_min(M) > kSingularityRatio * lambda_max(M).
bool metric_is_pd(const Mat& metric);

/// Throws SingularMetricError when the guard fails.
void require_pd(const Mat& metric);

/// f^T M^{-1} f via Cholesky, never an explicit inverse.
double dual_norm_sq(const Mat& metric, const Vec& f);

/// Symmetric PD square root, M^{1/2} M^{1/2} = M.
Mat metric_sqrt(const Mat& metric);

}  // namespace dmid
