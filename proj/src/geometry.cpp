#include "dmid/geometry.hpp"

#include <Eigen/Eigenvalues>

namespace dmid {

Mat symmetrized(const Mat& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("symmetrized: not square");
  const double asym = (A - A.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if (asym > 1e-9 * scale)
    throw std::invalid_argument("symmetrized: asymmetry " + std::to_string(asym) + " beyond tolerance");
  return 0.5 * (A + A.transpose());
}

namespace {
std::pair<double, double> eig_range(const Mat& metric) {
  Eigen::SelfAdjointEigenSolver<Mat> es(metric, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}
}  // namespace

bool metric_is_pd(const Mat& metric) {
  auto [lmin, lmax] = eig_range(metric);
  return lmin > kSingularityRatio * std::abs(lmax) && lmin > 0;
}

void require_pd(const Mat& metric) {
  auto [lmin, lmax] = eig_range(metric);
  if (!(lmin > kSingularityRatio * std::abs(lmax) && lmin > 0))
    throw SingularMetricError(lmin, lmax);
}

double dual_norm_sq(const Mat& metric, const Vec& f) {
  if (metric.rows() != f.size()) throw std::invalid_argument("dual_norm_sq: dimension mismatch");
  require_pd(metric);
  Eigen::LLT<Mat> llt(metric);
  if (llt.info() != Eigen::Success) {
    auto [lmin, lmax] = eig_range(metric);
    throw SingularMetricError(lmin, lmax);
  }
  // f^T M^{-1} f = || L^{-1} f ||^2
  Vec y = llt.matrixL().solve(f);
  return y.squaredNorm();
}

Mat metric_sqrt(const Mat& metric) {
  require_pd(metric);
  Eigen::SelfAdjointEigenSolver<Mat> es(metric);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace dmid
