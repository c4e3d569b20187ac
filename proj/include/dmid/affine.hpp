#pragma once

#include "dmid/geometry.hpp"

namespace dmid {

/// Symmetric matrix form affine in the parameters: M(pi) = M0 + sum_p pi_p Mp[p].
struct AffineMatrix {
  Mat M0;
  std::vector<Mat> Mp;

  AffineMatrix() = default;
  AffineMatrix(Mat m0, std::vector<Mat> mp) : M0(symmetrized(std::move(m0))) {
    Mp.reserve(mp.size());
    for (auto& m : mp) {
      if (m.rows() != M0.rows() || m.cols() != M0.cols())
        throw std::invalid_argument("AffineMatrix: block size mismatch");
      Mp.push_back(symmetrized(std::move(m)));
    }
  }

  int size() const { return static_cast<int>(M0.rows()); }
  int num_params() const { return static_cast<int>(Mp.size()); }

  Mat assemble(const Vec& pi) const {
    if (pi.size() != num_params()) throw std::invalid_argument("AffineMatrix: parameter length mismatch");
    Mat M = M0;
    for (int p = 0; p < num_params(); ++p) M.noalias() += pi(p) * Mp[p];
    return M;
  }
};

using AffineMetric = AffineMatrix;

/// Affine-in-pi PSD requirement: form(pi) >= psd_margin * I.
struct ConsistencyConstraint {
  std::string label;
  AffineMatrix form;
  double psd_margin = 0;
  // True for blocks living in velocity/force space (assembled drag matrices),
  // which transform by congruence under a chart change. Parameter-space blocks
  // (pseudo-inertia) are chart-invariant.
  bool chart_covariant = false;
};

}  // namespace dmid
