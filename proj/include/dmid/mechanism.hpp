#pragma once

#include <variant>

#include "dmid/affine.hpp"

namespace dmid {

/// Pan--tilt head: massless link, point mass at the end effector.
/// Coordinates (theta, phi). Metric M = m l^2 diag(cos^2 phi, 1).
/// Parameters: [m l^2] and, when gravity is enabled, [m l].
struct PanTilt {
  double m = 0.3;
  double l = 0.5;
  bool gravity = false;
  double g = 9.81;
};

/// Planar 2R arm, per-link parameters (m, m*cx, m*cy, Izz) with first moments
/// and rotational inertia taken about the link's joint frame.
struct TwoLinkArm {
  double l1 = 0.5, l2 = 0.4;
  double g = 9.81;
  // ground truth
  double m1 = 1.2, c1x = 0.25, c1y = 0.02, izz1 = 0.1005;
  double m2 = 0.8, c2x = 0.20, c2y = -0.01, izz2 = 0.0428;
};

/// Planar three-link crawler moving through a resistive medium.
/// Coordinates (x, y, theta, alpha1, alpha2): middle-link pose plus two joint
/// angles. Each link carries longitudinal/lateral viscous drag acting at its
/// center; each joint carries a scalar joint drag.
struct DragCrawler3 {
  double L1 = 0.3, L2 = 0.3, L3 = 0.3;
  // ground truth
  double clong[3] = {0.4, 0.5, 0.45};
  double clat[3] = {2.0, 2.4, 2.2};
  double cjoint[2] = {0.05, 0.06};
};

class Mechanism {
 public:
  using Variant = std::variant<PanTilt, TwoLinkArm, DragCrawler3>;

  explicit Mechanism(Variant v) : v_(std::move(v)) {}

  const Variant& variant() const { return v_; }
  std::string name() const;
  ModelClass model_class() const;
  int dof() const;
  ParamLayout layout() const;
  DynamicParams ground_truth() const;

  /// Indices of internal (shape) coordinates.
  std::vector<int> shape_coords() const;

  std::vector<std::string> coordinate_names() const;

  /// Regressor Y(q, qd, qdd), n x d, linear in the parameters by construction.
  Mat regressor(const Sample& s) const;

  /// Affine decomposition of the mass (inertia class) or drag (drag class)
  /// matrix at configuration q.
  AffineMetric affine_metric(const Vec& q) const;

  /// Parameter-space physical-consistency LMIs. For the drag class,
  /// probe_configs adds one assembled-drag-matrix PSD block per configuration.
  std::vector<ConsistencyConstraint> consistency_constraints(
      const std::vector<Vec>& probe_configs = {}) const;

  /// Affine blocks used by the geometric regularizers (per-body pseudo-inertia
  /// for the inertia class, per-coefficient 1x1 blocks for the drag class).
  std::vector<AffineMatrix> regularizer_blocks() const;

  /// Parameter point used for the structural singularity guard.
  Vec reference_params() const { return Vec::Ones(layout().size()); }

  /// A parameter point strictly inside every consistency constraint, used to
  /// seed interior-point solves.
  Vec feasible_seed() const;

  /// tau at the ground-truth parameters.
  Vec inverse_dynamics(const Sample& s) const { return regressor(s) * ground_truth().values; }

 private:
  Variant v_;
};

}  // namespace dmid
