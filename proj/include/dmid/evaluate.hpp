#pragma once

#include "dmid/estimators.hpp"
#include "dmid/simulate.hpp"

namespace dmid {

struct NccResult {
  double ncc = 0;
  int shift = 0;
  bool degenerate = false;  // zero-variance input
};

/// Max over integer shifts |k| <= round((5/360) * slowest_period * rate) of
/// the mean-removed normalized cross-correlation on the overlapping region.
NccResult ncc_max_shift(const Vec& pred, const Vec& meas, double slowest_period, double rate);

/// Forward-dynamics prediction per coordinate. Inertia class: qdd = M^-1 (tau
/// - C qd - g); drag class: qd = M^-1 tau. Samples with a non-PD metric at
/// pi_hat are excluded and their indices reported.
struct Prediction {
  Mat predicted;  // rows = kept samples, cols = coordinates
  Mat measured;   // matching measured signal (qdd or qd)
  std::vector<size_t> excluded;
};

Prediction predict_forward(const Mechanism& mech, const DynamicParams& pi_hat,
                           const Dataset& data);

/// Orthogonal projector onto the row space of the stacked regressor
/// (singular values below 1e-10 * sigma_max treated as null).
Mat identifiable_projection(const Mat& stacked);

struct InvarianceRow {
  Mat D;
  double dpi_rel = 0;
  double dobj_rel = 0;
  sdp::SdpStatus status = sdp::SdpStatus::Optimal;
};

/// Refits on chart-transformed copies of the regression and reports relative
/// argmin/objective shifts per transform.
std::vector<InvarianceRow> invariance_probe(const Regression& reg, const EstimatorSpec& spec,
                                            const std::vector<Mat>& D_list);

struct CoordinateEval {
  std::string name;
  double ncc_mean = 0, ncc_std = 0;
  double rmse_mean = 0;
  std::vector<double> ncc_per_traj;
  std::vector<int> shift_per_traj;
};

struct EvalReport {
  std::string estimator;
  std::vector<CoordinateEval> coordinates;
  double param_err_raw = 0;
  double param_err_projected = 0;
  int excluded_samples = 0;
};

/// Evaluates one fitted model over a set of test trajectories.
EvalReport evaluate_estimator(const Mechanism& mech, const std::string& estimator_name,
                              const DynamicParams& pi_hat,
                              const std::vector<Dataset>& test_sets, double slowest_period,
                              const std::optional<DynamicParams>& ground_truth,
                              const Mat& train_stacked);

}  // namespace dmid
