#pragma once

#include "dmid/mechanism.hpp"
#include "dmid/sdp.hpp"

namespace dmid {

/// Per-sample regression data shared by all estimators. Samples rejected by
/// the singularity guard are excluded identically for every estimator so that
/// comparisons stay paired.
struct Regression {
  std::vector<Mat> Y;            // n x d regressor per accepted sample
  std::vector<Vec> tau;
  std::vector<Vec> qd;
  std::vector<AffineMetric> metrics;
  std::vector<ConsistencyConstraint> constraints;
  std::vector<AffineMatrix> regularizer_blocks;
  ParamLayout layout;
  Vec feasible_seed;
  int n = 0, d = 0;
  int stacked_rank = 0;
  int num_rejected_singular = 0;
  std::vector<size_t> accepted_indices;  // into the source dataset

  size_t size() const { return Y.size(); }
  Mat stacked() const;
  Vec stacked_tau() const;

  static Regression build(const Mechanism& mech, const Dataset& data);
};

/// Samplewise chart transform q' = D q: qd' = D qd, tau' = D^-T tau,
/// Y' = D^-T Y, metrics M' = D^-T M D^-1. Chart-covariant consistency blocks
/// transform by the same congruence.
Regression transform_regression(const Regression& reg, const Mat& D);

enum class EstimatorKind { OLS, WLS, EnergyLS, DualMetric, RegBregman, RegPullback };

const char* to_string(EstimatorKind k);
EstimatorKind estimator_kind_from_string(const std::string& s);

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::OLS;
  std::optional<Mat> weight;            // fixed W for WLS; empty = auto
  double rho = 0;                       // regularization scale
  std::optional<DynamicParams> nominal; // pi_0 for the regularized kinds
  bool enforce_consistency = true;
};

struct EstimatorReport {
  DynamicParams pi_hat;
  double objective = 0;
  sdp::SdpSolution solver;
  std::optional<Mat> sigma_hat;
  std::vector<double> per_sample_weighted_residuals;
  bool rank_deficient_warning = false;
  int effective_rank = 0;   // rank of the (possibly weighted/scalarized) stack
  bool non_identifying = false;  // energy fit with all-zero velocities
};

EstimatorReport fit_ols(const Regression& reg, bool enforce_consistency);
EstimatorReport fit_wls(const Regression& reg, const std::optional<Mat>& weight,
                        bool enforce_consistency);
EstimatorReport fit_energy(const Regression& reg, bool enforce_consistency);
EstimatorReport fit_dual_metric(const Regression& reg, bool enforce_consistency);
EstimatorReport fit_regularized(const Regression& reg, EstimatorKind kind, double rho,
                                const DynamicParams& nominal, bool enforce_consistency);

/// Dispatch on spec.kind. For the regularized kinds a missing rho (<= 0)
/// selects the default scale 1e-2 * OLS objective / g(pi_OLS).
EstimatorReport fit(const Regression& reg, const EstimatorSpec& spec);

/// Default regularization scale used when the CLI does not pin rho.
double default_rho(const Regression& reg, EstimatorKind kind, const DynamicParams& nominal);

}  // namespace dmid
