#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "dmid/estimators.hpp"
#include "dmid/simulate.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace dmid;

namespace {

Dataset small_dataset(const Mechanism& mech, uint64_t seed, double duration = 3.0,
                      double rate = 15.0) {
  return simulate_inverse(mech, default_excitation(mech, seed, duration, rate));
}

Regression noiseless_regression(const Mechanism& mech, uint64_t seed = 1) {
  return Regression::build(mech, small_dataset(mech, seed));
}

Regression noisy_regression(const Mechanism& mech, uint64_t seed, double tau_std,
                            double qd_std = 0.0, double qdd_std = 0.0) {
  Dataset ds = small_dataset(mech, seed);
  NoiseSpec ns = NoiseSpec::none(mech.dof());
  ns.tau_cov = tau_std * tau_std * Mat::Identity(mech.dof(), mech.dof());
  ns.qd_std = Vec::Constant(mech.dof(), qd_std);
  ns.qdd_std = Vec::Constant(mech.dof(), qdd_std);
  ns.seed = seed * 33 + 7;
  return Regression::build(mech, add_noise(ds, ns));
}

Mat random_invertible(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    Mat D(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) D(i, j) = g(rng);
    if (std::abs(Eigen::FullPivLU<Mat>(D).determinant()) > 1e-2) return D;
  }
}

// Orthogonal projector onto the identifiable subspace (row space of the
// stacked regressor). The arm nullspace is two-dimensional -- it mixes m1,
// m1*c1x, I1zz, and m2 -- so zeroing single coordinates is not enough.
Mat identifiable_projector(const Regression& reg) {
  Eigen::JacobiSVD<Mat> svd(reg.stacked(), Eigen::ComputeThinV);
  const Vec sv = svd.singularValues();
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-10 * sv(0)) ++r;
  const Mat V = svd.matrixV().leftCols(r);
  return V * V.transpose();
}

}  // namespace

TEST_CASE("Regression::build alignment, rank, and singularity guard") {
  Mechanism mech((PanTilt()));
  Dataset ds = small_dataset(mech, 3);
  // plant one near-singular sample (phi close to pi/2)
  Sample bad = ds.samples[5];
  bad.q(1) = std::numbers::pi / 2 - 1e-6;
  ds.samples[5] = bad;
  Regression reg = Regression::build(mech, ds);
  CHECK(reg.num_rejected_singular == 1);
  CHECK(reg.size() == ds.size() - 1);
  CHECK(reg.accepted_indices.size() == reg.size());
  CHECK(reg.stacked_rank == 1);
  CHECK(reg.Y.size() == reg.tau.size());
  CHECK(reg.metrics.size() == reg.size());
}

TEST_CASE("fit_ols: identity regressor and noiseless recovery") {
  // single synthetic sample Y = I2, tau = (1,2)
  Mechanism mech((PanTilt()));
  Regression reg = noiseless_regression(mech);
  reg.Y.assign(1, Mat::Identity(2, 2).leftCols(2));
  reg.d = 2;
  reg.layout.entries.push_back({"x2", "aux", ""});
  reg.tau.assign(1, Vec{{1, 2}});
  reg.qd.assign(1, Vec{{1, 1}});
  reg.metrics.assign(1, AffineMetric(Mat::Identity(2, 2), {Mat::Zero(2, 2), Mat::Zero(2, 2)}));
  reg.constraints.clear();
  reg.feasible_seed = Vec::Ones(2);
  auto rep = fit_ols(reg, false);
  CHECK((rep.pi_hat.values - Vec{{1, 2}}).norm() <= 1e-12);

  for (Mechanism m : {Mechanism{PanTilt()}, Mechanism{DragCrawler3()}}) {
    Regression r = noiseless_regression(m);
    auto fit = fit_ols(r, false);
    CHECK((fit.pi_hat.values - m.ground_truth().values).norm() <= 1e-8);
    CHECK_FALSE(fit.rank_deficient_warning);
  }
}

TEST_CASE("fit_ols matches a QR oracle on random overdetermined systems") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  Mechanism mech((PanTilt()));
  Regression reg = noiseless_regression(mech);
  const int N = 40;
  reg.Y.clear();
  reg.tau.clear();
  reg.qd.clear();
  reg.metrics.clear();
  reg.constraints.clear();
  reg.d = 3;
  reg.layout.entries = {{"a", "", ""}, {"b", "", ""}, {"c", "", ""}};
  reg.feasible_seed = Vec::Ones(3);
  for (int i = 0; i < N; ++i) {
    Mat Y(2, 3);
    Vec t(2);
    for (int r = 0; r < 2; ++r) {
      t(r) = g(rng);
      for (int c = 0; c < 3; ++c) Y(r, c) = g(rng);
    }
    reg.Y.push_back(Y);
    reg.tau.push_back(t);
    reg.qd.push_back(Vec::Ones(2));
    reg.metrics.push_back(AffineMetric(Mat::Identity(2, 2),
                                       std::vector<Mat>(3, Mat::Zero(2, 2))));
  }
  auto rep = fit_ols(reg, false);
  Vec oracle_pi = reg.stacked().colPivHouseholderQr().solve(reg.stacked_tau());
  CHECK((rep.pi_hat.values - oracle_pi).norm() <= 1e-10 * std::max(1.0, oracle_pi.norm()));
}

TEST_CASE("rank-deficient OLS returns min-norm solution with warning") {
  Mechanism mech((TwoLinkArm()));
  Regression reg = noiseless_regression(mech);
  auto rep = fit_ols(reg, false);
  const Mat P = identifiable_projector(reg);
  CHECK(rep.rank_deficient_warning);  // m1 column is zero
  CHECK(rep.pi_hat.values(0) == doctest::Approx(0.0));  // min-norm puts 0 there
  // min-norm solution is orthogonal to the nullspace and matches the truth on
  // the identifiable subspace
  CHECK((rep.pi_hat.values - P * rep.pi_hat.values).norm() <= 1e-8);
  CHECK((P * (rep.pi_hat.values - mech.ground_truth().values)).norm() <= 1e-7);
}

TEST_CASE("fit_wls: W = I reproduces OLS; heavy weight tracks its coordinate") {
  Mechanism mech((PanTilt()));
  Regression reg = noisy_regression(mech, 5, 0.05);
  auto ols = fit_ols(reg, false);
  auto wls = fit_wls(reg, Mat::Identity(2, 2), false);
  CHECK((ols.pi_hat.values - wls.pi_hat.values).norm() <= 1e-10);

  // conflicting scalar targets: coordinate 0 says pi = 1, coordinate 1 says pi = 3
  Regression toy = reg;
  toy.Y.assign(1, Mat{{1.0}, {1.0}});
  toy.tau.assign(1, Vec{{1.0, 3.0}});
  toy.qd.assign(1, Vec::Ones(2));
  toy.metrics.assign(1, AffineMetric(Mat::Identity(2, 2), {Mat::Zero(2, 2)}));
  toy.constraints.clear();
  auto heavy = fit_wls(toy, Mat(Vec{{1e6, 1.0}}.asDiagonal()), false);
  CHECK(heavy.pi_hat.values(0) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("auto-WLS beats OLS on anisotropic noise (Gauss-Markov)") {
  Mechanism mech((PanTilt()));
  const Vec gt = mech.ground_truth().values;
  int wins = 0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Dataset ds = small_dataset(mech, 100 + seed);
    NoiseSpec ns = NoiseSpec::none(2);
    ns.tau_cov = Vec{{0.4 * 0.4, 0.02 * 0.02}}.asDiagonal();
    ns.seed = seed;
    Regression reg = Regression::build(mech, add_noise(ds, ns));
    const double e_ols = (fit_ols(reg, false).pi_hat.values - gt).squaredNorm();
    const double e_wls = (fit_wls(reg, std::nullopt, false).pi_hat.values - gt).squaredNorm();
    if (e_wls <= e_ols) ++wins;
  }
  CHECK(wins >= 40);
}

TEST_CASE("fit_energy: scalar reduction, flags, and rank detection") {
  Mechanism mech((PanTilt()));
  Regression reg = noiseless_regression(mech);
  auto rep = fit_energy(reg, false);
  CHECK((rep.pi_hat.values - mech.ground_truth().values).norm() <= 1e-8);

  Regression still = reg;
  for (auto& v : still.qd) v.setZero();
  auto flagged = fit_energy(still, false);
  CHECK(flagged.non_identifying);
  CHECK(flagged.effective_rank == 0);

  // SVD-oracle cross-check of the scalar stack rank
  Mat A(reg.size(), reg.d);
  for (size_t i = 0; i < reg.size(); ++i) A.row(i) = reg.qd[i].transpose() * reg.Y[i];
  Eigen::JacobiSVD<Mat> svd(A);
  int oracle_rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-10 * svd.singularValues()(0)) ++oracle_rank;
  CHECK(rep.effective_rank == oracle_rank);
}

TEST_CASE("fit_dual_metric: noiseless recovery and slack tightness") {
  for (Mechanism mech : {Mechanism{PanTilt()}, Mechanism{DragCrawler3()}}) {
    Regression reg = noiseless_regression(mech);
    auto rep = fit_dual_metric(reg, true);
    REQUIRE(rep.solver.status == sdp::SdpStatus::Optimal);
    CHECK((rep.pi_hat.values - mech.ground_truth().values).norm() <= 1e-6);
    for (size_t i = 0; i < reg.size(); ++i) {
      const Vec r = reg.Y[i] * rep.pi_hat.values - reg.tau[i];
      const double val = dual_norm_sq(reg.metrics[i].assemble(rep.pi_hat.values), r);
      const double s = rep.per_sample_weighted_residuals[i];
      CHECK(std::abs(s - val) <= 1e-6 * std::max(1.0, s));
    }
  }
}

TEST_CASE("fit_dual_metric equals OLS when the metric is a constant identity") {
  Mechanism mech((PanTilt()));
  Regression reg = noisy_regression(mech, 9, 0.1);
  for (auto& m : reg.metrics)
    m = AffineMetric(Mat::Identity(2, 2), std::vector<Mat>(1, Mat::Zero(2, 2)));
  auto dm = fit_dual_metric(reg, false);
  auto ols = fit_ols(reg, false);
  REQUIRE(dm.solver.status == sdp::SdpStatus::Optimal);
  CHECK((dm.pi_hat.values - ols.pi_hat.values).norm() <=
        1e-5 * std::max(1.0, ols.pi_hat.values.norm()));
}

TEST_CASE("fit_dual_metric matches a 1-d grid oracle on noisy pan-tilt data") {
  Mechanism mech((PanTilt()));
  Regression reg = noisy_regression(mech, 21, 0.08, 0.02);
  auto rep = fit_dual_metric(reg, true);
  REQUIRE(rep.solver.status == sdp::SdpStatus::Optimal);

  auto objective = [&](double pi) {
    Vec p = Vec::Constant(1, pi);
    double v = 0;
    for (size_t i = 0; i < reg.size(); ++i)
      v += dual_norm_sq(reg.metrics[i].assemble(p), reg.Y[i] * p - reg.tau[i]);
    return v;
  };
  double best = 0, bestv = std::numeric_limits<double>::infinity();
  for (double pi = 1e-4; pi < 0.5; pi += 1e-4) {
    const double v = objective(pi);
    if (v < bestv) {
      bestv = v;
      best = pi;
    }
  }
  CHECK(std::abs(rep.pi_hat.values(0) - best) <= 1e-3);
  CHECK(rep.objective == doctest::Approx(bestv).epsilon(1e-3));
}

TEST_CASE("dual-metric argmin and objective are chart-independent") {
  std::mt19937_64 rng(31);
  for (Mechanism mech : {Mechanism{PanTilt()}, Mechanism{DragCrawler3()}}) {
    Regression reg = noisy_regression(mech, 77, 0.05, 0.01);
    auto base = fit_dual_metric(reg, true);
    REQUIRE(base.solver.status == sdp::SdpStatus::Optimal);
    for (int rep_i = 0; rep_i < 3; ++rep_i) {
      Mat D = random_invertible(mech.dof(), rng);
      auto moved = fit_dual_metric(transform_regression(reg, D), true);
      REQUIRE(moved.solver.status == sdp::SdpStatus::Optimal);
      CHECK((moved.pi_hat.values - base.pi_hat.values).norm() <=
            1e-6 * std::max(1.0, base.pi_hat.values.norm()));
      CHECK(std::abs(moved.objective - base.objective) <=
            1e-8 * std::max(1.0, std::abs(base.objective)));
    }
  }
}

TEST_CASE("samplewise dual residuals are congruence-invariant") {
  std::mt19937_64 rng(41);
  Mechanism mech((DragCrawler3()));
  Regression reg = noisy_regression(mech, 13, 0.05);
  Mat D = random_invertible(5, rng);
  Regression treg = transform_regression(reg, D);
  Vec pi = mech.ground_truth().values * 1.1;
  for (size_t i = 0; i < reg.size(); ++i) {
    const double a = dual_norm_sq(reg.metrics[i].assemble(pi), reg.Y[i] * pi - reg.tau[i]);
    const double b = dual_norm_sq(treg.metrics[i].assemble(pi), treg.Y[i] * pi - treg.tau[i]);
    CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, a));
  }
}

TEST_CASE("OLS is chart-dependent on noisy data (witness)") {
  Mechanism mech((PanTilt()));
  int witnesses = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Regression reg = noisy_regression(mech, 300 + seed, 0.8, 0.0, 1.0);
    Mat D = Vec{{1000.0, 1.0}}.asDiagonal();
    auto a = fit_ols(reg, false);
    auto b = fit_ols(transform_regression(reg, D), false);
    const double rel = (a.pi_hat.values - b.pi_hat.values).norm() /
                       std::max(1e-12, a.pi_hat.values.norm());
    if (rel > 1e-2) ++witnesses;
  }
  CHECK(witnesses >= 18);
}

TEST_CASE("identifiable-set preservation on the arm nullspace") {
  Mechanism mech((TwoLinkArm()));
  Regression reg = noiseless_regression(mech);
  auto ols = fit_ols(reg, false);
  auto dm = fit_dual_metric(reg, false);
  REQUIRE(dm.solver.status == sdp::SdpStatus::Optimal);
  const Mat P = identifiable_projector(reg);
  CHECK((P * (dm.pi_hat.values - ols.pi_hat.values)).norm() <= 1e-6);
}

TEST_CASE("all estimators return consistency-feasible points when enforced") {
  Mechanism mech((DragCrawler3()));
  // adversarial data: subtract 1.5x one coefficient's contribution so the
  // unconstrained optimum wants that coefficient negative
  Dataset ds = small_dataset(mech, 8);
  for (auto& s : ds.samples) {
    Mat Y = mech.regressor(s);
    s.tau -= 1.5 * Y.col(6) * mech.ground_truth().values(6);
  }
  Regression reg = Regression::build(mech, ds);
  auto unconstrained = fit_ols(reg, false);
  CHECK(unconstrained.pi_hat.values.minCoeff() < 0.0);

  DynamicParams nominal(mech.feasible_seed(), mech.layout());
  std::vector<EstimatorSpec> specs;
  for (auto k : {EstimatorKind::OLS, EstimatorKind::WLS, EstimatorKind::EnergyLS,
                 EstimatorKind::DualMetric, EstimatorKind::RegBregman,
                 EstimatorKind::RegPullback}) {
    EstimatorSpec s;
    s.kind = k;
    s.enforce_consistency = true;
    s.nominal = nominal;
    s.rho = 1e-4;
    specs.push_back(s);
  }
  bool saw_boundary = false;
  for (const auto& s : specs) {
    auto rep = fit(reg, s);
    REQUIRE(rep.solver.status == sdp::SdpStatus::Optimal);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& cc : reg.constraints) {
      Eigen::SelfAdjointEigenSolver<Mat> es(cc.form.assemble(rep.pi_hat.values));
      worst = std::min(worst, es.eigenvalues().minCoeff());
    }
    CHECK(worst >= -1e-8);
    if (s.kind == EstimatorKind::OLS && worst <= 1e-4) saw_boundary = true;
  }
  CHECK(saw_boundary);
}

TEST_CASE("regularizers: rho limits and closed-form pullback oracle") {
  Mechanism mech((PanTilt()));
  Regression reg = noisy_regression(mech, 17, 0.05);
  DynamicParams nominal(Vec::Constant(1, 0.2), mech.layout());

  auto wls = fit_wls(reg, std::nullopt, false);
  for (auto kind : {EstimatorKind::RegBregman, EstimatorKind::RegPullback}) {
    auto small = fit_regularized(reg, kind, 1e-12, nominal, false);
    REQUIRE(small.solver.status == sdp::SdpStatus::Optimal);
    CHECK((small.pi_hat.values - wls.pi_hat.values).norm() <= 1e-6);
    auto large = fit_regularized(reg, kind, 1e9, nominal, false);
    CHECK((large.pi_hat.values - nominal.values).norm() <= 1e-3);
  }

  // pullback monotonicity in rho
  double prev = std::numeric_limits<double>::infinity();
  for (double rho : {1e-6, 1e-3, 1e0, 1e3}) {
    auto r = fit_regularized(reg, EstimatorKind::RegPullback, rho, nominal, false);
    const double g = (r.pi_hat.values - nominal.values).squaredNorm();
    CHECK(g <= prev * (1.0 + 1e-6) + 1e-9);
    prev = g;
  }

  // zero-data pullback returns the nominal
  Regression empty = reg;
  empty.Y.clear();
  empty.tau.clear();
  empty.qd.clear();
  empty.metrics.clear();
  auto prior = fit_regularized(empty, EstimatorKind::RegPullback, 1.0, nominal, false);
  CHECK((prior.pi_hat.values - nominal.values).norm() <= 1e-6);

  CHECK_THROWS(fit_regularized(reg, EstimatorKind::RegPullback, -1.0, nominal, false));
  DynamicParams bad(Vec::Constant(1, -1.0), mech.layout());
  CHECK_THROWS(fit_regularized(reg, EstimatorKind::RegPullback, 1.0, bad, false));
}

TEST_CASE("pullback on a 2-parameter toy matches the normal-equations oracle") {
  // synthetic 2-parameter regression with scalar regularizer blocks
  Mechanism mech((PanTilt()));
  std::mt19937_64 rng(55);
  std::normal_distribution<double> g(0.0, 1.0);
  Regression reg = noiseless_regression(mech);
  reg.d = 2;
  reg.layout.entries = {{"a", "", ""}, {"b", "", ""}};
  reg.feasible_seed = Vec::Ones(2);
  reg.constraints.clear();
  reg.regularizer_blocks.clear();
  for (int p = 0; p < 2; ++p) {
    std::vector<Mat> Mp(2, Mat::Zero(1, 1));
    Mp[p](0, 0) = 1.0;
    reg.regularizer_blocks.push_back(AffineMatrix(Mat::Zero(1, 1), Mp));
  }
  reg.Y.clear();
  reg.tau.clear();
  reg.qd.clear();
  reg.metrics.clear();
  for (int i = 0; i < 12; ++i) {
    Mat Y(2, 2);
    Vec t(2);
    for (int r = 0; r < 2; ++r) {
      t(r) = g(rng);
      for (int c = 0; c < 2; ++c) Y(r, c) = g(rng);
    }
    reg.Y.push_back(Y);
    reg.tau.push_back(t);
    reg.qd.push_back(Vec::Ones(2));
    reg.metrics.push_back(AffineMetric(Mat::Identity(2, 2),
                                       std::vector<Mat>(2, Mat::Zero(2, 2))));
  }
  DynamicParams nominal(Vec{{0.8, 1.3}}, reg.layout);
  const double rho = 0.37;
  auto rep = fit_regularized(reg, EstimatorKind::RegPullback, rho, nominal, false);
  REQUIRE(rep.solver.status == sdp::SdpStatus::Optimal);

  // scalar blocks: affine-invariant distance = sum log^2(pi_p / pi0_p); the
  // pullback metric (half the distance Hessian) is diag(1 / pi0_p^2)
  Mat H = Vec{{1.0 / (0.8 * 0.8), 1.0 / (1.3 * 1.3)}}.asDiagonal().toDenseMatrix().eval();
  // the fit uses auto-WLS weighting; rebuild the same weighted stack
  auto ols = fit_ols(reg, false);
  Mat S = Mat::Zero(2, 2);
  for (size_t i = 0; i < reg.size(); ++i) {
    Vec r = reg.Y[i] * ols.pi_hat.values - reg.tau[i];
    S += r * r.transpose();
  }
  S /= double(reg.size());
  S += (1e-10 * S.trace() / 2) * Mat::Identity(2, 2);
  Mat W = S.inverse();
  Mat AtA = Mat::Zero(2, 2);
  Vec Atb = Vec::Zero(2);
  for (size_t i = 0; i < reg.size(); ++i) {
    AtA += reg.Y[i].transpose() * W * reg.Y[i];
    Atb += reg.Y[i].transpose() * W * reg.tau[i];
  }
  Vec expect = (AtA + rho * H).ldlt().solve(Atb + rho * H * nominal.values);
  CHECK((rep.pi_hat.values - expect).norm() <= 1e-6 * std::max(1.0, expect.norm()));
}

TEST_CASE("default_rho is positive and fit() dispatch works") {
  Mechanism mech((PanTilt()));
  Regression reg = noisy_regression(mech, 23, 0.05);
  DynamicParams nominal(Vec::Constant(1, 0.09), mech.layout());
  CHECK(default_rho(reg, EstimatorKind::RegBregman, nominal) > 0.0);
  CHECK(default_rho(reg, EstimatorKind::RegPullback, nominal) > 0.0);
  EstimatorSpec spec;
  spec.kind = EstimatorKind::RegPullback;
  spec.nominal = nominal;
  spec.enforce_consistency = false;
  CHECK_NOTHROW(fit(reg, spec));
  spec.nominal.reset();
  CHECK_THROWS(fit(reg, spec));
  CHECK_THROWS(estimator_kind_from_string("bogus"));
  CHECK(estimator_kind_from_string("dual_metric") == EstimatorKind::DualMetric);
}
