#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "dmid/evaluate.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace dmid;

namespace {

Vec sine_signal(int n, double freq, double rate, double phase = 0.0) {
  Vec v(n);
  for (int i = 0; i < n; ++i)
    v(i) = std::sin(2 * std::numbers::pi * freq * i / rate + phase);
  return v;
}

}  // namespace

TEST_CASE("ncc: identical signals give ncc 1 at shift 0") {
  Vec s = sine_signal(200, 0.8, 20.0);
  auto r = ncc_max_shift(s, s, 1.0 / 0.37, 20.0);
  CHECK_FALSE(r.degenerate);
  CHECK(r.ncc == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.shift == 0);
}

TEST_CASE("ncc: anti-phase signal scores -1 when no shift can fix it") {
  // window = round(5/360 * (1/0.37) * 10) = 0: only shift 0 is allowed
  Vec s = sine_signal(100, 0.9, 10.0);
  auto r = ncc_max_shift(s, Vec(-s), 1.0 / 0.37, 10.0);
  CHECK(r.shift == 0);
  CHECK(r.ncc == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("ncc: a measurement delayed by 2 samples is found at shift +2") {
  const int n = 300;
  Vec pred = sine_signal(n, 0.6, 30.0);
  Vec meas(n);
  for (int i = 0; i < n; ++i) meas(i) = i >= 2 ? pred(i - 2) : pred(0);
  auto r = ncc_max_shift(pred, meas, 1.0 / 0.37, 30.0);
  // window = round(5/360 * 2.7027 * 30) = 1.1 -> 1? needs >= 2
  // use a slower reference period so the window covers the delay
  r = ncc_max_shift(pred, meas, 20.0, 30.0);
  CHECK(r.shift == 2);
  CHECK(r.ncc > 0.999);
}

TEST_CASE("ncc: degenerate on constant input, tie broken toward zero shift") {
  Vec flat = Vec::Constant(50, 3.0);
  Vec s = sine_signal(50, 0.5, 10.0);
  CHECK(ncc_max_shift(flat, s, 10.0, 10.0).degenerate);
  CHECK(ncc_max_shift(s, flat, 10.0, 10.0).degenerate);
  CHECK(ncc_max_shift(flat, s, 10.0, 10.0).ncc == 0.0);

  // perfectly periodic signal: every aligned period ties, smallest |k| wins
  Vec p = sine_signal(400, 1.0, 10.0);
  auto r = ncc_max_shift(p, p, 200.0, 10.0);  // wide window, many shifts tie
  CHECK(r.shift == 0);
}

TEST_CASE("ncc: invariant under positive affine maps, sign flips with alpha") {
  Vec pred = sine_signal(120, 0.7, 15.0, 0.4);
  Vec meas = sine_signal(120, 0.7, 15.0, 0.55);
  auto base = ncc_max_shift(pred, meas, 5.0, 15.0);
  auto scaled = ncc_max_shift(Vec(3.7 * pred.array() + 11.0), meas, 5.0, 15.0);
  CHECK(scaled.ncc == doctest::Approx(base.ncc).epsilon(1e-10));
  CHECK(scaled.shift == base.shift);
  // the sign-flip identity only holds pointwise in the shift, so compare with
  // a zero-width search window (round(5/360 * 2.0 * 15) = 0)
  auto base0 = ncc_max_shift(pred, meas, 2.0, 15.0);
  auto flipped = ncc_max_shift(Vec(-2.0 * pred.array() + 1.0), meas, 2.0, 15.0);
  CHECK(flipped.ncc == doctest::Approx(-base0.ncc).epsilon(1e-10));
}

TEST_CASE("ncc: mismatched lengths rejected") {
  Vec a = sine_signal(30, 1.0, 10.0), b = sine_signal(31, 1.0, 10.0);
  CHECK_THROWS(ncc_max_shift(a, b, 5.0, 10.0));
}

TEST_CASE("identifiable_projection: full rank gives identity, nullspace annihilated") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  Mat A(20, 4);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 4; ++j) A(i, j) = g(rng);
  Mat P = identifiable_projection(A);
  CHECK((P - Mat::Identity(4, 4)).norm() <= 1e-10);

  // kill one direction
  Vec v = Vec{{1.0, -2.0, 0.5, 3.0}}.normalized();
  Mat A2 = A * (Mat::Identity(4, 4) - v * v.transpose());
  Mat P2 = identifiable_projection(A2);
  CHECK((P2 * v).norm() <= 1e-10);
  CHECK((P2 * P2 - P2).norm() <= 1e-10);  // idempotent
  CHECK((P2 - P2.transpose()).norm() <= 1e-12);
  CHECK(P2.trace() == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("identifiable_projection matches the arm's structural nullspace") {
  Mechanism mech((TwoLinkArm()));
  Dataset ds = simulate_inverse(mech, default_excitation(mech, 5, 4.0, 15.0));
  Regression reg = Regression::build(mech, ds);
  Mat P = identifiable_projection(reg.stacked());
  Vec e0 = Vec::Zero(8);
  e0(0) = 1.0;
  CHECK((P * e0).norm() <= 1e-10);
  CHECK(P.trace() == doctest::Approx(double(reg.stacked_rank)).epsilon(1e-10));
}

TEST_CASE("predict_forward: exact at the ground truth") {
  for (Mechanism mech : {Mechanism{PanTilt{.gravity = true}}, Mechanism{TwoLinkArm()},
                         Mechanism{DragCrawler3()}}) {
    Dataset ds = simulate_inverse(mech, default_excitation(mech, 19, 3.0, 15.0));
    auto pred = predict_forward(mech, mech.ground_truth(), ds);
    CHECK(pred.excluded.empty());
    CHECK(pred.predicted.rows() == Eigen::Index(ds.size()));
    CHECK(pred.predicted.cols() == mech.dof());
    CHECK((pred.predicted - pred.measured).lpNorm<Eigen::Infinity>() <= 1e-9);
    // measured channel is qdd for the inertia class, qd for the drag class
    const bool drag = mech.model_class() == ModelClass::DragDominated;
    const Vec& ref = drag ? ds.samples[3].qd : ds.samples[3].qdd;
    CHECK((pred.measured.row(3).transpose() - ref).norm() <= 1e-12);
  }
}

TEST_CASE("predict_forward: zero force gives zero velocity for the drag class") {
  Mechanism mech((DragCrawler3()));
  Dataset ds = simulate_inverse(mech, default_excitation(mech, 23, 2.0, 10.0));
  for (auto& s : ds.samples) s.tau.setZero();
  auto pred = predict_forward(mech, mech.ground_truth(), ds);
  CHECK(pred.predicted.lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("predict_forward matches a direct solve at a perturbed parameter") {
  Mechanism mech((TwoLinkArm()));
  Dataset ds = simulate_inverse(mech, default_excitation(mech, 29, 2.0, 10.0));
  Vec pi = mech.ground_truth().values * 1.07;
  pi(3) *= 1.3;
  DynamicParams params(pi, mech.layout());
  auto pred = predict_forward(mech, params, ds);
  REQUIRE(pred.excluded.empty());
  for (size_t i = 0; i < ds.size(); ++i) {
    const Sample& s = ds.samples[i];
    Sample zero_acc = s;
    zero_acc.qdd = Vec::Zero(2);
    const Vec bias = mech.regressor(zero_acc) * pi;  // C qd + g at pi
    const Mat M = mech.affine_metric(s.q).assemble(pi);
    Vec qdd = M.llt().solve(s.tau - bias);
    CHECK((pred.predicted.row(i).transpose() - qdd).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("predict_forward excludes samples with a non-PD metric") {
  Mechanism mech((TwoLinkArm()));
  Dataset ds = simulate_inverse(mech, default_excitation(mech, 31, 2.0, 10.0));
  Vec pi = Vec::Zero(8);  // metric identically singular
  auto pred = predict_forward(mech, DynamicParams(pi, mech.layout()), ds);
  CHECK(pred.excluded.size() == ds.size());
  CHECK(pred.predicted.rows() == 0);
}

TEST_CASE("invariance_probe: identity map is a fixed point") {
  Mechanism mech((PanTilt()));
  Dataset ds = simulate_inverse(mech, default_excitation(mech, 37, 3.0, 15.0));
  Regression reg = Regression::build(mech, ds);
  EstimatorSpec spec;
  spec.kind = EstimatorKind::OLS;
  spec.enforce_consistency = false;
  auto rows = invariance_probe(reg, spec, {Mat::Identity(2, 2)});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].dpi_rel <= 1e-12);
  CHECK(rows[0].dobj_rel <= 1e-12);
}

TEST_CASE("invariance_probe: dual metric invariant, OLS not, on noisy data") {
  Mechanism mech((PanTilt()));
  Dataset ds = simulate_inverse(mech, default_excitation(mech, 41, 4.0, 15.0));
  NoiseSpec ns = NoiseSpec::none(2);
  ns.tau_cov = 0.12 * 0.12 * Mat::Identity(2, 2);
  ns.qdd_std = Vec::Constant(2, 0.3);
  ns.seed = 5;
  Regression reg = Regression::build(mech, add_noise(ds, ns));
  std::vector<Mat> maps{Vec{{1000.0, 1.0}}.asDiagonal().toDenseMatrix(),
                        Mat{{0.6, 0.8}, {-0.8, 0.6}}};
  EstimatorSpec dm;
  dm.kind = EstimatorKind::DualMetric;
  dm.enforce_consistency = true;
  for (const auto& row : invariance_probe(reg, dm, maps)) {
    REQUIRE(row.status == sdp::SdpStatus::Optimal);
    CHECK(row.dpi_rel <= 1e-6);
    CHECK(row.dobj_rel <= 1e-6);
  }
  EstimatorSpec ols;
  ols.kind = EstimatorKind::OLS;
  ols.enforce_consistency = false;
  auto rows = invariance_probe(reg, ols, maps);
  CHECK(rows[0].dpi_rel > 1e-2);        // anisotropic rescale moves the OLS argmin
  CHECK(rows[1].dpi_rel <= 1e-8);       // rotations preserve least squares
}

TEST_CASE("evaluate_estimator: perfect parameters give ncc 1 and zero error") {
  Mechanism mech((TwoLinkArm()));
  std::vector<Dataset> tests;
  for (uint64_t s : {101, 102}) {
    tests.push_back(simulate_inverse(mech, default_excitation(mech, s, 4.0, 15.0)));
  }
  Dataset train = simulate_inverse(mech, default_excitation(mech, 100, 4.0, 15.0));
  Regression reg = Regression::build(mech, train);
  auto rep = evaluate_estimator(mech, "ols", mech.ground_truth(), tests, 1.0 / 0.37,
                                mech.ground_truth(), reg.stacked());
  CHECK(rep.estimator == "ols");
  REQUIRE(int(rep.coordinates.size()) == 2);
  for (const auto& c : rep.coordinates) {
    CHECK(c.ncc_mean == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(c.ncc_std <= 1e-9);
    CHECK(c.rmse_mean <= 1e-9);
    REQUIRE(c.ncc_per_traj.size() == 2);
    for (int k : c.shift_per_traj) CHECK(k == 0);
  }
  CHECK(rep.param_err_raw == doctest::Approx(0.0));
  CHECK(rep.param_err_projected == doctest::Approx(0.0));
  CHECK(rep.excluded_samples == 0);
}

TEST_CASE("evaluate_estimator: projected error ignores the arm's blind direction") {
  Mechanism mech((TwoLinkArm()));
  Dataset train = simulate_inverse(mech, default_excitation(mech, 200, 4.0, 15.0));
  std::vector<Dataset> tests{simulate_inverse(mech, default_excitation(mech, 201, 4.0, 15.0))};
  Regression reg = Regression::build(mech, train);
  Vec pi = mech.ground_truth().values;
  pi(0) += 5.0;  // move along the unidentifiable m1 direction
  auto rep = evaluate_estimator(mech, "x", DynamicParams(pi, mech.layout()), tests,
                                1.0 / 0.37, mech.ground_truth(), reg.stacked());
  CHECK(rep.param_err_raw >= 5.0 - 1e-9);
  CHECK(rep.param_err_projected <= 1e-9);
}

TEST_CASE("forward prediction composed with inverse dynamics is the identity") {
  Mechanism mech((DragCrawler3()));
  Dataset ds = simulate_inverse(mech, default_excitation(mech, 301, 3.0, 12.0));
  Vec pi = mech.ground_truth().values * 0.9;
  DynamicParams params(pi, mech.layout());
  // forces generated with pi and predicted back with the same pi
  Dataset forced = ds;
  for (auto& s : forced.samples) s.tau = mech.regressor(s) * pi;
  auto pred = predict_forward(mech, params, forced);
  REQUIRE(pred.excluded.empty());
  for (size_t i = 0; i < forced.size(); ++i)
    CHECK((pred.predicted.row(i).transpose() - forced.samples[i].qd).lpNorm<Eigen::Infinity>() <=
          1e-8);
}

TEST_CASE("projected parameter error decreases as estimates approach the truth") {
  Mechanism mech((PanTilt()));
  Dataset train = simulate_inverse(mech, default_excitation(mech, 400, 3.0, 15.0));
  std::vector<Dataset> tests{simulate_inverse(mech, default_excitation(mech, 401, 3.0, 15.0))};
  Regression reg = Regression::build(mech, train);
  double prev = std::numeric_limits<double>::infinity();
  for (double off : {0.3, 0.1, 0.01, 0.0}) {
    Vec pi = mech.ground_truth().values.array() + off;
    auto rep = evaluate_estimator(mech, "x", DynamicParams(pi, mech.layout()), tests,
                                  1.0 / 0.37, mech.ground_truth(), reg.stacked());
    CHECK(rep.param_err_projected <= prev + 1e-12);
    prev = rep.param_err_projected;
  }
}
