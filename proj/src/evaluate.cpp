#include "dmid/evaluate.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <numeric>

namespace dmid {

namespace {

// Pearson correlation of pred(i - k) against meas(i) on the overlap.
double shifted_ncc(const Vec& pred, const Vec& meas, int k, bool& degenerate) {
  const int len = static_cast<int>(pred.size());
  const int lo = std::max(0, k);
  const int hi = len - 1 + std::min(0, k);
  const int cnt = hi - lo + 1;
  Vec a(cnt), b(cnt);
  for (int i = lo; i <= hi; ++i) {
    a(i - lo) = pred(i - k);
    b(i - lo) = meas(i);
  }
  a.array() -= a.mean();
  b.array() -= b.mean();
  const double na = a.norm(), nb = b.norm();
  if (na == 0 || nb == 0) {
    degenerate = true;
    return 0;
  }
  return a.dot(b) / (na * nb);
}

}  // namespace

NccResult ncc_max_shift(const Vec& pred, const Vec& meas, double slowest_period, double rate) {
  if (pred.size() != meas.size()) throw std::invalid_argument("ncc_max_shift: length mismatch");
  const int len = static_cast<int>(pred.size());
  const int window = static_cast<int>(std::lround((5.0 / 360.0) * slowest_period * rate));
  if (window >= len) throw std::invalid_argument("ncc_max_shift: shift window exceeds signal length");

  NccResult best;
  bool first = true;
  for (int k = -window; k <= window; ++k) {
    bool degen = false;
    const double v = shifted_ncc(pred, meas, k, degen);
    if (degen) {
      best.degenerate = true;
      continue;
    }
    if (first || v > best.ncc + 1e-15 ||
        (std::abs(v - best.ncc) <= 1e-15 && std::abs(k) < std::abs(best.shift))) {
      best.ncc = v;
      best.shift = k;
      first = false;
    }
  }
  if (first) {  // every shift degenerate
    best.ncc = 0;
    best.shift = 0;
    best.degenerate = true;
  }
  return best;
}

Mat identifiable_projection(const Mat& stacked) {
  Eigen::JacobiSVD<Mat> svd(stacked, Eigen::ComputeThinV);
  const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0;
  const int d = static_cast<int>(stacked.cols());
  Mat P = Mat::Zero(d, d);
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-10 * smax)
      P += svd.matrixV().col(i) * svd.matrixV().col(i).transpose();
  return P;
}

Prediction predict_forward(const Mechanism& mech, const DynamicParams& pi_hat,
                           const Dataset& data) {
  data.validate();
  if (!(pi_hat.layout == mech.layout()))
    throw std::invalid_argument("predict_forward: layout mismatch");
  const bool inertia = mech.model_class() == ModelClass::InertiaDominated;
  const int n = mech.dof();

  std::vector<Vec> rows_pred, rows_meas;
  Prediction out;
  for (size_t i = 0; i < data.size(); ++i) {
    const Sample& s = data.samples[i];
    const Mat M = mech.affine_metric(s.q).assemble(pi_hat.values);
    if (!metric_is_pd(M)) {
      out.excluded.push_back(i);
      continue;
    }
    Eigen::LLT<Mat> llt(M);
    if (inertia) {
      Sample s0 = s;
      s0.qdd = Vec::Zero(n);
      const Vec bias = mech.regressor(s0) * pi_hat.values;  // C qd + g
      rows_pred.push_back(llt.solve(s.tau - bias));
      rows_meas.push_back(s.qdd);
    } else {
      rows_pred.push_back(llt.solve(s.tau));
      rows_meas.push_back(s.qd);
    }
  }
  out.predicted.resize(rows_pred.size(), n);
  out.measured.resize(rows_pred.size(), n);
  for (size_t i = 0; i < rows_pred.size(); ++i) {
    out.predicted.row(i) = rows_pred[i].transpose();
    out.measured.row(i) = rows_meas[i].transpose();
  }
  return out;
}

std::vector<InvarianceRow> invariance_probe(const Regression& reg, const EstimatorSpec& spec,
                                            const std::vector<Mat>& D_list) {
  auto base = fit(reg, spec);
  std::vector<InvarianceRow> rows;
  rows.reserve(D_list.size());
  for (const auto& D : D_list) {
    InvarianceRow row;
    row.D = D;
    auto treg = transform_regression(reg, D);
    auto r = fit(treg, spec);
    row.status = r.solver.status;
    row.dpi_rel = (r.pi_hat.values - base.pi_hat.values).norm() /
                  std::max(1e-12, base.pi_hat.values.norm());
    row.dobj_rel = std::abs(r.objective - base.objective) / std::max(1e-12, std::abs(base.objective));
    rows.push_back(std::move(row));
  }
  return rows;
}

EvalReport evaluate_estimator(const Mechanism& mech, const std::string& estimator_name,
                              const DynamicParams& pi_hat,
                              const std::vector<Dataset>& test_sets, double slowest_period,
                              const std::optional<DynamicParams>& ground_truth,
                              const Mat& train_stacked) {
  if (test_sets.empty()) throw std::invalid_argument("evaluate_estimator: empty test set");
  EvalReport rep;
  rep.estimator = estimator_name;
  const auto names = mech.coordinate_names();
  const int n = mech.dof();
  rep.coordinates.resize(n);
  for (int c = 0; c < n; ++c) rep.coordinates[c].name = names[c];

  std::vector<std::vector<double>> rmse(n);
  for (const auto& ds : test_sets) {
    auto pred = predict_forward(mech, pi_hat, ds);
    rep.excluded_samples += static_cast<int>(pred.excluded.size());
    if (pred.predicted.rows() == 0) {
      // every sample excluded (metric not PD under pi_hat anywhere on the
      // trajectory): score as fully degenerate instead of failing the run
      for (int c = 0; c < n; ++c) {
        rep.coordinates[c].ncc_per_traj.push_back(0.0);
        rep.coordinates[c].shift_per_traj.push_back(0);
        rmse[c].push_back(std::numeric_limits<double>::infinity());
      }
      continue;
    }
    const double rate = 1.0 / ds.dt;
    for (int c = 0; c < n; ++c) {
      auto r = ncc_max_shift(pred.predicted.col(c), pred.measured.col(c), slowest_period, rate);
      rep.coordinates[c].ncc_per_traj.push_back(r.ncc);
      rep.coordinates[c].shift_per_traj.push_back(r.shift);
      rmse[c].push_back(std::sqrt(
          (pred.predicted.col(c) - pred.measured.col(c)).squaredNorm() / pred.predicted.rows()));
    }
  }
  for (int c = 0; c < n; ++c) {
    auto& ce = rep.coordinates[c];
    const auto& v = ce.ncc_per_traj;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    ce.ncc_mean = mean;
    ce.ncc_std = v.size() > 1 ? std::sqrt(var / (v.size() - 1)) : 0.0;
    ce.rmse_mean = std::accumulate(rmse[c].begin(), rmse[c].end(), 0.0) / rmse[c].size();
  }
  if (ground_truth) {
    const Vec diff = pi_hat.values - ground_truth->values;
    rep.param_err_raw = diff.norm();
    rep.param_err_projected = (identifiable_projection(train_stacked) * diff).norm();
  }
  return rep;
}

}  // namespace dmid
