#include "dmid/estimators.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

namespace dmid {

namespace {

constexpr double kRidge = 1e-10;  // tie-breaking ridge; selects a bounded,
                                  // near-minimum-norm point on flat optima

int svd_rank(const Mat& A) {
  if (A.rows() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(A);
  const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0;
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-10 * smax) ++r;
  return r;
}

struct LsqResult {
  Vec pi;
  int rank = 0;
  bool deficient = false;
};

LsqResult lsq_minnorm(const Mat& A, const Vec& b) {
  LsqResult out;
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(A);
  cod.setThreshold(1e-10);
  out.pi = cod.solve(b);
  out.rank = static_cast<int>(cod.rank());
  out.deficient = out.rank < A.cols();
  return out;
}

std::vector<sdp::AffineBlock> constraint_blocks(
    const std::vector<ConsistencyConstraint>& ccs, int m) {
  std::vector<sdp::AffineBlock> blocks;
  blocks.reserve(ccs.size());
  for (const auto& cc : ccs) {
    sdp::AffineBlock b;
    b.F0 = cc.form.M0 - cc.psd_margin * Mat::Identity(cc.form.size(), cc.form.size());
    b.F.assign(m, Mat());
    for (int p = 0; p < cc.form.num_params(); ++p)
      if (cc.form.Mp[p].cwiseAbs().maxCoeff() > 0) b.F[p] = cc.form.Mp[p];
    blocks.push_back(std::move(b));
  }
  return blocks;
}

// min 0.5 x^T Q x + c^T x s.t. consistency blocks, via the epigraph SDP.
sdp::SdpSolution solve_qp(const Mat& Q, const Vec& c, const Regression& reg,
                          bool enforce) {
  const int d = reg.d;
  auto blocks = enforce ? constraint_blocks(reg.constraints, d)
                        : std::vector<sdp::AffineBlock>{};
  sdp::SdpProblem prob = sdp::qp_as_sdp(Q, c, std::move(blocks));
  sdp::SdpOptions opt;
  Vec x0(d + 1);
  x0.head(d) = reg.feasible_seed;
  x0(d) = reg.feasible_seed.dot(Q * reg.feasible_seed) + 1.0;
  opt.initial_point = x0;
  return sdp::solve(prob, opt);
}

Mat ridge_identity(int d, const Mat& Q) {
  return (kRidge * std::max(1.0, Q.cwiseAbs().maxCoeff())) * Mat::Identity(d, d);
}

EstimatorReport finish_lsq(const Regression& reg, const Mat& A, const Vec& b,
                           bool enforce, const Mat& W_for_residuals,
                           std::optional<Mat> sigma_hat) {
  EstimatorReport rep;
  rep.sigma_hat = std::move(sigma_hat);
  rep.effective_rank = svd_rank(A);
  if (!enforce) {
    auto ls = lsq_minnorm(A, b);
    rep.pi_hat = {ls.pi, reg.layout};
    rep.rank_deficient_warning = ls.deficient;
    rep.solver.status = sdp::SdpStatus::Optimal;
  } else {
    // uniform rescaling leaves the argmin unchanged; without it an aggressive
    // whitening (tiny residual covariance) inflates Q by the squared weight
    // scale and wrecks the conditioning of the epigraph SDP
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    const Mat As = A / scale;
    const Vec bs = b / scale;
    Mat Q = 2.0 * As.transpose() * As;
    Q += ridge_identity(reg.d, Q);
    Vec c = -2.0 * As.transpose() * bs;
    rep.solver = solve_qp(Q, c, reg, true);
    rep.pi_hat = {rep.solver.x.head(reg.d), reg.layout};
    rep.rank_deficient_warning = rep.effective_rank < reg.d;
  }
  rep.objective = 0;
  for (size_t i = 0; i < reg.size(); ++i) {
    Vec r = reg.Y[i] * rep.pi_hat.values - reg.tau[i];
    const double wr = r.dot(W_for_residuals * r);
    rep.per_sample_weighted_residuals.push_back(wr);
    rep.objective += wr;
  }
  return rep;
}

}  // namespace

Mat Regression::stacked() const {
  Mat A(static_cast<Eigen::Index>(size()) * n, d);
  for (size_t i = 0; i < size(); ++i) A.middleRows(static_cast<Eigen::Index>(i) * n, n) = Y[i];
  return A;
}

Vec Regression::stacked_tau() const {
  Vec b(static_cast<Eigen::Index>(size()) * n);
  for (size_t i = 0; i < size(); ++i) b.segment(static_cast<Eigen::Index>(i) * n, n) = tau[i];
  return b;
}

Regression Regression::build(const Mechanism& mech, const Dataset& data) {
  data.validate();
  Regression reg;
  reg.layout = mech.layout();
  reg.n = mech.dof();
  reg.d = reg.layout.size();
  reg.feasible_seed = mech.feasible_seed();
  reg.regularizer_blocks = mech.regularizer_blocks();
  const Vec ref = mech.reference_params();

  std::vector<Vec> probe_configs;
  for (size_t i = 0; i < data.samples.size(); ++i) {
    const Sample& s = data.samples[i];
    AffineMetric am = mech.affine_metric(s.q);
    if (!metric_is_pd(am.assemble(ref))) {
      ++reg.num_rejected_singular;
      continue;
    }
    reg.Y.push_back(mech.regressor(s));
    reg.tau.push_back(s.tau);
    reg.qd.push_back(s.qd);
    reg.metrics.push_back(std::move(am));
    reg.accepted_indices.push_back(i);
    // a handful of probe configurations is enough: the scalar coefficient
    // constraints already imply metric PSD-ness everywhere for this class
    if (mech.model_class() == ModelClass::DragDominated && probe_configs.size() < 5)
      probe_configs.push_back(s.q);
  }
  if (reg.Y.empty()) throw std::invalid_argument("Regression: no usable samples");
  reg.constraints = mech.consistency_constraints(probe_configs);
  reg.stacked_rank = svd_rank(reg.stacked());
  return reg;
}

Regression transform_regression(const Regression& reg, const Mat& D) {
  if (D.rows() != reg.n || D.cols() != reg.n)
    throw std::invalid_argument("transform_regression: D size mismatch");
  Eigen::FullPivLU<Mat> lu(D);
  if (!lu.isInvertible()) throw std::invalid_argument("transform_regression: singular D");
  const Mat Dinv = lu.inverse();
  const Mat DinvT = Dinv.transpose();

  Regression out = reg;
  for (size_t i = 0; i < reg.size(); ++i) {
    out.Y[i] = DinvT * reg.Y[i];
    out.tau[i] = DinvT * reg.tau[i];
    out.qd[i] = D * reg.qd[i];
    Mat M0 = DinvT * reg.metrics[i].M0 * Dinv;
    std::vector<Mat> Mp;
    Mp.reserve(reg.metrics[i].Mp.size());
    for (const auto& m : reg.metrics[i].Mp) Mp.push_back(0.5 * (DinvT * m * Dinv + (DinvT * m * Dinv).transpose()));
    out.metrics[i] = AffineMetric(0.5 * (M0 + M0.transpose()), std::move(Mp));
  }
  for (auto& cc : out.constraints) {
    if (!cc.chart_covariant) continue;
    Mat M0 = DinvT * cc.form.M0 * Dinv;
    std::vector<Mat> Mp;
    for (const auto& m : cc.form.Mp) {
      Mat t = DinvT * m * Dinv;
      Mp.push_back(0.5 * (t + t.transpose()));
    }
    cc.form = AffineMatrix(0.5 * (M0 + M0.transpose()), std::move(Mp));
  }
  out.stacked_rank = svd_rank(out.stacked());
  return out;
}

const char* to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::OLS: return "ols";
    case EstimatorKind::WLS: return "wls";
    case EstimatorKind::EnergyLS: return "energy";
    case EstimatorKind::DualMetric: return "dual_metric";
    case EstimatorKind::RegBregman: return "reg_bregman";
    default: return "reg_pullback";
  }
}

EstimatorKind estimator_kind_from_string(const std::string& s) {
  if (s == "ols") return EstimatorKind::OLS;
  if (s == "wls") return EstimatorKind::WLS;
  if (s == "energy") return EstimatorKind::EnergyLS;
  if (s == "dual_metric" || s == "dm") return EstimatorKind::DualMetric;
  if (s == "reg_bregman") return EstimatorKind::RegBregman;
  if (s == "reg_pullback") return EstimatorKind::RegPullback;
  throw std::invalid_argument("unknown estimator: " + s);
}

EstimatorReport fit_ols(const Regression& reg, bool enforce) {
  return finish_lsq(reg, reg.stacked(), reg.stacked_tau(), enforce,
                    Mat::Identity(reg.n, reg.n), std::nullopt);
}

EstimatorReport fit_wls(const Regression& reg, const std::optional<Mat>& weight,
                        bool enforce) {
  Mat W;
  std::optional<Mat> sigma;
  if (weight) {
    W = symmetrized(*weight);
    require_pd(W);
  } else {
    // auto policy: W = Sigma^-1 with Sigma the OLS residual covariance
    auto ols = fit_ols(reg, false);
    Mat S = Mat::Zero(reg.n, reg.n);
    for (size_t i = 0; i < reg.size(); ++i) {
      Vec r = reg.Y[i] * ols.pi_hat.values - reg.tau[i];
      S += r * r.transpose();
    }
    S /= static_cast<double>(reg.size());
    S += (1e-10 * S.trace() / reg.n) * Mat::Identity(reg.n, reg.n);
    require_pd(S);
    sigma = S;
    W = Eigen::LLT<Mat>(S).solve(Mat::Identity(reg.n, reg.n));
    W = symmetrized(W);
  }
  const Mat Ws = metric_sqrt(W);
  Mat A(static_cast<Eigen::Index>(reg.size()) * reg.n, reg.d);
  Vec b(static_cast<Eigen::Index>(reg.size()) * reg.n);
  for (size_t i = 0; i < reg.size(); ++i) {
    A.middleRows(static_cast<Eigen::Index>(i) * reg.n, reg.n) = Ws * reg.Y[i];
    b.segment(static_cast<Eigen::Index>(i) * reg.n, reg.n) = Ws * reg.tau[i];
  }
  return finish_lsq(reg, A, b, enforce, W, std::move(sigma));
}

EstimatorReport fit_energy(const Regression& reg, bool enforce) {
  Mat A(static_cast<Eigen::Index>(reg.size()), reg.d);
  Vec b(static_cast<Eigen::Index>(reg.size()));
  double vel = 0;
  for (size_t i = 0; i < reg.size(); ++i) {
    A.row(static_cast<Eigen::Index>(i)) = reg.qd[i].transpose() * reg.Y[i];
    b(static_cast<Eigen::Index>(i)) = reg.qd[i].dot(reg.tau[i]);
    vel = std::max(vel, reg.qd[i].cwiseAbs().maxCoeff());
  }
  EstimatorReport rep;
  rep.effective_rank = svd_rank(A);
  if (vel == 0) {
    rep.pi_hat = {Vec::Zero(reg.d), reg.layout};
    rep.non_identifying = true;
    rep.rank_deficient_warning = true;
    rep.solver.status = sdp::SdpStatus::Optimal;
    rep.per_sample_weighted_residuals.assign(reg.size(), 0.0);
    return rep;
  }
  if (!enforce) {
    auto ls = lsq_minnorm(A, b);
    rep.pi_hat = {ls.pi, reg.layout};
    rep.rank_deficient_warning = ls.deficient;
    rep.solver.status = sdp::SdpStatus::Optimal;
  } else {
    // uniform rescaling leaves the argmin unchanged; without it an aggressive
    // whitening (tiny residual covariance) inflates Q by the squared weight
    // scale and wrecks the conditioning of the epigraph SDP
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    const Mat As = A / scale;
    const Vec bs = b / scale;
    Mat Q = 2.0 * As.transpose() * As;
    Q += ridge_identity(reg.d, Q);
    Vec c = -2.0 * As.transpose() * bs;
    rep.solver = solve_qp(Q, c, reg, true);
    rep.pi_hat = {rep.solver.x.head(reg.d), reg.layout};
    rep.rank_deficient_warning = rep.effective_rank < reg.d;
  }
  rep.objective = 0;
  for (size_t i = 0; i < reg.size(); ++i) {
    const double e = reg.qd[i].dot(reg.Y[i] * rep.pi_hat.values - reg.tau[i]);
    rep.per_sample_weighted_residuals.push_back(e * e);
    rep.objective += e * e;
  }
  return rep;
}

EstimatorReport fit_dual_metric(const Regression& reg, bool enforce) {
  const int d = reg.d, n = reg.n;
  const int N = static_cast<int>(reg.size());
  const int m = d + N + 1;  // pi, slacks, ridge epigraph u

  sdp::SdpProblem prob;
  prob.m = m;
  prob.c = Vec::Zero(m);
  prob.c.segment(d, N).setOnes();
  prob.c(m - 1) = kRidge;

  // one (n+1)x(n+1) Schur block per sample: [[M_i(pi), Y_i pi - tau_i], [., s_i]]
  for (int i = 0; i < N; ++i) {
    sdp::AffineBlock blk;
    blk.F0 = Mat::Zero(n + 1, n + 1);
    blk.F0.topLeftCorner(n, n) = reg.metrics[i].M0;
    blk.F0.block(0, n, n, 1) = -reg.tau[i];
    blk.F0.block(n, 0, 1, n) = -reg.tau[i].transpose();
    blk.F.assign(m, Mat());
    for (int p = 0; p < d; ++p) {
      Mat Fp = Mat::Zero(n + 1, n + 1);
      Fp.topLeftCorner(n, n) = reg.metrics[i].Mp[p];
      Fp.block(0, n, n, 1) = reg.Y[i].col(p);
      Fp.block(n, 0, 1, n) = reg.Y[i].col(p).transpose();
      if (Fp.cwiseAbs().maxCoeff() > 0) blk.F[p] = Fp;
    }
    Mat Fs = Mat::Zero(n + 1, n + 1);
    Fs(n, n) = 1.0;
    blk.F[d + i] = Fs;
    prob.blocks.push_back(std::move(blk));
  }
  if (enforce) {
    for (auto& b : constraint_blocks(reg.constraints, d)) {
      b.F.resize(m);
      prob.blocks.push_back(std::move(b));
    }
  }
  // ridge epigraph [[I, pi], [pi^T, u]] keeps the central path bounded along
  // regression nullspace directions.
  {
    sdp::AffineBlock epi;
    epi.F0 = Mat::Zero(d + 1, d + 1);
    epi.F0.topLeftCorner(d, d).setIdentity();
    epi.F.assign(m, Mat());
    for (int p = 0; p < d; ++p) {
      Mat Fp = Mat::Zero(d + 1, d + 1);
      Fp(p, d) = Fp(d, p) = 1.0;
      epi.F[p] = Fp;
    }
    Mat Fu = Mat::Zero(d + 1, d + 1);
    Fu(d, d) = 1.0;
    epi.F[m - 1] = Fu;
    prob.blocks.push_back(std::move(epi));
  }

  sdp::SdpOptions opt;
  Vec x0(m);
  x0.head(d) = reg.feasible_seed;
  for (int i = 0; i < N; ++i) {
    const Mat M = reg.metrics[i].assemble(reg.feasible_seed);
    const Vec r = reg.Y[i] * reg.feasible_seed - reg.tau[i];
    x0(d + i) = dual_norm_sq(M, r) + 1.0;
  }
  x0(m - 1) = reg.feasible_seed.squaredNorm() + 1.0;
  opt.initial_point = x0;

  EstimatorReport rep;
  rep.solver = sdp::solve(prob, opt);
  rep.pi_hat = {rep.solver.x.head(d), reg.layout};
  rep.effective_rank = reg.stacked_rank;
  rep.rank_deficient_warning = reg.stacked_rank < d;
  rep.objective = rep.solver.x.segment(d, N).sum();
  for (int i = 0; i < N; ++i)
    rep.per_sample_weighted_residuals.push_back(rep.solver.x(d + i));
  return rep;
}

namespace {

// Bregman divergence sum over regularizer blocks, minus its affine part split
// out for the SDP objective: g(pi) = sum_b [tr(P_b P0b^-1) - logdet(P_b P0b^-1) - k_b].
double bregman_value(const std::vector<AffineMatrix>& blocks, const Vec& pi, const Vec& pi0) {
  double v = 0;
  for (const auto& b : blocks) {
    const Mat P = b.assemble(pi);
    const Mat P0 = b.assemble(pi0);
    Eigen::LLT<Mat> llt0(P0);
    const Mat X = llt0.solve(P);  // P0^-1 P
    Eigen::PartialPivLU<Mat> lu(X);
    double logdet = std::log(std::abs(lu.determinant()));
    v += X.trace() - logdet - b.size();
  }
  return v;
}

Mat pullback_hessian(const std::vector<AffineMatrix>& blocks, const Vec& pi0) {
  const int d = static_cast<int>(pi0.size());
  auto dist2 = [&](const Vec& pi) {
    double v = 0;
    for (const auto& b : blocks) {
      const Mat P0s = metric_sqrt(b.assemble(pi0));
      Eigen::LLT<Mat> llt(P0s);
      Mat w = llt.solve(b.assemble(pi));
      Mat W = llt.solve(w.transpose()).transpose();  // P0^-1/2 P P0^-1/2
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (W + W.transpose()), Eigen::EigenvaluesOnly);
      for (int i = 0; i < es.eigenvalues().size(); ++i)
        v += std::pow(std::log(es.eigenvalues()(i)), 2);
    }
    return v;
  };
  const double h = 1e-5 * (1.0 + pi0.cwiseAbs().maxCoeff());
  Mat H(d, d);
  for (int p = 0; p < d; ++p)
    for (int q = p; q < d; ++q) {
      Vec ep = Vec::Zero(d), eq = Vec::Zero(d);
      ep(p) = h;
      eq(q) = h;
      const double f = (dist2(pi0 + ep + eq) - dist2(pi0 + ep - eq) -
                        dist2(pi0 - ep + eq) + dist2(pi0 - ep - eq)) /
                       (4.0 * h * h);
      H(p, q) = H(q, p) = 0.5 * f;  // Hessian of d^2 is twice the pullback metric
    }
  // clip tiny negative curvature from the finite differences
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  Vec ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct WlsStack {
  Mat A;
  Vec b;
  Mat W;
  std::optional<Mat> sigma;
};

WlsStack auto_wls_stack(const Regression& reg) {
  WlsStack st;
  if (reg.size() == 0) {
    st.A = Mat::Zero(0, reg.d);
    st.b = Vec::Zero(0);
    st.W = Mat::Identity(reg.n, reg.n);
    return st;
  }
  auto ols = fit_ols(reg, false);
  Mat S = Mat::Zero(reg.n, reg.n);
  for (size_t i = 0; i < reg.size(); ++i) {
    Vec r = reg.Y[i] * ols.pi_hat.values - reg.tau[i];
    S += r * r.transpose();
  }
  S /= static_cast<double>(reg.size());
  S += (1e-10 * std::max(S.trace(), 1e-30) / reg.n) * Mat::Identity(reg.n, reg.n);
  st.sigma = S;
  st.W = symmetrized(Eigen::LLT<Mat>(S).solve(Mat::Identity(reg.n, reg.n)));
  const Mat Ws = metric_sqrt(st.W);
  st.A.resize(static_cast<Eigen::Index>(reg.size()) * reg.n, reg.d);
  st.b.resize(static_cast<Eigen::Index>(reg.size()) * reg.n);
  for (size_t i = 0; i < reg.size(); ++i) {
    st.A.middleRows(static_cast<Eigen::Index>(i) * reg.n, reg.n) = Ws * reg.Y[i];
    st.b.segment(static_cast<Eigen::Index>(i) * reg.n, reg.n) = Ws * reg.tau[i];
  }
  return st;
}

}  // namespace

EstimatorReport fit_regularized(const Regression& reg, EstimatorKind kind, double rho,
                                const DynamicParams& nominal, bool enforce) {
  if (kind != EstimatorKind::RegBregman && kind != EstimatorKind::RegPullback)
    throw std::invalid_argument("fit_regularized: not a regularized kind");
  if (rho <= 0) throw std::invalid_argument("fit_regularized: rho must be positive");
  if (!(nominal.layout == reg.layout))
    throw std::invalid_argument("fit_regularized: nominal layout mismatch");
  const Vec& pi0 = nominal.values;
  for (const auto& b : reg.regularizer_blocks) {
    Eigen::SelfAdjointEigenSolver<Mat> es(b.assemble(pi0), Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0))
      throw std::invalid_argument("fit_regularized: nominal not strictly consistency-feasible");
  }

  WlsStack st = auto_wls_stack(reg);
  const int d = reg.d;
  EstimatorReport rep;
  rep.sigma_hat = st.sigma;
  rep.effective_rank = svd_rank(st.A);

  if (kind == EstimatorKind::RegPullback) {
    const Mat H = pullback_hessian(reg.regularizer_blocks, pi0);
    Mat Q = 2.0 * st.A.transpose() * st.A + 2.0 * rho * H;
    Q += ridge_identity(d, Q);
    Vec c = -2.0 * st.A.transpose() * st.b - 2.0 * rho * (H * pi0);
    rep.solver = solve_qp(Q, c, reg, enforce);
    rep.pi_hat = {rep.solver.x.head(d), reg.layout};
    rep.objective = (st.A * rep.pi_hat.values - st.b).squaredNorm() +
                    rho * (rep.pi_hat.values - pi0).dot(H * (rep.pi_hat.values - pi0));
  } else {
    // Bregman: quadratic data part via epigraph, affine trace part in the
    // linear objective, exact -logdet handled by the solver.
    Mat Q = 2.0 * st.A.transpose() * st.A;
    Q += ridge_identity(d, Q);
    Vec c = -2.0 * st.A.transpose() * st.b;
    double constant = 0;
    for (const auto& b : reg.regularizer_blocks) {
      const Mat P0 = b.assemble(pi0);
      const Mat P0inv = Eigen::LLT<Mat>(P0).solve(Mat::Identity(b.size(), b.size()));
      for (int p = 0; p < d; ++p) c(p) += rho * (P0inv.cwiseProduct(b.Mp[p])).sum();
      constant += rho * ((P0inv.cwiseProduct(b.M0)).sum() +
                         std::log(Eigen::LLT<Mat>(P0).matrixL().determinant()) * 2.0 -
                         b.size());
    }
    auto blocks = enforce ? constraint_blocks(reg.constraints, d)
                          : std::vector<sdp::AffineBlock>{};
    sdp::SdpProblem prob = sdp::qp_as_sdp(Q, c, std::move(blocks));
    prob.constant_term = constant;
    for (const auto& b : reg.regularizer_blocks) {
      sdp::LogDetTerm term;
      term.weight = rho;
      term.block.F0 = b.M0;
      term.block.F.assign(prob.m, Mat());
      for (int p = 0; p < d; ++p)
        if (b.Mp[p].cwiseAbs().maxCoeff() > 0) term.block.F[p] = b.Mp[p];
      prob.logdet_terms.push_back(std::move(term));
    }
    sdp::SdpOptions opt;
    Vec x0(d + 1);
    x0.head(d) = reg.feasible_seed;
    x0(d) = reg.feasible_seed.dot(Q * reg.feasible_seed) + 1.0;
    opt.initial_point = x0;
    rep.solver = sdp::solve(prob, opt);
    rep.pi_hat = {rep.solver.x.head(d), reg.layout};
    rep.objective = (st.A * rep.pi_hat.values - st.b).squaredNorm() +
                    rho * bregman_value(reg.regularizer_blocks, rep.pi_hat.values, pi0);
  }
  for (size_t i = 0; i < reg.size(); ++i) {
    Vec r = reg.Y[i] * rep.pi_hat.values - reg.tau[i];
    rep.per_sample_weighted_residuals.push_back(r.dot(st.W * r));
  }
  return rep;
}

double default_rho(const Regression& reg, EstimatorKind kind, const DynamicParams& nominal) {
  auto ols = fit_ols(reg, false);
  double g = 0;
  if (kind == EstimatorKind::RegBregman) {
    g = bregman_value(reg.regularizer_blocks, ols.pi_hat.values, nominal.values);
  } else {
    const Mat H = pullback_hessian(reg.regularizer_blocks, nominal.values);
    const Vec dpi = ols.pi_hat.values - nominal.values;
    g = dpi.dot(H * dpi);
  }
  // |g| guards against an OLS point outside the feasible cone, where the
  // Bregman value loses meaning; the floor keeps noiseless data (zero OLS
  // objective) from collapsing rho to zero
  if (!std::isfinite(g)) g = 0;
  return std::max(1e-8, 1e-2 * ols.objective / (std::abs(g) + 1e-12));
}

EstimatorReport fit(const Regression& reg, const EstimatorSpec& spec) {
  switch (spec.kind) {
    case EstimatorKind::OLS:
      return fit_ols(reg, spec.enforce_consistency);
    case EstimatorKind::WLS:
      return fit_wls(reg, spec.weight, spec.enforce_consistency);
    case EstimatorKind::EnergyLS:
      return fit_energy(reg, spec.enforce_consistency);
    case EstimatorKind::DualMetric:
      return fit_dual_metric(reg, spec.enforce_consistency);
    default: {
      if (!spec.nominal) throw std::invalid_argument("fit: regularized kind requires nominal");
      const double rho =
          spec.rho > 0 ? spec.rho : default_rho(reg, spec.kind, *spec.nominal);
      return fit_regularized(reg, spec.kind, rho, *spec.nominal, spec.enforce_consistency);
    }
  }
}

}  // namespace dmid
