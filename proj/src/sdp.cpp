#include "dmid/sdp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

namespace dmid::sdp {

void SdpProblem::validate() const {
  if (m <= 0) throw std::invalid_argument("SdpProblem: no variables");
  if (c.size() != m) throw std::invalid_argument("SdpProblem: objective length mismatch");
  if (blocks.empty() && logdet_terms.empty())
    throw std::invalid_argument("SdpProblem: at least one block required");
  auto check_block = [this](const AffineBlock& b) {
    if (static_cast<int>(b.F.size()) != m)
      throw std::invalid_argument("SdpProblem: block coefficient count mismatch");
    const int k = b.size();
    if (b.F0.cols() != k) throw std::invalid_argument("SdpProblem: block not square");
    for (const auto& Fj : b.F)
      if (Fj.size() > 0 && (Fj.rows() != k || Fj.cols() != k))
        throw std::invalid_argument("SdpProblem: block coefficient size mismatch");
  };
  for (const auto& b : blocks) check_block(b);
  for (const auto& t : logdet_terms) {
    check_block(t.block);
    if (t.weight <= 0) throw std::invalid_argument("SdpProblem: nonpositive logdet weight");
  }
  if (has_equalities() && (A.cols() != m || b.size() != A.rows()))
    throw std::invalid_argument("SdpProblem: equality dimensions mismatch");
}

namespace {

// One barrier unit: a constraint block (weight 1, counts toward the gap) or a
// logdet objective block (weight t*rho, exact objective term).
struct Unit {
  const AffineBlock* blk;
  double rho;          // 0 for constraint blocks
  bool is_objective;
  std::vector<int> active;
};

struct Eval {
  double logdet = 0;
  bool interior = false;
};

class Barrier {
 public:
  Barrier(int m, std::vector<Unit> units, Vec c)
      : m_(m), units_(std::move(units)), c_(std::move(c)) {
    K_ = 0;
    for (const auto& u : units_)
      if (!u.is_objective) K_ += u.blk->size();
    use_sparse_ = m_ > 200;
  }

  int barrier_dim() const { return K_; }

  // objective including logdet terms
  double objective(const Vec& x) const {
    double v = c_.dot(x);
    for (const auto& u : units_) {
      if (!u.is_objective) continue;
      Eigen::LLT<Mat> llt(u.blk->eval(x));
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      v -= u.rho * 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
    }
    return v;
  }

  bool strictly_feasible(const Vec& x, double margin = 0) const {
    for (const auto& u : units_) {
      Eigen::SelfAdjointEigenSolver<Mat> es(u.blk->eval(x), Eigen::EigenvaluesOnly);
      if (!(es.eigenvalues().minCoeff() > margin)) return false;
    }
    return true;
  }

  // cheap interior test via Cholesky, used inside the step safeguard
  bool in_domain(const Vec& x) const {
    for (const auto& u : units_) {
      Eigen::LLT<Mat> llt(u.blk->eval(x));
      if (llt.info() != Eigen::Success) return false;
    }
    return true;
  }

  struct RunResult {
    SdpStatus status = SdpStatus::NumericalFailure;
    Vec x;
    int iterations = 0;
    double t_final = 1;
    double dual_residual = 0;
    double final_decrement2 = 0;
    bool early_stopped = false;
  };

  // Damped-Newton path following. The damped step 1/(1+lambda) stays inside
  // the domain of a self-concordant barrier without a merit-function line
  // search, which avoids cancellation in the merit value at large t.
  RunResult run(Vec x, const SdpOptions& opt,
                const std::function<bool(const Vec&)>& stop = {}) const {
    RunResult res;
    res.x = x;
    double t = opt.t_init;
    int iter = 0;
    Vec g(m_);
    double lambda2 = std::numeric_limits<double>::infinity();
    while (true) {
      // center at t
      bool centered = false;
      double prev_lambda2 = std::numeric_limits<double>::infinity();
      int stalled = 0;
      for (int inner = 0; inner < 200; ++inner) {
        if (iter >= opt.max_iters) break;
        Vec step;
        if (!newton_step(x, t, g, step, lambda2)) {
          if (lambda2 / 2 < 1e-5) {
            // the previous decrement already certified near-centering; accept
            // the point rather than aborting on a factorization hiccup
            centered = true;
            break;
          }
          res.status = SdpStatus::NumericalFailure;
          res.x = x;
          res.iterations = iter;
          res.t_final = t;
          res.final_decrement2 = lambda2;
          return res;
        }
        if (lambda2 / 2 < 1e-12) {
          centered = true;
          break;
        }
        // rounding floor: the decrement is tiny and no longer shrinking
        if (lambda2 / 2 < 1e-7 && lambda2 > 0.5 * prev_lambda2) {
          if (++stalled >= 2) {
            centered = true;
            break;
          }
        } else {
          stalled = 0;
        }
        prev_lambda2 = lambda2;

        const double lambda = std::sqrt(lambda2);
        double alpha = lambda > 0.25 ? 1.0 / (1.0 + lambda) : 1.0;
        Vec xn = x + alpha * step;
        int backtracks = 0;
        while (!in_domain(xn) && backtracks < 60) {
          alpha *= 0.5;
          xn = x + alpha * step;
          ++backtracks;
        }
        if (backtracks >= 60) {
          if (lambda2 / 2 < 1e-5) {
            centered = true;
            break;
          }
          res.status = SdpStatus::NumericalFailure;
          res.x = x;
          res.iterations = iter;
          res.t_final = t;
          res.final_decrement2 = lambda2;
          return res;
        }
        x = xn;
        ++iter;
        if (stop && stop(x)) {
          res.status = SdpStatus::Optimal;
          res.x = x;
          res.iterations = iter;
          res.t_final = t;
          res.early_stopped = true;
          return res;
        }
      }
      if (!centered && iter >= opt.max_iters) {
        res.status = SdpStatus::MaxIters;
        res.x = x;
        res.iterations = iter;
        res.t_final = t;
        res.final_decrement2 = lambda2;
        res.dual_residual = dual_residual(x, t);
        return res;
      }
      const double lambda = std::sqrt(std::max(0.0, lambda2));
      const double gap =
          (K_ + std::sqrt(double(K_)) * std::min(lambda, 1.0)) / t;
      const double rel = gap / std::max(1.0, std::abs(objective(x)));
      if (rel <= opt.tol_gap || K_ == 0) {
        res.status = SdpStatus::Optimal;
        res.x = x;
        res.iterations = iter;
        res.t_final = t;
        res.final_decrement2 = lambda2;
        res.dual_residual = dual_residual(x, t);
        return res;
      }
      t *= opt.t_mult;
    }
  }

  // inf-norm of grad(c x + logdet terms) - sum_b <S_b^{-1}, F_bj>, i.e. the
  // stationarity residual with multipliers Z_b = S_b^{-1}/t.
  double dual_residual(const Vec& x, double t) const {
    Vec g = Vec::Zero(m_);
    accumulate_gradient(x, t, g);
    return g.cwiseAbs().maxCoeff() / t;
  }

 private:
  // g = t c - sum_units w_u <S^{-1}, F_j>
  void accumulate_gradient(const Vec& x, double t, Vec& g) const {
    g = t * c_;
    for (const auto& u : units_) {
      const double w = u.is_objective ? t * u.rho : 1.0;
      Eigen::LLT<Mat> llt(u.blk->eval(x));
      if (llt.info() != Eigen::Success) {
        g.array() = std::numeric_limits<double>::quiet_NaN();
        return;
      }
      Mat Sinv = llt.solve(Mat::Identity(u.blk->size(), u.blk->size()));
      for (int j : u.active) g(j) -= w * (Sinv.cwiseProduct(u.blk->F[j])).sum();
    }
  }

  bool newton_step(const Vec& x, double t, Vec& g, Vec& step, double& lambda2) const {
    g = t * c_;
    const bool sparse = use_sparse_;
    Mat Hd;
    std::vector<Eigen::Triplet<double>> trips;
    if (!sparse) Hd = Mat::Zero(m_, m_);

    for (const auto& u : units_) {
      const double w = u.is_objective ? t * u.rho : 1.0;
      const int k = u.blk->size();
      Eigen::LLT<Mat> llt(u.blk->eval(x));
      if (llt.info() != Eigen::Success) return false;
      Mat L = llt.matrixL();
      const int na = static_cast<int>(u.active.size());
      std::vector<Mat> W(na);
      for (int a = 0; a < na; ++a) {
        // W = L^{-1} F L^{-T}, symmetric
        Mat tmp = L.triangularView<Eigen::Lower>().solve(u.blk->F[u.active[a]]);
        W[a] = L.triangularView<Eigen::Lower>().solve(tmp.transpose());
      }
      for (int a = 0; a < na; ++a) {
        g(u.active[a]) -= w * W[a].trace();
        for (int b = a; b < na; ++b) {
          const double h = w * (W[a].cwiseProduct(W[b])).sum();
          if (sparse) {
            trips.emplace_back(u.active[a], u.active[b], h);
            if (a != b) trips.emplace_back(u.active[b], u.active[a], h);
          } else {
            Hd(u.active[a], u.active[b]) += h;
            if (a != b) Hd(u.active[b], u.active[a]) += h;
          }
        }
      }
      (void)k;
    }

    if (sparse) {
      Eigen::SparseMatrix<double> H(m_, m_);
      H.setFromTriplets(trips.begin(), trips.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(H);
      if (ldlt.info() == Eigen::Success) step = ldlt.solve(-g);
      if (ldlt.info() != Eigen::Success || !step.allFinite()) {
        // near-singular Hessian (e.g. directions held only by a tiny ridge):
        // retry with growing diagonal jitter; the damped step only needs a
        // descent direction, not the exact Newton solve
        double hmax = 0;
        for (const auto& tr : trips)
          if (tr.row() == tr.col()) hmax = std::max(hmax, std::abs(tr.value()));
        bool ok = false;
        for (double eps : {1e-12, 1e-8, 1e-4}) {
          Eigen::SparseMatrix<double> Hj = H;
          for (int i = 0; i < m_; ++i) Hj.coeffRef(i, i) += eps * std::max(1.0, hmax);
          Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldltj(Hj);
          if (ldltj.info() != Eigen::Success) continue;
          step = ldltj.solve(-g);
          if (step.allFinite()) {
            ok = true;
            break;
          }
        }
        if (!ok) return false;
      }
    } else {
      Eigen::LDLT<Mat> ldlt(Hd);
      if (ldlt.info() == Eigen::Success) step = ldlt.solve(-g);
      if (ldlt.info() != Eigen::Success || !step.allFinite()) {
        // the factorization broke down on a numerically flat direction (e.g.
        // one held only by a tiny ridge): fall back to an eigendecomposition
        // and exclude those directions from the step instead of letting them
        // produce a huge drift
        Eigen::SelfAdjointEigenSolver<Mat> es(Hd);
        if (es.info() != Eigen::Success) return false;
        const Vec ev = es.eigenvalues();
        const double emax = ev.cwiseAbs().maxCoeff();
        if (!(emax > 0) || !std::isfinite(emax)) return false;
        const Vec proj = es.eigenvectors().transpose() * (-g);
        Vec y = Vec::Zero(m_);
        for (int i = 0; i < m_; ++i)
          if (ev(i) > 1e-16 * emax) y(i) = proj(i) / ev(i);
        step = es.eigenvectors() * y;
      }
    }
    if (!step.allFinite()) return false;
    lambda2 = -g.dot(step);
    if (lambda2 < 0) lambda2 = 0;
    return true;
  }

  int m_;
  std::vector<Unit> units_;
  Vec c_;
  int K_ = 0;
  bool use_sparse_ = false;
};

std::vector<int> active_vars(const AffineBlock& b) {
  std::vector<int> act;
  for (int j = 0; j < static_cast<int>(b.F.size()); ++j)
    if (b.F[j].size() > 0 && b.F[j].cwiseAbs().maxCoeff() > 0) act.push_back(j);
  return act;
}

std::vector<Unit> make_units(const std::vector<AffineBlock>& blocks,
                             const std::vector<LogDetTerm>& logdets) {
  std::vector<Unit> units;
  units.reserve(blocks.size() + logdets.size());
  for (const auto& b : blocks) units.push_back({&b, 0, false, active_vars(b)});
  for (const auto& t : logdets) units.push_back({&t.block, t.weight, true, active_vars(t.block)});
  return units;
}

// Phase I: min w s.t. S_b(x) + w I >= 0 for every block (logdet objective
// blocks included: they must end up strictly PD too), w capped above and x
// boxed so the phase-I central path exists. Stops as soon as w goes
// sufficiently negative.
struct Phase1Result {
  bool found = false;
  bool infeasible = false;
  Vec x;
  int iterations = 0;
};

Phase1Result phase1(int m, const std::vector<AffineBlock>& blocks,
                    const std::vector<LogDetTerm>& logdets, const SdpOptions& opt) {
  std::vector<const AffineBlock*> all;
  for (const auto& b : blocks) all.push_back(&b);
  for (const auto& t : logdets) all.push_back(&t.block);

  double scale = 0;
  double w0 = 0;
  for (const auto* b : all) {
    Eigen::SelfAdjointEigenSolver<Mat> es(b->eval(Vec::Zero(m)), Eigen::EigenvaluesOnly);
    w0 = std::max(w0, -es.eigenvalues().minCoeff());
    scale = std::max(scale, b->F0.cwiseAbs().maxCoeff());
    for (const auto& F : b->F)
      if (F.size() > 0) scale = std::max(scale, F.cwiseAbs().maxCoeff());
  }
  w0 = 1.1 * w0 + 0.1 + 1e-3 * scale;
  const double margin = 1e-10 + 1e-9 * scale;
  const double R = 1e6;

  const int mp = m + 1;  // w is the last variable
  std::vector<AffineBlock> pb;
  for (const auto* b : all) {
    AffineBlock nb;
    nb.F0 = b->F0;
    nb.F = b->F;
    nb.F.push_back(Mat::Identity(b->size(), b->size()));
    pb.push_back(std::move(nb));
  }
  auto scalar1 = [&](double f0, int var, double coef) {
    AffineBlock nb;
    nb.F0 = Mat::Constant(1, 1, f0);
    nb.F.assign(mp, Mat());
    nb.F[var] = Mat::Constant(1, 1, coef);
    pb.push_back(std::move(nb));
  };
  scalar1(w0 + 1.0, m, -1.0);  // w <= w0 + 1
  for (int j = 0; j < m; ++j) {
    scalar1(R, j, -1.0);
    scalar1(R, j, 1.0);
  }

  Vec c1 = Vec::Zero(mp);
  c1(m) = 1.0;
  auto units = make_units(pb, {});
  Barrier bar(mp, units, c1);

  Vec x0 = Vec::Zero(mp);
  x0(m) = w0;

  SdpOptions p1opt = opt;
  p1opt.tol_gap = 1e-9;
  p1opt.max_iters = std::max(opt.max_iters, 400);
  auto res = bar.run(x0, p1opt, [&](const Vec& z) { return z(m) < -margin; });

  Phase1Result out;
  out.iterations = res.iterations;
  if (res.status == SdpStatus::Optimal && res.early_stopped) {
    out.found = true;
    out.x = res.x.head(m);
  } else if (res.status == SdpStatus::Optimal) {
    out.infeasible = res.x(m) > 0;
  }
  return out;
}

struct Reduced {
  // x = x_part + N z
  Vec x_part;
  Mat N;
  bool empty_kernel = false;
};

}  // namespace

SdpSolution solve(const SdpProblem& problem, const SdpOptions& options) {
  problem.validate();
  SdpSolution sol;

  // Equality elimination: x = x_part + N z keeps the reduced KKT system PD.
  const SdpProblem* p = &problem;
  SdpProblem reduced_storage;
  Vec x_part;
  Mat N;
  bool has_eq = problem.has_equalities();
  if (has_eq) {
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(problem.A);
    x_part = cod.solve(problem.b);
    const double rnorm = (problem.A * x_part - problem.b).cwiseAbs().maxCoeff();
    if (rnorm > 1e-8 * std::max(1.0, problem.b.cwiseAbs().maxCoeff())) {
      sol.status = SdpStatus::Infeasible;
      return sol;
    }
    Eigen::FullPivLU<Mat> lu(problem.A);
    N = lu.kernel();
    if (N.cols() == 0) {
      // fully determined by the equalities
      sol.x = x_part;
      sol.objective_value = problem.c.dot(x_part) + problem.constant_term;
      auto rep = feasible(problem, x_part);
      sol.certificates.min_block_eigs = rep.min_eig_per_block;
      sol.status = rep.feasible ? SdpStatus::Optimal : SdpStatus::Infeasible;
      return sol;
    }
    reduced_storage.m = static_cast<int>(N.cols());
    reduced_storage.c = N.transpose() * problem.c;
    reduced_storage.constant_term = problem.constant_term + problem.c.dot(x_part);
    auto map_block = [&](const AffineBlock& b) {
      AffineBlock nb;
      nb.F0 = b.eval(x_part);
      nb.F.resize(reduced_storage.m);
      for (int k = 0; k < reduced_storage.m; ++k) {
        Mat Fk = Mat::Zero(b.size(), b.size());
        for (int j = 0; j < problem.m; ++j)
          if (b.F[j].size() > 0 && N(j, k) != 0) Fk += N(j, k) * b.F[j];
        nb.F[k] = Fk;
      }
      return nb;
    };
    for (const auto& b : problem.blocks) reduced_storage.blocks.push_back(map_block(b));
    for (const auto& t : problem.logdet_terms)
      reduced_storage.logdet_terms.push_back({t.weight, map_block(t.block)});
    p = &reduced_storage;
  }

  // Normalize: every PSD block to unit max entry (a relabeling of the same
  // cone), the objective to unit inf-norm (same argmin). Both keep the central
  // path and its Newton iterates well scaled.
  SdpProblem scaled;
  scaled.m = p->m;
  double obj_scale = p->c.size() ? p->c.cwiseAbs().maxCoeff() : 0.0;
  for (const auto& t : p->logdet_terms) obj_scale = std::max(obj_scale, t.weight);
  if (!(obj_scale > 0)) obj_scale = 1.0;
  scaled.c = p->c / obj_scale;
  auto normalize_block = [](const AffineBlock& b) {
    double beta = b.F0.size() ? b.F0.cwiseAbs().maxCoeff() : 0.0;
    for (const auto& F : b.F)
      if (F.size() > 0) beta = std::max(beta, F.cwiseAbs().maxCoeff());
    if (!(beta > 0)) beta = 1.0;
    AffineBlock nb;
    nb.F0 = b.F0 / beta;
    nb.F.reserve(b.F.size());
    for (const auto& F : b.F) nb.F.push_back(F.size() > 0 ? Mat(F / beta) : Mat());
    return nb;
  };
  for (const auto& b : p->blocks) scaled.blocks.push_back(normalize_block(b));
  for (const auto& t : p->logdet_terms)
    scaled.logdet_terms.push_back({t.weight / obj_scale, normalize_block(t.block)});

  auto units = make_units(scaled.blocks, scaled.logdet_terms);
  Barrier bar(scaled.m, units, scaled.c);

  // starting point: user-provided, zero, or phase I
  Vec x0;
  bool have_start = false;
  if (options.initial_point && !has_eq && options.initial_point->size() == scaled.m) {
    if (bar.strictly_feasible(*options.initial_point)) {
      x0 = *options.initial_point;
      have_start = true;
    }
  }
  if (!have_start && bar.strictly_feasible(Vec::Zero(scaled.m))) {
    x0 = Vec::Zero(scaled.m);
    have_start = true;
  }
  int phase1_iters = 0;
  if (!have_start) {
    auto ph = phase1(scaled.m, scaled.blocks, scaled.logdet_terms, options);
    phase1_iters = ph.iterations;
    if (!ph.found) {
      sol.status = ph.infeasible ? SdpStatus::Infeasible : SdpStatus::NumericalFailure;
      sol.iterations = phase1_iters;
      return sol;
    }
    x0 = ph.x;
  }

  auto res = bar.run(x0, options);
  Vec x_full = has_eq ? Vec(x_part + N * res.x) : res.x;

  sol.x = x_full;
  sol.status = res.status;
  sol.iterations = res.iterations + phase1_iters;
  // report the objective in the caller's units, from the unreduced problem
  sol.objective_value = problem.c.dot(x_full) + problem.constant_term;
  for (const auto& t : problem.logdet_terms) {
    Eigen::LLT<Mat> llt(t.block.eval(x_full));
    if (llt.info() == Eigen::Success)
      sol.objective_value -=
          t.weight * 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
  }

  auto rep = feasible(problem, x_full, options.tol_feas);
  sol.certificates.min_block_eigs = rep.min_eig_per_block;
  double worst = 0;
  for (double e : rep.min_eig_per_block) worst = std::min(worst, e);
  sol.certificates.primal_residual = std::max(0.0, -worst);
  sol.certificates.dual_residual = obj_scale * res.dual_residual;
  const double lam = std::sqrt(std::max(0.0, res.final_decrement2));
  const double gap = (bar.barrier_dim() +
                      std::sqrt(double(bar.barrier_dim())) * std::min(lam, 1.0)) /
                     res.t_final;
  sol.certificates.duality_gap = gap / std::max(1.0, std::abs(bar.objective(res.x)));
  return sol;
}

FeasibilityReport feasible(const SdpProblem& problem, const Vec& x, double tol_feas) {
  if (x.size() != problem.m) throw std::invalid_argument("feasible: dimension mismatch");
  FeasibilityReport rep;
  rep.feasible = true;
  for (const auto& b : problem.blocks) {
    Eigen::SelfAdjointEigenSolver<Mat> es(b.eval(x), Eigen::EigenvaluesOnly);
    const double e = es.eigenvalues().minCoeff();
    rep.min_eig_per_block.push_back(e);
    if (e < -tol_feas) rep.feasible = false;
  }
  return rep;
}

SdpProblem qp_as_sdp(const Mat& Q, const Vec& c, std::vector<AffineBlock> constraints) {
  const int m = static_cast<int>(c.size());
  if (Q.rows() != m || Q.cols() != m) throw std::invalid_argument("qp_as_sdp: size mismatch");

  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(Q));
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, lmax))
    throw std::invalid_argument("qp_as_sdp: Q not PSD");
  std::vector<int> keep;
  for (int i = 0; i < m; ++i)
    if (es.eigenvalues()(i) > 1e-14 * std::max(1.0, lmax)) keep.push_back(i);
  const int k = static_cast<int>(keep.size());
  Mat L(k, m);  // Q = L^T L
  for (int r = 0; r < k; ++r)
    L.row(r) = std::sqrt(es.eigenvalues()(keep[r])) * es.eigenvectors().col(keep[r]).transpose();

  // balance the epigraph block: with L' = L / beta the slack variable is
  // t' = x^T Q x / beta^2 and the objective picks up the beta^2
  const double beta = k > 0 ? std::max(1.0, L.cwiseAbs().maxCoeff()) : 1.0;
  L /= beta;

  SdpProblem sp;
  sp.m = m + 1;
  sp.c = Vec::Zero(m + 1);
  sp.c.head(m) = c;
  sp.c(m) = 0.5 * beta * beta;  // beta^2 t' >= ||L x||^2 = x^T Q x

  for (auto& b : constraints) {
    b.F.resize(m + 1);
    sp.blocks.push_back(std::move(b));
  }

  // [[I, L' x], [x^T L'^T, t']] >= 0
  AffineBlock epi;
  epi.F0 = Mat::Zero(k + 1, k + 1);
  epi.F0.topLeftCorner(k, k).setIdentity();
  epi.F.assign(m + 1, Mat());
  for (int j = 0; j < m; ++j) {
    if (k == 0 || L.col(j).cwiseAbs().maxCoeff() == 0) continue;
    Mat Fj = Mat::Zero(k + 1, k + 1);
    Fj.block(0, k, k, 1) = L.col(j);
    Fj.block(k, 0, 1, k) = L.col(j).transpose();
    epi.F[j] = Fj;
  }
  Mat Ft = Mat::Zero(k + 1, k + 1);
  Ft(k, k) = 1.0;
  epi.F[m] = Ft;
  sp.blocks.push_back(std::move(epi));
  return sp;
}

void dump(const SdpProblem& problem, std::ostream& os) {
  os.precision(17);
  os << "dmid-sdp 1\n" << problem.m << " " << problem.blocks.size() << "\n";
  for (const auto& b : problem.blocks) os << b.size() << " ";
  os << "\n";
  for (int j = 0; j < problem.m; ++j) os << problem.c(j) << (j + 1 < problem.m ? " " : "\n");
  // triplets: block row col varindex value (varindex 0 is the constant part)
  for (size_t bi = 0; bi < problem.blocks.size(); ++bi) {
    const auto& b = problem.blocks[bi];
    for (int r = 0; r < b.size(); ++r)
      for (int cidx = r; cidx < b.size(); ++cidx) {
        if (b.F0(r, cidx) != 0)
          os << bi << " " << r << " " << cidx << " 0 " << b.F0(r, cidx) << "\n";
        for (int j = 0; j < problem.m; ++j)
          if (b.F[j].size() > 0 && b.F[j](r, cidx) != 0)
            os << bi << " " << r << " " << cidx << " " << j + 1 << " " << b.F[j](r, cidx) << "\n";
      }
  }
}

SdpProblem load(std::istream& is) {
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != "dmid-sdp" || version != 1) throw std::invalid_argument("load: bad header");
  SdpProblem p;
  size_t nb = 0;
  is >> p.m >> nb;
  std::vector<int> sizes(nb);
  for (auto& s : sizes) is >> s;
  p.c = Vec::Zero(p.m);
  for (int j = 0; j < p.m; ++j) is >> p.c(j);
  for (size_t i = 0; i < nb; ++i) {
    AffineBlock b;
    b.F0 = Mat::Zero(sizes[i], sizes[i]);
    b.F.assign(p.m, Mat());
    p.blocks.push_back(std::move(b));
  }
  size_t bi;
  int r, cidx, j;
  double v;
  while (is >> bi >> r >> cidx >> j >> v) {
    auto& b = p.blocks.at(bi);
    Mat& M = j == 0 ? b.F0 : (b.F[j - 1].size() == 0
                                  ? (b.F[j - 1] = Mat::Zero(b.size(), b.size()))
                                  : b.F[j - 1]);
    M(r, cidx) = v;
    M(cidx, r) = v;
  }
  return p;
}

}  // namespace dmid::sdp
