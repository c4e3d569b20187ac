#pragma once

#include <iosfwd>
#include <optional>

#include "dmid/affine.hpp"

namespace dmid::sdp {

/// Affine PSD constraint F0 + sum_j x_j F[j] >= 0 over the decision vector x.
struct AffineBlock {
  Mat F0;
  std::vector<Mat> F;  // one k x k symmetric matrix per decision variable

  int size() const { return static_cast<int>(F0.rows()); }
  Mat eval(const Vec& x) const {
    Mat S = F0;
    for (int j = 0; j < x.size(); ++j)
      if (F[j].size() > 0) S.noalias() += x(j) * F[j];
    return S;
  }
};

/// Adds -weight * logdet(block(x)) to the objective. The block must stay PD.
struct LogDetTerm {
  double weight = 0;
  AffineBlock block;
};

struct SdpProblem {
  int m = 0;                       // decision variables
  Vec c;                           // linear objective
  std::vector<AffineBlock> blocks;
  std::vector<LogDetTerm> logdet_terms;
  Mat A;                           // optional equalities A x = b (0x0 when absent)
  Vec b;
  double constant_term = 0;        // added to reported objective values

  bool has_equalities() const { return A.rows() > 0; }
  void validate() const;
};

enum class SdpStatus { Optimal, Infeasible, MaxIters, NumericalFailure };

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "Optimal";
    case SdpStatus::Infeasible: return "Infeasible";
    case SdpStatus::MaxIters: return "MaxIters";
    default: return "NumericalFailure";
  }
}

struct SdpCertificates {
  double primal_residual = 0;   // max(0, -min block eigenvalue)
  double dual_residual = 0;     // inf-norm of the stationarity residual
  double duality_gap = 0;       // barrier suboptimality bound, relative
  std::vector<double> min_block_eigs;
};

struct SdpOptions {
  double tol_gap = 1e-9;    // relative duality-gap target
  double tol_feas = 1e-9;
  int max_iters = 1000;     // total Newton iterations
  double t_init = 1.0;
  double t_mult = 20.0;
  std::optional<Vec> initial_point;  // must be strictly feasible to be used
};

struct SdpSolution {
  Vec x;
  double objective_value = 0;
  SdpStatus status = SdpStatus::NumericalFailure;
  SdpCertificates certificates;
  int iterations = 0;
};

SdpSolution solve(const SdpProblem& problem, const SdpOptions& options = {});

struct FeasibilityReport {
  bool feasible = false;
  std::vector<double> min_eig_per_block;
};

FeasibilityReport feasible(const SdpProblem& problem, const Vec& x, double tol_feas = 1e-9);

/// Embeds min 0.5 x^T Q x + c^T x over the given PSD blocks as an SDP with one
/// extra epigraph variable; the first m variables of the result are x.
SdpProblem qp_as_sdp(const Mat& Q, const Vec& c, std::vector<AffineBlock> constraints);

/// Plain-text sparse-triplet dump/load for debugging and cross-solver checks.
void dump(const SdpProblem& problem, std::ostream& os);
SdpProblem load(std::istream& is);

}  // namespace dmid::sdp
