#include "dmid/simulate.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace dmid {

namespace {

// Mutually non-harmonic frequency table (geometric spacing, checked against
// all integer ratios p/q with p, q <= 8 at the 1e-3 tolerance).
constexpr double kFreqTable[15] = {
    0.370000000, 0.411810000, 0.458344530, 0.510137462, 0.567782995,
    0.631942474, 0.703351973, 0.782830746, 0.871290620, 0.969746460,
    1.079327810, 1.201291853, 1.337037832, 1.488123107, 1.656281019};

constexpr double kPanTiltClamp = 80.0 * std::numbers::pi / 180.0;

bool near_integer_ratio(double r) {
  for (int q = 1; q <= 8; ++q) {
    const double p = std::round(q * r);
    if (p >= 1 && std::abs(r - p / q) <= 1e-3) return true;
  }
  return false;
}

int svd_rank(const Mat& A) {
  Eigen::JacobiSVD<Mat> svd(A);
  const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0;
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-10 * smax) ++r;
  return r;
}

Mat stacked_regressor(const Mechanism& mech, const Dataset& data) {
  const int n = mech.dof(), d = mech.layout().size();
  Mat A(static_cast<Eigen::Index>(data.size()) * n, d);
  for (size_t i = 0; i < data.size(); ++i)
    A.middleRows(static_cast<Eigen::Index>(i) * n, n) = mech.regressor(data.samples[i]);
  return A;
}

}  // namespace

double Excitation::slowest_period() const {
  double fmin = std::numeric_limits<double>::infinity();
  for (const auto& terms : per_coordinate)
    for (const auto& t : terms)
      if (t.amplitude != 0) fmin = std::min(fmin, t.frequency);
  if (!std::isfinite(fmin) || fmin <= 0)
    throw std::invalid_argument("Excitation: no active sinusoid");
  return 1.0 / fmin;
}

Vec Excitation::q(double t) const {
  Vec out = Vec::Zero(dim());
  for (int i = 0; i < dim(); ++i)
    for (const auto& s : per_coordinate[i])
      out(i) += s.amplitude * std::sin(2 * std::numbers::pi * s.frequency * t + s.phase);
  return out;
}

Vec Excitation::qd(double t) const {
  Vec out = Vec::Zero(dim());
  for (int i = 0; i < dim(); ++i)
    for (const auto& s : per_coordinate[i]) {
      const double w = 2 * std::numbers::pi * s.frequency;
      out(i) += s.amplitude * w * std::cos(w * t + s.phase);
    }
  return out;
}

Vec Excitation::qdd(double t) const {
  Vec out = Vec::Zero(dim());
  for (int i = 0; i < dim(); ++i)
    for (const auto& s : per_coordinate[i]) {
      const double w = 2 * std::numbers::pi * s.frequency;
      out(i) -= s.amplitude * w * w * std::sin(w * t + s.phase);
    }
  return out;
}

void Excitation::validate_nonharmonic() const {
  std::vector<double> fs;
  for (const auto& terms : per_coordinate)
    for (const auto& t : terms)
      if (t.amplitude != 0) fs.push_back(t.frequency);
  for (size_t i = 0; i < fs.size(); ++i)
    for (size_t j = i + 1; j < fs.size(); ++j) {
      const double r = std::max(fs[i], fs[j]) / std::min(fs[i], fs[j]);
      if (near_integer_ratio(r))
        throw std::invalid_argument("Excitation: harmonic frequency pair " +
                                    std::to_string(fs[i]) + " / " + std::to_string(fs[j]));
    }
}

Excitation default_excitation(const Mechanism& mech, uint64_t seed, double duration,
                              double rate) {
  const int n = mech.dof();
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> uphase(0.0, 2 * std::numbers::pi);

  Excitation exc;
  exc.duration = duration;
  exc.rate = rate;
  exc.per_coordinate.resize(n);

  // amplitude triples summing to roughly +-60 deg for angles; the pan-tilt
  // tilt axis is clamped below the 80 deg singularity guard
  std::vector<Vec> amp(n, Vec{{0.5, 0.3, 0.2}});
  if (std::holds_alternative<PanTilt>(mech.variant())) {
    amp[1] = Vec{{0.55, 0.35, 0.25}};  // sums to 1.15 rad ~ 66 deg
  } else if (std::holds_alternative<DragCrawler3>(mech.variant())) {
    amp[0] = Vec{{0.20, 0.12, 0.08}};  // body translation, meters
    amp[1] = Vec{{0.18, 0.11, 0.07}};
  }
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k)
      exc.per_coordinate[i].push_back(
          {amp[i](k), kFreqTable[(3 * i + k) % 15], uphase(rng)});
  exc.validate_nonharmonic();
  return exc;
}

Dataset simulate_inverse(const Mechanism& mech, const Excitation& exc) {
  if (exc.dim() != mech.dof()) throw std::invalid_argument("simulate_inverse: dim mismatch");
  exc.validate_nonharmonic();
  const bool pan_tilt = std::holds_alternative<PanTilt>(mech.variant());

  Dataset data;
  data.n = mech.dof();
  data.dt = 1.0 / exc.rate;
  data.coordinate_names = mech.coordinate_names();
  data.units.assign(data.n, "SI");
  const int count = static_cast<int>(std::floor(exc.duration * exc.rate)) + 1;
  data.samples.reserve(count);
  for (int i = 0; i < count; ++i) {
    Sample s;
    s.t = i * data.dt;
    s.q = exc.q(s.t);
    s.qd = exc.qd(s.t);
    s.qdd = exc.qdd(s.t);
    if (pan_tilt && std::abs(s.q(1)) > kPanTiltClamp)
      throw std::invalid_argument("simulate_inverse: pan-tilt singularity clamp violated");
    s.tau = mech.inverse_dynamics(s);
    data.samples.push_back(std::move(s));
  }
  data.validate();
  return data;
}

Dataset add_noise(const Dataset& data, const NoiseSpec& noise) {
  data.validate();
  const int n = data.n;
  auto chan_ok = [&](const Vec& v) { return v.size() == 0 || v.size() == n; };
  if (!chan_ok(noise.q_std) || !chan_ok(noise.qd_std) || !chan_ok(noise.qdd_std) ||
      (noise.tau_cov.size() > 0 && noise.tau_cov.rows() != n))
    throw std::invalid_argument("add_noise: dimension mismatch");

  Mat L = Mat::Zero(n, n);
  if (noise.tau_cov.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(noise.tau_cov));
    if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()))
      throw std::invalid_argument("add_noise: tau covariance not PSD");
    L = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&](int k) {
    Vec z(k);
    for (int i = 0; i < k; ++i) z(i) = gauss(rng);
    return z;
  };

  Dataset out = data;
  for (auto& s : out.samples) {
    if (noise.q_std.size()) s.q += noise.q_std.cwiseProduct(draw(n));
    if (noise.qd_std.size()) s.qd += noise.qd_std.cwiseProduct(draw(n));
    if (noise.qdd_std.size() && s.has_qdd()) s.qdd += noise.qdd_std.cwiseProduct(draw(n));
    s.tau += L * draw(n);
  }
  return out;
}

Dataset rescale_chart(const Dataset& data, const Mat& D) {
  data.validate();
  if (D.rows() != data.n || D.cols() != data.n)
    throw std::invalid_argument("rescale_chart: D size mismatch");
  Eigen::FullPivLU<Mat> lu(D);
  if (!lu.isInvertible()) throw std::invalid_argument("rescale_chart: singular D");
  const Mat DinvT = lu.inverse().transpose();

  Dataset out = data;
  out.chart_id = data.chart_id + ":rescaled";
  for (auto& s : out.samples) {
    s.q = D * s.q;
    s.qd = D * s.qd;
    if (s.has_qdd()) s.qdd = D * s.qdd;
    s.tau = DinvT * s.tau;
  }
  return out;
}

Dataset downsample(const Dataset& data, const Mechanism& mech, int target_count,
                   DownsamplePolicy policy, uint64_t seed) {
  data.validate();
  const int d = mech.layout().size();
  if (target_count < d) throw std::invalid_argument("downsample: target below parameter count");
  if (target_count >= static_cast<int>(data.size())) return data;

  const int full_rank = svd_rank(stacked_regressor(mech, data));

  auto take = [&](const std::vector<size_t>& idx) {
    Dataset out = data;
    out.samples.clear();
    for (size_t i : idx) out.samples.push_back(data.samples[i]);
    return out;
  };

  if (policy == DownsamplePolicy::Uniform) {
    std::vector<size_t> idx;
    for (int k = 0; k < target_count; ++k)
      idx.push_back(static_cast<size_t>(std::llround(
          k * static_cast<double>(data.size() - 1) / (target_count - 1))));
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    Dataset out = take(idx);
    if (svd_rank(stacked_regressor(mech, out)) != full_rank)
      throw std::runtime_error("downsample: uniform subset loses regressor rank");
    return out;
  }

  for (int attempt = 0; attempt < 100; ++attempt) {
    std::mt19937_64 rng(seed + 0x51ab5f1221212121ULL * (attempt + 1));
    std::vector<size_t> all(data.size());
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(target_count);
    std::sort(all.begin(), all.end());
    Dataset out = take(all);
    if (svd_rank(stacked_regressor(mech, out)) == full_rank) return out;
  }
  throw std::runtime_error("downsample: rank not preserved after 100 seeded attempts");
}

}  // namespace dmid
