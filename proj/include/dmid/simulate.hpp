#pragma once

#include "dmid/mechanism.hpp"

namespace dmid {

struct SinusoidTerm {
  double amplitude = 0;
  double frequency = 0;  // Hz
  double phase = 0;
};

/// Sum-of-sinusoids excitation per coordinate, sampled at a fixed rate.
/// Derivatives are closed form, so (q, qd, qdd) carry no integration error.
struct Excitation {
  std::vector<std::vector<SinusoidTerm>> per_coordinate;
  double duration = 10;  // s
  double rate = 100;     // Hz

  int dim() const { return static_cast<int>(per_coordinate.size()); }
  double slowest_period() const;

  Vec q(double t) const;
  Vec qd(double t) const;
  Vec qdd(double t) const;

  /// Rejects frequency sets where some pair ratio is within 1e-3 of a ratio
  /// of integers <= 8.
  void validate_nonharmonic() const;
};

struct NoiseSpec {
  Mat tau_cov;       // n x n PSD, empty = no force noise
  Vec q_std, qd_std, qdd_std;  // per-channel, empty = none
  uint64_t seed = 0;

  static NoiseSpec none(int n) {
    NoiseSpec ns;
    ns.tau_cov = Mat::Zero(n, n);
    ns.q_std = Vec::Zero(n);
    ns.qd_std = Vec::Zero(n);
    ns.qdd_std = Vec::Zero(n);
    return ns;
  }
};

/// Builds the default excitation for a mechanism: three mutually non-harmonic
/// sinusoids per coordinate with deterministic seed-derived phases. Amplitudes
/// are clamped away from singular configurations (pan-tilt |phi| <= 80 deg).
Excitation default_excitation(const Mechanism& mech, uint64_t seed, double duration,
                              double rate);

/// Prescribed-kinematics inverse-dynamics rollout; Y(sample) pi* - tau = 0
/// holds exactly on the result.
Dataset simulate_inverse(const Mechanism& mech, const Excitation& exc);

Dataset add_noise(const Dataset& data, const NoiseSpec& noise);

/// q' = D q, qd' = D qd, qdd' = D qdd, tau' = D^-T tau.
Dataset rescale_chart(const Dataset& data, const Mat& D);

enum class DownsamplePolicy { Uniform, SeededRandom };

/// Downsamples preserving the stacked-regressor rank; retries the random
/// policy with derived seeds up to 100 times before giving up.
Dataset downsample(const Dataset& data, const Mechanism& mech, int target_count,
                   DownsamplePolicy policy, uint64_t seed = 0);

}  // namespace dmid
