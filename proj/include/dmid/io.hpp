#pragma once

#include <cstdint>
#include <filesystem>

#include "dmid/evaluate.hpp"
#include "dmid/simulate.hpp"

#include "json.hpp"

namespace dmid::io {

using nlohmann::json;

/// Thrown for malformed configs / files; the CLI maps it to exit code 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- dataset CSV ----------------------------------------------------------
// Header `t,q_1..q_n,qd_1..qd_n,qdd_1..qdd_n,tau_1..tau_n`, one row per
// sample, %.17g values.

std::string dataset_csv_header(int n);
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path);

// ---- mechanism / parameters ----------------------------------------------

Mechanism make_mechanism(const std::string& name);
json mechanism_to_json(const Mechanism& mech);
Mechanism mechanism_from_json(const json& j);

json params_to_json(const DynamicParams& p);
DynamicParams params_from_json(const json& j);

/// Ground-truth sidecar: mechanism description, layout, and pi*.
void write_sidecar(const Mechanism& mech, const std::filesystem::path& path);
std::pair<Mechanism, DynamicParams> read_sidecar(const std::filesystem::path& path);

// ---- reports --------------------------------------------------------------

json estimator_report_to_json(const std::string& estimator, const EstimatorReport& rep);
json eval_report_to_json(const EvalReport& rep);

/// Flat table, one row per (estimator, coordinate, trajectory).
void write_eval_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path);

// ---- experiment config ----------------------------------------------------

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::OLS;
  double rho = 0;                     // <= 0 selects the default scale
  std::optional<Vec> nominal;         // pi_0 for the regularized kinds
  bool enforce_consistency = true;
};

struct DownsampleConfig {
  DownsamplePolicy policy = DownsamplePolicy::SeededRandom;
  int target = 0;  // 0 = keep everything
};

struct ExperimentConfig {
  std::string mechanism = "pan_tilt";
  double duration = 35;
  double rate = 100;
  int train_trajectories = 6;
  int test_trajectories = 6;
  Vec tau_std;  // empty = none
  Vec q_std, qd_std, qdd_std;
  std::optional<Mat> chart_D;  // applied to train and test sets when present
  std::vector<EstimatorConfig> estimators;
  DownsampleConfig downsample;
  uint64_t seed = 0;
  std::string out_dir = "out";

  void validate(const Mechanism& mech) const;
};

/// Strict parse: unknown keys anywhere in the document are rejected.
ExperimentConfig config_from_json(const json& j);
json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

// ---- manifest -------------------------------------------------------------

uint64_t fnv1a_hash(const std::string& bytes);
uint64_t hash_file(const std::filesystem::path& path);

/// `manifest.json` listing every artifact with its content hash.
void write_manifest(const std::filesystem::path& dir,
                    const std::vector<std::filesystem::path>& files);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace dmid::io
