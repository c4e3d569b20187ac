#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "dmid/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dmid;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;
constexpr int kExitAcceptance = 4;

struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<io::EstimatorConfig> filter_estimators(const io::ExperimentConfig& cfg,
                                                   const std::string& list) {
  if (list.empty()) return cfg.estimators;
  std::vector<io::EstimatorConfig> out;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const EstimatorKind kind = estimator_kind_from_string(tok);
    bool found = false;
    for (const auto& ec : cfg.estimators)
      if (ec.kind == kind) {
        out.push_back(ec);
        found = true;
      }
    if (!found) out.push_back({kind, 0, std::nullopt, true});
  }
  if (out.empty()) throw io::ValidationError("--estimators selected nothing");
  return out;
}

int cmd_simulate(const io::ExperimentConfig& cfg, const fs::path& out_dir) {
  Mechanism mech = io::make_mechanism(cfg.mechanism);
  cfg.validate(mech);
  SimOutputs sim = run_simulate(mech, cfg);

  fs::create_directories(out_dir);
  std::vector<fs::path> artifacts;
  auto write = [&](const Dataset& ds, const std::string& name) {
    io::write_dataset_csv(ds, out_dir / name);
    artifacts.push_back(out_dir / name);
  };
  for (size_t i = 0; i < sim.train.size(); ++i) write(sim.train[i], "train_" + std::to_string(i) + ".csv");
  for (size_t i = 0; i < sim.test.size(); ++i) write(sim.test[i], "test_" + std::to_string(i) + ".csv");
  io::write_sidecar(mech, out_dir / "sidecar.json");
  artifacts.push_back(out_dir / "sidecar.json");
  io::write_manifest(out_dir, artifacts);
  std::cout << "wrote " << artifacts.size() << " artifacts to " << out_dir.string() << "\n";
  return 0;
}

int cmd_identify(const io::ExperimentConfig& cfg, const std::vector<fs::path>& datasets,
                 const fs::path& out_dir, const std::string& estimators) {
  if (datasets.empty()) throw io::ValidationError("identify: no dataset paths given");
  Mechanism mech = io::make_mechanism(cfg.mechanism);
  cfg.validate(mech);

  std::vector<Dataset> train;
  for (const auto& p : datasets) train.push_back(io::read_dataset_csv(p));
  for (const auto& ds : train)
    if (ds.n != mech.dof())
      throw io::ValidationError("identify: dataset dimension does not match mechanism");

  Dataset pooled = pool_datasets(train);
  if (cfg.downsample.target > 0)
    pooled = downsample(pooled, mech, cfg.downsample.target, cfg.downsample.policy, cfg.seed);
  Regression reg = Regression::build(mech, pooled);
  if (cfg.chart_D) reg = transform_regression(reg, *cfg.chart_D);

  auto reports = run_identify(reg, filter_estimators(cfg, estimators), mech, cfg.seed);

  fs::create_directories(out_dir);
  std::vector<fs::path> artifacts;
  bool solver_ok = true;
  for (const auto& nr : reports) {
    const fs::path p = out_dir / ("report_" + nr.estimator + ".json");
    io::write_text(p, io::estimator_report_to_json(nr.estimator, nr.report).dump(2) + "\n");
    artifacts.push_back(p);
    std::cout << nr.estimator << ": status " << sdp::to_string(nr.report.solver.status)
              << ", objective " << nr.report.objective << "\n";
    if (nr.report.solver.status != sdp::SdpStatus::Optimal) solver_ok = false;
  }
  io::write_manifest(out_dir, artifacts);
  if (!solver_ok) throw SolverFailure("a solver exited with non-Optimal status");
  return 0;
}

int cmd_evaluate(const io::ExperimentConfig& cfg, const std::vector<fs::path>& inputs,
                 const fs::path& sidecar, const fs::path& train_csv, const fs::path& out_dir) {
  Mechanism mech = io::make_mechanism(cfg.mechanism);
  cfg.validate(mech);

  std::vector<fs::path> report_paths;
  std::vector<Dataset> tests;
  for (const auto& p : inputs) {
    if (p.extension() == ".json")
      report_paths.push_back(p);
    else if (p.extension() == ".csv")
      tests.push_back(io::read_dataset_csv(p));
    else
      throw io::ValidationError("evaluate: unrecognized input " + p.string());
  }
  if (report_paths.empty()) throw io::ValidationError("evaluate: no report files given");
  if (tests.empty()) throw io::ValidationError("evaluate: empty test set");

  std::optional<DynamicParams> gt;
  if (!sidecar.empty()) {
    auto [smech, sparams] = io::read_sidecar(sidecar);
    if (!(sparams.layout == mech.layout()))
      throw io::ValidationError("evaluate: sidecar layout does not match mechanism");
    gt = sparams;
  }
  Mat train_stacked = Mat::Identity(mech.layout().size(), mech.layout().size());
  if (!train_csv.empty())
    train_stacked = Regression::build(mech, io::read_dataset_csv(train_csv)).stacked();

  const double slowest =
      default_excitation(mech, cfg.seed, cfg.duration, cfg.rate).slowest_period();

  std::vector<EvalReport> evals;
  for (const auto& rp : report_paths) {
    io::json j = io::json::parse(io::read_text(rp));
    if (!j.contains("estimator") || !j.contains("pi_hat"))
      throw io::ValidationError("evaluate: malformed report " + rp.string());
    DynamicParams pi = io::params_from_json(j.at("pi_hat"));
    if (!(pi.layout == mech.layout()))
      throw io::ValidationError("evaluate: report layout does not match mechanism");
    evals.push_back(evaluate_estimator(mech, j.at("estimator").get<std::string>(), pi, tests,
                                       slowest, gt, train_stacked));
  }

  fs::create_directories(out_dir);
  io::json jevals = io::json::array();
  for (const auto& ev : evals) jevals.push_back(io::eval_report_to_json(ev));
  io::write_text(out_dir / "eval.json", jevals.dump(2) + "\n");
  io::write_eval_csv(evals, out_dir / "eval.csv");
  io::write_manifest(out_dir, {out_dir / "eval.json", out_dir / "eval.csv"});
  for (const auto& ev : evals) {
    std::cout << ev.estimator << ":";
    for (const auto& c : ev.coordinates) std::cout << "  " << c.name << " ncc " << c.ncc_mean;
    std::cout << "\n";
  }
  return 0;
}

int cmd_reproduce(const std::string& profile, uint64_t seed, const fs::path& out_dir) {
  if (std::find(kReproduceProfiles.begin(), kReproduceProfiles.end(), profile) ==
      kReproduceProfiles.end())
    throw io::ValidationError("unknown profile '" + profile + "'");
  ReproduceOutcome outcome = run_reproduce(profile, seed, out_dir);
  for (const auto& line : outcome.summary_lines) std::cout << line << "\n";
  if (!outcome.ok) return kExitAcceptance;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coordinate-independent inverse-dynamics identification"};
  app.require_subcommand(1);

  std::string config_path, out_dir, estimators, profile;
  std::optional<uint64_t> seed;
  std::vector<std::string> paths;
  std::string sidecar_path, train_path;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", config_path, "experiment config (JSON)");
    if (needs_config) c->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "seed override");
  };

  auto* sim = app.add_subcommand("simulate", "generate train/test datasets");
  add_common(sim, true);

  auto* ident = app.add_subcommand("identify", "fit estimators to datasets");
  add_common(ident, true);
  ident->add_option("datasets", paths, "training dataset CSVs")->required();
  ident->add_option("--estimators", estimators, "comma list, e.g. ols,dual_metric");

  auto* eval = app.add_subcommand("evaluate", "score fitted models on test data");
  add_common(eval, true);
  eval->add_option("inputs", paths, "report JSONs and test dataset CSVs")->required();
  eval->add_option("--sidecar", sidecar_path, "ground-truth sidecar for parameter errors");
  eval->add_option("--train", train_path, "training CSV for the identifiable projector");

  auto* repro = app.add_subcommand("reproduce", "run a full pipeline profile");
  repro->add_option("--profile", profile, "inertia-low|inertia-high|drag-low|drag-high|invariance")
      ->required();
  repro->add_option("--out", out_dir, "output directory");
  repro->add_option("--seed", seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    const char* env_out = std::getenv("DMID_OUT_DIR");
    if (out_dir.empty()) out_dir = env_out ? env_out : "out";

    if (app.got_subcommand(repro)) return cmd_reproduce(profile, seed.value_or(0), out_dir);

    io::ExperimentConfig cfg = io::load_config(config_path);
    if (seed) cfg.seed = *seed;
    std::vector<fs::path> fpaths(paths.begin(), paths.end());
    if (app.got_subcommand(sim)) return cmd_simulate(cfg, out_dir);
    if (app.got_subcommand(ident)) return cmd_identify(cfg, fpaths, out_dir, estimators);
    return cmd_evaluate(cfg, fpaths, sidecar_path, train_path, out_dir);
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const StageFailure& e) {
    std::cerr << "stage failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const io::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}
