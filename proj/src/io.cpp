#include "dmid/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dmid::io {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("bad numeric field '" + s + "' in " + where);
  }
}

void require_keys(const json& j, const std::vector<std::string>& allowed,
                  const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ValidationError(where + ": unknown key '" + it.key() + "'");
  }
}

Vec vec_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected an array");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(where + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

json vec_to_json(const Vec& v) {
  json j = json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Mat mat_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected an array of rows");
  const auto rows = j.size();
  Mat M;
  for (size_t r = 0; r < rows; ++r) {
    Vec row = vec_from_json(j[r], where);
    if (r == 0) M.resize(static_cast<Eigen::Index>(rows), row.size());
    if (row.size() != M.cols()) throw ValidationError(where + ": ragged rows");
    M.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return M;
}

json mat_to_json(const Mat& M) {
  json j = json::array();
  for (int r = 0; r < M.rows(); ++r) j.push_back(vec_to_json(M.row(r).transpose()));
  return j;
}

}  // namespace

// ---- dataset CSV ----------------------------------------------------------

std::string dataset_csv_header(int n) {
  std::string h = "t";
  auto block = [&](const std::string& base) {
    for (int i = 1; i <= n; ++i) h += "," + base + "_" + std::to_string(i);
  };
  block("q");
  block("qd");
  block("qdd");
  block("tau");
  return h;
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  data.validate();
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open for writing: " + path.string());
  os << dataset_csv_header(data.n) << "\n";
  for (const auto& s : data.samples) {
    os << fmt17(s.t);
    auto dump = [&](const Vec& v) {
      for (int i = 0; i < data.n; ++i) os << ',' << fmt17(v.size() ? v(i) : 0.0);
    };
    dump(s.q);
    dump(s.qd);
    dump(s.qdd);
    dump(s.tau);
    os << "\n";
  }
  if (!os) throw ValidationError("write failed: " + path.string());
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("empty file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();

  // infer n from the header and demand a bit-exact match
  const auto fields = split_csv_line(line);
  if (fields.size() < 5 || (fields.size() - 1) % 4 != 0)
    throw ValidationError("bad CSV header in " + path.string());
  const int n = static_cast<int>((fields.size() - 1) / 4);
  if (line != dataset_csv_header(n))
    throw ValidationError("bad CSV header in " + path.string());

  Dataset data;
  data.n = n;
  size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != static_cast<size_t>(1 + 4 * n))
      throw ValidationError("wrong field count at line " + std::to_string(lineno) + " in " +
                            path.string());
    const std::string where = path.string() + ":" + std::to_string(lineno);
    Sample s;
    s.t = parse_double(cells[0], where);
    auto take = [&](int off) {
      Vec v(n);
      for (int i = 0; i < n; ++i) v(i) = parse_double(cells[1 + off * n + i], where);
      return v;
    };
    s.q = take(0);
    s.qd = take(1);
    s.qdd = take(2);
    s.tau = take(3);
    data.samples.push_back(std::move(s));
  }
  if (data.samples.size() >= 2) data.dt = data.samples[1].t - data.samples[0].t;
  try {
    data.validate();
  } catch (const std::exception& e) {
    throw ValidationError(std::string(e.what()) + " in " + path.string());
  }
  return data;
}

// ---- mechanism / parameters ----------------------------------------------

Mechanism make_mechanism(const std::string& name) {
  if (name == "pan_tilt") return Mechanism(PanTilt{});
  if (name == "pan_tilt_gravity") {
    PanTilt pt;
    pt.gravity = true;
    return Mechanism(pt);
  }
  if (name == "two_link_arm") return Mechanism(TwoLinkArm{});
  if (name == "drag_crawler3") return Mechanism(DragCrawler3{});
  throw ValidationError("unknown mechanism '" + name + "'");
}

json mechanism_to_json(const Mechanism& mech) {
  json j;
  j["name"] = mech.name();
  if (const auto* pt = std::get_if<PanTilt>(&mech.variant())) {
    j["m"] = pt->m;
    j["l"] = pt->l;
    j["gravity"] = pt->gravity;
    j["g"] = pt->g;
  } else if (const auto* arm = std::get_if<TwoLinkArm>(&mech.variant())) {
    j["l1"] = arm->l1;
    j["l2"] = arm->l2;
    j["g"] = arm->g;
  } else if (const auto* dc = std::get_if<DragCrawler3>(&mech.variant())) {
    j["L1"] = dc->L1;
    j["L2"] = dc->L2;
    j["L3"] = dc->L3;
  }
  return j;
}

Mechanism mechanism_from_json(const json& j) {
  if (!j.contains("name")) throw ValidationError("mechanism: missing 'name'");
  const std::string name = j.at("name").get<std::string>();
  if (name == "pan_tilt" || name == "pan_tilt_gravity") {
    require_keys(j, {"name", "m", "l", "gravity", "g"}, "mechanism");
    PanTilt pt;
    if (j.contains("m")) pt.m = j["m"].get<double>();
    if (j.contains("l")) pt.l = j["l"].get<double>();
    if (j.contains("gravity")) pt.gravity = j["gravity"].get<bool>();
    if (j.contains("g")) pt.g = j["g"].get<double>();
    if (name == "pan_tilt_gravity") pt.gravity = true;
    return Mechanism(pt);
  }
  if (name == "two_link_arm") {
    require_keys(j, {"name", "l1", "l2", "g"}, "mechanism");
    TwoLinkArm arm;
    if (j.contains("l1")) arm.l1 = j["l1"].get<double>();
    if (j.contains("l2")) arm.l2 = j["l2"].get<double>();
    if (j.contains("g")) arm.g = j["g"].get<double>();
    return Mechanism(arm);
  }
  if (name == "drag_crawler3") {
    require_keys(j, {"name", "L1", "L2", "L3"}, "mechanism");
    DragCrawler3 dc;
    if (j.contains("L1")) dc.L1 = j["L1"].get<double>();
    if (j.contains("L2")) dc.L2 = j["L2"].get<double>();
    if (j.contains("L3")) dc.L3 = j["L3"].get<double>();
    return Mechanism(dc);
  }
  throw ValidationError("unknown mechanism '" + name + "'");
}

json params_to_json(const DynamicParams& p) {
  json j;
  j["model_class"] = to_string(p.layout.model_class);
  json entries = json::array();
  for (const auto& e : p.layout.entries)
    entries.push_back({{"name", e.name}, {"role", e.role}, {"unit", e.unit}});
  j["layout"] = entries;
  j["values"] = vec_to_json(p.values);
  return j;
}

DynamicParams params_from_json(const json& j) {
  require_keys(j, {"model_class", "layout", "values"}, "params");
  ParamLayout layout;
  const std::string mc = j.at("model_class").get<std::string>();
  if (mc == "inertia")
    layout.model_class = ModelClass::InertiaDominated;
  else if (mc == "drag")
    layout.model_class = ModelClass::DragDominated;
  else
    throw ValidationError("params: unknown model_class '" + mc + "'");
  for (const auto& e : j.at("layout")) {
    require_keys(e, {"name", "role", "unit"}, "params.layout");
    layout.entries.push_back({e.at("name").get<std::string>(), e.at("role").get<std::string>(),
                              e.at("unit").get<std::string>()});
  }
  Vec v = vec_from_json(j.at("values"), "params.values");
  if (v.size() != layout.size()) throw ValidationError("params: values/layout length mismatch");
  return DynamicParams(std::move(v), std::move(layout));
}

void write_sidecar(const Mechanism& mech, const std::filesystem::path& path) {
  json j;
  j["mechanism"] = mechanism_to_json(mech);
  j["ground_truth"] = params_to_json(mech.ground_truth());
  write_text(path, j.dump(2) + "\n");
}

std::pair<Mechanism, DynamicParams> read_sidecar(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ValidationError("bad sidecar " + path.string() + ": " + e.what());
  }
  require_keys(j, {"mechanism", "ground_truth"}, "sidecar");
  return {mechanism_from_json(j.at("mechanism")), params_from_json(j.at("ground_truth"))};
}

// ---- reports --------------------------------------------------------------

json estimator_report_to_json(const std::string& estimator, const EstimatorReport& rep) {
  json j;
  j["estimator"] = estimator;
  j["pi_hat"] = params_to_json(rep.pi_hat);
  j["objective"] = rep.objective;
  j["solver_status"] = sdp::to_string(rep.solver.status);
  j["solver_iterations"] = rep.solver.iterations;
  j["duality_gap"] = rep.solver.certificates.duality_gap;
  j["effective_rank"] = rep.effective_rank;
  j["rank_deficient_warning"] = rep.rank_deficient_warning;
  j["non_identifying"] = rep.non_identifying;
  if (rep.sigma_hat) j["sigma_hat"] = mat_to_json(*rep.sigma_hat);
  return j;
}

json eval_report_to_json(const EvalReport& rep) {
  json j;
  j["estimator"] = rep.estimator;
  j["param_err_raw"] = rep.param_err_raw;
  j["param_err_projected"] = rep.param_err_projected;
  j["excluded_samples"] = rep.excluded_samples;
  json coords = json::array();
  for (const auto& c : rep.coordinates) {
    json jc;
    jc["name"] = c.name;
    jc["ncc_mean"] = c.ncc_mean;
    jc["ncc_std"] = c.ncc_std;
    jc["rmse_mean"] = c.rmse_mean;
    jc["ncc_per_traj"] = c.ncc_per_traj;
    jc["shift_per_traj"] = c.shift_per_traj;
    coords.push_back(std::move(jc));
  }
  j["coordinates"] = std::move(coords);
  return j;
}

void write_eval_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open for writing: " + path.string());
  os << "estimator,coordinate,trajectory,ncc,shift,ncc_mean,ncc_std,rmse_mean\n";
  for (const auto& rep : reports)
    for (const auto& c : rep.coordinates)
      for (size_t k = 0; k < c.ncc_per_traj.size(); ++k)
        os << rep.estimator << ',' << c.name << ',' << k << ',' << fmt17(c.ncc_per_traj[k])
           << ',' << c.shift_per_traj[k] << ',' << fmt17(c.ncc_mean) << ',' << fmt17(c.ncc_std)
           << ',' << fmt17(c.rmse_mean) << "\n";
  if (!os) throw ValidationError("write failed: " + path.string());
}

// ---- experiment config ----------------------------------------------------

void ExperimentConfig::validate(const Mechanism& mech) const {
  const int n = mech.dof();
  if (duration <= 0 || rate <= 0) throw ValidationError("config: duration and rate must be > 0");
  if (train_trajectories < 1 || test_trajectories < 0)
    throw ValidationError("config: need at least one training trajectory");
  auto chan = [&](const Vec& v, const char* what) {
    if (v.size() != 0 && v.size() != n)
      throw ValidationError(std::string("config: ") + what + " must have " + std::to_string(n) +
                            " entries");
    if (v.size() && v.minCoeff() < 0)
      throw ValidationError(std::string("config: negative std in ") + what);
  };
  chan(tau_std, "tau_std");
  chan(q_std, "q_std");
  chan(qd_std, "qd_std");
  chan(qdd_std, "qdd_std");
  if (chart_D) {
    if (chart_D->rows() != n || chart_D->cols() != n)
      throw ValidationError("config: chart_D must be " + std::to_string(n) + "x" +
                            std::to_string(n));
    if (!Eigen::FullPivLU<Mat>(*chart_D).isInvertible())
      throw ValidationError("config: chart_D is singular");
  }
  if (estimators.empty()) throw ValidationError("config: empty estimator list");
  for (const auto& e : estimators)
    if (e.nominal && e.nominal->size() != mech.layout().size())
      throw ValidationError("config: estimator nominal has wrong length");
  if (downsample.target < 0) throw ValidationError("config: negative downsample target");
}

ExperimentConfig config_from_json(const json& j) {
  require_keys(j,
               {"mechanism", "duration", "rate", "train_trajectories", "test_trajectories",
                "noise", "chart_D", "estimators", "downsample", "seed", "out_dir"},
               "config");
  ExperimentConfig cfg;
  if (j.contains("mechanism")) cfg.mechanism = j["mechanism"].get<std::string>();
  if (j.contains("duration")) cfg.duration = j["duration"].get<double>();
  if (j.contains("rate")) cfg.rate = j["rate"].get<double>();
  if (j.contains("train_trajectories"))
    cfg.train_trajectories = j["train_trajectories"].get<int>();
  if (j.contains("test_trajectories")) cfg.test_trajectories = j["test_trajectories"].get<int>();
  if (j.contains("noise")) {
    const json& n = j["noise"];
    require_keys(n, {"tau_std", "q_std", "qd_std", "qdd_std"}, "config.noise");
    if (n.contains("tau_std")) cfg.tau_std = vec_from_json(n["tau_std"], "config.noise.tau_std");
    if (n.contains("q_std")) cfg.q_std = vec_from_json(n["q_std"], "config.noise.q_std");
    if (n.contains("qd_std")) cfg.qd_std = vec_from_json(n["qd_std"], "config.noise.qd_std");
    if (n.contains("qdd_std")) cfg.qdd_std = vec_from_json(n["qdd_std"], "config.noise.qdd_std");
  }
  if (j.contains("chart_D") && !j["chart_D"].is_null())
    cfg.chart_D = mat_from_json(j["chart_D"], "config.chart_D");
  if (j.contains("estimators")) {
    if (!j["estimators"].is_array()) throw ValidationError("config.estimators: expected array");
    for (const auto& e : j["estimators"]) {
      require_keys(e, {"kind", "rho", "nominal", "enforce_consistency"}, "config.estimators[]");
      EstimatorConfig ec;
      if (!e.contains("kind")) throw ValidationError("config.estimators[]: missing 'kind'");
      try {
        ec.kind = estimator_kind_from_string(e["kind"].get<std::string>());
      } catch (const std::exception& ex) {
        throw ValidationError(ex.what());
      }
      if (e.contains("rho")) ec.rho = e["rho"].get<double>();
      if (e.contains("nominal"))
        ec.nominal = vec_from_json(e["nominal"], "config.estimators[].nominal");
      if (e.contains("enforce_consistency"))
        ec.enforce_consistency = e["enforce_consistency"].get<bool>();
      cfg.estimators.push_back(std::move(ec));
    }
  }
  if (j.contains("downsample")) {
    const json& d = j["downsample"];
    require_keys(d, {"policy", "target"}, "config.downsample");
    if (d.contains("policy")) {
      const std::string p = d["policy"].get<std::string>();
      if (p == "uniform")
        cfg.downsample.policy = DownsamplePolicy::Uniform;
      else if (p == "random")
        cfg.downsample.policy = DownsamplePolicy::SeededRandom;
      else
        throw ValidationError("config.downsample.policy: unknown '" + p + "'");
    }
    if (d.contains("target")) cfg.downsample.target = d["target"].get<int>();
  }
  if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  cfg.validate(make_mechanism(cfg.mechanism));
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["mechanism"] = cfg.mechanism;
  j["duration"] = cfg.duration;
  j["rate"] = cfg.rate;
  j["train_trajectories"] = cfg.train_trajectories;
  j["test_trajectories"] = cfg.test_trajectories;
  json noise;
  noise["tau_std"] = vec_to_json(cfg.tau_std);
  noise["q_std"] = vec_to_json(cfg.q_std);
  noise["qd_std"] = vec_to_json(cfg.qd_std);
  noise["qdd_std"] = vec_to_json(cfg.qdd_std);
  j["noise"] = std::move(noise);
  if (cfg.chart_D) j["chart_D"] = mat_to_json(*cfg.chart_D);
  json ests = json::array();
  for (const auto& e : cfg.estimators) {
    json je;
    je["kind"] = to_string(e.kind);
    je["rho"] = e.rho;
    if (e.nominal) je["nominal"] = vec_to_json(*e.nominal);
    je["enforce_consistency"] = e.enforce_consistency;
    ests.push_back(std::move(je));
  }
  j["estimators"] = std::move(ests);
  j["downsample"] = {
      {"policy", cfg.downsample.policy == DownsamplePolicy::Uniform ? "uniform" : "random"},
      {"target", cfg.downsample.target}};
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ValidationError("bad config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

// ---- manifest -------------------------------------------------------------

uint64_t fnv1a_hash(const std::string& bytes) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t hash_file(const std::filesystem::path& path) { return fnv1a_hash(read_text(path)); }

void write_manifest(const std::filesystem::path& dir,
                    const std::vector<std::filesystem::path>& files) {
  json j;
  json arts = json::array();
  for (const auto& f : files) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, hash_file(f));
    arts.push_back({{"file", f.filename().string()}, {"fnv1a64", buf}});
  }
  j["artifacts"] = std::move(arts);
  write_text(dir / "manifest.json", j.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open for writing: " + path.string());
  os << text;
  if (!os) throw ValidationError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace dmid::io
