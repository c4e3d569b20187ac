#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmid {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ModelClass {
  InertiaDominated,  // tau = M(q) qdd + C(q,qd) qd + g(q), needs qdd
  DragDominated      // tau = M(q) qd, qdd ignored
};

inline const char* to_string(ModelClass mc) {
  return mc == ModelClass::InertiaDominated ? "inertia" : "drag";
}

struct ParamEntry {
  std::string name;
  std::string role;  // e.g. "mass", "first-moment-x", "longitudinal-drag"
  std::string unit;
};

struct ParamLayout {
  ModelClass model_class = ModelClass::InertiaDominated;
  std::vector<ParamEntry> entries;

  int size() const { return static_cast<int>(entries.size()); }
  bool operator==(const ParamLayout& o) const {
    if (model_class != o.model_class || entries.size() != o.entries.size()) return false;
    for (size_t i = 0; i < entries.size(); ++i)
      if (entries[i].name != o.entries[i].name) return false;
    return true;
  }
};

/// Parameter vector pi with a named, ordered layout.
struct DynamicParams {
  Vec values;
  ParamLayout layout;

  DynamicParams() = default;
  DynamicParams(Vec v, ParamLayout l) : values(std::move(v)), layout(std::move(l)) {
    if (values.size() != layout.size())
      throw std::invalid_argument("DynamicParams: values/layout length mismatch");
  }
};

/// One timestep of (q, qd, qdd, tau). tau is stored as covector components
/// in the dataset's chart.
struct Sample {
  double t = 0;
  Vec q, qd, qdd, tau;

  bool has_qdd() const { return qdd.size() > 0; }
  int dim() const { return static_cast<int>(q.size()); }

  void validate() const {
    const auto n = q.size();
    if (qd.size() != n || (tau.size() > 0 && tau.size() != n) ||
        (has_qdd() && qdd.size() != n))
      throw std::invalid_argument("Sample: inconsistent vector lengths");
  }
};

struct Dataset {
  std::vector<Sample> samples;
  int n = 0;
  double dt = 0;
  std::string chart_id = "base";
  std::vector<std::string> coordinate_names;
  std::vector<std::string> units;

  size_t size() const { return samples.size(); }

  void validate() const {
    if (samples.empty()) throw std::invalid_argument("Dataset: empty");
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& s : samples) {
      s.validate();
      if (s.tau.size() != n)
        throw std::invalid_argument("Dataset: sample missing tau");
      if (s.dim() != n) throw std::invalid_argument("Dataset: sample dimension mismatch");
      if (!(s.t > prev)) throw std::invalid_argument("Dataset: timestamps not strictly increasing");
      prev = s.t;
    }
  }
};

}  // namespace dmid
