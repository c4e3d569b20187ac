#include "dmid/mechanism.hpp"

#include <cmath>

namespace dmid {

namespace {

void check_dim(const Sample& s, int n, bool need_qdd) {
  s.validate();
  if (s.dim() != n) throw std::invalid_argument("Mechanism: sample dimension mismatch");
  if (need_qdd && !s.has_qdd())
    throw std::invalid_argument("Mechanism: inertia-class sample missing qdd");
}

// --- pan-tilt -------------------------------------------------------------

ParamLayout pan_tilt_layout(const PanTilt& pt) {
  ParamLayout lay;
  lay.model_class = ModelClass::InertiaDominated;
  lay.entries.push_back({"m_l2", "point-mass-inertia", "kg m^2"});
  if (pt.gravity) lay.entries.push_back({"m_l", "first-moment", "kg m"});
  return lay;
}

Mat pan_tilt_regressor(const PanTilt& pt, const Sample& s) {
  const double phi = s.q(1);
  const double c = std::cos(phi), sn = std::sin(phi);
  const double thd = s.qd(0), phid = s.qd(1);
  const double thdd = s.qdd(0), phidd = s.qdd(1);
  Mat Y = Mat::Zero(2, pt.gravity ? 2 : 1);
  Y(0, 0) = c * c * thdd - 2.0 * c * sn * phid * thd;
  Y(1, 0) = phidd + c * sn * thd * thd;
  if (pt.gravity) Y(1, 1) = pt.g * c;
  return Y;
}

AffineMetric pan_tilt_metric(const PanTilt& pt, const Vec& q) {
  const double c = std::cos(q(1));
  std::vector<Mat> Mp;
  Mat M1 = Mat::Zero(2, 2);
  M1(0, 0) = c * c;
  M1(1, 1) = 1.0;
  Mp.push_back(M1);
  if (pt.gravity) Mp.push_back(Mat::Zero(2, 2));
  return AffineMetric(Mat::Zero(2, 2), std::move(Mp));
}

// --- two-link planar arm --------------------------------------------------
//
// Parameter order per link: m, hx = m*cx, hy = m*cy, Izz (about joint frame
// origin). Link 1 rotates about the fixed base, so its mass enters neither
// the kinetic energy nor gravity and column 0 is identically zero: a known
// nullspace direction of the regression.

ParamLayout arm_layout() {
  ParamLayout lay;
  lay.model_class = ModelClass::InertiaDominated;
  for (int link = 1; link <= 2; ++link) {
    const std::string k = std::to_string(link);
    lay.entries.push_back({"m" + k, "mass", "kg"});
    lay.entries.push_back({"h" + k + "x", "first-moment-x", "kg m"});
    lay.entries.push_back({"h" + k + "y", "first-moment-y", "kg m"});
    lay.entries.push_back({"I" + k, "rotational-inertia", "kg m^2"});
  }
  return lay;
}

Mat arm_regressor(const TwoLinkArm& a, const Sample& s) {
  const double q1 = s.q(0), q2 = s.q(1);
  const double qd1 = s.qd(0), qd2 = s.qd(1);
  const double dd1 = s.qdd(0), dd2 = s.qdd(1);
  const double s1 = std::sin(q1), c1 = std::cos(q1);
  const double s2 = std::sin(q2), c2 = std::cos(q2);
  const double s12 = std::sin(q1 + q2), c12 = std::cos(q1 + q2);
  const double l1 = a.l1, g = a.g;
  const double cross = 2.0 * qd1 * qd2 + qd2 * qd2;

  Mat Y = Mat::Zero(2, 8);
  // m1: fixed origin, no contribution
  Y(0, 1) = g * c1;               // h1x
  Y(0, 2) = -g * s1;              // h1y
  Y(0, 3) = dd1;                  // I1
  Y(0, 4) = l1 * l1 * dd1 + g * l1 * c1;  // m2
  Y(0, 5) = l1 * (2.0 * c2 * dd1 + c2 * dd2 - s2 * cross) + g * c12;   // h2x
  Y(1, 5) = l1 * (c2 * dd1 + s2 * qd1 * qd1) + g * c12;
  Y(0, 6) = l1 * (-2.0 * s2 * dd1 - s2 * dd2 - c2 * cross) - g * s12;  // h2y
  Y(1, 6) = l1 * (-s2 * dd1 + c2 * qd1 * qd1) - g * s12;
  Y(0, 7) = dd1 + dd2;            // I2
  Y(1, 7) = dd1 + dd2;
  return Y;
}

AffineMetric arm_metric(const TwoLinkArm& a, const Vec& q) {
  const double s2 = std::sin(q(1)), c2 = std::cos(q(1));
  const double l1 = a.l1;
  Mat coupling(2, 2);
  coupling << 2, 1, 1, 0;
  std::vector<Mat> Mp(8, Mat::Zero(2, 2));
  Mp[3](0, 0) = 1.0;             // I1
  Mp[4](0, 0) = l1 * l1;         // m2
  Mp[5] = l1 * c2 * coupling;    // h2x
  Mp[6] = -l1 * s2 * coupling;   // h2y
  Mp[7] = Mat::Ones(2, 2);       // I2
  return AffineMetric(Mat::Zero(2, 2), std::move(Mp));
}

// Planar pseudo-inertia [[I, hx, hy], [hx, m, 0], [hy, 0, m]]: PSD iff
// m, I >= 0 and m I >= hx^2 + hy^2, i.e. the central inertia is nonnegative.
AffineMatrix planar_pseudo_inertia(int d, int base) {
  std::vector<Mat> Mp(d, Mat::Zero(3, 3));
  Mp[base + 0](1, 1) = Mp[base + 0](2, 2) = 1.0;  // m
  Mp[base + 1](0, 1) = Mp[base + 1](1, 0) = 1.0;  // hx
  Mp[base + 2](0, 2) = Mp[base + 2](2, 0) = 1.0;  // hy
  Mp[base + 3](0, 0) = 1.0;                       // Izz
  return AffineMatrix(Mat::Zero(3, 3), std::move(Mp));
}

// --- three-link drag crawler ----------------------------------------------

ParamLayout crawler_layout() {
  ParamLayout lay;
  lay.model_class = ModelClass::DragDominated;
  for (int link = 1; link <= 3; ++link) {
    const std::string k = std::to_string(link);
    lay.entries.push_back({"clong" + k, "longitudinal-drag", "N s/m"});
    lay.entries.push_back({"clat" + k, "lateral-drag", "N s/m"});
  }
  lay.entries.push_back({"cjoint1", "joint-drag", "N m s/rad"});
  lay.entries.push_back({"cjoint2", "joint-drag", "N m s/rad"});
  return lay;
}

// Jacobians of the three link centers wrt (x, y, theta, alpha1, alpha2) and
// the link axis directions.
struct CrawlerKinematics {
  Mat J[3];       // 2x5 each
  Vec axis[3];    // unit axis u(angle_i)
  Vec normal[3];  // u'(angle_i)
};

CrawlerKinematics crawler_kinematics(const DragCrawler3& cr, const Vec& q) {
  const double th = q(2), a1 = q(3), a2 = q(4);
  auto u = [](double a) { return Vec{{std::cos(a), std::sin(a)}}; };
  auto du = [](double a) { return Vec{{-std::sin(a), std::cos(a)}}; };

  CrawlerKinematics k;
  const double ang[3] = {th + a1, th, th + a2};
  for (int i = 0; i < 3; ++i) {
    k.axis[i] = u(ang[i]);
    k.normal[i] = du(ang[i]);
    k.J[i] = Mat::Zero(2, 5);
    k.J[i](0, 0) = 1.0;
    k.J[i](1, 1) = 1.0;
  }
  // middle link center is the body point: J[1] done.
  // link 1 center: p = body - (L2/2) u(th) - (L1/2) u(th+a1)
  k.J[0].col(2) = -(cr.L2 / 2) * du(th) - (cr.L1 / 2) * du(th + a1);
  k.J[0].col(3) = -(cr.L1 / 2) * du(th + a1);
  // link 3 center: p = body + (L2/2) u(th) + (L3/2) u(th+a2)
  k.J[2].col(2) = (cr.L2 / 2) * du(th) + (cr.L3 / 2) * du(th + a2);
  k.J[2].col(4) = (cr.L3 / 2) * du(th + a2);
  return k;
}

AffineMetric crawler_metric(const DragCrawler3& cr, const Vec& q) {
  auto k = crawler_kinematics(cr, q);
  std::vector<Mat> Mp;
  Mp.reserve(8);
  for (int i = 0; i < 3; ++i) {
    Vec ju = k.J[i].transpose() * k.axis[i];
    Vec jn = k.J[i].transpose() * k.normal[i];
    Mp.push_back(ju * ju.transpose());
    Mp.push_back(jn * jn.transpose());
  }
  for (int j = 0; j < 2; ++j) {
    Mat E = Mat::Zero(5, 5);
    E(3 + j, 3 + j) = 1.0;
    Mp.push_back(E);
  }
  return AffineMetric(Mat::Zero(5, 5), std::move(Mp));
}

Mat crawler_regressor(const DragCrawler3& cr, const Sample& s) {
  AffineMetric am = crawler_metric(cr, s.q);
  Mat Y(5, 8);
  for (int p = 0; p < 8; ++p) Y.col(p) = am.Mp[p] * s.qd;
  return Y;
}

AffineMatrix scalar_block(int d, int idx) {
  std::vector<Mat> Mp(d, Mat::Zero(1, 1));
  Mp[idx](0, 0) = 1.0;
  return AffineMatrix(Mat::Zero(1, 1), std::move(Mp));
}

}  // namespace

std::string Mechanism::name() const {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PanTilt>)
          return m.gravity ? "pan_tilt_gravity" : "pan_tilt";
        else if constexpr (std::is_same_v<T, TwoLinkArm>) return "two_link_arm";
        else return "drag_crawler3";
      },
      v_);
}

ModelClass Mechanism::model_class() const {
  return std::holds_alternative<DragCrawler3>(v_) ? ModelClass::DragDominated
                                                  : ModelClass::InertiaDominated;
}

int Mechanism::dof() const {
  return std::holds_alternative<DragCrawler3>(v_) ? 5 : 2;
}

ParamLayout Mechanism::layout() const {
  return std::visit(
      [](const auto& m) -> ParamLayout {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PanTilt>) return pan_tilt_layout(m);
        else if constexpr (std::is_same_v<T, TwoLinkArm>) return arm_layout();
        else return crawler_layout();
      },
      v_);
}

DynamicParams Mechanism::ground_truth() const {
  return std::visit(
      [this](const auto& m) -> DynamicParams {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PanTilt>) {
          Vec v(m.gravity ? 2 : 1);
          v(0) = m.m * m.l * m.l;
          if (m.gravity) v(1) = m.m * m.l;
          return {v, layout()};
        } else if constexpr (std::is_same_v<T, TwoLinkArm>) {
          Vec v(8);
          v << m.m1, m.m1 * m.c1x, m.m1 * m.c1y, m.izz1,
               m.m2, m.m2 * m.c2x, m.m2 * m.c2y, m.izz2;
          return {v, layout()};
        } else {
          Vec v(8);
          v << m.clong[0], m.clat[0], m.clong[1], m.clat[1], m.clong[2], m.clat[2],
               m.cjoint[0], m.cjoint[1];
          return {v, layout()};
        }
      },
      v_);
}

std::vector<int> Mechanism::shape_coords() const {
  if (std::holds_alternative<DragCrawler3>(v_)) return {3, 4};
  return {0, 1};
}

std::vector<std::string> Mechanism::coordinate_names() const {
  if (std::holds_alternative<PanTilt>(v_)) return {"theta", "phi"};
  if (std::holds_alternative<TwoLinkArm>(v_)) return {"q1", "q2"};
  return {"x", "y", "theta", "alpha1", "alpha2"};
}

Mat Mechanism::regressor(const Sample& s) const {
  check_dim(s, dof(), model_class() == ModelClass::InertiaDominated);
  return std::visit(
      [&s](const auto& m) -> Mat {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PanTilt>) return pan_tilt_regressor(m, s);
        else if constexpr (std::is_same_v<T, TwoLinkArm>) return arm_regressor(m, s);
        else return crawler_regressor(m, s);
      },
      v_);
}

AffineMetric Mechanism::affine_metric(const Vec& q) const {
  if (q.size() != dof()) throw std::invalid_argument("affine_metric: dimension mismatch");
  return std::visit(
      [&q](const auto& m) -> AffineMetric {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PanTilt>) return pan_tilt_metric(m, q);
        else if constexpr (std::is_same_v<T, TwoLinkArm>) return arm_metric(m, q);
        else return crawler_metric(m, q);
      },
      v_);
}

std::vector<ConsistencyConstraint> Mechanism::consistency_constraints(
    const std::vector<Vec>& probe_configs) const {
  const int d = layout().size();
  std::vector<ConsistencyConstraint> out;
  if (std::holds_alternative<PanTilt>(v_)) {
    out.push_back({"point-mass inertia", scalar_block(d, 0), 0.0, false});
    if (d > 1) out.push_back({"first moment", scalar_block(d, 1), 0.0, false});
  } else if (std::holds_alternative<TwoLinkArm>(v_)) {
    out.push_back({"pseudo-inertia link 1", planar_pseudo_inertia(d, 0), 0.0, false});
    out.push_back({"pseudo-inertia link 2", planar_pseudo_inertia(d, 4), 0.0, false});
  } else {
    const ParamLayout lay = layout();
    for (int p = 0; p < d; ++p)
      out.push_back({"coefficient " + lay.entries[p].name, scalar_block(d, p), 0.0, false});
    int idx = 0;
    for (const auto& q : probe_configs) {
      out.push_back({"drag matrix probe " + std::to_string(idx++), affine_metric(q), 0.0, true});
    }
  }
  return out;
}

Vec Mechanism::feasible_seed() const {
  const int d = layout().size();
  if (std::holds_alternative<TwoLinkArm>(v_)) {
    Vec v(d);
    v << 1, 0, 0, 1, 1, 0, 0, 1;  // unit masses and inertias, centered mass
    return v;
  }
  return Vec::Ones(d);
}

std::vector<AffineMatrix> Mechanism::regularizer_blocks() const {
  const int d = layout().size();
  std::vector<AffineMatrix> out;
  if (std::holds_alternative<TwoLinkArm>(v_)) {
    out.push_back(planar_pseudo_inertia(d, 0));
    out.push_back(planar_pseudo_inertia(d, 4));
  } else {
    for (int p = 0; p < d; ++p) out.push_back(scalar_block(d, p));
  }
  return out;
}

}  // namespace dmid
