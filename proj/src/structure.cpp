#include "pdhyp/structure.hpp"

#include "pdhyp/coords.hpp"
#include "pdhyp/eigenstructure.hpp"
#include "pdhyp/fd.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace pdhyp {

std::string to_string(Status s) {
  switch (s) {
    case Status::Pass: return "pass";
    case Status::Fail: return "fail";
    default: return "skipped";
  }
}

Status status_from_string(const std::string& s) {
  if (s == "pass") return Status::Pass;
  if (s == "fail") return Status::Fail;
  return Status::Skipped;
}

namespace {

bool analytic(const CheckOptions& o) { return o.mode == DerivativeMode::Analytic; }

// Residual limits calibrated to central differences; closed-form
// derivatives tighten the derivative-based ones.
double limit(const std::string& name, const CheckOptions& o) {
  const bool a = analytic(o);
  if (name == "A1") return 1e-8;
  if (name == "A2") return a ? 1e-8 : 1e-7;
  if (name == "A3") return 1e-6;
  if (name == "A4") return a ? 1e-10 : 1e-9;
  if (name == "A4_margin") return 1e-6;
  if (name == "B") return a ? 1e-10 : 1e-9;
  if (name == "WD1" || name == "WD2") return 1e-8;
  if (name == "D1" || name == "D2") return a ? 1e-8 : 1e-7;
  if (name == "D3") return a ? 1e-10 : 1e-9;
  return 0.0;
}

Verdict make(const std::string& name, double value, double thr, bool pass_if_below) {
  Verdict v;
  v.name = name;
  v.value = value;
  v.threshold = thr;
  v.status = (pass_if_below ? value < thr : value >= thr) ? Status::Pass : Status::Fail;
  return v;
}

Verdict skipped(const std::string& name, const std::string& why) {
  Verdict v;
  v.name = name;
  v.status = Status::Skipped;
  v.note = why;
  return v;
}

std::vector<Vec> states(const SystemSpec& sys, const CheckOptions& o) { return sample_states(sys.n, o.plan); }
std::vector<Vec> directions(const SystemSpec& sys, const CheckOptions& o) {
  return direction_grid(sys.d, o.plan.n_directions);
}

Mat grad_q(const SystemSpec& sys, const Vec& u, const CheckOptions& o) { return source_jacobian(sys, u, o.mode); }

double lambda1(const SystemSpec& sys, const Vec& u, const Vec& w) { return eigen_decompose(sys, u, w).lambda(0); }

}  // namespace

const Verdict& StructureReport::get(const std::string& name) const {
  for (const auto& v : verdicts)
    if (v.name == name) return v;
  throw Error("report has no verdict named " + name);
}

bool StructureReport::all_passed() const {
  for (const auto& v : verdicts)
    if (v.status == Status::Fail) return false;
  return true;
}

Verdict check_A1(const SystemSpec& sys, const CheckOptions& opt) {
  const int m = sys.n - sys.r;
  const Mat dd = grad_q(sys, Vec::Zero(sys.n), opt).bottomRightCorner(m, m);
  Eigen::JacobiSVD<Mat> svd(dd);
  Verdict v = make("A1", svd.singularValues()(m - 1), limit("A1", opt), false);
  std::ostringstream os;
  os << "smallest singular value of the damped block of grad Q(0); det = " << dd.determinant();
  v.note = os.str();
  return v;
}

Verdict check_A2(const SystemSpec& sys, const CheckOptions& opt) {
  if (!sys.has_entropy()) return skipped("A2", "no entropy pair supplied");
  double worst = 0.0;
  Vec wit;
  for (const Vec& u : states(sys, opt)) {
    const Vec ge = entropy_gradient(sys, u, opt.mode);
    for (int k = 0; k < sys.d; ++k) {
      const Vec res = entropy_flux_gradient(sys, u, k, opt.mode) - sys.flux_jacobian(u, k).transpose() * ge;
      const double e = res.cwiseAbs().maxCoeff();
      if (e >= worst) worst = e, wit = u;
    }
  }
  Verdict v = make("A2", worst, limit("A2", opt), true);
  v.witness_state = wit;
  v.note = "max |grad psi^k - (A^k)^T grad eta|";
  return v;
}

Verdict check_A3(const SystemSpec& sys, const CheckOptions& opt) {
  if (!sys.entropy) return skipped("A3", "no entropy supplied");
  double ce = std::numeric_limits<double>::infinity();
  Vec wit;
  int used = 0;
  for (const Vec& u : states(sys, opt)) {
    const Vec q = sys.source(u);
    const double q2 = q.squaredNorm();
    if (std::sqrt(q2) < 1e-14) continue;
    ++used;
    const double ratio = -entropy_gradient(sys, u, opt.mode).dot(q) / q2;
    if (ratio < ce) ce = ratio, wit = u;
  }
  Verdict v;
  v.name = "A3";
  v.threshold = limit("A3", opt);
  v.value = ce;
  v.witness_state = wit;
  if (used == 0) {
    v.status = Status::Pass;
    v.vacuous = true;
    v.note = "Q vanishes on every sample; inequality holds vacuously";
  } else {
    v.status = ce >= v.threshold ? Status::Pass : Status::Fail;
    v.note = "c_e = min (-grad eta . Q) / |Q|^2 over " + std::to_string(used) + " samples";
  }
  return v;
}

Verdict check_A4(const SystemSpec& sys, const CheckOptions& opt) {
  const Mat th = grad_q(sys, Vec::Zero(sys.n), opt);
  double kernel = 0.0, margin = std::numeric_limits<double>::infinity();
  Vec wk, wm;
  int fam = -1;
  for (const Vec& w : directions(sys, opt)) {
    const EigenPacket p = eigen_decompose(sys, Vec::Zero(sys.n), w);
    const double k0 = (th * p.right.col(0)).norm() / p.right.col(0).norm();
    if (k0 >= kernel) kernel = k0, wk = w;
    for (int j = 1; j < sys.n; ++j) {
      const double mj = (th * p.right.col(j)).norm() / p.right.col(j).norm();
      if (mj < margin) margin = mj, wm = w, fam = j;
    }
  }
  Verdict v;
  v.name = "A4";
  v.threshold = limit("A4_margin", opt);
  v.value = margin;
  const bool kernel_ok = kernel < limit("A4", opt);
  const bool margin_ok = margin > v.threshold;
  v.status = kernel_ok && margin_ok ? Status::Pass : Status::Fail;
  std::ostringstream os;
  os << "Kawashima margin min_j>=2 |grad Q(0) r_j| / |r_j| = " << margin << "; |grad Q(0) r_1| = " << kernel;
  if (!kernel_ok) os << "; family 1 is not in the kernel";
  if (!margin_ok) os << "; family " << fam + 1 << " lies in the kernel";
  v.note = os.str();
  v.witness_direction = kernel_ok ? wm : wk;
  v.witness_family = kernel_ok ? fam : 0;
  return v;
}

Verdict check_B(const SystemSpec& sys, const CheckOptions& opt) {
  const int f = opt.isotropy_family;
  const auto dirs = directions(sys, opt);
  double worst = 0.0;
  Vec wu, ww;
  for (const Vec& u : states(sys, opt)) {
    const EigenPacket ref = eigen_decompose(sys, u, dirs.front());
    for (size_t i = 1; i < dirs.size(); ++i) {
      const EigenPacket p = eigen_decompose(sys, u, dirs[i]);
      const double e = std::max((p.right.col(f) - ref.right.col(f)).cwiseAbs().maxCoeff(),
                                (p.left.row(f) - ref.left.row(f)).cwiseAbs().maxCoeff());
      if (e > worst) worst = e, wu = u, ww = dirs[i];
    }
  }
  Verdict v = make("B", worst, limit("B", opt), true);
  v.witness_state = wu;
  v.witness_direction = ww;
  v.witness_family = f;
  v.note = "max over (u, omega) of the change in l_" + std::to_string(f + 1) + ", r_" + std::to_string(f + 1);
  return v;
}

namespace {

// Walks the r_1 curve through 0 in both directions. Returns the arc actually
// covered, which is shorter than the plan's when the curve leaves the domain.
template <class F>
double along_axis_trajectory(const SystemSpec& sys, const CheckOptions& opt, F&& visit) {
  const int steps = std::max(opt.plan.arc_steps, 2);
  double covered = opt.plan.arc;
  for (double sign : {1.0, -1.0}) {
    Vec u = Vec::Zero(sys.n);
    double s_prev = 0.0;
    for (int i = 1; i < steps; ++i) {
      const double s = opt.plan.arc * i / (steps - 1);
      try {
        u = trajectory(sys, u, sign * (s - s_prev));
      } catch (const DomainError&) {
        covered = std::min(covered, s_prev);
        break;
      }
      s_prev = s;
      visit(u, sign * s);
    }
  }
  return covered;
}

std::string arc_note(double covered, const CheckOptions& opt) {
  if (covered >= opt.plan.arc) return "";
  std::ostringstream os;
  os << "; arc truncated to " << covered << " at the domain boundary";
  return os.str();
}

}  // namespace

Verdict check_WD1(const SystemSpec& sys, const CheckOptions& opt) {
  double worst = 0.0;
  Vec wit;
  const double covered = along_axis_trajectory(sys, opt, [&](const Vec& u, double) {
    const double e = sys.source(u).cwiseAbs().maxCoeff();
    if (e >= worst) worst = e, wit = u;
  });
  Verdict v = make("WD1", worst, limit("WD1", opt), true);
  v.witness_state = wit;
  v.note = "max |Q| along the r_1 trajectory through the equilibrium" + arc_note(covered, opt);
  return v;
}

Verdict check_WD2(const SystemSpec& sys, const CheckOptions& opt) {
  const auto dirs = directions(sys, opt);
  std::vector<double> base;
  for (const Vec& w : dirs) base.push_back(lambda1(sys, Vec::Zero(sys.n), w));
  double worst = 0.0;
  Vec wu, ww;
  const double covered = along_axis_trajectory(sys, opt, [&](const Vec& u, double) {
    for (size_t i = 0; i < dirs.size(); ++i) {
      const double e = std::abs(lambda1(sys, u, dirs[i]) - base[i]);
      if (e >= worst) worst = e, wu = u, ww = dirs[i];
    }
  });
  Verdict v = make("WD2", worst, limit("WD2", opt), true);
  v.witness_state = wu;
  v.witness_direction = ww;
  v.note = "max |lambda_1(u(s), omega) - lambda_1(0, omega)|" + arc_note(covered, opt);
  return v;
}

Verdict check_D1(const SystemSpec& sys, const CheckOptions& opt) {
  double worst = 0.0;
  Vec wit;
  for (const Vec& u : states(sys, opt)) {
    const Vec r1 = first_right_eigenvector(sys, u);
    Vec e;
    if (analytic(opt) && sys.analytic.source_jacobian)
      e = sys.analytic.source_jacobian(u) * r1;
    else
      e = fd::directional(sys.source, u, r1);
    const double m = e.cwiseAbs().maxCoeff();
    if (m >= worst) worst = m, wit = u;
  }
  Verdict v = make("D1", worst, limit("D1", opt), true);
  v.witness_state = wit;
  v.note = "max |grad Q(u) r_1(u)|";
  return v;
}

Verdict check_D2(const SystemSpec& sys, const CheckOptions& opt) {
  double worst = 0.0;
  Vec wu, ww;
  const auto dirs = directions(sys, opt);
  for (const Vec& u : states(sys, opt)) {
    const Vec r1 = first_right_eigenvector(sys, u);
    for (const Vec& w : dirs) {
      double e;
      if (analytic(opt) && sys.analytic.first_eigenvalue_gradient)
        e = std::abs(sys.analytic.first_eigenvalue_gradient(u, w).dot(r1));
      else
        e = std::abs(fd::directional([&](const Vec& x) { return lambda1(sys, x, w); }, u, r1));
      if (e >= worst) worst = e, wu = u, ww = w;
    }
  }
  Verdict v = make("D2", worst, limit("D2", opt), true);
  v.witness_state = wu;
  v.witness_direction = ww;
  v.note = "max |grad lambda_1 . r_1| (linear degeneracy of family 1)";
  return v;
}

Verdict check_D3(const SystemSpec& sys, const CheckOptions& opt) {
  const Mat th = grad_q(sys, Vec::Zero(sys.n), opt);
  double worst = 0.0;
  Vec ww;
  for (const Vec& w : directions(sys, opt)) {
    const EigenPacket p = eigen_decompose(sys, Vec::Zero(sys.n), w);
    const double e = (p.left.row(0) * th).cwiseAbs().maxCoeff();
    if (e >= worst) worst = e, ww = w;
  }
  Verdict v = make("D3", worst, limit("D3", opt), true);
  v.witness_direction = ww;
  v.note = "max |l_1(0) grad Q(0)|";
  return v;
}

StructureReport run_full_report(const SystemSpec& sys_in, const CheckOptions& opt) {
  const SystemSpec sys = sys_in.normalized ? sys_in : normalize_equilibrium(sys_in);
  const long before = sys.out_of_domain->load();
  StructureReport rep;
  rep.system = sys.name;
  rep.mode = analytic(opt) ? "analytic" : "finite_difference";
  rep.plan = opt.plan;
  auto guarded = [&](const char* name, Verdict (*fn)(const SystemSpec&, const CheckOptions&)) {
    try {
      rep.verdicts.push_back(fn(sys, opt));
    } catch (const Error& e) {
      rep.verdicts.push_back(skipped(name, e.what()));
    }
  };
  guarded("A1", check_A1);
  guarded("A2", check_A2);
  guarded("A3", check_A3);
  Verdict& a3 = rep.verdicts.back();
  if (a3.vacuous) {
    a3.status = Status::Fail;
    a3.note += "; no dissipation to certify";
  }
  guarded("A4", check_A4);
  guarded("B", check_B);
  guarded("WD1", check_WD1);
  guarded("WD2", check_WD2);
  guarded("D1", check_D1);
  guarded("D2", check_D2);
  guarded("D3", check_D3);
  auto st = [&](const char* n) { return rep.get(n).status; };
  rep.implications.push_back("D1 => WD1");
  rep.implications.push_back("D2 => WD2");
  if (st("D1") == Status::Pass && st("WD1") == Status::Fail)
    rep.implications.push_back("inconsistent: D1 passed while WD1 failed");
  if (st("D2") == Status::Pass && st("WD2") == Status::Fail)
    rep.implications.push_back("inconsistent: D2 passed while WD2 failed");
  {
    const int m = sys.n - sys.r;
    rep.constants["det_theta_D"] =
        source_jacobian(sys, Vec::Zero(sys.n), opt.mode).bottomRightCorner(m, m).determinant();
    if (rep.get("A3").status != Status::Skipped) rep.constants["c_e"] = rep.get("A3").value;
    if (rep.get("A4").status != Status::Skipped) rep.constants["kawashima_margin"] = rep.get("A4").value;
    rep.constants["certified_radius"] = opt.plan.radius;
  }
  rep.out_of_domain_calls = sys.out_of_domain->load() - before;
  return rep;
}

nlohmann::json vec_to_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vec vec_from_json(const nlohmann::json& j) {
  Vec v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) a.push_back(vec_to_json(m.row(i).transpose()));
  return a;
}

Mat mat_from_json(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows ? static_cast<int>(j[0].size()) : 0;
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) m.row(i) = vec_from_json(j[i]).transpose();
  return m;
}

namespace {

nlohmann::json number(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  return x;
}

double number_from(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

}  // namespace

nlohmann::json to_json(const StructureReport& r) {
  nlohmann::json j;
  j["system"] = r.system;
  j["mode"] = r.mode;
  j["plan"] = {{"radius", r.plan.radius},       {"n_states", r.plan.n_states}, {"n_directions", r.plan.n_directions},
               {"arc", r.plan.arc},             {"arc_steps", r.plan.arc_steps}, {"seed", r.plan.seed}};
  nlohmann::json vs = nlohmann::json::array();
  for (const auto& v : r.verdicts) {
    nlohmann::json e;
    e["name"] = v.name;
    e["status"] = to_string(v.status);
    e["value"] = number(v.value);
    e["threshold"] = number(v.threshold);
    e["vacuous"] = v.vacuous;
    e["note"] = v.note;
    e["witness"] = {{"state", vec_to_json(v.witness_state)},
                    {"direction", vec_to_json(v.witness_direction)},
                    {"family", v.witness_family}};
    vs.push_back(e);
  }
  j["verdicts"] = vs;
  j["implications"] = r.implications;
  nlohmann::json c = nlohmann::json::object();
  for (const auto& [k, x] : r.constants) c[k] = number(x);
  j["constants"] = c;
  j["out_of_domain_calls"] = r.out_of_domain_calls;
  j["all_passed"] = r.all_passed();
  return j;
}

StructureReport structure_report_from_json(const nlohmann::json& j) {
  StructureReport r;
  r.system = j.at("system").get<std::string>();
  r.mode = j.at("mode").get<std::string>();
  const auto& p = j.at("plan");
  r.plan.radius = p.at("radius").get<double>();
  r.plan.n_states = p.at("n_states").get<int>();
  r.plan.n_directions = p.at("n_directions").get<int>();
  r.plan.arc = p.at("arc").get<double>();
  r.plan.arc_steps = p.at("arc_steps").get<int>();
  r.plan.seed = p.at("seed").get<std::uint64_t>();
  for (const auto& e : j.at("verdicts")) {
    Verdict v;
    v.name = e.at("name").get<std::string>();
    v.status = status_from_string(e.at("status").get<std::string>());
    v.value = number_from(e.at("value"));
    v.threshold = number_from(e.at("threshold"));
    v.vacuous = e.at("vacuous").get<bool>();
    v.note = e.at("note").get<std::string>();
    v.witness_state = vec_from_json(e.at("witness").at("state"));
    v.witness_direction = vec_from_json(e.at("witness").at("direction"));
    v.witness_family = e.at("witness").at("family").get<int>();
    r.verdicts.push_back(v);
  }
  r.implications = j.at("implications").get<std::vector<std::string>>();
  for (const auto& [k, x] : j.at("constants").items()) r.constants[k] = number_from(x);
  r.out_of_domain_calls = j.at("out_of_domain_calls").get<long>();
  return r;
}

}  // namespace pdhyp
