#include "pdhyp/cli.hpp"

#include "pdhyp/coords.hpp"
#include "pdhyp/damped_euler.hpp"
#include "pdhyp/dissipation.hpp"
#include "pdhyp/linear_decay.hpp"
#include "pdhyp/linear_system.hpp"
#include "pdhyp/solver.hpp"
#include "pdhyp/structure.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace fs = std::filesystem;

namespace pdhyp {

namespace {

constexpr const char* kVersion = "1.0.0";

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

nlohmann::json parse_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

// Flag values are kept as text and written into the config tree after
// parsing, so the file and the flags go through the same validation.
class Overrides {
 public:
  void number(CLI::App* app, const std::string& flag, const std::string& ptr, const std::string& help) {
    auto& slot = text_.emplace_back();
    auto* opt = app->add_option(flag, slot, help)->check(CLI::Number);
    items_.emplace_back(opt, [&slot, ptr](nlohmann::json& j) { j[nlohmann::json::json_pointer(ptr)] = std::stod(slot); });
  }
  void integer(CLI::App* app, const std::string& flag, const std::string& ptr, const std::string& help) {
    auto& slot = text_.emplace_back();
    auto* opt = app->add_option(flag, slot, help)->check(CLI::TypeValidator<long long>("INT"));
    items_.emplace_back(opt, [&slot, ptr](nlohmann::json& j) { j[nlohmann::json::json_pointer(ptr)] = std::stoll(slot); });
  }
  void text(CLI::App* app, const std::string& flag, const std::string& ptr, const std::string& help) {
    auto& slot = text_.emplace_back();
    auto* opt = app->add_option(flag, slot, help);
    items_.emplace_back(opt, [&slot, ptr](nlohmann::json& j) { j[nlohmann::json::json_pointer(ptr)] = slot; });
  }
  void flag(CLI::App* app, const std::string& flag, const std::string& ptr, const std::string& help) {
    auto* opt = app->add_flag(flag, help);
    items_.emplace_back(opt, [ptr](nlohmann::json& j) { j[nlohmann::json::json_pointer(ptr)] = true; });
  }
  void apply(nlohmann::json& j) const {
    for (const auto& [opt, fn] : items_)
      if (opt->count() > 0) fn(j);
  }

 private:
  std::deque<std::string> text_;
  std::vector<std::pair<CLI::Option*, std::function<void(nlohmann::json&)>>> items_;
};

void system_flags(CLI::App* app, Overrides& ov) {
  ov.text(app, "--system", "/system/name", "damped_euler or toy_2x2");
  ov.integer(app, "--d", "/system/d", "space dimension");
  ov.number(app, "--gamma", "/system/gamma", "adiabatic exponent");
  ov.number(app, "--cv", "/system/cv", "specific heat");
  ov.number(app, "--rho-star", "/system/rho_star", "equilibrium density");
  ov.number(app, "--damping", "/system/damping", "damping rate");
  ov.number(app, "--mass-source", "/system/mass_source", "quadratic mass source coefficient");
  ov.flag(app, "--undamped", "/system/undamped", "drop the damping term");
  ov.integer(app, "--seed", "/seed", "sampling seed");
}

void check_keys(const nlohmann::json& j, const nlohmann::json& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.contains(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::map<std::string, std::string> module_versions() {
  std::map<std::string, std::string> v;
  for (const char* m : {"system_core", "eigenstructure", "structure_checker", "normalized_coords",
                        "dissipation_algebra", "linear_decay", "spectral_solver", "cli_harness"})
    v[m] = kVersion;
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  return v;
}

std::string manifest_path(const std::string& out) {
  fs::path p(out);
  p.replace_extension(".manifest.json");
  return p.string();
}

struct Run {
  std::string name;
  nlohmann::json config;
  std::string config_path;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void manifest(const std::string& path, std::vector<std::string> inputs, std::vector<std::string> outputs) const {
    RunManifest m;
    m.subcommand = name;
    m.config_hash = hex64(fnv1a64(name + "\n" + config.dump()));
    m.seed = config.at("seed").get<std::uint64_t>();
    m.versions = module_versions();
    if (!config_path.empty()) inputs.insert(inputs.begin(), config_path);
    m.inputs = std::move(inputs);
    m.outputs = std::move(outputs);
    m.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file(path, to_json(m).dump(2) + "\n");
  }
};

std::string status_word(Status s) {
  switch (s) {
    case Status::Pass: return "PASS";
    case Status::Fail: return "FAIL";
    default: return "SKIP";
  }
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

void fit_lines(std::ostream& os, const DecayTrace& tr) {
  for (const auto& f : tr.fits) {
    os << "  " << pad(f.series, 14);
    if (!f.ok) {
      os << "no fit (" << f.error << ")\n";
      continue;
    }
    os << "measured " << format("%+.4f", f.fit.slope) << " [" << format("%+.4f", f.fit.ci_low) << ", "
       << format("%+.4f", f.fit.ci_high) << "]";
    if (f.has_prediction)
      os << "  predicted " << format("%+.4f", f.predicted) << "  diff " << format("%+.4f", f.fit.slope - f.predicted);
    os << "  on [" << format("%g", f.fit.t_min) << ", " << format("%g", f.fit.t_max) << "], " << f.fit.points
       << " points\n";
  }
}

DecayTrace trace_from_file(const std::string& path) {
  const auto j = parse_json(path);
  return decay_trace_from_json(j.contains("trace") ? j.at("trace") : j);
}

CheckOptions check_options(const nlohmann::json& cfg) {
  const auto& c = cfg.at("check");
  CheckOptions o;
  o.plan.radius = c.at("radius").get<double>();
  o.plan.n_states = c.at("samples").get<int>();
  o.plan.n_directions = c.at("directions").get<int>();
  o.plan.arc = c.at("arc").get<double>();
  o.plan.arc_steps = c.at("arc_steps").get<int>();
  o.plan.seed = cfg.at("seed").get<std::uint64_t>();
  o.mode = c.at("analytic").get<bool>() ? DerivativeMode::Analytic : DerivativeMode::FiniteDifference;
  o.isotropy_family = c.at("isotropy_family").get<int>();
  return o;
}

int run_check(const Run& run, const std::string& out_path, const std::string& k_path, std::ostream& out) {
  const auto& cfg = run.config;
  const SystemSpec sys = system_from_config(cfg.at("system"));
  const StructureReport rep = run_full_report(sys, check_options(cfg));
  write_file(out_path, to_json(rep).dump(2) + "\n");
  out << "structure report for " << rep.system << " (" << rep.mode << ")\n";
  for (const auto& v : rep.verdicts) {
    out << "  " << pad(v.name, 6) << status_word(v.status) << "  value " << format("%.3e", v.value) << "  threshold "
        << format("%.3e", v.threshold);
    if (!v.note.empty()) out << "  " << v.note;
    out << "\n";
  }
  for (const auto& [k, v] : rep.constants) out << "  " << k << " = " << format("%.6g", v) << "\n";
  bool ok = rep.all_passed();
  std::vector<std::string> outputs{out_path};
  if (!k_path.empty()) {
    const auto& c = cfg.at("check");
    CompensatorOptions co;
    co.directions = c.at("compensator_directions").get<int>();
    co.variant = compensator_variant_from_string(c.at("compensator_variant").get<std::string>());
    co.norm_bound = c.at("norm_bound").get<double>();
    const auto ts = build_transformed(sys);
    const CompensatorK K = build_compensator_table(*ts, co);
    write_file(k_path, to_json(K).dump(2) + "\n");
    out << "compensator (" << to_string(K.variant) << ", " << K.slices.size() << " directions): c_k = "
        << format("%.6g", K.c_k) << (K.passed ? "  PASS\n" : "  FAIL\n");
    ok = ok && K.passed;
    outputs.push_back(k_path);
  }
  out << (ok ? "all checks passed\n" : "some checks failed\n");
  run.manifest(manifest_path(out_path), {}, outputs);
  return ok ? 0 : 1;
}

int run_coords(const Run& run, const std::string& out_path, std::ostream& out) {
  const auto& cfg = run.config;
  const auto& c = cfg.at("coords");
  const SystemSpec sys = system_from_config(cfg.at("system"));
  const auto ts = build_transformed(sys);
  int code = 0;
  if (c.at("verify").get<bool>()) {
    const ChartReport rep =
        verify_chart(*ts, c.at("samples").get<int>(), cfg.at("seed").get<std::uint64_t>(), c.at("radius").get<double>());
    write_file(out_path, to_json(rep).dump(2) + "\n");
    out << "chart check on " << rep.samples << " samples (chart radius " << format("%g", rep.radius) << ")\n";
    out << "  |J(0) - I|            " << format("%.3e", rep.jacobian_at_origin) << "\n";
    out << "  round trip            " << format("%.3e", rep.roundtrip) << "\n";
    out << "  lower first column    " << format("%.3e", rep.lower_first_column) << "\n";
    out << "  first diagonal        " << format("%.3e", rep.first_diagonal) << "\n";
    out << "  first right vector    " << format("%.3e", rep.right_first) << "\n";
    out << "  first left column     " << format("%.3e", rep.left_first_column) << "\n";
    out << "  damping layout        " << format("%.3e", rep.theta_layout) << "\n";
    out << "  max condition number  " << format("%.3g", rep.max_condition) << "\n";
    out << (rep.passed ? "chart PASS\n" : "chart FAIL\n");
    code = rep.passed ? 0 : 1;
  } else {
    nlohmann::json j{{"system", sys.name},
                     {"n", ts->n()},
                     {"r", ts->r()},
                     {"chart_radius", ts->chart().radius()},
                     {"max_condition", ts->chart().max_condition()},
                     {"transform", mat_to_json(ts->pre().transform)},
                     {"theta", mat_to_json(ts->theta())}};
    write_file(out_path, j.dump(2) + "\n");
    out << "chart built: n = " << ts->n() << ", r = " << ts->r() << ", radius " << format("%g", ts->chart().radius())
        << "\n";
  }
  run.manifest(manifest_path(out_path), {}, {out_path});
  return code;
}

int run_lindecay(const Run& run, const std::string& out_path, std::string json_path, std::ostream& out) {
  const auto& cfg = run.config;
  const auto& c = cfg.at("lindecay");
  nlohmann::json sys_cfg = cfg.at("system");
  // The chart needs the damped system; the undamped symbol drops Theta.
  const bool undamped = sys_cfg.value("undamped", false);
  sys_cfg["undamped"] = false;
  const auto ts = build_transformed(system_from_config(sys_cfg));
  LinearSymbol sym = linear_symbol(*ts);
  if (undamped) sym = without_damping(sym);
  LinearExperiment ex;
  ex.p = c.at("p").get<double>();
  ex.alpha = c.at("alpha").get<double>();
  ex.t_min = c.at("tmin").get<double>();
  ex.t_max = c.at("tmax").get<double>();
  ex.samples = c.at("samples").get<int>();
  ex.width = c.at("width").get<double>();
  const Component comp = component_from_string(c.at("component").get<std::string>());
  const DecayTrace tr = linear_lp_decay_experiment(sym, ex);
  if (json_path.empty()) json_path = fs::path(out_path).replace_extension(".json").string();
  write_file(out_path, to_csv(tr));
  write_file(json_path, to_json(tr).dump(2) + "\n");
  out << "linear decay " << tr.label << "  p = " << format("%g", ex.p) << "  alpha = " << format("%g", ex.alpha)
      << "\n";
  fit_lines(out, tr);
  const auto* f = tr.find_fit(comp == Component::C ? "norm_C" : "norm_D");
  int code = 0;
  if (f == nullptr || !f->ok) {
    out << "component " << to_string(comp) << ": no fit\n";
    code = 1;
  } else {
    out << "component " << to_string(comp) << ": slope " << format("%+.4f", f->fit.slope) << "\n";
  }
  run.manifest(manifest_path(out_path), {}, {out_path, json_path});
  return code;
}

int run_simulate(const Run& run, const std::string& out_dir, std::ostream& out) {
  const auto& cfg = run.config;
  const SimConfig sim = sim_config_from_json(cfg.at("simulate"));
  const SystemSpec sys = system_from_config(cfg.at("system"));
  const Simulator s(sys, sim);
  const SimResult res = s.run();
  const std::string csv = (fs::path(out_dir) / "trace.csv").string();
  const std::string json = (fs::path(out_dir) / "trace.json").string();
  write_file(csv, to_csv(res.trace));
  nlohmann::json j{{"trace", to_json(res.trace)},
                   {"initial_norms", to_json(res.initial)},
                   {"steps", res.steps},
                   {"config", cfg}};
  write_file(json, j.dump(2) + "\n");
  out << "simulation " << res.trace.label << ": " << res.trace.t.size() << " records, " << res.steps << " steps\n";
  fit_lines(out, res.trace);
  out << "  saturated " << (res.trace.saturated ? "yes" : "no") << ", blow-up "
      << (res.trace.blowup ? "yes (" + res.trace.blowup_reason + ")" : std::string("no")) << "\n";
  for (const auto& n : res.trace.notes) out << "  " << n << "\n";
  std::vector<std::string> outputs{csv, json};
  if (!sim.snapshot_dir.empty()) outputs.push_back(sim.snapshot_dir);
  run.manifest((fs::path(out_dir) / "manifest.json").string(), {}, outputs);
  return 0;
}

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const DimensionError*>(&e)) return "DimensionError";
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  if (dynamic_cast<const HyperbolicityError*>(&e)) return "HyperbolicityError";
  if (dynamic_cast<const DegeneracyError*>(&e)) return "DegeneracyError";
  if (dynamic_cast<const StructureError*>(&e)) return "StructureError";
  if (dynamic_cast<const FitError*>(&e)) return "FitError";
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return "ConfigError";
  return "Error";
}

}  // namespace

nlohmann::json default_config() {
  return {{"seed", 1},
          {"system",
           {{"name", "damped_euler"},
            {"d", 2},
            {"gamma", 2.0},
            {"cv", 1.0},
            {"rho_star", 1.0},
            {"S_star", 0.0},
            {"damping", 1.0},
            {"mass_source", 0.0},
            {"undamped", false}}},
          {"check",
           {{"radius", 0.1},
            {"samples", 256},
            {"directions", 64},
            {"arc", 0.1},
            {"arc_steps", 21},
            {"analytic", false},
            {"isotropy_family", 0},
            {"compensator_directions", 64},
            {"compensator_variant", "damped_block"},
            {"norm_bound", 10.0}}},
          {"coords", {{"samples", 200}, {"radius", 0.1}, {"verify", false}}},
          {"lindecay",
           {{"p", 1.0}, {"alpha", 0.0}, {"component", "C"}, {"tmin", 10.0}, {"tmax", 100.0}, {"samples", 32},
            {"width", 0.0}}},
          {"simulate", to_json(SimConfig{})}};
}

nlohmann::json resolve_config(const nlohmann::json& file) {
  nlohmann::json cfg = default_config();
  if (file.is_null()) return cfg;
  check_keys(file, cfg, "config");
  for (auto it = file.begin(); it != file.end(); ++it) {
    const std::string& key = it.key();
    if (key == "seed") {
      if (!it->is_number_integer() || it->get<long long>() < 0)
        throw ConfigError("seed must be a non-negative integer");
      cfg["seed"] = *it;
    } else if (key == "simulate") {
      cfg["simulate"] = to_json(sim_config_from_json(*it));
    } else {
      check_keys(*it, cfg[key], "section '" + key + "'");
      for (auto kv = it->begin(); kv != it->end(); ++kv) {
        const auto& def = cfg[key][kv.key()];
        const bool same = (def.is_number() && kv->is_number()) || def.type() == kv->type();
        if (!same) throw ConfigError("wrong type for '" + key + "." + kv.key() + "'");
        cfg[key][kv.key()] = *kv;
      }
    }
  }
  return cfg;
}

SystemSpec system_from_config(const nlohmann::json& s) {
  const std::string name = s.value("name", std::string("damped_euler"));
  if (name == "damped_euler") {
    DampedEulerOptions o;
    o.d = s.value("d", 2);
    o.eos.gamma = s.value("gamma", 2.0);
    o.eos.cv = s.value("cv", 1.0);
    o.rho_star = s.value("rho_star", 1.0);
    o.S_star = s.value("S_star", 0.0);
    o.damping = s.value("damping", 1.0);
    o.mass_source = s.value("mass_source", 0.0);
    o.undamped = s.value("undamped", false);
    return builtin_damped_euler(o);
  }
  if (name == "toy_2x2") return toy_two_by_two();
  throw ConfigError("unknown system '" + name + "'");
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

nlohmann::json to_json(const RunManifest& m) {
  return {{"subcommand", m.subcommand}, {"config_hash", m.config_hash}, {"seed", m.seed},
          {"versions", m.versions},     {"inputs", m.inputs},           {"outputs", m.outputs},
          {"wall_clock", m.wall_clock}};
}

RunManifest run_manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.subcommand = j.at("subcommand").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.versions = j.at("versions").get<std::map<std::string, std::string>>();
    m.inputs = j.at("inputs").get<std::vector<std::string>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.wall_clock = j.at("wall_clock").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  return m;
}

std::string render_report(const ReportInputs& in) {
  std::vector<std::string> missing;
  for (const auto* p : {&in.structure, &in.compensator, &in.linear, &in.nonlinear})
    if (p->empty() || !fs::exists(*p)) missing.push_back(p->empty() ? "(unset)" : *p);
  if (!missing.empty()) {
    std::string msg = "missing artifacts:";
    for (const auto& m : missing) msg += " " + m;
    throw ConfigError(msg);
  }
  const StructureReport rep = structure_report_from_json(parse_json(in.structure));
  const CompensatorK K = compensator_from_json(parse_json(in.compensator));
  const DecayTrace lin = trace_from_file(in.linear);
  const DecayTrace non = trace_from_file(in.nonlinear);

  std::ostringstream os;
  os << "Structure: " << rep.system << " (" << rep.mode << "), " << (rep.all_passed() ? "all passed" : "failures")
     << "\n";
  for (const auto& v : rep.verdicts)
    os << "  " << pad(v.name, 6) << status_word(v.status) << "  value " << format("%.3e", v.value) << "  threshold "
       << format("%.3e", v.threshold) << "\n";
  for (const auto& [k, v] : rep.constants) os << "  " << k << " = " << format("%.6g", v) << "\n";
  os << "\nCompensator: " << to_string(K.variant) << ", " << K.slices.size() << " directions, c_k = "
     << format("%.6g", K.c_k) << ", skew residual " << format("%.2e", K.skew_residual) << ", "
     << (K.passed ? "PASS" : "FAIL") << "\n";
  os << "\nLinear decay exponents (" << lin.label << ")\n";
  fit_lines(os, lin);
  os << "\nNonlinear decay exponents (" << non.label << ")\n";
  fit_lines(os, non);
  os << "  saturated " << (non.saturated ? "yes at t = " + format("%g", non.saturation_time) : std::string("no"))
     << ", blow-up " << (non.blowup ? "yes at t = " + format("%g", non.blowup_time) : std::string("no")) << "\n";
  for (const auto& n : non.notes) os << "  " << n << "\n";
  return os.str();
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structure checks, decay experiments and simulations for partially dissipative systems", "pdhyp"};
  app.require_subcommand(1, 1);

  Overrides ov;
  std::string config_path;
  std::string out_path;
  std::string k_path;
  std::string json_path;
  std::string out_dir = ".";
  ReportInputs rin{"report.json", "compensator.json", "linear.json", "trace.json"};

  auto* check = app.add_subcommand("check", "run the structure conditions on a system");
  check->add_option("--config", config_path, "JSON config file");
  system_flags(check, ov);
  ov.number(check, "--radius", "/check/radius", "sample ball radius");
  ov.integer(check, "--samples", "/check/samples", "number of sample states");
  ov.integer(check, "--directions", "/check/directions", "number of sample directions");
  ov.flag(check, "--analytic", "/check/analytic", "use analytic derivatives");
  ov.text(check, "--variant", "/check/compensator_variant", "damped_block or printed_block");
  check->add_option("--out", out_path, "structure report JSON (default report.json)");
  check->add_option("--compensator-out", k_path, "also build the compensator table here");

  auto* coords = app.add_subcommand("coords", "build the normalized chart");
  coords->add_option("--config", config_path, "JSON config file");
  system_flags(coords, ov);
  ov.flag(coords, "--verify", "/coords/verify", "measure the chart residuals");
  ov.integer(coords, "--samples", "/coords/samples", "number of sample states");
  ov.number(coords, "--radius", "/coords/radius", "sample ball radius");
  coords->add_option("--out", out_path, "chart report JSON");

  auto* lin = app.add_subcommand("lindecay", "linearized decay experiment");
  lin->add_option("--config", config_path, "JSON config file");
  system_flags(lin, ov);
  ov.number(lin, "--p", "/lindecay/p", "Lebesgue exponent of the data");
  ov.number(lin, "--alpha", "/lindecay/alpha", "derivative order");
  ov.text(lin, "--component", "/lindecay/component", "C or D");
  ov.number(lin, "--tmin", "/lindecay/tmin", "fit window start");
  ov.number(lin, "--tmax", "/lindecay/tmax", "fit window end");
  ov.integer(lin, "--time-samples", "/lindecay/samples", "number of log-spaced times");
  ov.number(lin, "--width", "/lindecay/width", "Gaussian width");
  lin->add_option("--out", out_path, "trace CSV (default linear.csv)");
  lin->add_option("--json", json_path, "trace JSON (default: CSV path with .json)");

  auto* sim = app.add_subcommand("simulate", "nonlinear pseudo-spectral run");
  sim->add_option("--config", config_path, "JSON config file");
  system_flags(sim, ov);
  ov.integer(sim, "--N", "/simulate/N", "points per axis");
  ov.number(sim, "--side", "/simulate/side", "box side");
  ov.number(sim, "--t-end", "/simulate/t_end", "final time");
  ov.number(sim, "--record-every", "/simulate/record_every", "record interval");
  ov.number(sim, "--amplitude", "/simulate/initial/amplitude", "data amplitude");
  ov.number(sim, "--width", "/simulate/initial/width", "data width");
  ov.text(sim, "--mode", "/simulate/mode", "original, chart or linearized");
  ov.text(sim, "--integrator", "/simulate/integrator", "if_rk4 or rk4");
  ov.text(sim, "--snapshots", "/simulate/snapshot_dir", "directory for binary snapshots");
  sim->add_option("--out-dir", out_dir, "directory for trace.csv and trace.json");

  auto* rep = app.add_subcommand("report", "summarize measured against predicted exponents");
  rep->add_option("--structure", rin.structure, "structure report JSON");
  rep->add_option("--compensator", rin.compensator, "compensator table JSON");
  rep->add_option("--linear", rin.linear, "linear trace JSON");
  rep->add_option("--nonlinear", rin.nonlinear, "nonlinear trace JSON");
  rep->add_option("--out", out_path, "also write the summary here");

  if (!args.empty() && !args[0].empty() && args[0][0] != '-') {
    if (app.get_subcommand_no_throw(args[0]) == nullptr) {
      err << "error: unknown subcommand '" << args[0] << "'\n" << app.help();
      return 2;
    }
  }
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (sub == rep) {
      const std::string text = render_report(rin);
      out << text;
      if (!out_path.empty()) write_file(out_path, text);
      return 0;
    }
    Run run;
    run.name = sub->get_name();
    run.config_path = config_path;
    nlohmann::json file = config_path.empty() ? nlohmann::json::object() : parse_json(config_path);
    ov.apply(file);
    run.config = resolve_config(file);
    if (sub == check) return run_check(run, out_path.empty() ? "report.json" : out_path, k_path, out);
    if (sub == coords) return run_coords(run, out_path.empty() ? "chart_report.json" : out_path, out);
    if (sub == lin) return run_lindecay(run, out_path.empty() ? "linear.csv" : out_path, json_path, out);
    return run_simulate(run, out_dir, out);
  } catch (const std::exception& e) {
    err << nlohmann::json{{"error", {{"type", error_type(e)}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, out, err);
}

}  // namespace pdhyp
