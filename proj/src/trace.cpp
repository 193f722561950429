#include "pdhyp/trace.hpp"

#include "pdhyp/types.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace pdhyp {

std::string to_string(Component c) { return c == Component::C ? "C" : "D"; }

std::string to_string(Regime r) {
  switch (r) {
    case Regime::HighDim: return "high_dim";
    case Regime::HighDimRefined: return "high_dim_refined";
    case Regime::WaveLq: return "wave_lq";
    default: return "linear";
  }
}

Component component_from_string(const std::string& s) {
  if (s == "C" || s == "c") return Component::C;
  if (s == "D" || s == "d") return Component::D;
  throw ConfigError("unknown component '" + s + "' (expected C or D)");
}

Regime regime_from_string(const std::string& s) {
  if (s == "linear") return Regime::Linear;
  if (s == "high_dim") return Regime::HighDim;
  if (s == "high_dim_refined") return Regime::HighDimRefined;
  if (s == "wave_lq") return Regime::WaveLq;
  throw ConfigError("unknown regime '" + s + "'");
}

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

}  // namespace

DecayPrediction predicted_exponents(int d, double p, double q, double s, Component component, Regime regime,
                                    double ell) {
  DecayPrediction out;
  out.d = d;
  out.p = p;
  out.q = q;
  out.s = s;
  out.ell = ell;
  out.component = component;
  out.regime = regime;
  out.p_star = p < d ? std::min(2.0, d * p / (d - p)) : 2.0;
  out.s1_star = d * (1.0 - 1.0 / p) + 1.0;
  out.s2_star = std::min(d * (1.0 - 1.0 / p) + 1.0, ell - 1.0);
  out.s3_star = std::min({d * (0.5 + 1.0 / q - 1.0 / p) + 1.0, d * (1.0 - 1.0 / p) + 2.0, ell - 1.0});
  out.exponent = -0.5 * d * (1.0 / p - 0.5) - 0.5 * s - (component == Component::D ? 0.5 : 0.0);

  auto& v = out.violations;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) v.push_back(what);
  };
  need(p >= 1.0 && p <= 2.0, "1 <= p <= 2");
  need(s >= 0.0, "s >= 0");
  const bool is_d = component == Component::D;
  // interval [0, closed_cap] intersected with [0, open_cap)
  auto cap = [&](double closed_cap, double open_cap, const std::string& name) {
    need(s <= closed_cap + 1e-12, "s <= " + name + (is_d ? " - 1" : "") + " = " + fmt(closed_cap));
    need(s < open_cap, "s < " + fmt(open_cap));
  };
  auto ell_clause = [&] {
    need(ell > 0.5 * d + 1.0, "l > d/2 + 1");
    if (ell <= 3.0) need(p < 2.0 * d / (2.0 * (3.0 - ell) + d), "p < 2d/(2(3-l)+d) when l <= 3");
  };
  switch (regime) {
    case Regime::Linear:
      need(d >= 2, "d >= 2");
      break;
    case Regime::HighDim:
      need(d >= 3, "d >= 3");
      need(ell > 0.5 * d + 1.0, "l > d/2 + 1");
      if (!(p < 0.5 * d)) {
        v.push_back(d >= 5 ? "p < d/2" : "p < d/2 (the H^l-only clause with p = 2 needs d >= 5)");
      }
      if (is_d)
        cap(out.s1_star - 1.0, 0.5 * d - 1.0, "s1*");
      else
        cap(out.s1_star, 0.5 * d, "s1*");
      break;
    case Regime::HighDimRefined:
      need(d >= 3, "d >= 3");
      ell_clause();
      if (is_d)
        cap(out.s2_star - 1.0, 0.5 * d, "s2*");
      else
        cap(out.s2_star, 0.5 * d + 1.0, "s2*");
      break;
    case Regime::WaveLq:
      need(d >= 2, "d >= 2");
      need(p <= q && q <= 2.0, "p <= q <= 2");
      need(q < d, "q < d");
      ell_clause();
      if (is_d)
        cap(out.s3_star - 1.0, 0.5 * d, "s3*");
      else
        cap(out.s3_star, 0.5 * d + 1.0, "s3*");
      break;
  }
  out.admissible = v.empty();
  return out;
}

nlohmann::json to_json(const DecayPrediction& p) {
  return {{"d", p.d},
          {"p", p.p},
          {"q", p.q},
          {"p_star", p.p_star},
          {"s", p.s},
          {"ell", p.ell},
          {"component", to_string(p.component)},
          {"regime", to_string(p.regime)},
          {"exponent", p.exponent},
          {"s1_star", p.s1_star},
          {"s2_star", p.s2_star},
          {"s3_star", p.s3_star},
          {"admissible", p.admissible},
          {"violations", p.violations}};
}

DecayPrediction prediction_from_json(const nlohmann::json& j) {
  DecayPrediction p;
  p.d = j.at("d").get<int>();
  p.p = j.at("p").get<double>();
  p.q = j.at("q").get<double>();
  p.p_star = j.at("p_star").get<double>();
  p.s = j.at("s").get<double>();
  p.ell = j.at("ell").get<double>();
  p.component = component_from_string(j.at("component").get<std::string>());
  p.regime = regime_from_string(j.at("regime").get<std::string>());
  p.exponent = j.at("exponent").get<double>();
  p.s1_star = j.at("s1_star").get<double>();
  p.s2_star = j.at("s2_star").get<double>();
  p.s3_star = j.at("s3_star").get<double>();
  p.admissible = j.at("admissible").get<bool>();
  p.violations = j.at("violations").get<std::vector<std::string>>();
  return p;
}

std::vector<double>& DecayTrace::add_column(const std::string& name) {
  for (auto& c : columns)
    if (c.first == name) return c.second;
  columns.emplace_back(name, std::vector<double>{});
  return columns.back().second;
}

const std::vector<double>& DecayTrace::column(const std::string& name) const {
  for (const auto& c : columns)
    if (c.first == name) return c.second;
  throw Error("trace has no column " + name);
}

bool DecayTrace::has_column(const std::string& name) const {
  for (const auto& c : columns)
    if (c.first == name) return true;
  return false;
}

const SeriesFit& DecayTrace::fit(const std::string& name, double t_min, double t_max) {
  SeriesFit f;
  f.series = name;
  try {
    f.fit = fit_power_law(t, column(name), t_min, t_max);
    f.ok = true;
  } catch (const Error& e) {
    f.error = e.what();
  }
  for (auto& old : fits)
    if (old.series == name) {
      f.has_prediction = old.has_prediction;
      f.predicted = old.predicted;
      old = f;
      return old;
    }
  fits.push_back(f);
  return fits.back();
}

const SeriesFit* DecayTrace::find_fit(const std::string& name) const {
  for (const auto& f : fits)
    if (f.series == name) return &f;
  return nullptr;
}

namespace {

nlohmann::json num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double num_from(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

}  // namespace

nlohmann::json to_json(const DecayTrace& t) {
  nlohmann::json j;
  j["label"] = t.label;
  j["t"] = t.t;
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& [name, v] : t.columns) {
    nlohmann::json vals = nlohmann::json::array();
    for (double x : v) vals.push_back(num(x));
    cols.push_back({{"name", name}, {"values", vals}});
  }
  j["columns"] = cols;
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : t.fits) {
    nlohmann::json e = {{"series", f.series}, {"ok", f.ok}, {"error", f.error}, {"has_prediction", f.has_prediction},
                        {"predicted", f.predicted}};
    if (f.ok) e["fit"] = to_json(f.fit);
    fits.push_back(e);
  }
  j["fits"] = fits;
  nlohmann::json preds = nlohmann::json::array();
  for (const auto& p : t.predictions) preds.push_back(to_json(p));
  j["predictions"] = preds;
  j["flags"] = {{"saturated", t.saturated},
                {"saturation_time", t.saturation_time},
                {"blowup", t.blowup},
                {"blowup_time", t.blowup_time},
                {"blowup_reason", t.blowup_reason}};
  j["notes"] = t.notes;
  return j;
}

DecayTrace decay_trace_from_json(const nlohmann::json& j) {
  DecayTrace t;
  t.label = j.at("label").get<std::string>();
  t.t = j.at("t").get<std::vector<double>>();
  for (const auto& c : j.at("columns")) {
    auto& v = t.add_column(c.at("name").get<std::string>());
    for (const auto& x : c.at("values")) v.push_back(num_from(x));
  }
  for (const auto& e : j.at("fits")) {
    SeriesFit f;
    f.series = e.at("series").get<std::string>();
    f.ok = e.at("ok").get<bool>();
    f.error = e.at("error").get<std::string>();
    f.has_prediction = e.at("has_prediction").get<bool>();
    f.predicted = e.at("predicted").get<double>();
    if (f.ok) f.fit = power_fit_from_json(e.at("fit"));
    t.fits.push_back(f);
  }
  for (const auto& p : j.at("predictions")) t.predictions.push_back(prediction_from_json(p));
  const auto& fl = j.at("flags");
  t.saturated = fl.at("saturated").get<bool>();
  t.saturation_time = fl.at("saturation_time").get<double>();
  t.blowup = fl.at("blowup").get<bool>();
  t.blowup_time = fl.at("blowup_time").get<double>();
  t.blowup_reason = fl.at("blowup_reason").get<std::string>();
  t.notes = j.at("notes").get<std::vector<std::string>>();
  return t;
}

std::string to_csv(const DecayTrace& t) {
  std::string out = "t";
  for (const auto& c : t.columns) out += "," + c.first;
  out += "\n";
  char buf[40];
  for (size_t i = 0; i < t.t.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", t.t[i]);
    out += buf;
    for (const auto& c : t.columns) {
      const double x = i < c.second.size() ? c.second[i] : std::numeric_limits<double>::quiet_NaN();
      std::snprintf(buf, sizeof buf, ",%.17g", x);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

DecayTrace decay_trace_from_csv(const std::string& text) {
  DecayTrace t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV");
  std::vector<std::string> names;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) names.push_back(cell);
  }
  if (names.empty() || names[0] != "t") throw ConfigError("CSV must start with a 't' column");
  for (size_t k = 1; k < names.size(); ++k) t.add_column(names[k]);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    size_t k = 0;
    while (std::getline(ls, cell, ',')) {
      const double x = std::strtod(cell.c_str(), nullptr);
      if (k == 0)
        t.t.push_back(x);
      else if (k < names.size())
        t.columns[k - 1].second.push_back(x);
      ++k;
    }
    if (k != names.size()) throw ConfigError("CSV row has the wrong number of cells");
  }
  return t;
}

}  // namespace pdhyp
