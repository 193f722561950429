#pragma once

#include "pdhyp/fit.hpp"

#include "json.hpp"

#include <string>
#include <utility>
#include <vector>

namespace pdhyp {

enum class Component { C, D };
enum class Regime { Linear, HighDim, HighDimRefined, WaveLq };
std::string to_string(Component c);
std::string to_string(Regime r);
Component component_from_string(const std::string& s);
Regime regime_from_string(const std::string& s);

// The Sobolev index is not tracked on the grid; predictions use this value
// unless told otherwise, which keeps the l - 1 caps inactive.
inline constexpr double kDefaultEll = 10.0;

struct DecayPrediction {
  int d = 2;
  double p = 1.0;
  double q = 1.0;
  double p_star = 2.0;
  double s = 0.0;
  double ell = kDefaultEll;
  Component component = Component::C;
  Regime regime = Regime::Linear;
  double exponent = 0.0;  // predicted log-log slope, <= 0
  double s1_star = 0.0;
  double s2_star = 0.0;
  double s3_star = 0.0;
  bool admissible = true;
  std::vector<std::string> violations;
};

DecayPrediction predicted_exponents(int d, double p, double q, double s, Component component, Regime regime,
                                    double ell = kDefaultEll);

nlohmann::json to_json(const DecayPrediction& p);
DecayPrediction prediction_from_json(const nlohmann::json& j);

struct SeriesFit {
  std::string series;
  bool ok = false;
  PowerFit fit;
  std::string error;
  bool has_prediction = false;
  double predicted = 0.0;
};

struct DecayTrace {
  std::string label;
  std::vector<double> t;
  std::vector<std::pair<std::string, std::vector<double>>> columns;
  std::vector<SeriesFit> fits;
  std::vector<DecayPrediction> predictions;
  bool saturated = false;
  double saturation_time = -1.0;
  bool blowup = false;
  double blowup_time = -1.0;
  std::string blowup_reason;
  std::vector<std::string> notes;

  // The returned reference is invalidated by the next add_column call.
  std::vector<double>& add_column(const std::string& name);
  const std::vector<double>& column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  // Fits a column over [t_min, t_max] and stores the result (errors are
  // recorded in the entry rather than thrown).
  const SeriesFit& fit(const std::string& name, double t_min, double t_max);
  const SeriesFit* find_fit(const std::string& name) const;
};

nlohmann::json to_json(const DecayTrace& t);
DecayTrace decay_trace_from_json(const nlohmann::json& j);
// Header "t,<columns...>", one row per time stamp, %.17g numbers.
std::string to_csv(const DecayTrace& t);
// Rebuilds t and columns from CSV text.
DecayTrace decay_trace_from_csv(const std::string& text);

}  // namespace pdhyp
