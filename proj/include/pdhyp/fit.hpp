#pragma once

#include "json.hpp"

#include <string>
#include <vector>

namespace pdhyp {

// y ~ A t^slope fitted by least squares in log-log coordinates.
struct PowerFit {
  double slope = 0.0;
  double intercept = 0.0;  // log A
  double stderr_slope = 0.0;
  double ci_low = 0.0;  // 95% Student-t interval
  double ci_high = 0.0;
  double r2 = 0.0;
  int points = 0;
  double t_min = 0.0;
  double t_max = 0.0;
};

inline constexpr int kMinFitPoints = 8;

// Uses samples with t_min <= t <= t_max and y > 0. Throws FitError with
// fewer than kMinFitPoints usable samples or a degenerate window.
PowerFit fit_power_law(const std::vector<double>& t, const std::vector<double>& y, double t_min, double t_max);

nlohmann::json to_json(const PowerFit& f);
PowerFit power_fit_from_json(const nlohmann::json& j);

// n points log-spaced on [a, b] inclusive.
std::vector<double> log_space(double a, double b, int n);

}  // namespace pdhyp
