#include "pdhyp/fit.hpp"

#include "pdhyp/types.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <sstream>

namespace pdhyp {

PowerFit fit_power_law(const std::vector<double>& t, const std::vector<double>& y, double t_min, double t_max) {
  if (t.size() != y.size()) throw DimensionError("fit: time and value series differ in length");
  std::vector<double> x, z;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_min || t[i] > t_max || !(y[i] > 0.0) || !(t[i] > 0.0) || !std::isfinite(y[i])) continue;
    x.push_back(std::log(t[i]));
    z.push_back(std::log(y[i]));
  }
  const int n = static_cast<int>(x.size());
  if (n < kMinFitPoints) {
    std::ostringstream os;
    os << "fit window [" << t_min << ", " << t_max << "] holds " << n << " usable samples; need at least "
       << kMinFitPoints;
    throw FitError(os.str());
  }
  double mx = 0.0, mz = 0.0;
  for (int i = 0; i < n; ++i) mx += x[i], mz += z[i];
  mx /= n;
  mz /= n;
  double sxx = 0.0, sxz = 0.0, szz = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxz += (x[i] - mx) * (z[i] - mz);
    szz += (z[i] - mz) * (z[i] - mz);
  }
  if (!(sxx > 0.0)) throw FitError("fit window has no spread in time");
  PowerFit f;
  f.points = n;
  f.t_min = std::exp(x.front());
  f.t_max = std::exp(x.back());
  f.slope = sxz / sxx;
  f.intercept = mz - f.slope * mx;
  double sse = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = z[i] - f.intercept - f.slope * x[i];
    sse += r * r;
  }
  f.r2 = szz > 0.0 ? 1.0 - sse / szz : 1.0;
  f.stderr_slope = std::sqrt(sse / (n - 2) / sxx);
  const boost::math::students_t dist(n - 2);
  const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
  f.ci_low = f.slope - q * f.stderr_slope;
  f.ci_high = f.slope + q * f.stderr_slope;
  return f;
}

nlohmann::json to_json(const PowerFit& f) {
  return {{"slope", f.slope},   {"intercept", f.intercept}, {"stderr", f.stderr_slope},
          {"ci_low", f.ci_low}, {"ci_high", f.ci_high},     {"r2", f.r2},
          {"points", f.points}, {"t_min", f.t_min},         {"t_max", f.t_max}};
}

PowerFit power_fit_from_json(const nlohmann::json& j) {
  PowerFit f;
  f.slope = j.at("slope").get<double>();
  f.intercept = j.at("intercept").get<double>();
  f.stderr_slope = j.at("stderr").get<double>();
  f.ci_low = j.at("ci_low").get<double>();
  f.ci_high = j.at("ci_high").get<double>();
  f.r2 = j.at("r2").get<double>();
  f.points = j.at("points").get<int>();
  f.t_min = j.at("t_min").get<double>();
  f.t_max = j.at("t_max").get<double>();
  return f;
}

std::vector<double> log_space(double a, double b, int n) {
  if (n < 2 || !(a > 0.0) || !(b > a)) throw ConfigError("log_space needs 0 < a < b and n >= 2");
  std::vector<double> out(n);
  const double la = std::log(a), lb = std::log(b);
  for (int i = 0; i < n; ++i) out[i] = std::exp(la + (lb - la) * i / (n - 1));
  out.front() = a;
  out.back() = b;
  return out;
}

}  // namespace pdhyp
