#pragma once

#include "pdhyp/types.hpp"

#include <random>

namespace testing_util {

inline pdhyp::Vec random_in_ball(std::mt19937_64& rng, int n, double radius) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  pdhyp::Vec x(n);
  for (int i = 0; i < n; ++i) x(i) = g(rng);
  x *= radius * std::pow(uni(rng), 1.0 / n) / x.norm();
  return x;
}

inline pdhyp::Vec random_unit(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  pdhyp::Vec w(d);
  for (int i = 0; i < d; ++i) w(i) = g(rng);
  return w / w.norm();
}

inline double max_abs(const pdhyp::Mat& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testing_util
