#include "pdhyp/sampling.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace pdhyp {

namespace {

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};

double radical_inverse(std::uint64_t i, int base) {
  double f = 1.0, x = 0.0;
  while (i > 0) {
    f /= base;
    x += f * static_cast<double>(i % base);
    i /= base;
  }
  return x;
}

}  // namespace

std::vector<Vec> sample_states(int n, const SamplePlan& plan) {
  std::vector<Vec> out;
  out.push_back(Vec::Zero(n));
  for (int i = 0; i < n; ++i)
    for (double s : {1.0, -1.0}) {
      Vec e = Vec::Zero(n);
      e(i) = s * 0.9 * plan.radius;
      out.push_back(e);
    }
  std::mt19937_64 rng(plan.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Vec shift(n);
  for (int i = 0; i < n; ++i) shift(i) = uni(rng);
  std::uint64_t k = 1;
  while (static_cast<int>(out.size()) < plan.n_states) {
    Vec x(n);
    for (int i = 0; i < n; ++i) {
      double h = radical_inverse(k, kPrimes[i]) + shift(i);
      h -= std::floor(h);
      x(i) = 2.0 * h - 1.0;
    }
    ++k;
    if (x.squaredNorm() < 1.0) out.push_back(plan.radius * x);
  }
  return out;
}

std::vector<Vec> hemisphere_directions(int d, int count) {
  std::vector<Vec> out;
  if (d == 1) {
    Vec w(1);
    w << 1.0;
    out.push_back(w);
    return out;
  }
  if (d == 2) {
    for (int j = 0; j < count; ++j) {
      const double t = std::numbers::pi * j / count;
      Vec w(2);
      w << std::cos(t), std::sin(t);
      out.push_back(w);
    }
    return out;
  }
  // Fibonacci lattice on the upper cap, last coordinate in (0, 1]
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int j = 0; j < count; ++j) {
    const double z = 1.0 - (j + 0.5) / count;
    const double rad = std::sqrt(1.0 - z * z);
    Vec w = Vec::Zero(d);
    w(0) = rad * std::cos(golden * j);
    w(1) = rad * std::sin(golden * j);
    w(d - 1) = z;
    if (d > 3) w(2) = 0.0;
    out.push_back(w / w.norm());
  }
  return out;
}

std::vector<Vec> direction_grid(int d, int count) {
  const int half = d == 1 ? 1 : std::max(1, count / 2);
  std::vector<Vec> out = hemisphere_directions(d, half);
  for (int j = 0; j < half; ++j) out.push_back(-out[j]);
  return out;
}

}  // namespace pdhyp
