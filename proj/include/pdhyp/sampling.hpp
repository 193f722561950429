#pragma once

#include "pdhyp/types.hpp"

#include <cstdint>
#include <vector>

namespace pdhyp {

struct SamplePlan {
  double radius = 0.1;
  int n_states = 256;
  int n_directions = 64;
  double arc = 0.1;
  int arc_steps = 21;
  std::uint64_t seed = 1;
};

// Shifted Halton points in the ball of the plan's radius, preceded by the
// origin and the 2n axis points at 0.9 * radius.
std::vector<Vec> sample_states(int n, const SamplePlan& plan);

// Directions on the upper half of S^{d-1}; entries are never antipodal.
std::vector<Vec> hemisphere_directions(int d, int count);

// hemisphere_directions(d, count / 2) followed by their negatives, so that
// index i + count / 2 is the antipode of index i. d = 1 yields {+1, -1}.
std::vector<Vec> direction_grid(int d, int count);

}  // namespace pdhyp
