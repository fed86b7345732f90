#pragma once

#include <vector>

#include "mocap/types.hpp"

namespace mocap {

// Entries at or above this value are treated as forbidden assignments.
constexpr double kAssignInfeasible = 1e17;

// Minimum-cost assignment on a rectangular cost matrix. Returns, per row,
// the assigned column, or -1 when rows exceed columns and the row is left
// out or when only forbidden entries were available for it.
std::vector<int> hungarian_min_cost(const MatX& cost);

}  // namespace mocap
