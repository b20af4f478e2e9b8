#pragma once

#include <limits>
#include <vector>

namespace tracklabel {

inline constexpr double kForbidden = std::numeric_limits<double>::infinity();

/// Square min-cost assignment (shortest augmenting paths with potentials).
/// `cost` is row-major size*size; kForbidden entries are never used. Among
/// optimal assignments the returned one is lexicographically smallest over
/// rows [0, tie_break_rows) in column order. Throws if no finite assignment
/// exists.
std::vector<int> solve_assignment(const std::vector<double>& cost, int size,
                                  int tie_break_rows);

}  // namespace tracklabel
