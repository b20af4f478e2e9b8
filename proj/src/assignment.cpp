#include "tracklabel/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "tracklabel/error.hpp"

namespace tracklabel {

namespace {

struct Potentials {
  std::vector<double> u;  // rows
  std::vector<double> v;  // columns
  std::vector<int> col_of_row;
};

// Classic O(n^3) Hungarian with 1-based sentinel column 0.
Potentials hungarian(const std::vector<double>& a, int n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      require(j1 >= 0 && std::isfinite(delta), ErrorKind::InternalConsistency,
              "assignment problem has no feasible solution");
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Potentials out;
  out.u.assign(u.begin() + 1, u.end());
  out.v.assign(v.begin() + 1, v.end());
  out.col_of_row.assign(n, -1);
  for (int j = 1; j <= n; ++j) out.col_of_row[p[j] - 1] = j - 1;
  return out;
}

}  // namespace

std::vector<int> solve_assignment(const std::vector<double>& cost, int n, int tie_break_rows) {
  require(n >= 0 && cost.size() == static_cast<std::size_t>(n) * n,
          ErrorKind::InvalidParameter, "assignment cost matrix must be square");
  if (n == 0) return {};
  Potentials pot = hungarian(cost, n);

  double scale = 1.0;
  for (double c : cost)
    if (std::isfinite(c)) scale = std::max(scale, std::abs(c));
  const double tol = 1e-13 * scale * n;

  // Edges with zero reduced cost: exactly the ones usable by some optimum.
  std::vector<std::vector<int>> tight(n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double a = cost[static_cast<std::size_t>(r) * n + c];
      if (std::isfinite(a) && a - pot.u[r] - pot.v[c] <= tol) tight[r].push_back(c);
    }

  std::vector<int>& col_of = pot.col_of_row;
  std::vector<int> row_of(n);
  for (int r = 0; r < n; ++r) row_of[col_of[r]] = r;

  // Walk rows in order; give each the smallest tight column that still admits
  // a perfect tight matching on the unfixed rows (alternating-cycle swap).
  const int rows = std::min(tie_break_rows, n);
  std::vector<int> parent(n);
  std::vector<char> seen(n);
  for (int i = 0; i < rows; ++i) {
    for (int j : tight[i]) {
      if (j >= col_of[i]) break;
      const int start = row_of[j];
      if (start < i) continue;  // held by a fixed row
      const int target = col_of[i];
      std::fill(seen.begin(), seen.end(), 0);
      std::deque<int> queue{start};
      seen[start] = 1;
      seen[i] = 1;
      for (int r = 0; r < i; ++r) seen[r] = 1;
      int last = -1;
      while (!queue.empty() && last < 0) {
        const int r = queue.front();
        queue.pop_front();
        for (int c : tight[r]) {
          if (c == col_of[r]) continue;
          if (c == target) {
            last = r;
            break;
          }
          const int next = row_of[c];
          if (seen[next]) continue;
          seen[next] = 1;
          parent[next] = r;
          queue.push_back(next);
        }
      }
      if (last < 0) continue;
      int r = last;
      int give = target;
      while (true) {
        const int old = col_of[r];
        col_of[r] = give;
        row_of[give] = r;
        if (r == start) break;
        give = old;
        r = parent[r];
      }
      col_of[i] = j;
      row_of[j] = i;
      break;
    }
  }
  return col_of;
}

}  // namespace tracklabel
