// assignment.hpp - unbalanced linear assignment (rows <= cols).
//
// Solves min_sigma sum_i cost(i, sigma(i)) over injections sigma, via the
// O(n^3) Hungarian algorithm with row/column potentials. Rectangular inputs
// are reduced to square ones with implicit zero-cost dummy rows.
//
// Ties are broken deterministically: among all optimal assignments the one
// with lexicographically smallest (sigma(0), sigma(1), ...) is returned.
// Determinism here is what lets end-to-end permutation tests assert exact
// equality instead of probabilistic closeness.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "wrapnet/numeric.hpp"
#include "wrapnet/sphere.hpp"

namespace wrapnet {

struct MatchingMap {
  std::vector<int> sigma;  // source row -> column, injective
  double total_cost = 0.0;
};

namespace detail {

struct HungarianResult {
  std::vector<int> row_to_col;  // padded rows
  std::vector<double> u, v;     // optimal potentials
};

// Shortest-augmenting-path Hungarian on an n x n problem given through a
// cost callback. Rows >= n_real are dummy rows of cost 0.
template <typename CostFn>
HungarianResult hungarian_square(int n, CostFn cost) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
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
    } while (j0);
  }
  HungarianResult res;
  res.row_to_col.assign(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) res.row_to_col[p[j] - 1] = j - 1;
  res.u.assign(n, 0.0);
  res.v.assign(n, 0.0);
  for (int i = 1; i <= n; ++i) res.u[i - 1] = u[i];
  for (int j = 1; j <= n; ++j) res.v[j - 1] = v[j];
  return res;
}

// Kuhn augmenting-path matching restricted to tight edges. rows/cols are
// flagged active; tight_cols[i] lists candidate columns per row.
inline bool tight_perfect_matching(const std::vector<std::vector<int>>& tight_cols,
                                   const std::vector<char>& row_active,
                                   const std::vector<char>& col_active) {
  const int n_rows = static_cast<int>(tight_cols.size());
  const int n_cols = static_cast<int>(col_active.size());
  std::vector<int> col_owner(n_cols, -1);
  std::vector<char> visited(n_cols, 0);

  auto try_augment = [&](auto&& self, int row) -> bool {
    for (int c : tight_cols[row]) {
      if (!col_active[c] || visited[c]) continue;
      visited[c] = 1;
      if (col_owner[c] < 0 || self(self, col_owner[c])) {
        col_owner[c] = row;
        return true;
      }
    }
    return false;
  };

  for (int i = 0; i < n_rows; ++i) {
    if (!row_active[i]) continue;
    std::fill(visited.begin(), visited.end(), 0);
    if (!try_augment(try_augment, i)) return false;
  }
  return true;
}

}  // namespace detail

// cost is row-major n_rows x n_cols, n_rows <= n_cols.
inline MatchingMap solve_unbalanced_assignment(std::span<const double> cost, int n_rows,
                                               int n_cols) {
  if (n_rows <= 0 || n_cols <= 0) throw std::runtime_error("assignment: empty problem");
  if (n_rows > n_cols) throw std::runtime_error("assignment: more sources than targets");
  if (cost.size() != static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols))
    throw std::runtime_error("assignment: cost matrix size mismatch");
  double max_abs = 0.0;
  for (double c : cost) {
    if (!std::isfinite(c)) throw std::runtime_error("assignment: non-finite cost entry");
    max_abs = std::max(max_abs, std::fabs(c));
  }

  auto at = [&](int i, int j) -> double {
    return i < n_rows ? cost[static_cast<std::size_t>(i) * n_cols + j] : 0.0;
  };
  detail::HungarianResult base = detail::hungarian_square(n_cols, at);

  auto canonical_total = [&](const std::vector<int>& sigma) {
    ExactSum acc;
    for (int i = 0; i < n_rows; ++i) acc.add(at(i, sigma[i]));
    return acc.result();
  };
  std::vector<int> sigma(base.row_to_col.begin(), base.row_to_col.begin() + n_rows);
  const double best_total = canonical_total(sigma);

  // Lexicographic refinement over the tight-edge graph of the optimal duals.
  // Rows whose only tight candidate is their current column are forced, so
  // instances with a unique optimum skip the matching checks entirely.
  const double tol = 1e-9 * (1.0 + max_abs);
  std::vector<std::vector<int>> tight_cols(n_cols);
  for (int i = 0; i < n_cols; ++i)
    for (int j = 0; j < n_cols; ++j)
      if (at(i, j) - base.u[i] - base.v[j] <= tol) tight_cols[i].push_back(j);

  std::vector<char> row_active(n_cols, 1), col_active(n_cols, 1);
  std::vector<int> refined(n_rows, -1);
  bool refinement_ok = true;
  for (int i = 0; i < n_rows && refinement_ok; ++i) {
    row_active[i] = 0;
    int chosen = -1;
    int n_candidates = 0, only_candidate = -1;
    for (int j : tight_cols[i])
      if (col_active[j]) {
        ++n_candidates;
        only_candidate = j;
      }
    if (n_candidates == 1) {
      chosen = only_candidate;
    } else {
      for (int j : tight_cols[i]) {
        if (!col_active[j]) continue;
        col_active[j] = 0;
        if (detail::tight_perfect_matching(tight_cols, row_active, col_active)) {
          chosen = j;
          col_active[j] = 1;
          break;
        }
        col_active[j] = 1;
      }
    }
    if (chosen < 0) {
      refinement_ok = false;
      break;
    }
    refined[i] = chosen;
    col_active[chosen] = 0;
  }
  if (refinement_ok && canonical_total(refined) == best_total) sigma = refined;

  MatchingMap out;
  out.sigma = std::move(sigma);
  out.total_cost = canonical_total(out.sigma);
  return out;
}

// Matches points to grid rows minimizing total squared Euclidean distance.
inline MatchingMap match_to_sphere_grid(std::span<const Vec3> points, const SphereGrid& grid) {
  const int n_rows = static_cast<int>(points.size());
  const int n_cols = grid.size();
  if (n_rows > n_cols)
    throw std::runtime_error("match_to_sphere_grid: more points than grid entries");
  std::vector<double> cost(static_cast<std::size_t>(n_rows) * n_cols);
  for (int i = 0; i < n_rows; ++i)
    for (int j = 0; j < n_cols; ++j) {
      const Vec3 d = points[i] - grid.points[j];
      cost[static_cast<std::size_t>(i) * n_cols + j] = dot(d, d);
    }
  return solve_unbalanced_assignment(cost, n_rows, n_cols);
}

}  // namespace wrapnet
