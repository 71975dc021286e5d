#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <limits>
#include <vector>

#include "wrapnet/assignment.hpp"
#include "wrapnet/numeric.hpp"
#include "wrapnet/sphere.hpp"

using namespace wrapnet;

namespace {

// Exhaustive oracle: minimum cost and the lexicographically smallest
// minimizing injection, by enumerating all injections.
struct BruteForce {
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<int> best_sigma;
};

void brute_recurse(const std::vector<double>& cost, int rows, int cols, int row,
                   std::vector<int>& sigma, std::vector<char>& used, BruteForce& out) {
  if (row == rows) {
    ExactSum acc;
    for (int i = 0; i < rows; ++i) acc.add(cost[static_cast<std::size_t>(i) * cols + sigma[i]]);
    const double total = acc.result();
    if (total < out.best_cost ||
        (total == out.best_cost && (out.best_sigma.empty() || sigma < out.best_sigma))) {
      out.best_cost = total;
      out.best_sigma = sigma;
    }
    return;
  }
  for (int j = 0; j < cols; ++j) {
    if (used[j]) continue;
    used[j] = 1;
    sigma[row] = j;
    brute_recurse(cost, rows, cols, row + 1, sigma, used, out);
    used[j] = 0;
  }
}

BruteForce brute_force(const std::vector<double>& cost, int rows, int cols) {
  BruteForce out;
  std::vector<int> sigma(rows);
  std::vector<char> used(cols, 0);
  brute_recurse(cost, rows, cols, 0, sigma, used, out);
  return out;
}

}  // namespace

TEST_CASE("diagonal-zero costs pick the diagonal", "[assignment]") {
  const std::vector<double> cost = {0, 1, 1, 1, 0, 1, 1, 1, 0};
  const MatchingMap map = solve_unbalanced_assignment(cost, 3, 3);
  REQUIRE(map.sigma == std::vector<int>{0, 1, 2});
  REQUIRE(map.total_cost == 0.0);
}

TEST_CASE("rectangular example matches hand enumeration", "[assignment]") {
  const std::vector<double> cost = {1, 2, 3, 2, 1, 3};
  const MatchingMap map = solve_unbalanced_assignment(cost, 2, 3);
  REQUIRE(map.sigma == std::vector<int>{0, 1});
  REQUIRE(map.total_cost == 2.0);
}

TEST_CASE("ties break to the lexicographically smallest sigma", "[assignment]") {
  const std::vector<double> equal = {5, 5, 5, 5};
  REQUIRE(solve_unbalanced_assignment(equal, 2, 2).sigma == std::vector<int>{0, 1});

  // optimal sets are {0->1, 1->0} and {0->0, 1->1}, both cost 2
  const std::vector<double> tie = {1, 1, 1, 1};
  REQUIRE(solve_unbalanced_assignment(tie, 2, 2).sigma == std::vector<int>{0, 1});

  // lexicographic choice must hold among optima only
  const std::vector<double> structured = {0, 0, 9, 0, 9, 0};  // rows 2, cols 3
  const MatchingMap map = solve_unbalanced_assignment(structured, 2, 3);
  REQUIRE(map.total_cost == 0.0);
  REQUIRE(map.sigma == std::vector<int>{0, 1});
}

TEST_CASE("optimality and tie-break agree with brute force on random instances",
          "[assignment]") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int rows = 1 + static_cast<int>(rng.next_u64() % 8);
    const int cols = rows + static_cast<int>(rng.next_u64() % (11 - rows));
    std::vector<double> cost(static_cast<std::size_t>(rows) * cols);
    const bool quantized = trial % 3 == 0;  // many exact ties
    for (double& c : cost)
      c = quantized ? static_cast<double>(rng.next_u64() % 4) : rng.uniform(0.0, 10.0);
    const MatchingMap got = solve_unbalanced_assignment(cost, rows, cols);
    const BruteForce expected = brute_force(cost, rows, cols);
    REQUIRE(got.total_cost == expected.best_cost);
    REQUIRE(got.sigma == expected.best_sigma);
  }
}

TEST_CASE("injectivity holds on large instances", "[assignment]") {
  Rng rng(7);
  const int rows = 400, cols = 500;
  std::vector<double> cost(static_cast<std::size_t>(rows) * cols);
  for (double& c : cost) c = rng.uniform(0.0, 1.0);
  const MatchingMap map = solve_unbalanced_assignment(cost, rows, cols);
  std::vector<char> used(cols, 0);
  for (int j : map.sigma) {
    REQUIRE(j >= 0);
    REQUIRE(j < cols);
    REQUIRE_FALSE(used[j]);
    used[j] = 1;
  }
}

TEST_CASE("row permutation equivariance when the optimum is unique", "[assignment]") {
  Rng rng(13);
  const int rows = 7, cols = 9;
  std::vector<double> cost(static_cast<std::size_t>(rows) * cols);
  for (double& c : cost) c = rng.uniform(0.0, 10.0);
  const MatchingMap base = solve_unbalanced_assignment(cost, rows, cols);
  const auto tau = random_permutation(rows, rng);
  std::vector<double> permuted(cost.size());
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      permuted[static_cast<std::size_t>(tau[i]) * cols + j] =
          cost[static_cast<std::size_t>(i) * cols + j];
  const MatchingMap moved = solve_unbalanced_assignment(permuted, rows, cols);
  for (int i = 0; i < rows; ++i) REQUIRE(moved.sigma[tau[i]] == base.sigma[i]);
}

TEST_CASE("padding with an expensive extra column changes nothing", "[assignment]") {
  Rng rng(29);
  const int rows = 6, cols = 7;
  std::vector<double> cost(static_cast<std::size_t>(rows) * cols);
  for (double& c : cost) c = rng.uniform(0.0, 5.0);
  const MatchingMap base = solve_unbalanced_assignment(cost, rows, cols);
  std::vector<double> padded;
  for (int i = 0; i < rows; ++i) {
    padded.insert(padded.end(), cost.begin() + static_cast<std::size_t>(i) * cols,
                  cost.begin() + static_cast<std::size_t>(i + 1) * cols);
    padded.push_back(1e6);
  }
  REQUIRE(solve_unbalanced_assignment(padded, rows, cols + 1).sigma == base.sigma);
}

TEST_CASE("invalid inputs are rejected", "[assignment]") {
  const std::vector<double> cost = {1, 2, 3, 4, 5, 6};
  REQUIRE_THROWS(solve_unbalanced_assignment(cost, 3, 2));  // more rows than cols
  std::vector<double> bad = cost;
  bad[2] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS(solve_unbalanced_assignment(bad, 2, 3));
}

TEST_CASE("grid matching recovers identity and reversal", "[assignment]") {
  const SphereGrid grid = fibonacci_grid(24);
  std::vector<Vec3> pts(grid.points.begin(), grid.points.begin() + 10);
  MatchingMap map = match_to_sphere_grid(pts, grid);
  for (int i = 0; i < 10; ++i) REQUIRE(map.sigma[i] == i);

  std::reverse(pts.begin(), pts.end());
  map = match_to_sphere_grid(pts, grid);
  for (int i = 0; i < 10; ++i) REQUIRE(map.sigma[i] == 9 - i);
}

TEST_CASE("grid matching survives sub-gap perturbations", "[assignment]") {
  const SphereGrid grid = fibonacci_grid(40);
  double min_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid.size(); ++i)
    for (int j = i + 1; j < grid.size(); ++j)
      min_gap = std::min(min_gap, norm(grid.points[i] - grid.points[j]));

  Rng rng(4);
  std::vector<int> source = {3, 11, 19, 27, 35};
  std::vector<Vec3> pts;
  for (int s : source) {
    Vec3 noise{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    noise = noise * (0.4 * min_gap / norm(noise));
    pts.push_back(grid.points[s] + noise);
  }
  const MatchingMap map = match_to_sphere_grid(pts, grid);
  // oracle: with noise < half the min gap, nearest neighbor is the source row
  for (std::size_t i = 0; i < source.size(); ++i) REQUIRE(map.sigma[i] == source[i]);
}
