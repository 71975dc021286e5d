// numeric.hpp - order-invariant summation and a small deterministic RNG.
//
// Reductions in this codebase must not depend on the order their operands
// arrive in: several invariants (codeword equality under face permutation,
// node-update equality under star reordering) are asserted bit-for-bit in
// tests. ExactSum computes the correctly rounded sum of a multiset of
// doubles, so any permutation of the inputs yields the identical bits.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace wrapnet {

// Shewchuk-style exact accumulator (same scheme as Python's math.fsum).
// Maintains a list of non-overlapping partials whose exact sum equals the
// exact running sum; result() rounds that value once, to nearest/even.
class ExactSum {
 public:
  void add(double x) {
    if (!std::isfinite(x)) throw std::runtime_error("ExactSum: non-finite operand");
    std::size_t i = 0;
    for (std::size_t k = 0; k < partials_.size(); ++k) {
      double y = partials_[k];
      if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[i++] = lo;
      x = hi;
    }
    partials_.resize(i);
    partials_.push_back(x);
  }

  double result() const {
    std::size_t n = partials_.size();
    if (n == 0) return 0.0;
    double total = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
      const double x = total;
      const double y = partials_[--n];
      total = x + y;
      lo = y - (total - x);
      if (lo != 0.0) break;
    }
    // Half-way case: nudge so the result is the round-to-even of the exact sum.
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) ||
                  (lo > 0.0 && partials_[n - 1] > 0.0))) {
      const double y2 = lo * 2.0;
      const double x2 = total + y2;
      if (y2 == x2 - total) total = x2;
    }
    return total;
  }

  void reset() { partials_.clear(); }

 private:
  std::vector<double> partials_;
};

inline double exact_sum(std::span<const double> xs) {
  ExactSum acc;
  for (double x : xs) acc.add(x);
  return acc.result();
}

inline std::vector<int> identity_permutation(int n) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  return p;
}

// Deterministic 64-bit generator (splitmix64). Distribution transforms are
// written out explicitly so a seed pins the byte-exact stream regardless of
// the standard library in use.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; one spare value cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Derives an independent stream, e.g. per training step.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    Rng r(seed ^ (0x632be59bd9b4e019ULL * (stream + 1)));
    return r.next_u64();
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> p = identity_permutation(n);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

}  // namespace wrapnet
