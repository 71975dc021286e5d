// gradcheck.hpp - central finite-difference verification of tape gradients.
#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wrapnet/autodiff.hpp"

namespace wrapnet {

// A builder constructs a fresh graph from the flat input vector and reports
// which leaves consumed it. Leaves must cover x in order, so the analytic
// gradient concatenates to d(root)/d(x).
struct BuiltGraph {
  Tensor root;                 // scalar
  std::vector<Tensor> leaves;  // differentiable inputs created from x
};
using GraphBuilder = std::function<BuiltGraph(Tape&, std::span<const double>)>;

struct GradCheckOptions {
  double h = 1e-6;
  double rel_tol = 1e-5;
  double kink_reject = 1e-4;  // |abs/relu input| below this flags the sample
};

struct GradCheckReport {
  bool pass = false;
  bool kink_rejected = false;  // sample too close to a non-differentiable point
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Relative error with a unit floor, so near-zero true gradients compare the
// finite-difference noise (~1e-10 at h=1e-6 on O(1) values) against 1.
inline double gradcheck_rel_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

inline GradCheckReport grad_check(const GraphBuilder& build, std::span<const double> x,
                                  const GradCheckOptions& opts = {}) {
  GradCheckReport report;

  Tape tape;
  tape.reset_kink_margin();
  BuiltGraph g = build(tape, x);
  if (tape.kink_margin() < opts.kink_reject) {
    report.kink_rejected = true;
    return report;
  }
  tape.backward(g.root);
  std::vector<double> analytic;
  analytic.reserve(x.size());
  for (const Tensor& leaf : g.leaves) {
    auto gr = leaf.grad();
    analytic.insert(analytic.end(), gr.begin(), gr.end());
  }
  if (analytic.size() != x.size())
    throw std::runtime_error("grad_check: leaves do not cover the input vector");

  std::vector<double> xp(x.begin(), x.end());
  report.pass = true;
  for (std::size_t i = 0; i < xp.size(); ++i) {
    const double saved = xp[i];
    xp[i] = saved + opts.h;
    Tape tp;
    tp.reset_kink_margin();
    const double fp = build(tp, xp).root.scalar();
    if (tp.kink_margin() < opts.kink_reject / 2) {
      report.kink_rejected = true;
      xp[i] = saved;
      return report;
    }
    xp[i] = saved - opts.h;
    Tape tm;
    const double fm = build(tm, xp).root.scalar();
    xp[i] = saved;
    const double numeric = (fp - fm) / (2.0 * opts.h);
    const double err = gradcheck_rel_error(analytic[i], numeric);
    report.max_rel_error = std::max(report.max_rel_error, err);
    if (err >= opts.rel_tol) report.pass = false;
    ++report.checked;
  }
  return report;
}

// Retries with fresh samples when a draw lands too close to an |.| kink.
inline GradCheckReport grad_check_resampled(const GraphBuilder& build,
                                            const std::function<std::vector<double>(int)>& sample,
                                            int max_tries = 8, const GradCheckOptions& opts = {}) {
  GradCheckReport report;
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    std::vector<double> x = sample(attempt);
    report = grad_check(build, x, opts);
    if (!report.kink_rejected) return report;
  }
  return report;
}

}  // namespace wrapnet
