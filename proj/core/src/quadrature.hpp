#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace epsel::detail {

struct GaussLegendreRule {
  static constexpr int kOrder = 16;
  std::array<double, kOrder> nodes;    // on [-1, 1]
  std::array<double, kOrder> weights;
};

const GaussLegendreRule& gauss_legendre16();

/// Composite Gauss-Legendre over the panels defined by sorted `breakpoints`;
/// panels wider than `max_width` are split evenly.
template <class F>
double integrate_panels(F&& f, std::vector<double> breakpoints, double max_width) {
  std::sort(breakpoints.begin(), breakpoints.end());
  breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
  const auto& rule = gauss_legendre16();
  double total = 0.0;
  for (std::size_t p = 0; p + 1 < breakpoints.size(); ++p) {
    const double lo = breakpoints[p];
    const double hi = breakpoints[p + 1];
    const int pieces = std::max(1, static_cast<int>(std::ceil((hi - lo) / max_width)));
    const double width = (hi - lo) / pieces;
    for (int s = 0; s < pieces; ++s) {
      const double a = lo + s * width;
      const double half = 0.5 * width;
      const double mid = a + half;
      double panel = 0.0;
      for (int i = 0; i < GaussLegendreRule::kOrder; ++i) {
        panel += rule.weights[i] * f(mid + half * rule.nodes[i]);
      }
      total += half * panel;
    }
  }
  return total;
}

}  // namespace epsel::detail
