#pragma once

#include <cmath>
#include <functional>
#include <vector>

namespace testutil {

inline double trapezoid(const std::function<double(double)>& f, double lo, double hi, std::size_t nodes) {
  const double h = (hi - lo) / static_cast<double>(nodes - 1);
  double acc = 0.0;
  for (std::size_t k = 0; k < nodes; ++k)
    acc += (k == 0 || k + 1 == nodes ? 0.5 : 1.0) * f(lo + h * static_cast<double>(k));
  return acc * h;
}

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSE mean_se(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  v /= static_cast<double>(xs.size() - 1);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

// Binomial standard error of a frequency with known p.
inline double freq_se(double p, std::size_t n) { return std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

}  // namespace testutil
