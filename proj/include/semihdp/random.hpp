#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "semihdp/error.hpp"

namespace semihdp {

using Rng = std::mt19937_64;

// Independent stream for worker `index` derived from a master seed.
inline Rng make_worker_rng(std::uint64_t master_seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32), 0x5e41U};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double normal_draw(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

inline double gamma_draw(Rng& rng, double shape, double rate = 1.0) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

inline double beta_draw(Rng& rng, double a, double b) {
  // For tiny shapes both gammas can underflow to zero; fall back on log-space
  // draws via the Gamma(a) = Gamma(a+1) * U^(1/a) identity.
  const double x = gamma_draw(rng, a);
  const double y = gamma_draw(rng, b);
  if (x + y > 0.0) return x / (x + y);
  const double lx = std::log(gamma_draw(rng, a + 1.0)) + std::log(uniform01(rng)) / a;
  const double ly = std::log(gamma_draw(rng, b + 1.0)) + std::log(uniform01(rng)) / b;
  return 1.0 / (1.0 + std::exp(ly - lx));
}

inline bool bernoulli_draw(Rng& rng, double p) { return uniform01(rng) < p; }

inline std::vector<double> dirichlet_draw(Rng& rng, std::span<const double> alpha) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    out[k] = gamma_draw(rng, alpha[k]);
    total += out[k];
  }
  if (total > 0.0) {
    for (double& v : out) v /= total;
    return out;
  }
  // All gammas underflowed (every shape tiny); redo in log space.
  std::vector<double> logs(alpha.size());
  for (std::size_t k = 0; k < alpha.size(); ++k)
    logs[k] = std::log(gamma_draw(rng, alpha[k] + 1.0)) + std::log(uniform01(rng)) / alpha[k];
  const double mx = *std::max_element(logs.begin(), logs.end());
  total = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) total += (out[k] = std::exp(logs[k] - mx));
  for (double& v : out) v /= total;
  return out;
}

inline double log_sum_exp(std::span<const double> logw) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logw) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double v : logw) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

// Inverse-CDF draw from unnormalized log-weights. Throws NumericalError when
// every weight is -inf or any weight is NaN.
inline std::size_t sample_log_categorical(std::span<const double> logw, Rng& rng) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logw) {
    if (std::isnan(v)) throw NumericalError("NaN log-weight in categorical draw");
    mx = std::max(mx, v);
  }
  if (!(mx > -std::numeric_limits<double>::infinity()))
    throw NumericalError("all categorical log-weights are -inf");
  double total = 0.0;
  for (double v : logw) total += std::exp(v - mx);
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t k = 0; k < logw.size(); ++k) {
    acc += std::exp(logw[k] - mx);
    if (u < acc) return k;
  }
  // Rounding at the top end: return the last index with positive weight.
  for (std::size_t k = logw.size(); k-- > 0;)
    if (logw[k] > -std::numeric_limits<double>::infinity()) return k;
  return logw.size() - 1;
}

}  // namespace semihdp
