#pragma once

// Gaussian kernel with a Normal-inverse-gamma base measure, stick-breaking
// weights, CRP cluster-count pmf, and closed-form L2 distances between
// Gaussian mixtures.

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "semihdp/error.hpp"
#include "semihdp/random.hpp"

namespace semihdp {

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

/// Kernel parameter: mean and variance of a univariate Gaussian.
struct GaussianParam {
  double mu = 0.0;
  double sigma2 = 1.0;

  friend bool operator==(const GaussianParam&, const GaussianParam&) = default;
};

inline double normal_logpdf(double x, double mu, double sigma2) {
  const double d = x - mu;
  return -0.5 * (kLogTwoPi + std::log(sigma2) + d * d / sigma2);
}

inline double normal_logpdf(double x, const GaussianParam& p) {
  return normal_logpdf(x, p.mu, p.sigma2);
}

inline double normal_cdf(double x, double mu, double sigma2) {
  return 0.5 * std::erfc(-(x - mu) / std::sqrt(2.0 * sigma2));
}

/// Normal-inverse-gamma base measure:
///   mu | sigma2 ~ N(mu0, lambda * sigma2),  sigma2 ~ InvGamma(shape, rate).
struct NIGBase {
  double mu0 = 0.0;
  double lambda = 10.0;
  double shape = 1.0;
  double rate = 1.0;

  void validate() const {
    if (!(lambda > 0.0) || !(shape > 0.0) || !(rate > 0.0) || !std::isfinite(mu0) ||
        !std::isfinite(lambda) || !std::isfinite(shape) || !std::isfinite(rate))
      throw ConfigError("NIG base requires finite mu0 and positive lambda, shape, rate");
  }

  friend bool operator==(const NIGBase&, const NIGBase&) = default;
};

/// Running sufficient statistics (count, mean, centred sum of squares).
struct SuffStats {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }

  void merge(const SuffStats& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
    const double d = o.mean - mean;
    const double nt = na + nb;
    mean += d * nb / nt;
    m2 += o.m2 + d * d * na * nb / nt;
    n += o.n;
  }

  static SuffStats of(std::span<const double> xs) {
    SuffStats s;
    for (double x : xs) s.add(x);
    return s;
  }
};

/// sum_j log N(y_j | p) from sufficient statistics.
inline double log_likelihood(const SuffStats& s, const GaussianParam& p) {
  if (s.n == 0) return 0.0;
  const double n = static_cast<double>(s.n);
  const double d = s.mean - p.mu;
  return -0.5 * (n * (kLogTwoPi + std::log(p.sigma2)) + (s.m2 + n * d * d) / p.sigma2);
}

inline NIGBase nig_posterior(const SuffStats& s, const NIGBase& base) {
  if (s.n == 0) return base;
  const double n = static_cast<double>(s.n);
  const double k0 = 1.0 / base.lambda;
  const double kn = k0 + n;
  NIGBase post;
  post.mu0 = (k0 * base.mu0 + n * s.mean) / kn;
  post.lambda = 1.0 / kn;
  post.shape = base.shape + 0.5 * n;
  const double d = s.mean - base.mu0;
  post.rate = base.rate + 0.5 * s.m2 + 0.5 * k0 * n * d * d / kn;
  return post;
}

/// log of  prod_j k(y_j | theta) integrated against the base measure.
inline double nig_log_marginal(const SuffStats& s, const NIGBase& base) {
  if (s.n == 0) return 0.0;
  const NIGBase post = nig_posterior(s, base);
  const double n = static_cast<double>(s.n);
  return std::lgamma(post.shape) - std::lgamma(base.shape) + base.shape * std::log(base.rate) -
         post.shape * std::log(post.rate) + 0.5 * std::log(post.lambda / base.lambda) -
         0.5 * n * kLogTwoPi;
}

inline double nig_log_marginal(std::span<const double> points, const NIGBase& base) {
  if (points.empty()) throw DataError("nig_marginal_density: empty point set");
  for (double x : points)
    if (!std::isfinite(x)) throw DataError("nig_marginal_density: non-finite point");
  base.validate();
  return nig_log_marginal(SuffStats::of(points), base);
}

/// Joint marginal density of `points` under the NIG base (natural scale).
inline double nig_marginal_density(std::span<const double> points, const NIGBase& base) {
  return std::exp(nig_log_marginal(points, base));
}

/// Log density of the base measure itself at theta.
inline double nig_log_density(const GaussianParam& theta, const NIGBase& base) {
  const double s2 = theta.sigma2;
  return normal_logpdf(theta.mu, base.mu0, base.lambda * s2) + base.shape * std::log(base.rate) -
         std::lgamma(base.shape) - (base.shape + 1.0) * std::log(s2) - base.rate / s2;
}

inline GaussianParam nig_draw(const NIGBase& b, Rng& rng) {
  GaussianParam p;
  p.sigma2 = 1.0 / gamma_draw(rng, b.shape, b.rate);
  p.mu = normal_draw(rng, b.mu0, std::sqrt(b.lambda * p.sigma2));
  return p;
}

inline GaussianParam nig_posterior_draw(const SuffStats& s, const NIGBase& base, Rng& rng) {
  return nig_draw(nig_posterior(s, base), rng);
}

inline GaussianParam nig_posterior_draw(std::span<const double> points, const NIGBase& base,
                                        Rng& rng) {
  base.validate();
  return nig_posterior_draw(SuffStats::of(points), base, rng);
}

struct StickBreaking {
  std::vector<double> weights;
  double residual = 1.0;  // 1 - sum(weights)
};

/// First `count` stick-breaking weights for Beta(1, concentration) sticks.
inline StickBreaking stick_breaking_weights(double concentration, std::size_t count, Rng& rng) {
  if (!(concentration > 0.0)) throw ConfigError("stick_breaking_weights: concentration must be > 0");
  if (count == 0) throw ConfigError("stick_breaking_weights: count must be >= 1");
  StickBreaking out;
  out.weights.reserve(count);
  double remaining = 1.0;
  for (std::size_t h = 0; h < count; ++h) {
    const double beta = beta_draw(rng, 1.0, concentration);
    const double w = remaining * beta;
    out.weights.push_back(w);
    remaining -= w;
    if (remaining < 0.0) remaining = 0.0;
  }
  out.residual = remaining;
  return out;
}

/// P(K_n = t), t = 1..n, for the number of tables of a CRP(concentration).
/// Index 0 of the result is t = 1.
inline std::vector<double> crp_cluster_count_pmf(std::size_t n, double concentration) {
  if (n == 0) throw ConfigError("crp_cluster_count_pmf: n must be >= 1");
  if (!(concentration > 0.0)) throw ConfigError("crp_cluster_count_pmf: concentration must be > 0");
  std::vector<double> pmf(n, 0.0);
  pmf[0] = 1.0;
  for (std::size_t m = 1; m < n; ++m) {
    const double md = static_cast<double>(m);
    const double stay = md / (md + concentration);
    const double open = concentration / (md + concentration);
    for (std::size_t t = m + 1; t-- > 0;) {
      const double prev = t > 0 ? pmf[t - 1] : 0.0;
      pmf[t] = pmf[t] * stay + prev * open;
    }
  }
  return pmf;
}

/// Integral of the product of two Gaussian densities: N(mu_p; mu_q, s2_p + s2_q).
inline double normal_product_integral(const GaussianParam& p, const GaussianParam& q) {
  return std::exp(normal_logpdf(p.mu, q.mu, p.sigma2 + q.sigma2));
}

/// Weighted Gaussian components; the truncated realization of a random measure.
struct FiniteMixture {
  std::vector<double> weights;
  std::vector<GaussianParam> components;

  std::size_t size() const { return weights.size(); }

  void validate() const {
    if (weights.size() != components.size())
      throw DataError("FiniteMixture: weights/components length mismatch");
    double total = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (!(weights[k] >= 0.0) || weights[k] > 1.0)
        throw DataError("FiniteMixture: weight outside [0,1]");
      if (!(components[k].sigma2 > 0.0)) throw DataError("FiniteMixture: non-positive variance");
      total += weights[k];
    }
    if (std::abs(total - 1.0) > 1e-12) throw DataError("FiniteMixture: weights do not sum to 1");
  }

  double density(double x) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k)
      acc += weights[k] * std::exp(normal_logpdf(x, components[k]));
    return acc;
  }

  double log_density(double x) const {
    // Log-sum-exp over components; avoids underflow far in the tails.
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < weights.size(); ++k)
      if (weights[k] > 0.0) mx = std::max(mx, std::log(weights[k]) + normal_logpdf(x, components[k]));
    if (!std::isfinite(mx)) return mx;
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k)
      if (weights[k] > 0.0) acc += std::exp(std::log(weights[k]) + normal_logpdf(x, components[k]) - mx);
    return mx + std::log(acc);
  }

  double cdf(double x) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k)
      acc += weights[k] * normal_cdf(x, components[k].mu, components[k].sigma2);
    return acc;
  }
};

inline double mixture_cross_term(const FiniteMixture& a, const FiniteMixture& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      acc += a.weights[i] * b.weights[j] * normal_product_integral(a.components[i], b.components[j]);
  return acc;
}

/// Squared L2 distance between the densities of two Gaussian mixtures.
inline double mixture_l2_distance_sq(const FiniteMixture& a, const FiniteMixture& b) {
  const double d = mixture_cross_term(a, a) + mixture_cross_term(b, b) - 2.0 * mixture_cross_term(a, b);
  return d < 0.0 ? 0.0 : d;
}

}  // namespace semihdp
