#pragma once

// Posterior summaries computed from chain records: homogeneity Bayes factors,
// partition posterior, similarity matrix, Binder/VI point estimates, density
// bands, density functionals and effective sample size.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "semihdp/distributions.hpp"
#include "semihdp/error.hpp"
#include "semihdp/sampler.hpp"
#include "semihdp/state.hpp"

namespace semihdp {

/// Pooled standardization y' = (y - mean) / sd; identity by default.
struct Standardization {
  double mean = 0.0;
  double sd = 1.0;

  double forward(double y) const { return (y - mean) / sd; }
  double inverse(double z) const { return mean + sd * z; }
};

inline void require_records(std::span<const ChainRecord> records, const char* what) {
  if (records.empty()) throw DataError(std::string(what) + ": no records");
}

/// Fraction of records with c_i = c_j (0-based group indices).
inline double coclustering_probability(std::span<const ChainRecord> records, std::size_t i, std::size_t j) {
  require_records(records, "coclustering_probability");
  std::size_t hits = 0;
  for (const auto& r : records) hits += r.c.at(i) == r.c.at(j);
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

/// BF for H0: c_i = c_j against H1: c_i != c_j, from a posterior probability.
inline double bayes_factor_from_probability(double p_hat, double prior_odds = 1.0) {
  if (!(prior_odds > 0.0)) throw ConfigError("prior_odds must be > 0");
  if (p_hat >= 1.0) return std::numeric_limits<double>::infinity();
  if (p_hat <= 0.0) return 0.0;
  return p_hat / (1.0 - p_hat) / prior_odds;
}

inline double bayes_factor_pair(std::span<const ChainRecord> records, std::size_t i, std::size_t j,
                                double prior_odds = 1.0) {
  if (i == j) throw ConfigError("bayes_factor_pair: the two groups must differ");
  return bayes_factor_from_probability(coclustering_probability(records, i, j), prior_odds);
}

struct PartitionPosterior {
  std::vector<Partition> partitions;  // ordered by first visit
  std::vector<double> probabilities;
  std::size_t samples = 0;

  double probability_of(const Partition& p) const {
    for (std::size_t k = 0; k < partitions.size(); ++k)
      if (partitions[k] == p) return probabilities[k];
    return 0.0;
  }

  /// Index of the most probable partition (first visited wins ties).
  std::size_t mode_index() const {
    return static_cast<std::size_t>(std::max_element(probabilities.begin(), probabilities.end()) - probabilities.begin());
  }
};

inline PartitionPosterior partition_posterior(std::span<const ChainRecord> records) {
  require_records(records, "partition_posterior");
  PartitionPosterior out;
  std::map<Partition, std::size_t> index;
  std::vector<std::size_t> counts;
  for (const auto& rec : records) {
    const Partition p = canonical_partition(rec.c);
    auto [it, inserted] = index.emplace(p, out.partitions.size());
    if (inserted) {
      out.partitions.push_back(p);
      counts.push_back(0);
    }
    ++counts[it->second];
  }
  out.samples = records.size();
  for (std::size_t n : counts) out.probabilities.push_back(static_cast<double>(n) / static_cast<double>(records.size()));
  return out;
}

using Matrix = std::vector<std::vector<double>>;

inline Matrix similarity_matrix(std::span<const ChainRecord> records) {
  require_records(records, "similarity_matrix");
  const std::size_t I = records.front().c.size();
  Matrix out(I, std::vector<double>(I, 0.0));
  for (const auto& rec : records)
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t j = i; j < I; ++j)
        if (rec.c[i] == rec.c[j]) out[i][j] += 1.0;
  const double n = static_cast<double>(records.size());
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t j = i; j < I; ++j) out[j][i] = out[i][j] = out[i][j] / n;
  return out;
}

enum class PartitionLoss { Binder, VariationOfInformation };

/// Binder loss with equal costs against the posterior similarity matrix:
/// sum over pairs of P(i ~ j) when split and 1 - P(i ~ j) when joined.
inline double binder_expected_loss(const Partition& p, const Matrix& psm) {
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j) loss += p[i] == p[j] ? 1.0 - psm[i][j] : psm[i][j];
  return loss;
}

inline double variation_of_information(const Partition& a, const Partition& b) {
  const double n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ma, mb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ma[a[i]] += 1.0;
    mb[b[i]] += 1.0;
  }
  auto entropy = [n](const std::map<int, double>& m) {
    double h = 0.0;
    for (const auto& [k, c] : m) h -= c / n * std::log2(c / n);
    return h;
  };
  double mutual = 0.0;
  for (const auto& [key, c] : joint) mutual += c / n * std::log2(c * n / (ma[key.first] * mb[key.second]));
  return std::max(0.0, entropy(ma) + entropy(mb) - 2.0 * mutual);
}

inline double vi_expected_loss(const Partition& p, const PartitionPosterior& post) {
  double loss = 0.0;
  for (std::size_t k = 0; k < post.partitions.size(); ++k)
    loss += post.probabilities[k] * variation_of_information(p, post.partitions[k]);
  return loss;
}

/// Visited partition with the smallest Monte Carlo expected loss; the first
/// visited wins ties.
inline Partition point_partition(std::span<const ChainRecord> records, PartitionLoss loss) {
  const PartitionPosterior post = partition_posterior(records);
  const Matrix psm = similarity_matrix(records);
  std::size_t best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < post.partitions.size(); ++k) {
    const double l = loss == PartitionLoss::Binder ? binder_expected_loss(post.partitions[k], psm)
                                                   : vi_expected_loss(post.partitions[k], post);
    if (l < best_loss - 1e-12) {
      best_loss = l;
      best = k;
    }
  }
  return post.partitions[best];
}

struct DensitySummary {
  std::vector<double> grid;
  std::vector<double> mean;
  std::vector<double> lower95;
  std::vector<double> upper95;
};

/// Linear-interpolation quantile of an unsorted sample (modified in place).
inline double quantile(std::vector<double>& xs, double q) {
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + frac * (xs[hi] - xs[lo]);
}

/// Pointwise posterior mean and 95% band of group `group`'s density. The grid
/// is on the original scale; mixtures live on the standardized scale.
inline DensitySummary density_summary(std::span<const ChainRecord> records, std::size_t group,
                                      std::span<const double> grid, const Standardization& tr = {}) {
  require_records(records, "density_summary");
  DensitySummary out;
  out.grid.assign(grid.begin(), grid.end());
  const std::size_t G = grid.size();
  std::vector<std::vector<double>> vals(G, std::vector<double>(records.size()));
  for (std::size_t r = 0; r < records.size(); ++r) {
    const FiniteMixture& mix = records[r].mixture_for_group(group);
    for (std::size_t g = 0; g < G; ++g) vals[g][r] = mix.density(tr.forward(grid[g])) / tr.sd;
  }
  for (std::size_t g = 0; g < G; ++g) {
    double acc = 0.0;
    for (double v : vals[g]) acc += v;
    const double mean = acc / static_cast<double>(records.size());
    const double lo = quantile(vals[g], 0.025);
    const double hi = quantile(vals[g], 0.975);
    out.mean.push_back(mean);
    out.lower95.push_back(std::min(lo, mean));
    out.upper95.push_back(std::max(hi, mean));
  }
  return out;
}

struct DensityFunctionals {
  double mean = 0.0;
  double variance = 0.0;
  double pearson_skew = 0.0;
  double mode_skew = 0.0;  // 1 - 2 F(mode)
  double pass_prob = 0.0;  // 1 - F(threshold)
  double mode = 0.0;
};

inline double mixture_mean(const FiniteMixture& mix) {
  double m = 0.0;
  for (std::size_t k = 0; k < mix.size(); ++k) m += mix.weights[k] * mix.components[k].mu;
  return m;
}

inline double mixture_variance(const FiniteMixture& mix) {
  const double m = mixture_mean(mix);
  double v = 0.0;
  for (std::size_t k = 0; k < mix.size(); ++k) {
    const double d = mix.components[k].mu - m;
    v += mix.weights[k] * (mix.components[k].sigma2 + d * d);
  }
  return v;
}

/// Mode by a 4001-point grid over mean +- 8 sd, refined by golden-section
/// search between the neighbours of the best grid point.
inline double mixture_mode(const FiniteMixture& mix) {
  const double m = mixture_mean(mix);
  const double sd = std::sqrt(mixture_variance(mix));
  constexpr int kGrid = 4001;
  const double lo = m - 8.0 * sd, hi = m + 8.0 * sd;
  const double step = (hi - lo) / (kGrid - 1);
  int best = 0;
  double best_val = -1.0;
  for (int g = 0; g < kGrid; ++g) {
    const double v = mix.density(lo + step * g);
    if (v > best_val) {
      best_val = v;
      best = g;
    }
  }
  double a = lo + step * std::max(best - 1, 0);
  double b = lo + step * std::min(best + 1, kGrid - 1);
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - ratio * (b - a), x2 = a + ratio * (b - a);
  double f1 = mix.density(x1), f2 = mix.density(x2);
  for (int it = 0; it < 200 && b - a > 1e-12 * (1.0 + std::abs(a)); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + ratio * (b - a);
      f2 = mix.density(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - ratio * (b - a);
      f1 = mix.density(x1);
    }
  }
  return 0.5 * (a + b);
}

inline DensityFunctionals density_functionals(const FiniteMixture& mix, double pass_threshold) {
  DensityFunctionals out;
  out.mean = mixture_mean(mix);
  out.variance = mixture_variance(mix);
  double third = 0.0;
  for (std::size_t k = 0; k < mix.size(); ++k) {
    const double d = mix.components[k].mu - out.mean;
    third += mix.weights[k] * (d * d * d + 3.0 * d * mix.components[k].sigma2);
  }
  out.pearson_skew = third / std::pow(out.variance, 1.5);
  out.mode = mixture_mode(mix);
  out.mode_skew = 1.0 - 2.0 * mix.cdf(out.mode);
  out.pass_prob = 1.0 - mix.cdf(pass_threshold);
  return out;
}

/// Effective sample size by Geyer's initial positive sequence. A constant
/// series returns its length; the integrated time is floored at 1/log10(n).
inline double effective_sample_size(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) return static_cast<double>(n);
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (double x : xs) c0 += (x - mean) * (x - mean);
  c0 /= static_cast<double>(n);
  if (c0 <= 0.0) return static_cast<double>(n);
  auto rho = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) acc += (xs[t] - mean) * (xs[t + lag] - mean);
    return acc / static_cast<double>(n) / c0;
  };
  double sum = 0.0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double pair = rho(2 * m) + rho(2 * m + 1);
    if (!(pair > 0.0)) break;
    sum += pair;
  }
  double tau = -1.0 + 2.0 * sum;
  const double floor = 1.0 / std::log10(static_cast<double>(std::max<std::size_t>(n, 10)));
  tau = std::max(tau, floor);
  return static_cast<double>(n) / tau;
}

/// ESS of the number of distinct restaurants in use per record.
inline double ess_population_clusters(std::span<const ChainRecord> records) {
  if (records.size() < 10) throw DataError("ess_population_clusters needs at least 10 records");
  std::vector<double> series;
  series.reserve(records.size());
  for (const auto& rec : records) series.push_back(partition_blocks(canonical_partition(rec.c)));
  return effective_sample_size(series);
}

}  // namespace semihdp
