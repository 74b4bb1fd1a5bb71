#pragma once

// CSV writers for chain summaries (similarity matrix, partition posterior,
// Bayes factors, density bands, functional table).

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semihdp/analysis.hpp"
#include "semihdp/error.hpp"
#include "semihdp/sampler.hpp"

namespace semihdp {

struct SummaryOptions {
  std::vector<std::string> group_ids;  // one per group; defaults to 1..I
  Standardization transform;
  std::optional<double> pass_threshold;  // original scale
  std::optional<std::pair<double, double>> grid_range;  // original scale
  std::size_t grid_points = 200;
  double prior_odds = 1.0;
  std::vector<std::pair<std::size_t, std::size_t>> bf_pairs;  // 0-based; empty means all pairs
};

struct FunctionalSummary {
  double mean = 0.0;
  double lower95 = 0.0;
  double upper95 = 0.0;
};

/// Grid bounds covering the stored mixtures: component mean +/- 4 sd over
/// the components with weight above 1e-3, in original units.
inline std::pair<double, double> default_grid_range(std::span<const ChainRecord> records, const Standardization& tr) {
  require_records(records, "default_grid_range");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const std::size_t step = std::max<std::size_t>(1, records.size() / 200);
  for (std::size_t r = 0; r < records.size(); r += step)
    for (const auto& rm : records[r].mixtures)
      for (std::size_t k = 0; k < rm.mix.size(); ++k) {
        if (rm.mix.weights[k] < 1e-3) continue;
        const double sd = std::sqrt(rm.mix.components[k].sigma2);
        lo = std::min(lo, rm.mix.components[k].mu - 4.0 * sd);
        hi = std::max(hi, rm.mix.components[k].mu + 4.0 * sd);
      }
  if (!(lo < hi)) lo = -4.0, hi = 4.0;
  return {tr.inverse(lo), tr.inverse(hi)};
}

inline std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(lo < hi)) throw ConfigError("grid needs at least 2 points and lo < hi");
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) g[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  return g;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw DataError("cannot write '" + p.string() + "'");
  os << std::setprecision(10);
  return os;
}

inline std::string group_label(const SummaryOptions& o, std::size_t i) {
  return i < o.group_ids.size() ? o.group_ids[i] : std::to_string(i + 1);
}

inline void write_similarity_csv(const std::filesystem::path& p, const Matrix& psm, const SummaryOptions& o) {
  auto os = open_out(p);
  os << "group";
  for (std::size_t j = 0; j < psm.size(); ++j) os << ',' << group_label(o, j);
  os << '\n';
  for (std::size_t i = 0; i < psm.size(); ++i) {
    os << group_label(o, i);
    for (double v : psm[i]) os << ',' << v;
    os << '\n';
  }
}

/// Partition posterior table with the Binder and VI point estimates flagged.
inline void write_partitions_csv(const std::filesystem::path& p, std::span<const ChainRecord> records) {
  const PartitionPosterior post = partition_posterior(records);
  const Partition binder = point_partition(records, PartitionLoss::Binder);
  const Partition vi = point_partition(records, PartitionLoss::VariationOfInformation);
  std::vector<std::size_t> order(post.partitions.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return post.probabilities[a] > post.probabilities[b]; });
  auto os = open_out(p);
  os << "partition,probability,binder_estimate,vi_estimate\n";
  for (std::size_t k : order) {
    const Partition& part = post.partitions[k];
    os << '"' << partition_to_string(part) << "\"," << post.probabilities[k] << ',' << (part == binder) << ','
       << (part == vi) << '\n';
  }
}

inline void write_bayes_factors_csv(const std::filesystem::path& p, std::span<const ChainRecord> records,
                                    const SummaryOptions& o) {
  const std::size_t I = records.front().c.size();
  auto pairs = o.bf_pairs;
  if (pairs.empty())
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t j = i + 1; j < I; ++j) pairs.emplace_back(i, j);
  auto os = open_out(p);
  os << "group_a,group_b,p_same,bf01\n";
  for (auto [i, j] : pairs) {
    if (i >= I || j >= I) throw ConfigError("Bayes factor pair refers to a group beyond " + std::to_string(I));
    os << group_label(o, i) << ',' << group_label(o, j) << ',' << coclustering_probability(records, i, j) << ','
       << bayes_factor_pair(records, i, j, o.prior_odds) << '\n';
  }
}

inline void write_density_csv(const std::filesystem::path& p, const DensitySummary& d) {
  auto os = open_out(p);
  os << "x,mean,lower95,upper95\n";
  for (std::size_t k = 0; k < d.grid.size(); ++k)
    os << d.grid[k] << ',' << d.mean[k] << ',' << d.lower95[k] << ',' << d.upper95[k] << '\n';
}

inline FunctionalSummary summarize_draws(std::vector<double> xs) {
  FunctionalSummary s;
  double acc = 0.0;
  for (double x : xs) acc += x;
  s.mean = acc / static_cast<double>(xs.size());
  s.lower95 = quantile(xs, 0.025);
  s.upper95 = quantile(xs, 0.975);
  return s;
}

/// Per-record functionals of group i's density mapped to the original scale.
inline std::vector<DensityFunctionals> group_functionals(std::span<const ChainRecord> records, std::size_t i,
                                                         const SummaryOptions& o) {
  const Standardization& tr = o.transform;
  const double thr = o.pass_threshold ? tr.forward(*o.pass_threshold) : 0.0;
  std::vector<DensityFunctionals> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    DensityFunctionals f = density_functionals(rec.mixture_for_group(i), thr);
    f.mean = tr.inverse(f.mean);
    f.variance *= tr.sd * tr.sd;
    f.mode = tr.inverse(f.mode);
    out.push_back(f);
  }
  return out;
}

inline void write_functionals_csv(const std::filesystem::path& p, std::span<const ChainRecord> records,
                                  const SummaryOptions& o) {
  const std::size_t I = records.front().c.size();
  auto os = open_out(p);
  os << "group,functional,mean,lower95,upper95\n";
  for (std::size_t i = 0; i < I; ++i) {
    const auto fs = group_functionals(records, i, o);
    auto emit = [&](const char* name, auto member) {
      std::vector<double> xs;
      xs.reserve(fs.size());
      for (const auto& f : fs) xs.push_back(f.*member);
      const FunctionalSummary s = summarize_draws(std::move(xs));
      os << group_label(o, i) << ',' << name << ',' << s.mean << ',' << s.lower95 << ',' << s.upper95 << '\n';
    };
    emit("mean", &DensityFunctionals::mean);
    emit("variance", &DensityFunctionals::variance);
    emit("pearson_skewness", &DensityFunctionals::pearson_skew);
    emit("mode_skewness", &DensityFunctionals::mode_skew);
    if (o.pass_threshold) emit("pass_probability", &DensityFunctionals::pass_prob);
  }
}

/// Writes similarity.csv, partitions.csv, bayes_factors.csv,
/// density_<group>.csv and functionals.csv into `dir`.
inline void write_summaries(const std::filesystem::path& dir, std::span<const ChainRecord> records,
                            const SummaryOptions& o) {
  require_records(records, "summaries");
  std::filesystem::create_directories(dir);
  write_similarity_csv(dir / "similarity.csv", similarity_matrix(records), o);
  write_partitions_csv(dir / "partitions.csv", records);
  write_bayes_factors_csv(dir / "bayes_factors.csv", records, o);
  const auto [lo, hi] = o.grid_range ? *o.grid_range : default_grid_range(records, o.transform);
  const auto grid = linear_grid(lo, hi, o.grid_points);
  const std::size_t I = records.front().c.size();
  for (std::size_t i = 0; i < I; ++i)
    write_density_csv(dir / ("density_" + group_label(o, i) + ".csv"), density_summary(records, i, grid, o.transform));
  write_functionals_csv(dir / "functionals.csv", records, o);
}

}  // namespace semihdp
