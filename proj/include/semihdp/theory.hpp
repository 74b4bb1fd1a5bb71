#pragma once

// Closed-form quantities of the semi-HDP prior used as ground truth.

#include <cmath>
#include <span>
#include <vector>

#include "semihdp/distributions.hpp"
#include "semihdp/error.hpp"
#include "semihdp/state.hpp"

namespace semihdp {

inline double log_eppf_dp(std::span<const int> freqs, double alpha) {
  if (freqs.empty()) throw ConfigError("eppf_dp: empty frequency vector");
  double n = 0.0;
  double acc = 0.0;
  for (int f : freqs) {
    if (f < 1) throw ConfigError("eppf_dp: frequencies must be >= 1");
    n += f;
    acc += std::lgamma(static_cast<double>(f));
  }
  const double k = static_cast<double>(freqs.size());
  return k * std::log(alpha) + std::lgamma(alpha) - std::lgamma(alpha + n) + acc;
}

/// Dirichlet-process EPPF: alpha^k Gamma(alpha)/Gamma(alpha+N) prod Gamma(n_j).
inline double eppf_dp(std::span<const int> freqs, double alpha) { return std::exp(log_eppf_dp(freqs, alpha)); }

/// Joint partition of two samples: frequencies of group-specific values
/// (n1, n2) and of shared values in each group (q1, q2, same length).
struct PEPPFInput {
  std::vector<int> n1, n2, q1, q2;
  double alpha = 1.0;
  double pi1 = 0.5;  // prior P(c1 = c2)

  void validate() const {
    if (q1.size() != q2.size()) throw ConfigError("PEPPFInput: q1 and q2 must have equal length");
    for (const auto* v : {&n1, &n2, &q1, &q2})
      for (int f : *v)
        if (f < 1) throw ConfigError("PEPPFInput: frequencies must be >= 1");
    if (!(alpha > 0.0)) throw ConfigError("PEPPFInput: alpha must be > 0");
    if (!(pi1 >= 0.0 && pi1 <= 1.0)) throw ConfigError("PEPPFInput: pi1 must be in [0,1]");
  }
};

/// pEPPF at kappa = 1: the fully exchangeable EPPF with weight pi1 plus,
/// when nothing is shared, the product of the two marginal EPPFs.
inline double peppf_degenerate(const PEPPFInput& in) {
  in.validate();
  std::vector<int> all = in.n1;
  all.insert(all.end(), in.n2.begin(), in.n2.end());
  for (std::size_t j = 0; j < in.q1.size(); ++j) all.push_back(in.q1[j] + in.q2[j]);
  double out = all.empty() ? 0.0 : in.pi1 * eppf_dp(all, in.alpha);
  if (in.q1.empty() && !in.n1.empty() && !in.n2.empty())
    out += (1.0 - in.pi1) * eppf_dp(in.n1, in.alpha) * eppf_dp(in.n2, in.alpha);
  return out;
}

/// cov(F1(A), F2(B)) when G00 = G0.
inline double semihdp_covariance(double kappa, double gamma, double g0_A, double g0_B, double g0_AB) {
  if (g0_AB > std::min(g0_A, g0_B) + 1e-15)
    throw ConfigError("semihdp_covariance: G0(A n B) exceeds min(G0(A), G0(B))");
  if (!(gamma > 0.0)) throw ConfigError("semihdp_covariance: gamma must be > 0");
  const double a = 1.0 - kappa;
  return a * a / (1.0 + gamma) * (g0_AB - g0_A * g0_B);
}

/// E[F1(A)^n] when G00 = G0. The inner sum runs from m = 0 with
/// P(K_0 = 0) = 1 so that the h = 0 term contributes (kappa G0(A))^t.
inline double semihdp_moment(std::size_t n, double kappa, double alpha, double gamma, double g0_A) {
  if (n == 0) return 1.0;
  if (n == 1) return g0_A;
  const auto outer = crp_cluster_count_pmf(n, alpha);
  std::vector<std::vector<double>> inner(n + 1);
  for (std::size_t h = 1; h <= n; ++h) inner[h] = crp_cluster_count_pmf(h, gamma);
  double total = 0.0;
  for (std::size_t t = 1; t <= n; ++t) {
    double sum_h = 0.0;
    for (std::size_t h = 0; h <= t; ++h) {
      const double binom = std::exp(std::lgamma(t + 1.0) - std::lgamma(h + 1.0) - std::lgamma(t - h + 1.0));
      const double weight = binom * std::pow(kappa, static_cast<double>(t - h)) * std::pow(1.0 - kappa, static_cast<double>(h));
      double sum_m = 0.0;
      if (h == 0) {
        sum_m = std::pow(g0_A, static_cast<double>(t));
      } else {
        for (std::size_t m = 1; m <= h; ++m)
          sum_m += std::pow(g0_A, static_cast<double>(t - h + m)) * inner[h][m - 1];
      }
      sum_h += weight * sum_m;
    }
    total += outer[t - 1] * sum_h;
  }
  return total;
}

/// P(theta_11 = theta_21 | c = (1,2)) = (1 - kappa)^2 / (1 + gamma).
inline double tie_probability(double kappa, double gamma) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("tie_probability: kappa must be in [0,1]");
  if (!(gamma > 0.0)) throw ConfigError("tie_probability: gamma must be > 0");
  return (1.0 - kappa) * (1.0 - kappa) / (1.0 + gamma);
}

/// All set partitions of n elements as restricted growth strings.
inline std::vector<Partition> enumerate_set_partitions(std::size_t n) {
  std::vector<Partition> out;
  if (n == 0) {
    out.emplace_back();
    return out;
  }
  Partition cur(n, 0);
  std::vector<int> maxv(n, 0);  // max block id among cur[0..i-1]
  while (true) {
    out.push_back(cur);
    // Find the rightmost position that can be incremented.
    std::size_t i = n - 1;
    while (i > 0 && cur[i] > maxv[i]) --i;
    if (i == 0) break;
    ++cur[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      cur[j] = 0;
      maxv[j] = std::max(maxv[j - 1], cur[j - 1]);
    }
  }
  return out;
}

/// Block sizes of a canonical partition.
inline std::vector<int> block_sizes(const Partition& p) {
  std::vector<int> sizes(static_cast<std::size_t>(partition_blocks(p)), 0);
  for (int b : p) ++sizes[b];
  return sizes;
}

/// Splits a partition of the pooled customers (first n1 from group 1, rest
/// from group 2) into the pEPPF frequency vectors.
inline PEPPFInput peppf_input_from_partition(const Partition& p, std::size_t n_first, double alpha, double pi1) {
  PEPPFInput in;
  in.alpha = alpha;
  in.pi1 = pi1;
  const int blocks = partition_blocks(p);
  std::vector<int> c1(blocks, 0), c2(blocks, 0);
  for (std::size_t k = 0; k < p.size(); ++k) (k < n_first ? c1 : c2)[p[k]]++;
  for (int b = 0; b < blocks; ++b) {
    if (c1[b] > 0 && c2[b] > 0) {
      in.q1.push_back(c1[b]);
      in.q2.push_back(c2[b]);
    } else if (c1[b] > 0) {
      in.n1.push_back(c1[b]);
    } else {
      in.n2.push_back(c2[b]);
    }
  }
  return in;
}

}  // namespace semihdp
