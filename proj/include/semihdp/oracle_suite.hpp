#pragma once

// Monte Carlo checks of the sampler's prior mechanics against the closed
// forms in theory.hpp, plus the closed-form L2 distance against quadrature.

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "semihdp/distributions.hpp"
#include "semihdp/random.hpp"
#include "semihdp/sampler.hpp"
#include "semihdp/state.hpp"
#include "semihdp/theory.hpp"

namespace semihdp {

struct OracleCheck {
  std::string group;  // tie, covariance, moment, peppf, l2
  std::string name;
  double expected = 0.0;
  double observed = 0.0;
  double tolerance = 0.0;  // absolute
  bool pass = false;
};

inline OracleCheck make_check(std::string group, std::string name, double expected, double observed,
                              double tolerance) {
  OracleCheck c{std::move(group), std::move(name), expected, observed, tolerance, false};
  c.pass = std::abs(observed - expected) <= tolerance;
  return c;
}

struct OracleSuiteConfig {
  std::uint64_t seed = 7;
  std::size_t tie_draws = 100000;
  std::size_t measure_draws = 10000;
  std::size_t peppf_draws = 1000000;
  std::size_t l2_pairs = 100;
  double n_se = 3.0;
  double alpha = 1.0;
};

inline const std::array<double, 3>& oracle_kappas() {
  static const std::array<double, 3> v{0.0, 0.5, 0.9};
  return v;
}

inline const std::array<double, 3>& oracle_gammas() {
  static const std::array<double, 3> v{0.5, 1.0, 2.0};
  return v;
}

/// Three-atom stand-in for G0 = N(0,1) seen through the events
/// (-inf,0], (0,1], (1,inf).
inline std::array<double, 3> three_cell_base() {
  const double a = normal_cdf(0.0, 0.0, 1.0);
  const double b = normal_cdf(1.0, 0.0, 1.0) - a;
  return {a, b, 1.0 - a - b};
}

inline std::string grid_label(double kappa, double gamma) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "kappa=%.1f gamma=%.1f", kappa, gamma);
  return buf;
}

/// Two customers in different restaurants: fraction of draws where they eat
/// the same dish, against (1-kappa)^2/(1+gamma).
inline std::vector<OracleCheck> tie_probability_checks(const OracleSuiteConfig& cfg, Rng& rng) {
  std::vector<OracleCheck> out;
  const std::size_t sizes[2] = {1, 1};
  const int c[2] = {0, 1};
  for (double kappa : oracle_kappas())
    for (double gamma : oracle_gammas()) {
      HyperParams hp = HyperParams::defaults(2);
      hp.alpha = cfg.alpha;
      hp.gamma = gamma;
      std::size_t ties = 0;
      for (std::size_t d = 0; d < cfg.tie_draws; ++d) {
        const PriorSeating ps = simulate_prior_seating(sizes, c, kappa, hp, rng);
        ties += ps.dish[0][0] == ps.dish[1][0];
      }
      const double p = tie_probability(kappa, gamma);
      const double n = static_cast<double>(cfg.tie_draws);
      out.push_back(make_check("tie", grid_label(kappa, gamma), p, static_cast<double>(ties) / n,
                               cfg.n_se * std::sqrt(p * (1.0 - p) / n)));
    }
  return out;
}

namespace detail {

/// Cell masses of a DP(conc, base) draw, stick-breaking truncated once the
/// residual is below 1e-13 (the residual goes to the last atom's cell).
template <class AtomCell>
std::array<double, 3> dp_cells(double conc, AtomCell&& atom_cell, Rng& rng) {
  std::array<double, 3> cells{0.0, 0.0, 0.0};
  double remaining = 1.0;
  int cell = 0;
  while (remaining > 1e-13) {
    const double w = remaining * beta_draw(rng, 1.0, conc);
    cell = atom_cell();
    cells[cell] += w;
    remaining -= w;
  }
  cells[cell] += remaining;
  return cells;
}

inline int draw_cell(const std::array<double, 3>& p, Rng& rng) {
  const double u = uniform01(rng);
  if (u < p[0]) return 0;
  if (u < p[0] + p[1]) return 1;
  return 2;
}

}  // namespace detail

/// Joint prior draws of (F1, F2) restricted to the three cells with G00 = G0.
inline std::vector<std::array<std::array<double, 3>, 2>> prior_cell_draws(double kappa, double gamma, double alpha,
                                                                          std::size_t draws, Rng& rng) {
  const auto g0 = three_cell_base();
  std::vector<std::array<std::array<double, 3>, 2>> out(draws);
  for (auto& d : out) {
    const auto g_tilde = detail::dp_cells(gamma, [&] { return detail::draw_cell(g0, rng); }, rng);
    auto from_p_tilde = [&] {
      return bernoulli_draw(rng, kappa) ? detail::draw_cell(g0, rng) : detail::draw_cell(g_tilde, rng);
    };
    d[0] = detail::dp_cells(alpha, from_p_tilde, rng);
    d[1] = detail::dp_cells(alpha, from_p_tilde, rng);
  }
  return out;
}

/// Covariance of F1(A), F2(B) and the moments E[F1(A)^n], n = 1, 2, 3.
inline std::vector<OracleCheck> measure_checks(const OracleSuiteConfig& cfg, Rng& rng) {
  std::vector<OracleCheck> out;
  const auto g0 = three_cell_base();
  const char* cell_names[3] = {"(-inf,0]", "(0,1]", "(1,inf)"};
  const double n = static_cast<double>(cfg.measure_draws);
  for (double kappa : oracle_kappas())
    for (double gamma : oracle_gammas()) {
      const auto draws = prior_cell_draws(kappa, gamma, cfg.alpha, cfg.measure_draws, rng);
      const std::string label = grid_label(kappa, gamma);
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          double mx = 0.0, my = 0.0;
          for (const auto& d : draws) {
            mx += d[0][a];
            my += d[1][b];
          }
          mx /= n;
          my /= n;
          std::vector<double> z;
          z.reserve(draws.size());
          double mz = 0.0;
          for (const auto& d : draws) {
            z.push_back((d[0][a] - mx) * (d[1][b] - my));
            mz += z.back();
          }
          mz /= n;
          double vz = 0.0;
          for (double v : z) vz += (v - mz) * (v - mz);
          vz /= n - 1.0;
          const double cov = mz * n / (n - 1.0);
          const double expected = semihdp_covariance(kappa, gamma, g0[a], g0[b], a == b ? g0[a] : 0.0);
          out.push_back(make_check("covariance", label + " A=" + cell_names[a] + " B=" + cell_names[b], expected,
                                   cov, cfg.n_se * std::sqrt(vz / n)));
        }
      for (int a = 0; a < 3; ++a) {
        out.push_back(make_check("moment", label + " n=1 A=" + cell_names[a], g0[a],
                                 semihdp_moment(1, kappa, cfg.alpha, gamma, g0[a]), 0.0));
        for (int pw = 2; pw <= 3; ++pw) {
          double m = 0.0, m2 = 0.0;
          for (const auto& d : draws) {
            const double v = std::pow(d[0][a], pw);
            m += v;
            m2 += v * v;
          }
          m /= n;
          const double var = (m2 / n - m * m) * n / (n - 1.0);
          out.push_back(make_check("moment", label + " n=" + std::to_string(pw) + " A=" + cell_names[a],
                                   semihdp_moment(pw, kappa, cfg.alpha, gamma, g0[a]), m,
                                   cfg.n_se * std::sqrt(var / n)));
        }
      }
    }
  return out;
}

/// pEPPF at kappa = 1 for two groups of size n_each: tallies of the pooled
/// partition over marginal prior simulations (omega ~ Dirichlet(1/2, 1/2),
/// c_i ~ omega), plus a normalization check of the closed form.
inline std::vector<OracleCheck> peppf_checks(const OracleSuiteConfig& cfg, std::size_t n_each, Rng& rng) {
  std::vector<OracleCheck> out;
  HyperParams hp = HyperParams::defaults(2);
  hp.alpha = cfg.alpha;
  const double eta = hp.eta[0];
  const double pi1 = 2.0 * eta * (eta + 1.0) / (2.0 * eta * (2.0 * eta + 1.0));
  const std::size_t sizes[2] = {n_each, n_each};
  std::map<Partition, std::size_t> tally;
  for (std::size_t d = 0; d < cfg.peppf_draws; ++d) {
    const std::vector<double> om = dirichlet_draw(rng, hp.eta);
    int c[2];
    for (int& ci : c) ci = bernoulli_draw(rng, om[0]) ? 0 : 1;
    const PriorSeating ps = simulate_prior_seating(sizes, c, 1.0, hp, rng);
    std::vector<long> pooled = ps.dish[0];
    pooled.insert(pooled.end(), ps.dish[1].begin(), ps.dish[1].end());
    ++tally[canonical_partition(pooled)];
  }
  const double n = static_cast<double>(cfg.peppf_draws);
  double total = 0.0;
  for (const Partition& p : enumerate_set_partitions(2 * n_each)) {
    const double expected = peppf_degenerate(peppf_input_from_partition(p, n_each, cfg.alpha, pi1));
    total += expected;
    const auto it = tally.find(p);
    const double freq = it == tally.end() ? 0.0 : static_cast<double>(it->second) / n;
    out.push_back(make_check("peppf", "N=" + std::to_string(n_each) + " " + partition_to_string(p), expected, freq,
                             cfg.n_se * std::sqrt(expected * (1.0 - expected) / n)));
  }
  out.push_back(make_check("peppf", "N=" + std::to_string(n_each) + " closed form sums to 1", 1.0, total, 1e-10));
  return out;
}

inline FiniteMixture random_mixture(Rng& rng) {
  FiniteMixture m;
  const int k = std::uniform_int_distribution<int>(1, 4)(rng);
  std::vector<double> ones(k, 1.0);
  m.weights = dirichlet_draw(rng, ones);
  for (int j = 0; j < k; ++j)
    m.components.push_back({-3.0 + 6.0 * uniform01(rng), 0.2 + 1.8 * uniform01(rng)});
  return m;
}

/// Trapezoid rule for the squared L2 distance on [-30, 30].
inline double l2_distance_sq_quadrature(const FiniteMixture& a, const FiniteMixture& b, std::size_t nodes = 100000) {
  const double lo = -30.0, hi = 30.0;
  const double h = (hi - lo) / static_cast<double>(nodes - 1);
  double acc = 0.0;
  for (std::size_t k = 0; k < nodes; ++k) {
    const double x = lo + h * static_cast<double>(k);
    const double d = a.density(x) - b.density(x);
    acc += (k == 0 || k + 1 == nodes ? 0.5 : 1.0) * d * d;
  }
  return acc * h;
}

inline std::vector<OracleCheck> l2_checks(const OracleSuiteConfig& cfg, Rng& rng) {
  std::vector<OracleCheck> out;
  for (std::size_t k = 0; k < cfg.l2_pairs; ++k) {
    const FiniteMixture a = random_mixture(rng);
    const FiniteMixture b = random_mixture(rng);
    out.push_back(make_check("l2", "pair " + std::to_string(k + 1), l2_distance_sq_quadrature(a, b),
                             mixture_l2_distance_sq(a, b), 1e-6));
  }
  return out;
}

inline std::vector<OracleCheck> run_oracle_suite(const OracleSuiteConfig& cfg) {
  std::vector<OracleCheck> all;
  auto append = [&](std::vector<OracleCheck> v) { all.insert(all.end(), v.begin(), v.end()); };
  Rng rng(cfg.seed);
  append(tie_probability_checks(cfg, rng));
  append(measure_checks(cfg, rng));
  append(peppf_checks(cfg, 1, rng));
  append(peppf_checks(cfg, 2, rng));
  append(l2_checks(cfg, rng));
  return all;
}

}  // namespace semihdp
