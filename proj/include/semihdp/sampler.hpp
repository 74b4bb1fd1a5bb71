#pragma once

// Marginal Gibbs sampler for the semi-HDP mixture: seating (s), shared-table
// (t), dish values, area flags (h), kappa, omega, truncated draws of F_r, the
// restaurant indicators c (Gibbs or Metropolised), relabeling and pseudopriors.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semihdp/distributions.hpp"
#include "semihdp/error.hpp"
#include "semihdp/random.hpp"
#include "semihdp/state.hpp"

namespace semihdp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

enum class CUpdateMode { Gibbs, MetropolisedUniform, MetropolisedL2 };

inline std::string to_string(CUpdateMode m) {
  switch (m) {
    case CUpdateMode::Gibbs: return "gibbs";
    case CUpdateMode::MetropolisedUniform: return "metropolised-uniform";
    case CUpdateMode::MetropolisedL2: return "metropolised-l2";
  }
  return "gibbs";
}

inline CUpdateMode parse_c_update_mode(const std::string& s) {
  if (s == "gibbs") return CUpdateMode::Gibbs;
  if (s == "metropolised-uniform") return CUpdateMode::MetropolisedUniform;
  if (s == "metropolised-l2") return CUpdateMode::MetropolisedL2;
  throw ConfigError("unknown c_update_mode '" + s + "' (gibbs, metropolised-uniform, metropolised-l2)");
}

struct SamplerConfig {
  std::size_t n_burnin = 2000;
  std::size_t n_iter = 10000;
  std::size_t thin = 5;
  CUpdateMode c_update_mode = CUpdateMode::Gibbs;
  std::size_t pseudoprior_pool_size = 500;
  std::size_t pool_burnin = 500;
  std::size_t pool_thin = 10;
  std::uint64_t seed = 20201;
  bool validate_every_sweep = true;

  void validate() const {
    if (thin < 1) throw ConfigError("thin must be >= 1");
    if (pool_thin < 1) throw ConfigError("pool_thin must be >= 1");
    if (pseudoprior_pool_size < 1) throw ConfigError("pool_size must be >= 1");
  }
};

/// Dataset plus hyperparameters, with per-observation predictive log
/// densities under G0 and G00 cached (they never change during a run).
struct Model {
  Dataset data;
  HyperParams hyper;
  std::vector<std::vector<double>> log_pred0;
  std::vector<std::vector<double>> log_pred00;

  Model(Dataset d, HyperParams h) : data(std::move(d)), hyper(std::move(h)) {
    data.validate();
    hyper.validate(data.num_groups());
    log_pred0.resize(data.num_groups());
    log_pred00.resize(data.num_groups());
    for (std::size_t i = 0; i < data.num_groups(); ++i) {
      for (double y : data.groups[i]) {
        SuffStats s;
        s.add(y);
        log_pred0[i].push_back(nig_log_marginal(s, hyper.base0));
        log_pred00[i].push_back(nig_log_marginal(s, hyper.base00));
      }
    }
  }

  std::size_t num_groups() const { return data.num_groups(); }
};

namespace detail {

/// Precomputed Gaussian log-density terms for a parameter.
struct KernelCache {
  double mu = 0.0;
  double half_inv_s2 = 0.5;
  double log_norm = 0.0;  // -0.5 log(2 pi sigma2)

  explicit KernelCache(const GaussianParam& p = {})
      : mu(p.mu), half_inv_s2(0.5 / p.sigma2), log_norm(-0.5 * (kLogTwoPi + std::log(p.sigma2))) {}

  double logpdf(double y) const {
    const double d = y - mu;
    return log_norm - d * d * half_inv_s2;
  }
};

inline void remove_customer(ChainState& st, int r, int l) {
  Table& tb = st.restaurants[r].tables[l];
  --tb.n;
  if (tb.n == 0 && tb.h == 0) --st.m[tb.t];
}

}  // namespace detail

/// Observation attached to a seating decision. An absent observation means
/// prior-only seating: every kernel term is 1 and new dishes come from the prior.
struct Observation {
  double y = 0.0;
  double log_pred0 = 0.0;
  double log_pred00 = 0.0;
  bool has_data = true;

  static Observation none() { return {0.0, 0.0, 0.0, false}; }
};

/// Seats one customer in restaurant r following the within-restaurant CRP
/// and, for a new table, the private/shared-area split. Returns the table index.
/// The caller must have removed the customer from any previous table.
inline int seat_customer(ChainState& st, int r, const Observation& obs, const HyperParams& hp, Rng& rng) {
  Restaurant& rest = st.restaurants[r];
  const double kappa = st.kappa;
  const double log_alpha = std::log(hp.alpha);
  const double M = static_cast<double>(st.total_m());
  const double log_shared_norm = std::log(M + hp.gamma);

  thread_local std::vector<double> logw;
  thread_local std::vector<int> option;  // >= 0: table; -1: new private; -2: new shared; <= -3: join tau (-3-k)
  logw.clear();
  option.clear();

  for (std::size_t l = 0; l < rest.tables.size(); ++l) {
    const Table& tb = rest.tables[l];
    if (tb.n <= 0) continue;
    double lw = std::log(static_cast<double>(tb.n));
    if (obs.has_data) lw += normal_logpdf(obs.y, st.value(r, static_cast<int>(l)));
    logw.push_back(lw);
    option.push_back(static_cast<int>(l));
  }
  const double log_kappa = safe_log(kappa);
  const double log_one_minus = safe_log(1.0 - kappa);
  logw.push_back(log_alpha + log_kappa + (obs.has_data ? obs.log_pred0 : 0.0));
  option.push_back(-1);
  if (log_one_minus > kNegInf) {
    for (std::size_t k = 0; k < st.tau.size(); ++k) {
      if (st.m[k] <= 0) continue;
      double lw = log_alpha + log_one_minus + std::log(static_cast<double>(st.m[k])) - log_shared_norm;
      if (obs.has_data) lw += normal_logpdf(obs.y, st.tau[k]);
      logw.push_back(lw);
      option.push_back(-3 - static_cast<int>(k));
    }
    logw.push_back(log_alpha + log_one_minus + std::log(hp.gamma) - log_shared_norm +
                   (obs.has_data ? obs.log_pred00 : 0.0));
    option.push_back(-2);
  }

  const int choice = option[sample_log_categorical(logw, rng)];
  if (choice >= 0) {
    ++rest.tables[choice].n;
    return choice;
  }
  Table tb;
  tb.n = 1;
  SuffStats s;
  if (obs.has_data) s.add(obs.y);
  if (choice == -1) {
    tb.h = 1;
    tb.t = static_cast<int>(rest.psi.size());
    rest.psi.push_back(nig_posterior_draw(s, hp.base0, rng));
  } else if (choice == -2) {
    tb.h = 0;
    tb.t = static_cast<int>(st.tau.size());
    st.tau.push_back(nig_posterior_draw(s, hp.base00, rng));
    st.m.push_back(1);
  } else {
    tb.h = 0;
    tb.t = -3 - choice;
    ++st.m[tb.t];
  }
  rest.tables.push_back(tb);
  return static_cast<int>(rest.tables.size()) - 1;
}

inline Observation observation(const Model& model, std::size_t i, std::size_t j) {
  return {model.data.groups[i][j], model.log_pred0[i][j], model.log_pred00[i][j], true};
}

/// Moves every customer of group i into restaurant r and reseats them one by
/// one. An empty target restaurant holding a pseudoprior snapshot exposes the
/// snapshot tables (as private dishes, with their stored counts as phantom
/// weights) while seating; phantom counts are withdrawn afterwards.
inline void reseat_group(ChainState& st, const Model& model, std::size_t i, int r, Rng& rng) {
  const int old = st.c[i];
  for (int l : st.s[i]) detail::remove_customer(st, old, l);
  st.c[i] = r;

  std::vector<std::pair<int, int>> phantom;  // (table, phantom count)
  if (st.live_tables(r) == 0 && st.pseudo[r]) {
    Restaurant& rest = st.restaurants[r];
    for (const SnapshotTable& snap : st.pseudo[r]->tables) {
      Table tb;
      tb.n = snap.n;
      tb.h = 1;
      tb.t = static_cast<int>(rest.psi.size());
      rest.psi.push_back(snap.value);
      phantom.emplace_back(static_cast<int>(rest.tables.size()), snap.n);
      rest.tables.push_back(tb);
    }
  }
  st.pseudo[r].reset();
  for (std::size_t j = 0; j < st.s[i].size(); ++j)
    st.s[i][j] = seat_customer(st, r, observation(model, i, j), model.hyper, rng);
  for (auto [l, n] : phantom) st.restaurants[r].tables[l].n -= n;
}

/// c_i = i; customers seated group by group with the sequential CRP; kappa
/// and omega drawn from their priors.
inline ChainState init_state(const Model& model, Rng& rng) {
  const std::size_t I = model.num_groups();
  const HyperParams& hp = model.hyper;
  ChainState st;
  st.c.resize(I);
  for (std::size_t i = 0; i < I; ++i) st.c[i] = static_cast<int>(i);
  st.omega = dirichlet_draw(rng, hp.eta);
  st.kappa = hp.fixed_kappa ? *hp.fixed_kappa : beta_draw(rng, hp.a_kappa, hp.b_kappa);
  st.restaurants.resize(I);
  st.pseudo.resize(I);
  st.s.resize(I);
  for (std::size_t i = 0; i < I; ++i) {
    st.s[i].resize(model.data.groups[i].size());
    for (std::size_t j = 0; j < st.s[i].size(); ++j)
      st.s[i][j] = seat_customer(st, st.c[i], observation(model, i, j), hp, rng);
  }
  return st;
}

/// Sufficient statistics of the observations at each table.
inline std::vector<std::vector<SuffStats>> table_stats(const ChainState& st, const Model& model) {
  std::vector<std::vector<SuffStats>> out(st.restaurants.size());
  for (std::size_t r = 0; r < st.restaurants.size(); ++r) out[r].resize(st.restaurants[r].tables.size());
  for (std::size_t i = 0; i < st.c.size(); ++i) {
    const int r = st.c[i];
    for (std::size_t j = 0; j < st.s[i].size(); ++j) out[r][st.s[i][j]].add(model.data.groups[i][j]);
  }
  return out;
}

/// Cluster allocation update: every s_ij resampled given all the others.
inline void update_s(ChainState& st, const Model& model, Rng& rng) {
  for (std::size_t i = 0; i < st.c.size(); ++i) {
    const int r = st.c[i];
    for (std::size_t j = 0; j < st.s[i].size(); ++j) {
      detail::remove_customer(st, r, st.s[i][j]);
      st.s[i][j] = seat_customer(st, r, observation(model, i, j), model.hyper, rng);
    }
  }
}

/// Shared-table allocation update for every live table in the common area.
inline void update_t(ChainState& st, const Model& model, Rng& rng) {
  const auto stats = table_stats(st, model);
  const HyperParams& hp = model.hyper;
  std::vector<double> logw;
  std::vector<int> option;
  for (std::size_t r = 0; r < st.restaurants.size(); ++r) {
    for (std::size_t l = 0; l < st.restaurants[r].tables.size(); ++l) {
      Table& tb = st.restaurants[r].tables[l];
      if (tb.n <= 0 || tb.h != 0) continue;
      const SuffStats& ss = stats[r][l];
      --st.m[tb.t];
      logw.clear();
      option.clear();
      for (std::size_t k = 0; k < st.tau.size(); ++k) {
        if (st.m[k] <= 0) continue;
        logw.push_back(std::log(static_cast<double>(st.m[k])) + log_likelihood(ss, st.tau[k]));
        option.push_back(static_cast<int>(k));
      }
      logw.push_back(std::log(hp.gamma) + nig_log_marginal(ss, hp.base00));
      option.push_back(-1);
      const int k = option[sample_log_categorical(logw, rng)];
      if (k >= 0) {
        tb.t = k;
        ++st.m[k];
      } else {
        tb.t = static_cast<int>(st.tau.size());
        st.tau.push_back(nig_posterior_draw(ss, hp.base00, rng));
        st.m.push_back(1);
      }
    }
  }
}

/// Dish values: private dishes from their G0 posterior, shared dishes from the
/// G00 posterior pooling every attached observation across restaurants.
inline void update_values(ChainState& st, const Model& model, Rng& rng) {
  const auto stats = table_stats(st, model);
  std::vector<SuffStats> tau_stats(st.tau.size());
  for (std::size_t r = 0; r < st.restaurants.size(); ++r) {
    Restaurant& rest = st.restaurants[r];
    std::vector<SuffStats> psi_stats(rest.psi.size());
    std::vector<char> psi_used(rest.psi.size(), 0);
    for (std::size_t l = 0; l < rest.tables.size(); ++l) {
      const Table& tb = rest.tables[l];
      if (tb.n <= 0) continue;
      if (tb.h == 1) {
        psi_stats[tb.t].merge(stats[r][l]);
        psi_used[tb.t] = 1;
      } else {
        tau_stats[tb.t].merge(stats[r][l]);
      }
    }
    for (std::size_t k = 0; k < rest.psi.size(); ++k)
      if (psi_used[k]) rest.psi[k] = nig_posterior_draw(psi_stats[k], model.hyper.base0, rng);
  }
  for (std::size_t k = 0; k < st.tau.size(); ++k)
    st.tau[k] = nig_posterior_draw(tau_stats[k], model.hyper.base00, rng);
}

/// Area flags, one table at a time. A private dish moves to the common area
/// as a fresh shared table unless it exactly equals a live shared dish.
inline void update_h(ChainState& st, const Model& model, Rng& rng) {
  const HyperParams& hp = model.hyper;
  const double log_kappa = safe_log(st.kappa);
  const double log_one_minus = safe_log(1.0 - st.kappa);
  for (std::size_t r = 0; r < st.restaurants.size(); ++r) {
    Restaurant& rest = st.restaurants[r];
    for (std::size_t l = 0; l < rest.tables.size(); ++l) {
      Table& tb = rest.tables[l];
      if (tb.n <= 0) continue;
      if (tb.h == 1) {
        const GaussianParam v = rest.psi[tb.t];
        int exact = -1;
        for (std::size_t k = 0; k < st.tau.size(); ++k)
          if (st.m[k] > 0 && st.tau[k] == v) exact = static_cast<int>(k);
        if (exact >= 0 && log_one_minus > kNegInf) {
          tb.h = 0;
          tb.t = exact;
          ++st.m[exact];
          continue;
        }
        const double M = static_cast<double>(st.total_m());
        const double lw[2] = {log_kappa + nig_log_density(v, hp.base0),
                              log_one_minus + std::log(hp.gamma / (M + hp.gamma)) + nig_log_density(v, hp.base00)};
        if (sample_log_categorical(lw, rng) == 1) {
          tb.h = 0;
          tb.t = static_cast<int>(st.tau.size());
          st.tau.push_back(v);
          st.m.push_back(1);
        }
      } else {
        const int k = tb.t;
        // Other tables share tau_k: the atom outweighs any density, h stays 0.
        if (st.m[k] > 1 && log_one_minus > kNegInf) continue;
        const GaussianParam v = st.tau[k];
        const double M = static_cast<double>(st.total_m() - 1);
        const double lw[2] = {log_kappa + nig_log_density(v, hp.base0),
                              log_one_minus + std::log(hp.gamma / (M + hp.gamma)) + nig_log_density(v, hp.base00)};
        if (sample_log_categorical(lw, rng) == 0) {
          --st.m[k];
          tb.h = 1;
          tb.t = static_cast<int>(rest.psi.size());
          rest.psi.push_back(v);
        }
      }
    }
  }
}

inline void update_kappa(ChainState& st, const HyperParams& hp, Rng& rng) {
  if (hp.fixed_kappa) {
    st.kappa = *hp.fixed_kappa;
    return;
  }
  double private_tables = 0.0, shared_tables = 0.0;
  for (const Restaurant& rest : st.restaurants)
    for (const Table& tb : rest.tables) {
      if (tb.n <= 0) continue;
      (tb.h == 1 ? private_tables : shared_tables) += 1.0;
    }
  st.kappa = beta_draw(rng, hp.a_kappa + private_tables, hp.b_kappa + shared_tables);
}

inline void update_omega(ChainState& st, const HyperParams& hp, Rng& rng) {
  std::vector<double> par = hp.eta;
  for (int r : st.c) par[r] += 1.0;
  st.omega = dirichlet_draw(rng, par);
}

/// Finite draw from G~ given the current common area: weights over the live
/// shared dishes plus a remainder v0 served by a Polya urn over G00 (only the
/// atoms actually requested are ever instantiated).
class SharedMeasureSampler {
 public:
  SharedMeasureSampler(const ChainState& st, const HyperParams& hp, Rng& rng) : base00_(hp.base00), gamma_(hp.gamma) {
    std::vector<double> par;
    for (std::size_t k = 0; k < st.tau.size(); ++k) {
      if (st.m[k] <= 0) continue;
      atoms_.push_back(st.tau[k]);
      par.push_back(static_cast<double>(st.m[k]));
    }
    par.push_back(hp.gamma);
    weights_ = dirichlet_draw(rng, par);
  }

  GaussianParam draw(Rng& rng) {
    std::size_t k = 0;
    const double u = uniform01(rng);
    double acc = 0.0;
    for (; k + 1 < weights_.size(); ++k) {
      acc += weights_[k];
      if (u < acc) return atoms_[k];
    }
    // Remainder: Polya urn for G~' ~ DP(gamma G00).
    const double total = static_cast<double>(urn_total_);
    const double v = uniform01(rng) * (total + gamma_);
    double cum = 0.0;
    for (std::size_t j = 0; j < urn_atoms_.size(); ++j) {
      cum += static_cast<double>(urn_counts_[j]);
      if (v < cum) {
        ++urn_counts_[j];
        ++urn_total_;
        return urn_atoms_[j];
      }
    }
    urn_atoms_.push_back(nig_draw(base00_, rng));
    urn_counts_.push_back(1);
    ++urn_total_;
    return urn_atoms_.back();
  }

 private:
  NIGBase base00_;
  double gamma_;
  std::vector<GaussianParam> atoms_;
  std::vector<double> weights_;
  std::vector<GaussianParam> urn_atoms_;
  std::vector<int> urn_counts_;
  int urn_total_ = 0;
};

/// One truncated realization of F_r with its provenance.
struct FDraw {
  FiniteMixture mix;
  std::vector<int> h;  // per component: table area flag, -1 for prior-part atoms
  std::vector<int> t;  // per component: dish index, -1 when not a live dish
  double pi0 = 1.0;    // mass of the prior part
  double eps_M = 1.0;  // stick-breaking residual after M atoms
  std::size_t M = 0;

  double truncation_bound() const { return pi0 * eps_M; }
};

inline constexpr std::size_t kMaxTruncationAtoms = 100000;

/// Conditional draw of F_r: Dirichlet(alpha, n_r1..n_rH) weights on the tables
/// plus pi0 times a stick-breaking draw whose length M grows until
/// pi0 * eps_M <= trunc_eps. Empty restaurants use their pseudoprior snapshot
/// when present, otherwise the pure prior part.
inline FDraw draw_F(const ChainState& st, int r, const HyperParams& hp, SharedMeasureSampler& shared, Rng& rng) {
  FDraw out;
  std::vector<double> par;
  const Restaurant& rest = st.restaurants[r];
  if (st.live_tables(r) > 0) {
    for (std::size_t l = 0; l < rest.tables.size(); ++l) {
      const Table& tb = rest.tables[l];
      if (tb.n <= 0) continue;
      out.mix.components.push_back(st.value(r, static_cast<int>(l)));
      out.h.push_back(tb.h);
      out.t.push_back(tb.t);
      par.push_back(static_cast<double>(tb.n));
    }
  } else if (st.pseudo[r]) {
    for (const SnapshotTable& snap : st.pseudo[r]->tables) {
      out.mix.components.push_back(snap.value);
      out.h.push_back(snap.h);
      out.t.push_back(-1);
      par.push_back(static_cast<double>(snap.n));
    }
  }
  std::vector<double> pi;
  if (par.empty()) {
    out.pi0 = 1.0;
  } else {
    par.insert(par.begin(), hp.alpha);
    pi = dirichlet_draw(rng, par);
    out.pi0 = pi[0];
    out.mix.weights.assign(pi.begin() + 1, pi.end());
  }

  const double kappa = st.kappa;
  double remaining = 1.0;
  std::vector<double> atom_w;
  while (out.pi0 * remaining > hp.trunc_eps && out.M < kMaxTruncationAtoms) {
    const double w = remaining * beta_draw(rng, 1.0, hp.alpha);
    atom_w.push_back(w);
    remaining -= w;
    if (remaining < 0.0) remaining = 0.0;
    ++out.M;
    out.mix.components.push_back(bernoulli_draw(rng, kappa) ? nig_draw(hp.base0, rng) : shared.draw(rng));
    out.h.push_back(-1);
    out.t.push_back(-1);
  }
  out.eps_M = remaining;
  // The truncated remainder is spread proportionally over the kept atoms.
  for (double w : atom_w) out.mix.weights.push_back(out.pi0 * w);
  double total = 0.0;
  for (double w : out.mix.weights) total += w;
  for (double& w : out.mix.weights) w /= total;
  return out;
}

/// Log-density evaluator for a frozen mixture.
class MixtureLogDensity {
 public:
  explicit MixtureLogDensity(const FiniteMixture& mix) {
    for (std::size_t k = 0; k < mix.size(); ++k) {
      if (!(mix.weights[k] > 0.0)) continue;
      KernelCacheWithWeight c;
      c.kernel = detail::KernelCache(mix.components[k]);
      c.log_w = std::log(mix.weights[k]);
      comps_.push_back(c);
    }
  }

  double operator()(double y) const {
    thread_local std::vector<double> terms;
    terms.resize(comps_.size());
    double mx = kNegInf;
    for (std::size_t k = 0; k < comps_.size(); ++k) {
      terms[k] = comps_[k].log_w + comps_[k].kernel.logpdf(y);
      mx = std::max(mx, terms[k]);
    }
    if (!(mx > kNegInf)) return kNegInf;
    double acc = 0.0;
    for (double v : terms) acc += std::exp(v - mx);
    return mx + std::log(acc);
  }

  double group_log_likelihood(std::span<const double> ys) const {
    double acc = 0.0;
    for (double y : ys) acc += (*this)(y);
    return acc;
  }

 private:
  struct KernelCacheWithWeight {
    detail::KernelCache kernel;
    double log_w = 0.0;
  };
  std::vector<KernelCacheWithWeight> comps_;
};

/// One restaurant choice for a single group from unnormalized log weights
/// log(omega_r) + log-likelihood(y_i | F_r).
inline int c_gibbs_step(std::span<const double> log_post, Rng& rng) {
  return static_cast<int>(sample_log_categorical(log_post, rng));
}

/// Proposal weights p(. | from) proportional to 1 + (1 + d2(F_r, F_from))^-1.
class L2Proposal {
 public:
  explicit L2Proposal(const std::vector<FiniteMixture>& mixtures) : mixtures_(&mixtures) {
    const std::size_t R = mixtures.size();
    self_.resize(R);
    for (std::size_t r = 0; r < R; ++r) self_[r] = mixture_cross_term(mixtures[r], mixtures[r]);
    rows_.resize(R);
  }

  const std::vector<double>& row(std::size_t from) {
    auto& row = rows_[from];
    if (!row.empty()) return row;
    const auto& mix = *mixtures_;
    row.resize(mix.size());
    double total = 0.0;
    for (std::size_t r = 0; r < mix.size(); ++r) {
      double d2 = 0.0;
      if (r != from) {
        d2 = self_[r] + self_[from] - 2.0 * mixture_cross_term(mix[r], mix[from]);
        if (d2 < 0.0) d2 = 0.0;
      }
      row[r] = 1.0 + 1.0 / (1.0 + d2);
      total += row[r];
    }
    for (double& v : row) v /= total;
    return row;
  }

 private:
  const std::vector<FiniteMixture>* mixtures_;
  std::vector<double> self_;
  std::vector<std::vector<double>> rows_;
};

/// Metropolis-Hastings acceptance for moving a group from restaurant `from`
/// to `to`: log of the target ratio plus the proposal correction.
inline double c_mh_log_ratio(double log_post_to, double log_post_from, double log_q_back, double log_q_fwd) {
  return log_post_to - log_post_from + log_q_back - log_q_fwd;
}

struct TruncationAudit {
  std::size_t draws = 0;
  std::size_t violations = 0;
  double max_bound = 0.0;

  void record(const FDraw& d, double eps) {
    ++draws;
    const double b = d.truncation_bound();
    max_bound = std::max(max_bound, b);
    if (b > eps) ++violations;
  }
};

struct CUpdateStats {
  std::size_t proposals = 0;
  std::size_t accepted = 0;
  std::size_t moves = 0;
};

/// Draws every F_r for the current state (one shared G~ realization).
inline std::vector<FDraw> draw_all_F(const ChainState& st, const HyperParams& hp, Rng& rng, TruncationAudit* audit) {
  SharedMeasureSampler shared(st, hp, rng);
  std::vector<FDraw> out;
  out.reserve(st.restaurants.size());
  for (std::size_t r = 0; r < st.restaurants.size(); ++r) {
    out.push_back(draw_F(st, static_cast<int>(r), hp, shared, rng));
    if (audit) audit->record(out.back(), hp.trunc_eps);
  }
  return out;
}

inline void check_group_scores(std::span<const double> log_post, std::size_t group) {
  for (double v : log_post)
    if (v > kNegInf) return;
  throw NumericalError("restaurant update: every restaurant gives group " + std::to_string(group + 1) +
                       " zero likelihood (kernel/scale mismatch?)");
}

/// Gibbs update of every c_i given frozen mixtures F_1..F_I.
inline CUpdateStats update_c_gibbs(ChainState& st, const Model& model, const std::vector<FDraw>& F, Rng& rng) {
  CUpdateStats stats;
  const std::size_t R = F.size();
  std::vector<MixtureLogDensity> dens;
  dens.reserve(R);
  for (const FDraw& f : F) dens.emplace_back(f.mix);
  std::vector<double> log_post(R);
  for (std::size_t i = 0; i < st.c.size(); ++i) {
    for (std::size_t r = 0; r < R; ++r)
      log_post[r] = safe_log(st.omega[r]) + dens[r].group_log_likelihood(model.data.groups[i]);
    check_group_scores(log_post, i);
    const int r_new = c_gibbs_step(log_post, rng);
    ++stats.proposals;
    if (r_new != st.c[i]) {
      ++stats.moves;
      reseat_group(st, model, i, r_new, rng);
    }
  }
  stats.accepted = stats.moves;
  return stats;
}

/// Metropolised update: one proposal per group, uniform or L2-affinity based.
inline CUpdateStats update_c_metropolised(ChainState& st, const Model& model, const std::vector<FDraw>& F,
                                          bool l2_proposal, Rng& rng) {
  CUpdateStats stats;
  const std::size_t R = F.size();
  std::vector<FiniteMixture> mixtures;
  mixtures.reserve(R);
  for (const FDraw& f : F) mixtures.push_back(f.mix);
  std::optional<L2Proposal> prop;
  if (l2_proposal) prop.emplace(mixtures);
  std::vector<std::optional<MixtureLogDensity>> dens(R);
  auto density = [&](std::size_t r) -> const MixtureLogDensity& {
    if (!dens[r]) dens[r].emplace(mixtures[r]);
    return *dens[r];
  };

  for (std::size_t i = 0; i < st.c.size(); ++i) {
    const auto from = static_cast<std::size_t>(st.c[i]);
    std::size_t to = 0;
    double log_q_fwd = 0.0, log_q_back = 0.0;
    if (prop) {
      const auto& row = prop->row(from);
      std::vector<double> lw(row.size());
      for (std::size_t r = 0; r < row.size(); ++r) lw[r] = std::log(row[r]);
      to = sample_log_categorical(lw, rng);
      log_q_fwd = std::log(row[to]);
      log_q_back = std::log(prop->row(to)[from]);
    } else {
      to = std::uniform_int_distribution<std::size_t>(0, R - 1)(rng);
    }
    ++stats.proposals;
    if (to == from) {
      ++stats.accepted;
      continue;
    }
    const auto& ys = model.data.groups[i];
    const double lp_from = safe_log(st.omega[from]) + density(from).group_log_likelihood(ys);
    const double lp_to = safe_log(st.omega[to]) + density(to).group_log_likelihood(ys);
    if (!(lp_from > kNegInf) && !(lp_to > kNegInf)) {
      const double both[2] = {lp_from, lp_to};
      check_group_scores(both, i);
    }
    const double log_acc = c_mh_log_ratio(lp_to, lp_from, log_q_back, log_q_fwd);
    if (log_acc >= 0.0 || std::log(uniform01(rng)) < log_acc) {
      ++stats.accepted;
      ++stats.moves;
      reseat_group(st, model, i, static_cast<int>(to), rng);
    }
  }
  return stats;
}

/// Per-restaurant stores of frozen restaurant sub-states.
struct PseudopriorPool {
  std::vector<std::vector<RestaurantSnapshot>> entries;

  bool empty_for(std::size_t r) const { return r >= entries.size() || entries[r].empty(); }
};

inline RestaurantSnapshot snapshot_restaurant(const ChainState& st, int r) {
  RestaurantSnapshot snap;
  const Restaurant& rest = st.restaurants[r];
  for (std::size_t l = 0; l < rest.tables.size(); ++l) {
    const Table& tb = rest.tables[l];
    if (tb.n <= 0) continue;
    snap.tables.push_back({st.value(r, static_cast<int>(l)), tb.n, tb.h});
  }
  return snap;
}

/// Every empty restaurant gets a uniformly drawn pool entry; non-empty
/// restaurants drop any pseudoprior they held.
inline void pseudoprior_inject(ChainState& st, const PseudopriorPool& pool, Rng& rng) {
  for (std::size_t r = 0; r < st.restaurants.size(); ++r) {
    if (!st.restaurant_empty(static_cast<int>(r))) {
      st.pseudo[r].reset();
      continue;
    }
    if (pool.empty_for(r))
      throw ConfigError("pseudoprior pool has no entry for empty restaurant " + std::to_string(r + 1));
    const auto& list = pool.entries[r];
    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, list.size() - 1)(rng);
    st.pseudo[r] = list[k];
  }
}

/// Sweep of every update that does not touch c.
inline void sweep_fixed_c(ChainState& st, const Model& model, Rng& rng) {
  update_s(st, model, rng);
  update_t(st, model, rng);
  update_values(st, model, rng);
  update_h(st, model, rng);
  update_kappa(st, model.hyper, rng);
  update_omega(st, model.hyper, rng);
}

inline void check_state(const ChainState& st, const Model& model, const char* stage) {
  const auto v = validate_state(st, model.data);
  if (!v.empty()) throw NumericalError(std::string("state invariant broken after ") + stage + ": " + v.front());
}

/// Preliminary chain with c frozen at the identity; restaurant i's pool holds
/// thinned snapshots of restaurant i (which seats group i only).
inline PseudopriorPool pseudoprior_collect(const Model& model, const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  ChainState st = init_state(model, rng);
  const std::size_t I = model.num_groups();
  PseudopriorPool pool;
  pool.entries.resize(I);
  for (std::size_t it = 0; it < cfg.pool_burnin; ++it) {
    sweep_fixed_c(st, model, rng);
    relabel(st);
  }
  for (std::size_t k = 0; k < cfg.pseudoprior_pool_size; ++k) {
    for (std::size_t it = 0; it < cfg.pool_thin; ++it) {
      sweep_fixed_c(st, model, rng);
      relabel(st);
    }
    if (cfg.validate_every_sweep) check_state(st, model, "pseudoprior sweep");
    for (std::size_t r = 0; r < I; ++r) pool.entries[r].push_back(snapshot_restaurant(st, static_cast<int>(r)));
  }
  return pool;
}

/// Mixture of a restaurant, stored in a record.
struct RestaurantMixture {
  int restaurant = 0;  // 1-based
  FiniteMixture mix;
  std::vector<int> h;
  std::vector<int> t;

  friend bool operator==(const RestaurantMixture& a, const RestaurantMixture& b) {
    return a.restaurant == b.restaurant && a.mix.weights == b.mix.weights &&
           a.mix.components == b.mix.components && a.h == b.h && a.t == b.t;
  }
};

/// One persisted posterior draw.
struct ChainRecord {
  std::size_t iter = 0;
  std::vector<int> c;  // 1-based restaurant labels
  double kappa = 0.0;
  int H0 = 0;
  std::vector<int> H;  // live tables per restaurant
  std::vector<RestaurantMixture> mixtures;  // restaurants used by some group
  Partition partition;
  std::vector<int> unique_values;  // distinct dishes eaten per group
  int shared_values = 0;           // dishes eaten by more than one group
  double trunc_bound = 0.0;        // max pi0 * eps_M over this sweep's F draws

  const FiniteMixture& mixture_for_group(std::size_t i) const {
    for (const auto& rm : mixtures)
      if (rm.restaurant == c.at(i)) return rm.mix;
    throw DataError("record has no mixture for the restaurant of group " + std::to_string(i + 1));
  }

  friend bool operator==(const ChainRecord&, const ChainRecord&) = default;
};

/// Distinct dishes per group and the number of dishes shared between groups.
inline std::pair<std::vector<int>, int> dish_counts(const ChainState& st) {
  std::map<std::pair<int, int>, std::set<std::size_t>> eaters;  // (restaurant or -1, dish) -> groups
  std::vector<int> per_group(st.c.size(), 0);
  for (std::size_t i = 0; i < st.c.size(); ++i) {
    const int r = st.c[i];
    std::set<std::pair<int, int>> mine;
    for (int l : st.s[i]) {
      const Table& tb = st.restaurants[r].tables[l];
      mine.insert(tb.h == 1 ? std::make_pair(r, tb.t) : std::make_pair(-1, tb.t));
    }
    per_group[i] = static_cast<int>(mine.size());
    for (const auto& key : mine) eaters[key].insert(i);
  }
  int shared = 0;
  for (const auto& [key, groups] : eaters)
    if (groups.size() > 1) ++shared;
  return {per_group, shared};
}

inline ChainRecord make_record(const ChainState& st, const std::vector<FDraw>& F, std::size_t iter) {
  ChainRecord rec;
  rec.iter = iter;
  for (int r : st.c) rec.c.push_back(r + 1);
  rec.kappa = st.kappa;
  rec.H0 = static_cast<int>(st.live_shared());
  for (std::size_t r = 0; r < st.restaurants.size(); ++r)
    rec.H.push_back(static_cast<int>(st.live_tables(static_cast<int>(r))));
  std::set<int> used(st.c.begin(), st.c.end());
  for (int r : used) rec.mixtures.push_back({r + 1, F[r].mix, F[r].h, F[r].t});
  rec.partition = canonical_partition(st.c);
  auto [per_group, shared] = dish_counts(st);
  rec.unique_values = std::move(per_group);
  rec.shared_values = shared;
  for (const FDraw& f : F) rec.trunc_bound = std::max(rec.trunc_bound, f.truncation_bound());
  return rec;
}

struct ChainDiagnostics {
  TruncationAudit truncation;
  CUpdateStats c_updates;
  std::size_t sweeps = 0;
  double seconds = 0.0;
};

struct ChainResult {
  std::vector<ChainRecord> records;
  ChainDiagnostics diagnostics;
};

/// One full sweep: s, t, values, h, kappa, omega, F draws and c, relabel,
/// pseudoprior injection. Returns the F draws used by the c-update.
inline std::vector<FDraw> sweep(ChainState& st, const Model& model, const SamplerConfig& cfg,
                                const PseudopriorPool& pool, Rng& rng, ChainDiagnostics& diag) {
  sweep_fixed_c(st, model, rng);
  auto F = draw_all_F(st, model.hyper, rng, &diag.truncation);
  CUpdateStats cs;
  switch (cfg.c_update_mode) {
    case CUpdateMode::Gibbs: cs = update_c_gibbs(st, model, F, rng); break;
    case CUpdateMode::MetropolisedUniform: cs = update_c_metropolised(st, model, F, false, rng); break;
    case CUpdateMode::MetropolisedL2: cs = update_c_metropolised(st, model, F, true, rng); break;
  }
  diag.c_updates.proposals += cs.proposals;
  diag.c_updates.accepted += cs.accepted;
  diag.c_updates.moves += cs.moves;
  relabel(st);
  pseudoprior_inject(st, pool, rng);
  ++diag.sweeps;
  return F;
}

/// Runs n_burnin + n_iter sweeps from init_state and keeps every thin-th
/// post-burn-in sweep. `on_record` (optional) sees each record as it is made.
inline ChainResult run_chain(const Model& model, const SamplerConfig& cfg, const PseudopriorPool& pool, Rng& rng,
                             const std::function<void(const ChainRecord&)>& on_record = {}) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  ChainResult result;
  ChainState st = init_state(model, rng);
  pseudoprior_inject(st, pool, rng);
  const std::size_t total = cfg.n_burnin + cfg.n_iter;
  for (std::size_t it = 0; it < total; ++it) {
    std::vector<FDraw> F;
    try {
      F = sweep(st, model, cfg, pool, rng, result.diagnostics);
      if (cfg.validate_every_sweep) check_state(st, model, "sweep");
    } catch (const Error& e) {
      throw Error(e.kind(), "iteration " + std::to_string(it + 1) + ": " + e.what());
    }
    if (it >= cfg.n_burnin && (it - cfg.n_burnin + 1) % cfg.thin == 0) {
      result.records.push_back(make_record(st, F, it + 1));
      if (on_record) on_record(result.records.back());
    }
  }
  result.diagnostics.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

/// Collects the pseudoprior pool and runs the chain, all from cfg.seed.
inline ChainResult run_chain(const Model& model, const SamplerConfig& cfg) {
  Rng rng(cfg.seed);
  const PseudopriorPool pool = pseudoprior_collect(model, cfg, rng);
  return run_chain(model, cfg, pool, rng);
}

/// Result of seating customers with no data: the dish id of every customer
/// (private dishes get ids >= 0, shared dish k gets -(k+1)), tables per
/// restaurant and the number of shared dishes.
struct PriorSeating {
  std::vector<std::vector<long>> dish;
  std::vector<int> tables;
  int shared_dishes = 0;
};

/// Sequential prior seating of groups of the given sizes into restaurants c
/// (0-based) with a fixed kappa.
inline PriorSeating simulate_prior_seating(std::span<const std::size_t> sizes, std::span<const int> c, double kappa,
                                           const HyperParams& hp, Rng& rng) {
  const std::size_t I = sizes.size();
  ChainState st;
  st.kappa = kappa;
  st.c.assign(c.begin(), c.end());
  st.restaurants.resize(I);
  st.pseudo.resize(I);
  st.s.resize(I);
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t j = 0; j < sizes[i]; ++j) st.s[i].push_back(seat_customer(st, c[i], Observation::none(), hp, rng));

  PriorSeating out;
  std::map<std::pair<int, int>, long> private_ids;
  out.dish.resize(I);
  for (std::size_t i = 0; i < I; ++i) {
    for (int l : st.s[i]) {
      const Table& tb = st.restaurants[c[i]].tables[l];
      if (tb.h == 0) {
        out.dish[i].push_back(-(static_cast<long>(tb.t) + 1));
      } else {
        auto [it, inserted] = private_ids.emplace(std::make_pair(c[i], tb.t), static_cast<long>(private_ids.size()));
        out.dish[i].push_back(it->second);
      }
    }
  }
  for (std::size_t r = 0; r < I; ++r) out.tables.push_back(static_cast<int>(st.live_tables(static_cast<int>(r))));
  out.shared_dishes = static_cast<int>(st.live_shared());
  return out;
}

}  // namespace semihdp
