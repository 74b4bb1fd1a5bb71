#pragma once

// Latent configuration of the food-court process: restaurants with private
// and shared-area tables, shared dishes, and per-observation seatings.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "semihdp/distributions.hpp"
#include "semihdp/error.hpp"

namespace semihdp {

/// Grouped real-valued observations; group i holds y_{i1..iN_i}.
struct Dataset {
  std::vector<std::vector<double>> groups;
  std::vector<std::string> group_ids;

  std::size_t num_groups() const { return groups.size(); }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    return n;
  }

  void validate() const {
    if (groups.empty()) throw DataError("dataset has no groups");
    if (!group_ids.empty() && group_ids.size() != groups.size())
      throw DataError("dataset group_ids length does not match the number of groups");
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (groups[i].empty()) throw DataError("group " + std::to_string(i + 1) + " is empty");
      for (double y : groups[i])
        if (!std::isfinite(y))
          throw DataError("group " + std::to_string(i + 1) + " contains a non-finite value");
    }
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct HyperParams {
  double alpha = 1.0;
  double gamma = 1.0;
  double a_kappa = 2.0;
  double b_kappa = 2.0;
  std::vector<double> eta;  // Dirichlet parameter of omega, one per group
  NIGBase base0;            // G0, private dishes
  NIGBase base00;           // G00, shared dishes
  double trunc_eps = 1e-4;
  std::optional<double> fixed_kappa;  // when set, kappa is held at this value

  /// Defaults of the simulation study: alpha = gamma = 1, Beta(2,2) on kappa,
  /// eta = (1/I, ..., 1/I), both bases N(mu|0,10 sigma2) x IG(sigma2|1,1).
  static HyperParams defaults(std::size_t num_groups) {
    HyperParams h;
    h.eta.assign(num_groups, 1.0 / static_cast<double>(num_groups));
    return h;
  }

  void validate(std::size_t num_groups) const {
    if (!(alpha > 0.0) || !(gamma > 0.0)) throw ConfigError("alpha and gamma must be > 0");
    if (!(a_kappa > 0.0) || !(b_kappa > 0.0)) throw ConfigError("a_kappa and b_kappa must be > 0");
    if (eta.size() != num_groups)
      throw ConfigError("eta must have one entry per group (" + std::to_string(num_groups) + ")");
    for (double e : eta)
      if (!(e > 0.0)) throw ConfigError("eta entries must be > 0");
    base0.validate();
    base00.validate();
    if (!(trunc_eps > 0.0)) throw ConfigError("trunc_eps must be > 0");
    if (fixed_kappa && !(*fixed_kappa >= 0.0 && *fixed_kappa <= 1.0))
      throw ConfigError("fixed_kappa must lie in [0, 1]");
  }
};

/// One l-cluster of a restaurant. h == 1: the dish is private and `t` indexes
/// the restaurant's `psi` list. h == 0: the dish is shared and `t` indexes the
/// common-area `tau` list. A table with n == 0 is dead until the next relabel.
struct Table {
  int n = 0;
  int h = 1;
  int t = 0;

  friend bool operator==(const Table&, const Table&) = default;
};

struct Restaurant {
  std::vector<Table> tables;
  std::vector<GaussianParam> psi;
};

/// Frozen restaurant-local sub-state used as a pseudoprior for an empty restaurant.
struct SnapshotTable {
  GaussianParam value;
  int n = 0;
  int h = 1;
};

struct RestaurantSnapshot {
  std::vector<SnapshotTable> tables;
};

struct ChainState {
  std::vector<int> c;  // restaurant of each group, 0-based
  std::vector<double> omega;
  double kappa = 0.5;
  std::vector<Restaurant> restaurants;
  std::vector<GaussianParam> tau;  // shared dishes
  std::vector<int> m;              // m_{.k}: live h == 0 tables pointing at tau_k
  std::vector<std::vector<int>> s;  // s[i][j]: table of y_ij within restaurant c[i]
  std::vector<std::optional<RestaurantSnapshot>> pseudo;  // only for empty restaurants

  std::size_t num_groups() const { return c.size(); }

  const GaussianParam& value(int r, int l) const {
    const Table& tb = restaurants[r].tables[l];
    return tb.h == 1 ? restaurants[r].psi[tb.t] : tau[tb.t];
  }

  bool restaurant_empty(int r) const {
    return std::none_of(c.begin(), c.end(), [r](int v) { return v == r; });
  }

  std::size_t live_tables(int r) const {
    return static_cast<std::size_t>(std::count_if(restaurants[r].tables.begin(),
                                                  restaurants[r].tables.end(),
                                                  [](const Table& t) { return t.n > 0; }));
  }

  /// H_0: shared dishes with at least one live table.
  std::size_t live_shared() const {
    return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](int v) { return v > 0; }));
  }

  int total_m() const {
    int acc = 0;
    for (int v : m) acc += v;
    return acc;
  }

  /// m_{rk}: tables of restaurant r sitting at shared dish k.
  int shared_multiplicity(int r, int k) const {
    int acc = 0;
    for (const Table& t : restaurants[r].tables)
      if (t.n > 0 && t.h == 0 && t.t == k) ++acc;
    return acc;
  }
};

/// Empty list iff every ChainState invariant holds.
inline std::vector<std::string> validate_state(const ChainState& st, const Dataset& data) {
  std::vector<std::string> out;
  auto fail = [&out](const std::string& msg) { out.push_back(msg); };
  const int I = static_cast<int>(data.num_groups());
  if (static_cast<int>(st.c.size()) != I) {
    fail("c has " + std::to_string(st.c.size()) + " entries, expected " + std::to_string(I));
    return out;
  }
  if (static_cast<int>(st.restaurants.size()) != I) fail("restaurant count differs from group count");
  if (st.s.size() != st.c.size()) {
    fail("s has wrong number of groups");
    return out;
  }
  for (int i = 0; i < I; ++i) {
    if (st.c[i] < 0 || st.c[i] >= I) {
      fail("c[" + std::to_string(i + 1) + "] out of range");
      return out;
    }
    if (st.s[i].size() != data.groups[i].size())
      fail("s for group " + std::to_string(i + 1) + " has wrong length");
  }
  if (!out.empty()) return out;

  if (static_cast<int>(st.omega.size()) != I) {
    fail("omega has wrong length");
  } else {
    double tot = 0.0;
    for (double w : st.omega) {
      if (!(w >= 0.0)) fail("omega has a negative entry");
      tot += w;
    }
    if (std::abs(tot - 1.0) > 1e-12) fail("omega not on the simplex (sum " + std::to_string(tot) + ")");
  }
  if (!(st.kappa >= 0.0 && st.kappa <= 1.0)) fail("kappa outside [0,1]");

  // n_{rl} versus seatings.
  std::vector<std::vector<int>> counted(st.restaurants.size());
  for (std::size_t r = 0; r < st.restaurants.size(); ++r)
    counted[r].assign(st.restaurants[r].tables.size(), 0);
  for (int i = 0; i < I; ++i) {
    const int r = st.c[i];
    for (std::size_t j = 0; j < st.s[i].size(); ++j) {
      const int l = st.s[i][j];
      if (l < 0 || l >= static_cast<int>(counted[r].size())) {
        fail("s[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "] points at missing table " +
             std::to_string(l + 1) + " of restaurant " + std::to_string(r + 1));
        continue;
      }
      ++counted[r][l];
    }
  }
  std::vector<int> m_count(st.tau.size(), 0);
  if (st.m.size() != st.tau.size()) fail("m and tau have different lengths");
  for (std::size_t r = 0; r < st.restaurants.size(); ++r) {
    const Restaurant& rest = st.restaurants[r];
    for (std::size_t l = 0; l < rest.tables.size(); ++l) {
      const Table& tb = rest.tables[l];
      const std::string where = "restaurant " + std::to_string(r + 1) + " table " + std::to_string(l + 1);
      if (tb.n != counted[r][l])
        fail("count mismatch at " + where + ": n=" + std::to_string(tb.n) + " but " +
             std::to_string(counted[r][l]) + " customers seated");
      if (tb.n <= 0) continue;
      if (tb.h == 1) {
        if (tb.t < 0 || tb.t >= static_cast<int>(rest.psi.size()))
          fail("dangling private reference at " + where);
        else if (!(rest.psi[tb.t].sigma2 > 0.0))
          fail("non-positive variance at " + where);
      } else if (tb.h == 0) {
        if (tb.t < 0 || tb.t >= static_cast<int>(st.tau.size()))
          fail("dangling shared reference at " + where);
        else
          ++m_count[tb.t];
      } else {
        fail("invalid h flag at " + where);
      }
    }
  }
  for (std::size_t k = 0; k < std::min(st.m.size(), m_count.size()); ++k) {
    if (st.m[k] != m_count[k])
      fail("shared multiplicity mismatch at tau " + std::to_string(k + 1) + ": m=" + std::to_string(st.m[k]) +
           " but " + std::to_string(m_count[k]) + " tables");
    if (st.m[k] > 0 && !(st.tau[k].sigma2 > 0.0))
      fail("non-positive variance at tau " + std::to_string(k + 1));
  }
  return out;
}

/// Set partition induced by equal labels, as block ids in order of first appearance.
/// (2,2,2,4) and (1,1,1,3) both map to {0,0,0,1}.
using Partition = std::vector<int>;

template <typename Label>
Partition canonical_partition(const std::vector<Label>& labels) {
  Partition out(labels.size());
  std::map<Label, int> seen;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = seen.emplace(labels[i], static_cast<int>(seen.size()));
    out[i] = it->second;
  }
  return out;
}

/// {{1,2,3},{4}} notation, 1-based elements.
inline std::string partition_to_string(const Partition& p) {
  int blocks = 0;
  for (int b : p) blocks = std::max(blocks, b + 1);
  std::ostringstream os;
  os << '{';
  for (int b = 0; b < blocks; ++b) {
    if (b) os << ',';
    os << '{';
    bool first = true;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] != b) continue;
      if (!first) os << ',';
      os << i + 1;
      first = false;
    }
    os << '}';
  }
  os << '}';
  return os.str();
}

inline int partition_blocks(const Partition& p) {
  int blocks = 0;
  for (int b : p) blocks = std::max(blocks, b + 1);
  return blocks;
}

/// Index-level view of one restaurant for relabeling: seatings of all its
/// customers, and per table the area flag and dish index.
struct RestaurantIndices {
  std::vector<int> s;
  std::vector<int> h;
  std::vector<int> t;
};

struct RelabelResult {
  std::vector<RestaurantIndices> restaurants;
  std::vector<std::vector<int>> psi_keep;  // per restaurant: old psi index for each new one
  std::vector<int> tau_keep;               // old tau index for each new one
};

/// Drops tables without customers and dishes without tables, then compacts
/// every index by the order of the sorted surviving old labels.
inline RelabelResult relabel_indices(const std::vector<RestaurantIndices>& in) {
  RelabelResult out;
  out.restaurants.resize(in.size());
  out.psi_keep.resize(in.size());

  std::vector<std::vector<int>> live_tables(in.size());
  int max_tau = -1;
  for (std::size_t r = 0; r < in.size(); ++r) {
    std::vector<int> used = in[r].s;
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    live_tables[r] = used;
    for (int l : used)
      if (in[r].h[l] == 0) max_tau = std::max(max_tau, in[r].t[l]);
  }

  std::vector<int> tau_map(static_cast<std::size_t>(max_tau + 1), -1);
  for (std::size_t r = 0; r < in.size(); ++r)
    for (int l : live_tables[r])
      if (in[r].h[l] == 0) tau_map[in[r].t[l]] = 0;
  for (std::size_t k = 0; k < tau_map.size(); ++k) {
    if (tau_map[k] < 0) continue;
    tau_map[k] = static_cast<int>(out.tau_keep.size());
    out.tau_keep.push_back(static_cast<int>(k));
  }

  for (std::size_t r = 0; r < in.size(); ++r) {
    const auto& live = live_tables[r];
    std::vector<int> table_map(in[r].h.size(), -1);
    for (std::size_t k = 0; k < live.size(); ++k) table_map[live[k]] = static_cast<int>(k);

    int max_psi = -1;
    for (int l : live)
      if (in[r].h[l] == 1) max_psi = std::max(max_psi, in[r].t[l]);
    std::vector<int> psi_map(static_cast<std::size_t>(max_psi + 1), -1);
    for (int l : live)
      if (in[r].h[l] == 1) psi_map[in[r].t[l]] = 0;
    for (std::size_t k = 0; k < psi_map.size(); ++k) {
      if (psi_map[k] < 0) continue;
      psi_map[k] = static_cast<int>(out.psi_keep[r].size());
      out.psi_keep[r].push_back(static_cast<int>(k));
    }

    RestaurantIndices& dst = out.restaurants[r];
    dst.s.reserve(in[r].s.size());
    for (int l : in[r].s) dst.s.push_back(table_map[l]);
    for (int l : live) {
      const int h = in[r].h[l];
      dst.h.push_back(h);
      dst.t.push_back(h == 1 ? psi_map[in[r].t[l]] : tau_map[in[r].t[l]]);
    }
  }
  return out;
}

/// Applies relabel_indices to a full state: removes empty tables, unused
/// private and shared dishes, and compacts s, t, psi, tau and m.
inline void relabel(ChainState& st) {
  const std::size_t R = st.restaurants.size();
  std::vector<RestaurantIndices> idx(R);
  for (std::size_t r = 0; r < R; ++r) {
    for (const Table& tb : st.restaurants[r].tables) {
      idx[r].h.push_back(tb.h);
      idx[r].t.push_back(tb.t);
    }
  }
  for (std::size_t i = 0; i < st.c.size(); ++i)
    for (int l : st.s[i]) idx[st.c[i]].s.push_back(l);

  const RelabelResult res = relabel_indices(idx);

  std::vector<std::size_t> cursor(R, 0);
  for (std::size_t i = 0; i < st.c.size(); ++i) {
    const int r = st.c[i];
    for (int& l : st.s[i]) l = res.restaurants[r].s[cursor[r]++];
  }
  for (std::size_t r = 0; r < R; ++r) {
    Restaurant& rest = st.restaurants[r];
    std::vector<Table> tables(res.restaurants[r].h.size());
    for (std::size_t k = 0; k < tables.size(); ++k) {
      tables[k].h = res.restaurants[r].h[k];
      tables[k].t = res.restaurants[r].t[k];
    }
    for (int l : res.restaurants[r].s) ++tables[l].n;
    rest.tables = std::move(tables);
    std::vector<GaussianParam> psi;
    psi.reserve(res.psi_keep[r].size());
    for (int k : res.psi_keep[r]) psi.push_back(rest.psi[k]);
    rest.psi = std::move(psi);
  }
  std::vector<GaussianParam> tau;
  std::vector<int> m(res.tau_keep.size(), 0);
  for (int k : res.tau_keep) tau.push_back(st.tau[k]);
  for (const Restaurant& rest : st.restaurants)
    for (const Table& tb : rest.tables)
      if (tb.h == 0) ++m[tb.t];
  st.tau = std::move(tau);
  st.m = std::move(m);
}

}  // namespace semihdp
