#pragma once

// Simulation scenarios, preprocessing (jitter + pooled standardization) and
// the group,value CSV format.

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "semihdp/analysis.hpp"
#include "semihdp/error.hpp"
#include "semihdp/random.hpp"
#include "semihdp/state.hpp"

namespace semihdp {

/// Finite Gaussian mixture given by weights, means and standard deviations.
struct GaussianMixtureLaw {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> sds;
};

/// Skew-normal SN(xi, omega, alpha).
struct SkewNormalLaw {
  double xi = 0.0;
  double omega = 1.0;
  double alpha = 0.0;
};

using PopulationLaw = std::variant<GaussianMixtureLaw, SkewNormalLaw>;

struct ScenarioSpec {
  std::string id;
  std::vector<PopulationLaw> populations;
  std::vector<std::size_t> sizes;
  std::vector<int> true_partition;  // canonical; empty when not defined
};

inline GaussianMixtureLaw two_normals(double w, double m1, double s1, double m2, double s2) {
  return {{w, 1.0 - w}, {m1, m2}, {s1, s2}};
}

inline GaussianMixtureLaw one_normal(double m, double sd) { return {{1.0}, {m}, {sd}}; }

/// Scenario laws. Table-style (mu, sigma) pairs are (mean, sd); N(m, v) in
/// the four-population scenarios and the hundred-population scenario is (mean, variance).
/// "grades" is a three-section stand-in where sections 1 and 3 share a law.
inline ScenarioSpec scenario_spec(const std::string& id, std::size_t n_per_group = 100) {
  ScenarioSpec s;
  s.id = id;
  auto& P = s.populations;
  if (id == "I") {
    P = {two_normals(0.5, 0.0, 1.0, 5.0, 1.0), two_normals(0.5, 0.0, 1.0, 5.0, 1.0)};
    s.true_partition = {0, 0};
  } else if (id == "II") {
    P = {two_normals(0.9, 5.0, 0.6, 10.0, 0.6), two_normals(0.1, 5.0, 0.6, 0.0, 0.6)};
    s.true_partition = {0, 1};
  } else if (id == "III") {
    P = {two_normals(0.8, 0.0, 1.0, 5.0, 1.0), two_normals(0.2, 0.0, 1.0, 5.0, 1.0)};
    s.true_partition = {0, 1};
  } else if (id == "IV") {
    P = {one_normal(0, 1), one_normal(0, 1), one_normal(0, 1), SkewNormalLaw{0.0, 1.0, 1.0}};
    s.true_partition = {0, 0, 0, 1};
  } else if (id == "V") {
    P = {one_normal(0, 1), one_normal(0, 1.5), one_normal(0, 0.5), one_normal(0, 1)};
    s.true_partition = {0, 1, 2, 0};
  } else if (id == "VI") {
    P = {two_normals(0.5, 0, 1, 5, 1), two_normals(0.5, 0, 1, 5, 1), two_normals(0.5, 0, 1, -5, 1),
         two_normals(0.5, -5, 1, 5, 1)};
    s.true_partition = {0, 0, 1, 2};
  } else if (id == "VII") {
    const GaussianMixtureLaw blocks[5] = {
        two_normals(0.5, -5, 1, 5, 1), two_normals(0.5, -5, 1, 0, 1), two_normals(0.5, 0, 1, 5, std::sqrt(0.1)),
        two_normals(0.5, -10, 1, 0, 1), two_normals(0.1, -10, 1, 0, 1)};
    for (int b = 0; b < 5; ++b)
      for (int k = 0; k < 20; ++k) {
        P.push_back(blocks[b]);
        s.true_partition.push_back(b);
      }
  } else if (id == "grades") {
    const GaussianMixtureLaw shared = two_normals(0.7, 4.6, 0.7, 3.0, 0.6);
    P = {shared, two_normals(0.35, 4.2, 0.6, 5.8, 0.5), shared};
    s.true_partition = {0, 1, 0};
    s.sizes = {76, 65, 50};
    return s;
  } else {
    throw ConfigError("unknown scenario '" + id + "' (I, II, III, IV, V, VI, VII, grades)");
  }
  s.sizes.assign(P.size(), n_per_group);
  return s;
}

inline double draw_from(const PopulationLaw& law, Rng& rng) {
  if (const auto* g = std::get_if<GaussianMixtureLaw>(&law)) {
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t k = 0;
    for (; k + 1 < g->weights.size(); ++k) {
      acc += g->weights[k];
      if (u < acc) break;
    }
    return normal_draw(rng, g->means[k], g->sds[k]);
  }
  const auto& sn = std::get<SkewNormalLaw>(law);
  const double delta = sn.alpha / std::sqrt(1.0 + sn.alpha * sn.alpha);
  const double z1 = std::abs(normal_draw(rng));
  const double z2 = normal_draw(rng);
  return sn.xi + sn.omega * (delta * z1 + std::sqrt(1.0 - delta * delta) * z2);
}

inline Dataset generate_scenario(const ScenarioSpec& spec, Rng& rng) {
  Dataset d;
  for (std::size_t i = 0; i < spec.populations.size(); ++i) {
    std::vector<double> ys(spec.sizes.at(i));
    for (double& y : ys) y = draw_from(spec.populations[i], rng);
    d.groups.push_back(std::move(ys));
    d.group_ids.push_back(std::to_string(i + 1));
  }
  return d;
}

/// Adds N(0, jitter_variance) noise to every value, then optionally
/// standardizes by the pooled mean and (n-1) standard deviation.
inline std::pair<Dataset, Standardization> preprocess(const Dataset& data, double jitter_variance, bool standardize,
                                                      Rng& rng) {
  if (!(jitter_variance >= 0.0)) throw ConfigError("jitter_variance must be >= 0");
  Dataset out = data;
  if (jitter_variance > 0.0) {
    const double sd = std::sqrt(jitter_variance);
    for (auto& g : out.groups)
      for (double& y : g) y += normal_draw(rng, 0.0, sd);
  }
  Standardization tr;
  if (standardize) {
    SuffStats s;
    for (const auto& g : out.groups)
      for (double y : g) s.add(y);
    if (s.n < 2 || !(s.m2 > 0.0)) throw DataError("cannot standardize: pooled standard deviation is zero");
    tr.mean = s.mean;
    tr.sd = std::sqrt(s.m2 / static_cast<double>(s.n - 1));
    for (auto& g : out.groups)
      for (double& y : g) y = tr.forward(y);
  }
  return {std::move(out), tr};
}

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n\"");
  const auto e = s.find_last_not_of(" \t\r\n\"");
  if (b == std::string::npos) return {};
  return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses `group_id,value` rows. A first row whose value does not parse as a
/// number is treated as a header. Groups are ordered by first appearance.
inline Dataset parse_csv(std::istream& in) {
  Dataset d;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t row = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DataError("row " + std::to_string(row) + ": expected 'group,value'");
    const std::string gid = detail::trim(line.substr(0, comma));
    const std::string val = detail::trim(line.substr(comma + 1));
    double y = 0.0;
    const bool ok = detail::parse_double(val, y);
    if (first_content) {
      first_content = false;
      if (!ok) continue;  // header
    }
    if (!ok) throw DataError("row " + std::to_string(row) + ": value '" + val + "' is not a number");
    if (!std::isfinite(y)) throw DataError("row " + std::to_string(row) + ": value '" + val + "' is not finite");
    if (gid.empty()) throw DataError("row " + std::to_string(row) + ": empty group id");
    auto [it, inserted] = index.emplace(gid, d.groups.size());
    if (inserted) {
      d.groups.emplace_back();
      d.group_ids.push_back(gid);
    }
    d.groups[it->second].push_back(y);
  }
  if (d.groups.empty()) throw DataError("no data rows");
  return d;
}

inline Dataset ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path + "'");
  return parse_csv(in);
}

inline void write_csv(std::ostream& os, const Dataset& d) {
  os << "group,value\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < d.groups.size(); ++i) {
    const std::string id = d.group_ids.empty() ? std::to_string(i + 1) : d.group_ids[i];
    for (double y : d.groups[i]) os << id << ',' << y << '\n';
  }
}

inline void write_csv_file(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, d);
}

}  // namespace semihdp
