#pragma once

// Line-oriented JSON serialization of chain records.

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "semihdp/error.hpp"
#include "semihdp/sampler.hpp"

namespace semihdp {

inline nlohmann::json record_to_json(const ChainRecord& rec) {
  nlohmann::json j;
  j["iter"] = rec.iter;
  j["c"] = rec.c;
  j["kappa"] = rec.kappa;
  j["H0"] = rec.H0;
  j["H"] = rec.H;
  j["partition"] = rec.partition;
  j["unique_values"] = rec.unique_values;
  j["shared_values"] = rec.shared_values;
  j["trunc_bound"] = rec.trunc_bound;
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& rm : rec.mixtures) {
    nlohmann::json r;
    r["r"] = rm.restaurant;
    std::vector<double> mu, s2;
    for (const auto& comp : rm.mix.components) {
      mu.push_back(comp.mu);
      s2.push_back(comp.sigma2);
    }
    r["weight"] = rm.mix.weights;
    r["mu"] = mu;
    r["sigma2"] = s2;
    r["h"] = rm.h;
    r["t"] = rm.t;
    rs.push_back(std::move(r));
  }
  j["restaurants"] = std::move(rs);
  return j;
}

inline ChainRecord record_from_json(const nlohmann::json& j) {
  ChainRecord rec;
  try {
    rec.iter = j.at("iter").get<std::size_t>();
    rec.c = j.at("c").get<std::vector<int>>();
    rec.kappa = j.at("kappa").get<double>();
    rec.H0 = j.at("H0").get<int>();
    rec.H = j.value("H", std::vector<int>{});
    rec.partition = j.contains("partition") ? j.at("partition").get<Partition>() : canonical_partition(rec.c);
    rec.unique_values = j.value("unique_values", std::vector<int>{});
    rec.shared_values = j.value("shared_values", 0);
    rec.trunc_bound = j.value("trunc_bound", 0.0);
    for (const auto& r : j.at("restaurants")) {
      RestaurantMixture rm;
      rm.restaurant = r.at("r").get<int>();
      rm.mix.weights = r.at("weight").get<std::vector<double>>();
      const auto mu = r.at("mu").get<std::vector<double>>();
      const auto s2 = r.at("sigma2").get<std::vector<double>>();
      if (mu.size() != rm.mix.weights.size() || s2.size() != mu.size())
        throw DataError("record " + std::to_string(rec.iter) + ": mixture arrays differ in length");
      for (std::size_t k = 0; k < mu.size(); ++k) rm.mix.components.push_back({mu[k], s2[k]});
      rm.h = r.value("h", std::vector<int>(mu.size(), -1));
      rm.t = r.value("t", std::vector<int>(mu.size(), -1));
      rec.mixtures.push_back(std::move(rm));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed record: ") + e.what());
  }
  return rec;
}

inline void write_record_line(std::ostream& os, const ChainRecord& rec) { os << record_to_json(rec).dump() << '\n'; }

inline std::vector<ChainRecord> read_records(std::istream& is) {
  std::vector<ChainRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("records line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<ChainRecord> read_records_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open records file '" + path + "'");
  return read_records(in);
}

}  // namespace semihdp
