// semihdp: generate scenarios, run the sampler, summarize chains, check oracles.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "semihdp/semihdp.hpp"

namespace fs = std::filesystem;
using namespace semihdp;

namespace {

struct RunOptions {
  std::string input;
  std::string out_dir = "semihdp_out";
  double alpha = 1.0, gamma = 1.0, a_kappa = 2.0, b_kappa = 2.0;
  std::optional<double> fixed_kappa;
  std::vector<double> eta;
  std::size_t n_burnin = 2000, n_iter = 10000, thin = 5;
  std::string c_update_mode = "gibbs";
  std::size_t pool_size = 500;
  std::uint64_t seed = 20201;
  double trunc_eps = 1e-4;
  double jitter = 0.0;
  bool standardize = true;
  std::size_t chains = 1;
  std::optional<double> pass_threshold;
  std::size_t grid_points = 200;
  double prior_odds = 1.0;
};

struct SummarizeOptions {
  std::vector<std::string> records;
  std::string manifest;
  std::string out_dir = "semihdp_summary";
  std::optional<double> mean, sd;
  std::vector<std::string> pairs;
  std::optional<double> grid_lo, grid_hi;
  std::size_t grid_points = 200;
  std::optional<double> pass_threshold;
  double prior_odds = 1.0;
};

HyperParams make_hyper(const RunOptions& o, std::size_t I) {
  HyperParams h = HyperParams::defaults(I);
  h.alpha = o.alpha;
  h.gamma = o.gamma;
  h.a_kappa = o.a_kappa;
  h.b_kappa = o.b_kappa;
  h.fixed_kappa = o.fixed_kappa;
  h.trunc_eps = o.trunc_eps;
  if (!o.eta.empty()) h.eta = o.eta.size() == 1 ? std::vector<double>(I, o.eta[0]) : o.eta;
  h.validate(I);
  return h;
}

SamplerConfig make_sampler(const RunOptions& o) {
  SamplerConfig c;
  c.n_burnin = o.n_burnin;
  c.n_iter = o.n_iter;
  c.thin = o.thin;
  c.c_update_mode = parse_c_update_mode(o.c_update_mode);
  c.pseudoprior_pool_size = o.pool_size;
  c.seed = o.seed;
  c.validate();
  return c;
}

nlohmann::json config_json(const RunOptions& o, const HyperParams& h) {
  nlohmann::json j;
  j["input"] = o.input;
  j["alpha"] = h.alpha;
  j["gamma"] = h.gamma;
  j["a_kappa"] = h.a_kappa;
  j["b_kappa"] = h.b_kappa;
  j["fixed_kappa"] = h.fixed_kappa ? nlohmann::json(*h.fixed_kappa) : nlohmann::json(nullptr);
  j["eta"] = h.eta;
  j["n_burnin"] = o.n_burnin;
  j["n_iter"] = o.n_iter;
  j["thin"] = o.thin;
  j["c_update_mode"] = o.c_update_mode;
  j["pool_size"] = o.pool_size;
  j["seed"] = o.seed;
  j["trunc_eps"] = h.trunc_eps;
  j["jitter_variance"] = o.jitter;
  j["standardize"] = o.standardize;
  j["chains"] = o.chains;
  return j;
}

nlohmann::json diagnostics_json(const ChainDiagnostics& d) {
  return {{"sweeps", d.sweeps},
          {"seconds", d.seconds},
          {"f_draws", d.truncation.draws},
          {"truncation_violations", d.truncation.violations},
          {"max_truncation_bound", d.truncation.max_bound},
          {"c_proposals", d.c_updates.proposals},
          {"c_accepted", d.c_updates.accepted},
          {"c_moves", d.c_updates.moves}};
}

int cmd_generate(const std::string& scenario, std::size_t n, std::uint64_t seed, const std::string& out) {
  Rng rng(seed);
  const Dataset d = generate_scenario(scenario_spec(scenario, n), rng);
  if (out.empty() || out == "-") {
    write_csv(std::cout, d);
  } else {
    write_csv_file(out, d);
  }
  return 0;
}

int cmd_run(const RunOptions& o) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset raw = ingest_csv(o.input);
  raw.validate();
  Rng prep_rng(o.seed);
  auto [data, tr] = preprocess(raw, o.jitter, o.standardize, prep_rng);
  const HyperParams hyper = make_hyper(o, data.num_groups());
  const SamplerConfig cfg = make_sampler(o);
  if (o.chains < 1) throw ConfigError("chains must be >= 1");
  const Model model(data, hyper);
  fs::create_directories(o.out_dir);

  std::vector<ChainResult> results(o.chains);
  std::vector<std::exception_ptr> errors(o.chains);
  auto run_one = [&](std::size_t k) {
    try {
      Rng rng = o.chains == 1 ? Rng(o.seed) : make_worker_rng(o.seed, k);
      const fs::path path =
          fs::path(o.out_dir) / (o.chains == 1 ? std::string("records.jsonl") : "records_" + std::to_string(k + 1) + ".jsonl");
      std::ofstream rec_out(path);
      if (!rec_out) throw DataError("cannot write '" + path.string() + "'");
      const PseudopriorPool pool = pseudoprior_collect(model, cfg, rng);
      results[k] = run_chain(model, cfg, pool, rng, [&](const ChainRecord& r) { write_record_line(rec_out, r); });
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  if (o.chains == 1) {
    run_one(0);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t k = 0; k < o.chains; ++k) workers.emplace_back(run_one, k);
    for (auto& w : workers) w.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<ChainRecord> all;
  for (auto& r : results) all.insert(all.end(), r.records.begin(), r.records.end());
  if (all.empty()) throw ConfigError("no records kept: n_iter must be at least thin");

  SummaryOptions so;
  so.group_ids = raw.group_ids;
  so.transform = tr;
  so.pass_threshold = o.pass_threshold;
  so.grid_points = o.grid_points;
  so.prior_odds = o.prior_odds;
  write_summaries(o.out_dir, all, so);

  nlohmann::json manifest;
  manifest["config"] = config_json(o, hyper);
  manifest["seed"] = o.seed;
  manifest["groups"] = raw.group_ids;
  manifest["transform"] = {{"mean", tr.mean}, {"sd", tr.sd}};
  manifest["records"] = all.size();
  nlohmann::json diag = nlohmann::json::array();
  for (const auto& r : results) diag.push_back(diagnostics_json(r.diagnostics));
  manifest["chains"] = diag;
  manifest["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream mf(fs::path(o.out_dir) / "manifest.json");
  if (!mf) throw DataError("cannot write manifest.json");
  mf << manifest.dump(2) << '\n';

  const PartitionPosterior post = partition_posterior(all);
  const std::size_t mode = post.mode_index();
  std::cout << "records " << all.size() << ", posterior mode " << partition_to_string(post.partitions[mode]) << " ("
            << post.probabilities[mode] << "), outputs in " << o.out_dir << '\n';
  return 0;
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& s, const std::vector<std::string>& ids) {
  const auto dash = s.find(':');
  if (dash == std::string::npos) throw ConfigError("pair '" + s + "' must look like a:b");
  auto index = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == name) return i;
    try {
      const long v = std::stol(name);
      if (v >= 1) return static_cast<std::size_t>(v - 1);
    } catch (const std::exception&) {
    }
    throw ConfigError("unknown group '" + name + "' in pair '" + s + "'");
  };
  return {index(s.substr(0, dash)), index(s.substr(dash + 1))};
}

int cmd_summarize(const SummarizeOptions& o) {
  std::vector<ChainRecord> all;
  for (const auto& p : o.records) {
    auto r = read_records_file(p);
    all.insert(all.end(), r.begin(), r.end());
  }
  if (all.empty()) throw DataError("records contain no draws");
  SummaryOptions so;
  if (!o.manifest.empty()) {
    std::ifstream in(o.manifest);
    if (!in) throw DataError("cannot read '" + o.manifest + "'");
    try {
      const auto m = nlohmann::json::parse(in);
      so.transform.mean = m.at("transform").at("mean").get<double>();
      so.transform.sd = m.at("transform").at("sd").get<double>();
      so.group_ids = m.value("groups", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed manifest: ") + e.what());
    }
  }
  if (o.mean) so.transform.mean = *o.mean;
  if (o.sd) so.transform.sd = *o.sd;
  if (!(so.transform.sd > 0.0)) throw ConfigError("sd must be > 0");
  for (const auto& p : o.pairs) so.bf_pairs.push_back(parse_pair(p, so.group_ids));
  if (o.grid_lo.has_value() != o.grid_hi.has_value()) throw ConfigError("give both --grid-lo and --grid-hi");
  if (o.grid_lo) so.grid_range = std::make_pair(*o.grid_lo, *o.grid_hi);
  so.grid_points = o.grid_points;
  so.pass_threshold = o.pass_threshold;
  so.prior_odds = o.prior_odds;
  write_summaries(o.out_dir, all, so);
  std::cout << "summarized " << all.size() << " records into " << o.out_dir << '\n';
  return 0;
}

int cmd_oracle_check(const OracleSuiteConfig& cfg, bool verbose) {
  const auto checks = run_oracle_suite(cfg);
  std::size_t failed = 0;
  for (const auto& c : checks) {
    if (!c.pass) ++failed;
    if (verbose || !c.pass)
      std::printf("%s %-10s %-48s expected %.6g observed %.6g tol %.3g\n", c.pass ? "PASS" : "FAIL", c.group.c_str(),
                  c.name.c_str(), c.expected, c.observed, c.tolerance);
  }
  std::printf("%zu checks, %zu failed\n", checks.size(), failed);
  return failed == 0 ? 0 : static_cast<int>(ErrorKind::OracleFailure);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-hierarchical Dirichlet process mixtures for grouped data"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI/TOML file with option values");

  std::string scenario = "I";
  std::size_t gen_n = 100;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Simulate a scenario dataset as group,value CSV");
  gen->add_option("--scenario", scenario, "I, II, III, IV, V, VI, VII or grades")->capture_default_str();
  gen->add_option("--n", gen_n, "observations per group")->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--out,-o", gen_out, "output CSV (stdout when omitted)");

  RunOptions ro;
  auto* run = app.add_subcommand("run", "Fit the model to a CSV and write chain summaries");
  run->add_option("--input,-i", ro.input, "group,value CSV")->required();
  run->add_option("--out,-o", ro.out_dir)->capture_default_str();
  run->add_option("--alpha", ro.alpha)->capture_default_str();
  run->add_option("--gamma", ro.gamma)->capture_default_str();
  run->add_option("--a_kappa", ro.a_kappa)->capture_default_str();
  run->add_option("--b_kappa", ro.b_kappa)->capture_default_str();
  run->add_option("--fixed_kappa", ro.fixed_kappa, "hold kappa at this value");
  run->add_option("--eta", ro.eta, "Dirichlet parameter of omega (one value or one per group; default 1/I)");
  run->add_option("--n_burnin", ro.n_burnin)->capture_default_str();
  run->add_option("--n_iter", ro.n_iter)->capture_default_str();
  run->add_option("--thin", ro.thin)->capture_default_str();
  run->add_option("--c_update_mode", ro.c_update_mode, "gibbs, metropolised-uniform or metropolised-l2")
      ->capture_default_str();
  run->add_option("--pool_size", ro.pool_size)->capture_default_str();
  run->add_option("--seed", ro.seed)->capture_default_str();
  run->add_option("--trunc_eps", ro.trunc_eps)->capture_default_str();
  run->add_option("--jitter", ro.jitter, "variance of Gaussian noise added before fitting")->capture_default_str();
  run->add_option("--standardize", ro.standardize, "pooled standardization")->capture_default_str();
  run->add_option("--chains", ro.chains, "independent chains, one thread each")->capture_default_str();
  run->add_option("--pass-threshold", ro.pass_threshold, "threshold for the pass probability (data units)");
  run->add_option("--grid-points", ro.grid_points)->capture_default_str();
  run->add_option("--prior-odds", ro.prior_odds, "prior odds used for Bayes factors")->capture_default_str();

  SummarizeOptions so;
  auto* sum = app.add_subcommand("summarize", "Summaries from stored records");
  sum->add_option("--records,-r", so.records, "records.jsonl file(s)")->required();
  sum->add_option("--manifest", so.manifest, "manifest.json holding the transform and group ids");
  sum->add_option("--out,-o", so.out_dir)->capture_default_str();
  sum->add_option("--mean", so.mean, "standardization mean (overrides manifest)");
  sum->add_option("--sd", so.sd, "standardization sd (overrides manifest)");
  sum->add_option("--pair", so.pairs, "group pair a:b for Bayes factors (repeatable)");
  sum->add_option("--grid-lo", so.grid_lo);
  sum->add_option("--grid-hi", so.grid_hi);
  sum->add_option("--grid-points", so.grid_points)->capture_default_str();
  sum->add_option("--pass-threshold", so.pass_threshold, "data units");
  sum->add_option("--prior-odds", so.prior_odds)->capture_default_str();

  OracleSuiteConfig oc;
  bool verbose = false;
  auto* orc = app.add_subcommand("oracle-check", "Monte Carlo and quadrature checks of the closed forms");
  orc->add_option("--seed", oc.seed)->capture_default_str();
  orc->add_option("--tie-draws", oc.tie_draws)->capture_default_str();
  orc->add_option("--measure-draws", oc.measure_draws)->capture_default_str();
  orc->add_option("--peppf-draws", oc.peppf_draws)->capture_default_str();
  orc->add_option("--l2-pairs", oc.l2_pairs)->capture_default_str();
  orc->add_option("--n-se", oc.n_se, "tolerance in Monte Carlo standard errors")->capture_default_str();
  orc->add_flag("--verbose,-v", verbose, "print passing checks too");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorKind::Config);
  }

  try {
    if (*gen) return cmd_generate(scenario, gen_n, gen_seed, gen_out);
    if (*run) return cmd_run(ro);
    if (*sum) return cmd_summarize(so);
    if (*orc) return cmd_oracle_check(oc, verbose);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
