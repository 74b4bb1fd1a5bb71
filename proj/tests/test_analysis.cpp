#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "semihdp/semihdp.hpp"
#include "test_util.hpp"

using namespace semihdp;

namespace {

FiniteMixture gauss(double mu, double var) { return FiniteMixture{{1.0}, {{mu, var}}}; }

// Record with the given 1-based restaurant labels; every used restaurant
// carries the same mixture.
ChainRecord record(std::vector<int> c, const FiniteMixture& mix = gauss(0.0, 1.0)) {
  ChainRecord rec;
  rec.c = c;
  rec.partition = canonical_partition(c);
  for (int r : std::set<int>(c.begin(), c.end())) rec.mixtures.push_back({r, mix, {}, {}});
  return rec;
}

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

}  // namespace

TEST(BayesFactor, ReciprocalUnderSwappedHypotheses) {
  for (double p : {0.01, 0.3, 0.5, 0.9})
    for (double odds : {0.25, 1.0, 3.0}) {
      const double bf01 = bayes_factor_from_probability(p, odds);
      const double bf10 = bayes_factor_from_probability(1.0 - p, 1.0 / odds);
      EXPECT_NEAR(bf01 * bf10, 1.0, 1e-12);
    }
  EXPECT_EQ(bayes_factor_from_probability(1.0), std::numeric_limits<double>::infinity());
  EXPECT_EQ(bayes_factor_from_probability(0.0), 0.0);
  EXPECT_THROW(bayes_factor_from_probability(0.5, 0.0), ConfigError);
}

TEST(BayesFactor, FromRecords) {
  const std::vector<ChainRecord> recs{record({1, 1, 2}), record({1, 2, 2}), record({3, 3, 3}), record({1, 2, 3})};
  EXPECT_DOUBLE_EQ(coclustering_probability(recs, 0, 1), 0.5);
  EXPECT_DOUBLE_EQ(bayes_factor_pair(recs, 0, 1), 1.0);
  EXPECT_DOUBLE_EQ(bayes_factor_pair(recs, 1, 0), 1.0);
  EXPECT_DOUBLE_EQ(bayes_factor_pair(recs, 0, 2), 0.25 / 0.75);
  EXPECT_THROW(bayes_factor_pair(recs, 1, 1), ConfigError);
  EXPECT_THROW(coclustering_probability(std::vector<ChainRecord>{}, 0, 1), DataError);
}

TEST(Similarity, HandComputed) {
  const std::vector<ChainRecord> recs{record({1, 2, 1}), record({1, 1, 1}), record({2, 2, 1}), record({1, 2, 1})};
  const Matrix psm = similarity_matrix(recs);
  const Matrix expected{{1.0, 0.5, 0.75}, {0.5, 1.0, 0.25}, {0.75, 0.25, 1.0}};
  EXPECT_EQ(psm, expected);
}

TEST(Similarity, ConsistentWithPartitionPosterior) {
  Rng rng(3);
  std::vector<ChainRecord> recs;
  for (int k = 0; k < 500; ++k) {
    std::vector<int> c(5);
    for (int& v : c) v = std::uniform_int_distribution<int>(1, 3)(rng);
    recs.push_back(record(c));
  }
  const Matrix psm = similarity_matrix(recs);
  const PartitionPosterior post = partition_posterior(recs);
  double tot = 0.0;
  for (double p : post.probabilities) tot += p;
  EXPECT_NEAR(tot, 1.0, 1e-12);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < post.partitions.size(); ++k)
        acc += post.probabilities[k] * (post.partitions[k][i] == post.partitions[k][j]);
      EXPECT_NEAR(psm[i][j], acc, 1e-12);
    }
}

TEST(PartitionPosterior, ModeAndLookup) {
  const std::vector<ChainRecord> recs{record({1, 2, 1}), record({2, 3, 2}), record({1, 1, 1}), record({3, 1, 3})};
  const PartitionPosterior post = partition_posterior(recs);
  EXPECT_EQ(post.partitions.size(), 2u);
  EXPECT_DOUBLE_EQ(post.probability_of(Partition{0, 1, 0}), 0.75);
  EXPECT_DOUBLE_EQ(post.probability_of(Partition{0, 1, 1}), 0.0);
  EXPECT_EQ(post.partitions[post.mode_index()], (Partition{0, 1, 0}));
}

TEST(VariationOfInformation, KnownValues) {
  EXPECT_NEAR(variation_of_information({0, 0}, {0, 1}), 1.0, 1e-12);
  EXPECT_NEAR(variation_of_information({0, 0, 1, 1}, {0, 1, 0, 1}), 2.0, 1e-12);
  EXPECT_NEAR(variation_of_information({0, 1, 2}, {0, 1, 2}), 0.0, 1e-12);
  // {1,2},{3} vs {1},{2,3}: H = 0.918 each, joint entropy log2(3).
  const double h = -(2.0 / 3) * std::log2(2.0 / 3) - (1.0 / 3) * std::log2(1.0 / 3);
  EXPECT_NEAR(variation_of_information({0, 0, 1}, {0, 1, 1}), 2.0 * std::log2(3.0) - 2.0 * h, 1e-12);
  EXPECT_NEAR(variation_of_information({0, 0, 1}, {0, 1, 1}), variation_of_information({0, 1, 1}, {0, 0, 1}), 1e-15);
}

TEST(PointPartition, PicksDominantPartition) {
  std::vector<ChainRecord> recs;
  for (int k = 0; k < 6; ++k) recs.push_back(record({1, 1, 2, 2}));
  for (int k = 0; k < 2; ++k) recs.push_back(record({1, 2, 2, 2}));
  for (int k = 0; k < 2; ++k) recs.push_back(record({1, 2, 3, 4}));
  for (auto loss : {PartitionLoss::Binder, PartitionLoss::VariationOfInformation})
    EXPECT_EQ(point_partition(recs, loss), (Partition{0, 0, 1, 1}));
  // Every visited partition's expected Binder loss is at least the chosen one's.
  const Matrix psm = similarity_matrix(recs);
  const double best = binder_expected_loss(Partition{0, 0, 1, 1}, psm);
  for (const auto& p : partition_posterior(recs).partitions) EXPECT_GE(binder_expected_loss(p, psm), best);
  EXPECT_NEAR(best, 0.4 + 0.2 + 0.2 + 0.2, 1e-12);
}

TEST(DensitySummary, GaussianRecordsOnOriginalScale) {
  std::vector<ChainRecord> recs(20, record({1, 1}));
  const Standardization tr{2.0, 3.0};
  std::vector<double> grid;
  for (int k = 0; k <= 400; ++k) grid.push_back(-25.0 + 0.125 * k);
  const DensitySummary d = density_summary(recs, 1, grid, tr);
  double integral = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double expected = phi((grid[k] - 2.0) / 3.0) / 3.0;
    EXPECT_NEAR(d.mean[k], expected, 1e-14);
    EXPECT_NEAR(d.lower95[k], expected, 1e-14);
    EXPECT_NEAR(d.upper95[k], expected, 1e-14);
    integral += (k == 0 || k + 1 == grid.size() ? 0.5 : 1.0) * d.mean[k] * 0.125;
  }
  EXPECT_NEAR(integral, 1.0, 1e-3);
}

TEST(DensitySummary, BandCoversMean) {
  Rng rng(4);
  std::vector<ChainRecord> recs;
  for (int k = 0; k < 200; ++k) recs.push_back(record({1}, gauss(normal_draw(rng, 0.0, 0.3), 1.0)));
  const std::vector<double> grid{-2.0, -1.0, 0.0, 1.0, 2.0};
  const DensitySummary d = density_summary(recs, 0, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    EXPECT_LE(d.lower95[k], d.mean[k]);
    EXPECT_GE(d.upper95[k], d.mean[k]);
    EXPECT_LT(d.lower95[k], d.upper95[k]);
  }
}

TEST(Quantile, LinearInterpolation) {
  std::vector<double> xs{4.0, 1.0, 3.0, 2.0};
  EXPECT_DOUBLE_EQ(quantile(xs, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(xs, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(xs, 0.5), 2.5);
}

TEST(Functionals, StandardNormal) {
  const DensityFunctionals f = density_functionals(gauss(0.0, 1.0), 0.0);
  EXPECT_NEAR(f.mean, 0.0, 1e-15);
  EXPECT_NEAR(f.variance, 1.0, 1e-15);
  EXPECT_NEAR(f.pearson_skew, 0.0, 1e-15);
  EXPECT_NEAR(f.mode, 0.0, 1e-7);
  EXPECT_NEAR(f.mode_skew, 0.0, 1e-8);
  EXPECT_NEAR(f.pass_prob, 0.5, 1e-12);
}

TEST(Functionals, SymmetricBimodal) {
  const FiniteMixture mix{{0.5, 0.5}, {{0.0, 1.0}, {5.0, 1.0}}};
  const DensityFunctionals f = density_functionals(mix, 2.5);
  EXPECT_NEAR(f.mean, 2.5, 1e-14);
  EXPECT_NEAR(f.variance, 7.25, 1e-14);
  EXPECT_NEAR(f.pearson_skew, 0.0, 1e-14);
  EXPECT_NEAR(f.pass_prob, 0.5, 1e-12);
}

TEST(Functionals, LeftSkewedShape) {
  const FiniteMixture mix{{0.8, 0.2}, {{0.0, 1.0}, {-3.0, 1.0}}};
  const DensityFunctionals f = density_functionals(mix, 0.0);
  EXPECT_LT(f.pearson_skew, 0.0);
  EXPECT_LT(f.mode_skew, 0.0);
  EXPECT_GT(f.mode, f.mean);
}

TEST(Functionals, RandomMixturesAgainstQuadrature) {
  Rng rng(21);
  const double lo = -40.0, hi = 40.0;
  const std::size_t nodes = 200001;
  for (int trial = 0; trial < 30; ++trial) {
    const FiniteMixture mix = random_mixture(rng);
    const double thr = -2.0 + 4.0 * uniform01(rng);
    const DensityFunctionals f = density_functionals(mix, thr);
    auto moment = [&](auto g) { return testutil::trapezoid([&](double x) { return g(x) * mix.density(x); }, lo, hi, nodes); };
    const double mean = moment([](double x) { return x; });
    const double var = moment([&](double x) { return (x - mean) * (x - mean); });
    const double third = moment([&](double x) { return std::pow(x - mean, 3); });
    const double pass = moment([&](double x) { return x > thr ? 1.0 : (x == thr ? 0.5 : 0.0); });
    EXPECT_NEAR(f.mean, mean, 1e-8);
    EXPECT_NEAR(f.variance, var, 1e-8);
    EXPECT_NEAR(f.pearson_skew, third / std::pow(var, 1.5), 1e-8);
    // Trapezoid on a step: error up to one node spacing times the density.
    EXPECT_NEAR(f.pass_prob, pass, 4e-4 * mix.density(thr) + 1e-9);

    double best_x = lo, best = -1.0;
    for (double x = -15.0; x <= 15.0; x += 1e-3)
      if (mix.density(x) > best) best = mix.density(x), best_x = x;
    EXPECT_NEAR(f.mode, best_x, 2e-3);
    EXPECT_GE(mix.density(f.mode), best - 1e-9);
    const double below = testutil::trapezoid([&](double x) { return mix.density(x); }, lo, f.mode, nodes);
    EXPECT_NEAR(f.mode_skew, 1.0 - 2.0 * below, 1e-6);
  }
}

TEST(EffectiveSampleSize, ReferenceSeries) {
  Rng rng(22);
  const std::size_t n = 20000;
  std::vector<double> iid(n);
  for (double& x : iid) x = normal_draw(rng, 0.0, 1.0);
  EXPECT_NEAR(effective_sample_size(iid), static_cast<double>(n), 0.1 * n);

  // AR(1) with phi = 0.8: ESS close to n (1 - phi) / (1 + phi).
  std::vector<double> ar(n);
  ar[0] = 0.0;
  for (std::size_t t = 1; t < n; ++t) ar[t] = 0.8 * ar[t - 1] + normal_draw(rng, 0.0, 1.0);
  EXPECT_NEAR(effective_sample_size(ar), n * 0.2 / 1.8, 0.2 * n * 0.2 / 1.8);

  std::vector<double> alt(n);
  for (std::size_t t = 0; t < n; ++t) alt[t] = t % 2 ? 1.0 : -1.0;
  EXPECT_GT(effective_sample_size(alt), n / 2.0);

  const std::vector<double> flat(100, 3.0);
  EXPECT_EQ(effective_sample_size(flat), 100.0);
}

TEST(EffectiveSampleSize, PopulationClusters) {
  std::vector<ChainRecord> recs;
  for (int k = 0; k < 9; ++k) recs.push_back(record({1, k % 2 ? 1 : 2}));
  EXPECT_THROW(ess_population_clusters(recs), DataError);
  recs.push_back(record({1, 1}));
  EXPECT_GT(ess_population_clusters(recs), 0.0);
}

TEST(Standardization, RoundTripAndDensityMass) {
  const Standardization tr{-1.5, 0.4};
  for (double y : {-3.0, 0.0, 2.5}) EXPECT_NEAR(tr.inverse(tr.forward(y)), y, 1e-14);
  const FiniteMixture mix{{0.3, 0.7}, {{-1.0, 0.5}, {1.0, 2.0}}};
  std::vector<ChainRecord> recs{record({1}, mix)};
  std::vector<double> grid;
  for (int k = 0; k <= 3000; ++k) grid.push_back(-8.0 + 0.004 * k);
  const DensitySummary d = density_summary(recs, 0, grid, tr);
  double integral = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k)
    integral += (k == 0 || k + 1 == grid.size() ? 0.5 : 1.0) * d.mean[k] * 0.004;
  EXPECT_NEAR(integral, 1.0, 1e-3);
}
