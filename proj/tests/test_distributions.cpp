#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "semihdp/semihdp.hpp"
#include "test_util.hpp"

using namespace semihdp;
using testutil::trapezoid;

namespace {

// Marginal density of one point by quadrature over sigma2 (mu integrated in
// closed form): N(y; mu0, (1+lambda) s2) * InvGamma(s2 | a, b).
double marginal_by_quadrature(double y, const NIGBase& b) {
  auto integrand = [&](double ls) {
    const double s2 = std::exp(ls);
    const double log_ig = b.shape * std::log(b.rate) - std::lgamma(b.shape) - (b.shape + 1.0) * ls - b.rate / s2;
    return std::exp(normal_logpdf(y, b.mu0, (1.0 + b.lambda) * s2) + log_ig) * s2;
  };
  return trapezoid(integrand, -25.0, 25.0, 200001);
}

}  // namespace

TEST(NigMarginal, SingletonAtZeroMatchesQuadrature) {
  const NIGBase base;
  const double y = 0.0;
  const double closed = nig_marginal_density(std::span<const double>(&y, 1), base);
  EXPECT_NEAR(closed, marginal_by_quadrature(0.0, base), 1e-8);
  EXPECT_NEAR(closed, 0.1066, 5e-5);
}

TEST(NigMarginal, NonDefaultBaseMatchesQuadrature) {
  const NIGBase base{1.5, 2.0, 3.0, 0.7};
  for (double y : {-2.0, 0.3, 4.0}) {
    const double closed = nig_marginal_density(std::span<const double>(&y, 1), base);
    EXPECT_NEAR(closed, marginal_by_quadrature(y, base), 1e-8) << "y=" << y;
  }
}

TEST(NigMarginal, SingletonIntegratesToOne) {
  const NIGBase base;
  auto f = [&](double x) { return nig_marginal_density(std::span<const double>(&x, 1), base); };
  // Student-t with 2 df: mass beyond |x| = L is about 11/L^2.
  EXPECT_NEAR(trapezoid(f, -1e4, 1e4, 2000001), 1.0, 1e-4);
}

TEST(NigMarginal, TwoPointJointMatchesSequentialPredictive) {
  const NIGBase base;
  const std::vector<double> ys{0.4, -1.2};
  const double joint = nig_log_marginal(ys, base);
  SuffStats first;
  first.add(ys[0]);
  const double y0 = ys[0];
  const double y1 = ys[1];
  const NIGBase post = nig_posterior(first, base);
  const double seq = nig_log_marginal(std::span<const double>(&y0, 1), base) +
                     nig_log_marginal(std::span<const double>(&y1, 1), post);
  EXPECT_NEAR(joint, seq, 1e-12);
}

TEST(NigMarginal, RejectsEmptyAndNonFinite) {
  const NIGBase base;
  EXPECT_THROW(nig_log_marginal(std::span<const double>(), base), DataError);
  const std::vector<double> bad{1.0, std::nan("")};
  EXPECT_THROW(nig_log_marginal(bad, base), DataError);
  NIGBase broken;
  broken.lambda = -1.0;
  const std::vector<double> ok{1.0};
  EXPECT_THROW(nig_log_marginal(ok, broken), ConfigError);
}

TEST(NigPosteriorDraw, MeanMatchesConjugateFormula) {
  const NIGBase base;
  const std::vector<double> ys(100, 5.0);
  Rng rng(11);
  std::vector<double> mus;
  for (int k = 0; k < 20000; ++k) mus.push_back(nig_posterior_draw(ys, base, rng).mu);
  const auto ms = testutil::mean_se(mus);
  const double k0 = 1.0 / base.lambda;
  const double expected = (k0 * base.mu0 + 100.0 * 5.0) / (k0 + 100.0);
  EXPECT_NEAR(ms.mean, expected, 3.0 * ms.se);
}

TEST(NigPosteriorDraw, ConcentratesAtSampleMean) {
  const NIGBase base;
  SuffStats s;
  for (int k = 0; k < 1000000; ++k) s.add(0.0);
  Rng rng(3);
  for (int k = 0; k < 100; ++k) EXPECT_NEAR(nig_posterior_draw(s, base, rng).mu, 0.0, 0.01);
}

TEST(SuffStats, MergeEqualsSequential) {
  Rng rng(5);
  std::vector<double> a, b;
  for (int k = 0; k < 37; ++k) a.push_back(normal_draw(rng, 1.0, 2.0));
  for (int k = 0; k < 11; ++k) b.push_back(normal_draw(rng, -3.0, 0.5));
  SuffStats merged = SuffStats::of(a);
  merged.merge(SuffStats::of(b));
  std::vector<double> all = a;
  all.insert(all.end(), b.begin(), b.end());
  const SuffStats direct = SuffStats::of(all);
  EXPECT_EQ(merged.n, direct.n);
  EXPECT_NEAR(merged.mean, direct.mean, 1e-12);
  EXPECT_NEAR(merged.m2, direct.m2, 1e-9);
}

TEST(LogLikelihood, MatchesPointwiseSum) {
  const std::vector<double> ys{0.1, 2.0, -1.5, 0.7};
  const GaussianParam p{0.3, 1.7};
  double direct = 0.0;
  for (double y : ys) direct += normal_logpdf(y, p);
  EXPECT_NEAR(log_likelihood(SuffStats::of(ys), p), direct, 1e-12);
}

TEST(StickBreaking, WeightsPlusResidualIsOne) {
  Rng rng(1);
  const auto sb = stick_breaking_weights(1.0, 10, rng);
  double total = sb.residual;
  for (double w : sb.weights) {
    EXPECT_GT(w, 0.0);
    EXPECT_LT(w, 1.0);
    total += w;
  }
  EXPECT_NEAR(total, 1.0, 1e-15);
  EXPECT_GT(sb.residual, 0.0);
}

TEST(StickBreaking, ResidualExpectationIsGeometric) {
  Rng rng(2);
  const double alpha = 1.0;
  const std::size_t M = 5;
  std::vector<double> eps;
  for (int k = 0; k < 10000; ++k) eps.push_back(stick_breaking_weights(alpha, M, rng).residual);
  const auto ms = testutil::mean_se(eps);
  EXPECT_NEAR(ms.mean, std::pow(alpha / (1.0 + alpha), static_cast<double>(M)), 3.0 * ms.se);
}

TEST(StickBreaking, TinyConcentrationPutsMassOnFirstAtom) {
  Rng rng(3);
  for (int k = 0; k < 100; ++k) EXPECT_GT(stick_breaking_weights(1e-6, 1, rng).weights[0], 0.99);
}

TEST(StickBreaking, RejectsBadArguments) {
  Rng rng(3);
  EXPECT_THROW(stick_breaking_weights(0.0, 3, rng), ConfigError);
  EXPECT_THROW(stick_breaking_weights(1.0, 0, rng), ConfigError);
}

namespace {

// Exhaustive enumeration of CRP seating sequences: P(K_n = t).
void enumerate_seatings(int placed, int n, std::vector<int>& tables, double prob, double alpha,
                        std::vector<double>& acc) {
  if (placed == n) {
    acc[tables.size() - 1] += prob;
    return;
  }
  for (std::size_t l = 0; l < tables.size(); ++l) {
    ++tables[l];
    enumerate_seatings(placed + 1, n, tables, prob * (tables[l] - 1) / (placed + alpha), alpha, acc);
    --tables[l];
  }
  tables.push_back(1);
  enumerate_seatings(placed + 1, n, tables, prob * alpha / (placed + alpha), alpha, acc);
  tables.pop_back();
}

std::vector<double> crp_by_enumeration(int n, double alpha) {
  std::vector<double> acc(n, 0.0);
  std::vector<int> tables;
  enumerate_seatings(0, n, tables, 1.0, alpha, acc);
  return acc;
}

}  // namespace

TEST(CrpClusterCount, SmallCases) {
  const auto p2 = crp_cluster_count_pmf(2, 1.0);
  EXPECT_NEAR(p2[0], 0.5, 1e-15);
  EXPECT_NEAR(p2[1], 0.5, 1e-15);
  const auto p3 = crp_cluster_count_pmf(3, 1.0);
  const auto e3 = crp_by_enumeration(3, 1.0);
  for (int t = 0; t < 3; ++t) EXPECT_NEAR(p3[t], e3[t], 1e-14);
  EXPECT_NEAR(p3[0], 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(p3[1], 0.5, 1e-14);
  EXPECT_NEAR(p3[2], 1.0 / 6.0, 1e-14);
}

TEST(CrpClusterCount, MatchesEnumerationAndNormalizes) {
  for (double alpha : {0.3, 1.0, 2.5})
    for (int n = 1; n <= 7; ++n) {
      const auto p = crp_cluster_count_pmf(n, alpha);
      const auto e = crp_by_enumeration(n, alpha);
      double total = 0.0;
      for (int t = 0; t < n; ++t) {
        EXPECT_NEAR(p[t], e[t], 1e-13);
        total += p[t];
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(CrpClusterCount, MatchesEppfSumOverPartitions) {
  for (double alpha : {0.5, 1.0, 2.0})
    for (std::size_t n = 1; n <= 6; ++n) {
      std::vector<double> by_blocks(n, 0.0);
      for (const Partition& p : enumerate_set_partitions(n)) {
        const auto sizes = block_sizes(p);
        by_blocks[sizes.size() - 1] += eppf_dp(sizes, alpha);
      }
      const auto pmf = crp_cluster_count_pmf(n, alpha);
      for (std::size_t t = 0; t < n; ++t) EXPECT_NEAR(pmf[t], by_blocks[t], 1e-12);
    }
}

TEST(NormalProduct, KnownValues) {
  EXPECT_NEAR(normal_product_integral({0, 1}, {0, 1}), 1.0 / std::sqrt(4.0 * std::numbers::pi), 1e-15);
  const GaussianParam p{2, 1}, q{0, 1};
  const double quad = trapezoid([&](double x) { return std::exp(normal_logpdf(x, p) + normal_logpdf(x, q)); },
                                -30, 30, 100001);
  EXPECT_NEAR(normal_product_integral(p, q), quad, 1e-10);
  EXPECT_NEAR(normal_product_integral(p, q), 0.10378, 1e-5);
}

TEST(NormalProduct, Symmetric) {
  Rng rng(4);
  for (int k = 0; k < 100; ++k) {
    const GaussianParam p{normal_draw(rng), 0.1 + uniform01(rng)};
    const GaussianParam q{normal_draw(rng), 0.1 + uniform01(rng)};
    EXPECT_DOUBLE_EQ(normal_product_integral(p, q), normal_product_integral(q, p));
  }
}

TEST(MixtureL2, IdenticalIsZero) {
  const FiniteMixture m{{0.3, 0.7}, {{0, 1}, {2, 0.5}}};
  EXPECT_NEAR(mixture_l2_distance_sq(m, m), 0.0, 1e-15);
}

TEST(MixtureL2, TwoUnitNormalsTwoApart) {
  const FiniteMixture a{{1.0}, {{0, 1}}};
  const FiniteMixture b{{1.0}, {{2, 1}}};
  const double quad = l2_distance_sq_quadrature(a, b);
  EXPECT_NEAR(mixture_l2_distance_sq(a, b), quad, 1e-9);
  EXPECT_NEAR(mixture_l2_distance_sq(a, b), 0.35664, 1e-5);
}

TEST(MixtureL2, MatchesQuadratureOnRandomPairs) {
  Rng rng(8);
  for (int k = 0; k < 25; ++k) {
    const FiniteMixture a = random_mixture(rng);
    const FiniteMixture b = random_mixture(rng);
    EXPECT_NEAR(mixture_l2_distance_sq(a, b), l2_distance_sq_quadrature(a, b), 1e-6);
  }
}

TEST(MixtureL2, RootSatisfiesTriangleInequality) {
  Rng rng(9);
  for (int k = 0; k < 200; ++k) {
    const FiniteMixture a = random_mixture(rng), b = random_mixture(rng), c = random_mixture(rng);
    const double ab = std::sqrt(mixture_l2_distance_sq(a, b));
    const double bc = std::sqrt(mixture_l2_distance_sq(b, c));
    const double ac = std::sqrt(mixture_l2_distance_sq(a, c));
    EXPECT_LE(ac, ab + bc + 1e-9);
  }
}

TEST(FiniteMixture, ValidateRejectsBadWeights) {
  FiniteMixture m{{0.5, 0.6}, {{0, 1}, {1, 1}}};
  EXPECT_THROW(m.validate(), DataError);
  m.weights = {0.5, 0.5};
  EXPECT_NO_THROW(m.validate());
  m.components[1].sigma2 = 0.0;
  EXPECT_THROW(m.validate(), DataError);
}

TEST(FiniteMixture, DensityIntegratesAndCdfAgrees) {
  const FiniteMixture m{{0.2, 0.5, 0.3}, {{-2, 0.3}, {0, 1}, {3, 2}}};
  EXPECT_NEAR(trapezoid([&](double x) { return m.density(x); }, -30, 30, 100001), 1.0, 1e-9);
  const double partial = trapezoid([&](double x) { return m.density(x); }, -30, 0.5, 100001);
  EXPECT_NEAR(m.cdf(0.5), partial, 1e-8);
  EXPECT_NEAR(m.log_density(1.0), std::log(m.density(1.0)), 1e-12);
}

TEST(Random, DirichletMeans) {
  Rng rng(12);
  const std::vector<double> a{2.5, 0.5, 1.0};
  std::vector<std::vector<double>> cols(3);
  for (int k = 0; k < 20000; ++k) {
    const auto d = dirichlet_draw(rng, a);
    double total = 0.0;
    for (int j = 0; j < 3; ++j) {
      cols[j].push_back(d[j]);
      total += d[j];
    }
    ASSERT_NEAR(total, 1.0, 1e-12);
  }
  for (int j = 0; j < 3; ++j) {
    const auto ms = testutil::mean_se(cols[j]);
    EXPECT_NEAR(ms.mean, a[j] / 4.0, 3.0 * ms.se);
  }
}

TEST(Random, DirichletTinyShapesStayOnSimplex) {
  Rng rng(13);
  const std::vector<double> a{1e-4, 1e-4};
  for (int k = 0; k < 1000; ++k) {
    const auto d = dirichlet_draw(rng, a);
    EXPECT_NEAR(d[0] + d[1], 1.0, 1e-12);
    EXPECT_TRUE(std::isfinite(d[0]));
  }
}

TEST(Random, LogCategoricalIsShiftInvariant) {
  const std::vector<double> w{-1.0, 0.5, -3.0, 0.0};
  std::vector<double> shifted = w;
  for (double& v : shifted) v += 800.0;
  Rng a(21), b(21);
  for (int k = 0; k < 1000; ++k) EXPECT_EQ(sample_log_categorical(w, a), sample_log_categorical(shifted, b));
}

TEST(Random, LogCategoricalFrequencies) {
  const std::vector<double> w{std::log(1.0), std::log(2.0), -std::numeric_limits<double>::infinity(), std::log(7.0)};
  Rng rng(22);
  std::vector<std::size_t> counts(4, 0);
  const std::size_t n = 100000;
  for (std::size_t k = 0; k < n; ++k) ++counts[sample_log_categorical(w, rng)];
  EXPECT_EQ(counts[2], 0u);
  const double p[4] = {0.1, 0.2, 0.0, 0.7};
  for (int j : {0, 1, 3})
    EXPECT_NEAR(static_cast<double>(counts[j]) / n, p[j], 3.0 * testutil::freq_se(p[j], n));
}

TEST(Random, LogCategoricalRejectsDegenerateWeights) {
  Rng rng(1);
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<double> all_neg{-inf, -inf};
  EXPECT_THROW(sample_log_categorical(all_neg, rng), NumericalError);
  const std::vector<double> with_nan{0.0, std::nan("")};
  EXPECT_THROW(sample_log_categorical(with_nan, rng), NumericalError);
}

TEST(Random, WorkerStreamsDifferAndRepeat) {
  Rng a = make_worker_rng(5, 0), b = make_worker_rng(5, 1), c = make_worker_rng(5, 0);
  const auto xa = a(), xb = b(), xc = c();
  EXPECT_NE(xa, xb);
  EXPECT_EQ(xa, xc);
}
