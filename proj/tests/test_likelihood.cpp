#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "test_helpers.hpp"
#include "zibbmr/likelihood.hpp"
#include "zibbmr/model.hpp"
#include "zibbmr/rng.hpp"
#include "zibbmr/special_functions.hpp"

using namespace zibbmr;

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;

// Marginal log likelihood by composite Simpson over a wide prior-centered
// grid, one subject at a time. Deliberately a different numerical route from
// the Gauss-Hermite implementation.
double loglik_simpson(const Dataset& data, const Theta& theta, int half_n,
                      double half_width_sd) {
  const int n = 2 * half_n;  // even interval count per axis
  const double sd1 = std::sqrt(theta.sigma1_sq);
  const double sd2 = std::sqrt(theta.sigma2_sq);
  const double ha = half_width_sd * sd1 / half_n;
  const double hb = half_width_sd * sd2 / half_n;

  const auto coef = [n](int k) {
    if (k == 0 || k == n) return 1.0;
    return k % 2 == 1 ? 4.0 : 2.0;
  };

  double total = 0.0;
  std::vector<double> logs;
  logs.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
  for (const auto& subject : data.subjects) {
    logs.clear();
    double max_log = -std::numeric_limits<double>::infinity();
    for (int j = 0; j <= n; ++j) {
      const double a_i = theta.a + (j - half_n) * ha;
      for (int k = 0; k <= n; ++k) {
        const double b_i = theta.b + (k - half_n) * hb;
        const double da = (a_i - theta.a) / sd1;
        const double db = (b_i - theta.b) / sd2;
        const double log_prior = -kLn2Pi - std::log(sd1) - std::log(sd2) -
                              0.5 * (da * da + db * db);
        const double v = std::log(coef(j) * coef(k)) +
                         conditional_loglik(theta, subject, {a_i, b_i}) +
                         log_prior;
        logs.push_back(v);
        max_log = std::max(max_log, v);
      }
    }
    double acc = 0.0;
    for (const double v : logs) acc += std::exp(v - max_log);
    total += max_log + std::log(acc) + std::log(ha * hb / 9.0);
  }
  return total;
}

ConditionalMoments exact_moments(const Dataset& data, const Theta& theta,
                                 int nodes) {
  ConditionalMoments mom;
  for (const auto& subject : data.subjects) {
    const auto pm = testing::posterior_moments_gh(theta, subject, nodes);
    mom.mean.push_back(Vector2(pm.mean_a, pm.mean_b));
    mom.m2.push_back(Vector2(pm.var_a + pm.mean_a * pm.mean_a,
                             pm.var_b + pm.mean_b * pm.mean_b));
  }
  return mom;
}

ConditionalMoments prior_moments(const Dataset& data, const Theta& theta) {
  ConditionalMoments mom;
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    mom.mean.push_back(theta.mu());
    mom.m2.push_back(Vector2(theta.a * theta.a + theta.sigma1_sq,
                             theta.b * theta.b + theta.sigma2_sq));
  }
  return mom;
}

}  // namespace

TEST_SUITE("likelihood") {

TEST_CASE("hermite rule reproduces the classical nodes and weights") {
  const auto gh1 = gauss_hermite(1);
  REQUIRE(gh1.nodes.size() == 1);
  CHECK(std::fabs(gh1.nodes(0)) <= 1e-15);
  CHECK(std::fabs(gh1.weights(0) - kSqrtPi) <= 1e-14);

  const auto gh2 = gauss_hermite(2);
  CHECK(std::fabs(gh2.nodes(0) + std::sqrt(0.5)) <= 1e-14);
  CHECK(std::fabs(gh2.nodes(1) - std::sqrt(0.5)) <= 1e-14);
  CHECK(std::fabs(gh2.weights(0) - kSqrtPi / 2.0) <= 1e-14);
  CHECK(std::fabs(gh2.weights(1) - kSqrtPi / 2.0) <= 1e-14);

  const auto gh3 = gauss_hermite(3);
  CHECK(std::fabs(gh3.nodes(0) + std::sqrt(1.5)) <= 1e-14);
  CHECK(std::fabs(gh3.nodes(1)) <= 1e-14);
  CHECK(std::fabs(gh3.nodes(2) - std::sqrt(1.5)) <= 1e-14);
  CHECK(std::fabs(gh3.weights(1) - 2.0 * kSqrtPi / 3.0) <= 1e-14);
  CHECK(std::fabs(gh3.weights(0) - kSqrtPi / 6.0) <= 1e-14);

  CHECK_THROWS_AS(gauss_hermite(0), std::invalid_argument);
}

TEST_CASE("hermite rule integrates gaussian moments exactly") {
  for (const int n : {5, 8, 20, 64}) {
    const auto gh = gauss_hermite(n);
    CHECK(std::fabs(gh.weights.sum() - kSqrtPi) <= 1e-13);
    // integral of x^k exp(-x^2): zero for odd k, Gamma((k+1)/2) for even k;
    // the rule is exact through degree 2n - 1.
    for (int k = 1; k <= std::min(2 * n - 1, 16); ++k) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j)
        acc += gh.weights(j) * std::pow(gh.nodes(j), k);
      if (k % 2 == 1) {
        // Cancellation noise scales with the size of the even neighbour.
        const double scale = std::exp(log_gamma(0.5 * (k + 2)));
        CHECK(std::fabs(acc) <= 1e-12 * (1.0 + scale));
      } else {
        const double expected = std::exp(log_gamma(0.5 * (k + 1)));
        CAPTURE(n);
        CAPTURE(k);
        CHECK(std::fabs(acc - expected) <=
              1e-12 * std::max(1.0, expected));
      }
    }
  }
}

TEST_CASE("quadrature log likelihood matches a simpson grid oracle") {
  RngStream rng(51, 0);
  for (int rep = 0; rep < 4; ++rep) {
    const Theta th = testing::random_theta(rng, 1, 1);
    const auto synth = testing::random_dataset(rng, th, 2, 3, 5, 40);
    const double gh_val = loglik_quadrature(synth.data, th, gauss_hermite(60));
    const double simpson = loglik_simpson(synth.data, th, 400, 12.0);
    CAPTURE(rep);
    CHECK(std::fabs(gh_val - simpson) <= 1e-6 * std::max(1.0, std::fabs(simpson)));
  }
}

TEST_CASE("adaptive quadrature with prior moments reduces to the plain rule") {
  RngStream rng(52, 0);
  const Theta th = testing::random_theta(rng, 2, 1);
  const auto synth = testing::random_dataset(rng, th, 4, 3, 5, 60);
  const auto gh = gauss_hermite(40);
  const double plain = loglik_quadrature(synth.data, th, gh);
  const double adaptive = loglik_quadrature_adaptive(
      synth.data, th, prior_moments(synth.data, th), gh);
  CHECK(std::fabs(plain - adaptive) <= 1e-12 * std::max(1.0, std::fabs(plain)));
}

TEST_CASE("adaptive quadrature agrees with the plain rule when recentered") {
  RngStream rng(53, 0);
  for (int rep = 0; rep < 4; ++rep) {
    const Theta th = testing::random_theta(rng, 1, 1);
    const auto synth = testing::random_dataset(rng, th, 3, 3, 5, 60);
    const double plain = loglik_quadrature(synth.data, th, gauss_hermite(80));
    const double adaptive = loglik_quadrature_adaptive(
        synth.data, th, exact_moments(synth.data, th, 50), gauss_hermite(40));
    CAPTURE(rep);
    CHECK(std::fabs(plain - adaptive) <=
          1e-7 * std::max(1.0, std::fabs(plain)));
  }

  ConditionalMoments bad;
  bad.mean.push_back(Vector2::Zero());
  bad.m2.push_back(Vector2::Ones());
  const Theta th = testing::random_theta(rng, 1, 1);
  const auto synth = testing::random_dataset(rng, th, 2, 2);
  CHECK_THROWS_AS(
      loglik_quadrature_adaptive(synth.data, th, bad, gauss_hermite(10)),
      std::invalid_argument);
}

TEST_CASE("importance estimate lands within its monte carlo error") {
  RngStream rng(54, 0);
  int far_misses = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const Theta th = testing::random_theta(rng, 1, 1);
    const auto synth = testing::random_dataset(rng, th, 4, 3, 5, 60);
    const auto moments = exact_moments(synth.data, th, 50);
    const double reference = loglik_quadrature_adaptive(
        synth.data, th, moments, gauss_hermite(60));
    RngStream master(1000 + static_cast<std::uint64_t>(rep), 0);
    const auto est =
        loglik_importance(synth.data, th, moments, {500, 5.0}, master);
    CHECK(est.mc_se > 0.0);
    CHECK(std::isfinite(est.value));
    CAPTURE(rep);
    CAPTURE(est.value);
    CAPTURE(reference);
    if (std::fabs(est.value - reference) > 4.0 * est.mc_se) ++far_misses;
  }
  // 4 se two-sided miss probability is well under 1e-3 per replicate.
  CHECK(far_misses <= 1);
}

TEST_CASE("reported monte carlo error tracks the replication spread") {
  RngStream rng(55, 0);
  const Theta th = testing::random_theta(rng, 1, 1);
  const auto synth = testing::random_dataset(rng, th, 3, 4, 5, 60);
  const auto moments = exact_moments(synth.data, th, 50);

  std::vector<double> values;
  std::vector<double> ses;
  for (int rep = 0; rep < 60; ++rep) {
    RngStream master(7000 + static_cast<std::uint64_t>(rep), 0);
    const auto est =
        loglik_importance(synth.data, th, moments, {400, 5.0}, master);
    values.push_back(est.value);
    ses.push_back(est.mc_se);
  }
  double mean = 0.0;
  for (const double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (const double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size()) - 1.0;
  std::sort(ses.begin(), ses.end());
  const double typical_se = ses[ses.size() / 2];
  const double ratio = std::sqrt(var) / typical_se;
  CAPTURE(ratio);
  CHECK(ratio > 0.5);
  CHECK(ratio < 2.0);
}

TEST_CASE("importance sampling is reproducible and thread invariant") {
  RngStream rng(56, 0);
  const Theta th = testing::random_theta(rng, 1, 2);
  const auto synth = testing::random_dataset(rng, th, 6, 3, 5, 60);
  const auto moments = exact_moments(synth.data, th, 40);

  RngStream m1(77, 3);
  RngStream m2(77, 3);
  const auto e1 = loglik_importance(synth.data, th, moments, {300, 5.0}, m1);
  const auto e2 = loglik_importance(synth.data, th, moments, {300, 5.0}, m2);
  CHECK(e1.value == e2.value);
  CHECK(e1.mc_se == e2.mc_se);

  RngStream m4(77, 3);
  const auto e4 =
      loglik_importance(synth.data, th, moments, {300, 5.0}, m4, 4);
  CHECK(e1.value == e4.value);
  CHECK(e1.mc_se == e4.mc_se);
}

TEST_CASE("degenerate proposals fail loudly with the subject named") {
  RngStream rng(57, 0);
  const Theta th = testing::random_theta(rng, 1, 1);
  const auto synth = testing::random_dataset(rng, th, 2, 2);

  ConditionalMoments silly;
  silly.mean.push_back(Vector2(1e200, 0.0));
  silly.mean.push_back(Vector2(1e200, 0.0));
  silly.m2.push_back(Vector2(1e200 * 1e200, 1.0));
  silly.m2.push_back(Vector2(1e200 * 1e200, 1.0));
  RngStream master(5, 0);
  CHECK_THROWS_WITH_AS(
      loglik_importance(synth.data, th, silly, {10, 5.0}, master),
      "loglik_importance: zero effective sample for subject s1",
      std::runtime_error);

  CHECK_THROWS_AS(
      loglik_importance(synth.data, th, exact_moments(synth.data, th, 20),
                        {1, 5.0}, master),
      std::invalid_argument);
  CHECK_THROWS_AS(
      loglik_importance(synth.data, th, exact_moments(synth.data, th, 20),
                        {10, 0.0}, master),
      std::invalid_argument);
}

}  // TEST_SUITE
