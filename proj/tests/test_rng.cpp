#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "zibbmr/rng.hpp"

using namespace zibbmr;

TEST_SUITE("rng") {

TEST_CASE("streams are reproducible and distinct") {
  RngStream a(42, 7);
  RngStream b(42, 7);
  RngStream c(42, 8);
  RngStream d(43, 7);
  bool all_equal = true;
  bool c_differs = false;
  bool d_differs = false;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t va = a.next_u64();
    if (va != b.next_u64()) all_equal = false;
    if (va != c.next_u64()) c_differs = true;
    if (va != d.next_u64()) d_differs = true;
  }
  CHECK(all_equal);
  CHECK(c_differs);
  CHECK(d_differs);
}

TEST_CASE("child streams are reproducible and mutually distinct") {
  RngStream master(9, 3);
  RngStream c1 = master.child(0);
  RngStream c2 = master.child(1);
  RngStream c1_again = RngStream(9, 3).child(0);
  bool identical = true;
  bool differs = false;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t v = c1.next_u64();
    if (v != c1_again.next_u64()) identical = false;
    if (v != c2.next_u64()) differs = true;
  }
  CHECK(identical);
  CHECK(differs);
  // Deriving children must not advance the parent.
  RngStream m1(5, 5);
  RngStream m2(5, 5);
  (void)m1.child(11);
  CHECK(m1.next_u64() == m2.next_u64());
}

TEST_CASE("uniform01 and open01 ranges and moments") {
  RngStream rng(123, 0);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  // 5 sigma bounds: sd(mean) = sqrt(1/12n)
  CHECK(std::fabs(mean - 0.5) < 5.0 * std::sqrt(1.0 / (12.0 * n)));
  CHECK(std::fabs(var - 1.0 / 12.0) < 0.002);

  RngStream rng2(123, 1);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng2.open01();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal sampler moments and symmetry") {
  RngStream rng(7, 0);
  const int n = 200000;
  double sum = 0.0, sq = 0.0, cube = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = sample_normal(rng);
    sum += z;
    sq += z * z;
    cube += z * z * z;
  }
  CHECK(std::fabs(sum / n) < 5.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::fabs(sq / n - 1.0) < 0.02);
  CHECK(std::fabs(cube / n) < 0.05);  // skewness ~ 0
  RngStream rng2(7, 1);
  double m = 0.0;
  for (int i = 0; i < 50000; ++i) m += sample_normal(rng2, 3.0, 0.5);
  CHECK(std::fabs(m / 50000 - 3.0) < 0.02);
}

TEST_CASE("gamma sampler matches mean and variance") {
  for (const double shape : {0.3, 1.0, 2.5, 40.0}) {
    CAPTURE(shape);
    RngStream rng(11, static_cast<std::uint64_t>(shape * 100));
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double g = sample_gamma(rng, shape);
      CHECK(g > 0.0);
      sum += g;
      sq += g * g;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    // mean = shape, var = shape for unit scale
    CHECK(std::fabs(mean - shape) <
          6.0 * std::sqrt(shape / static_cast<double>(n)));
    CHECK(std::fabs(var - shape) / shape < 0.15);
  }
}

TEST_CASE("beta sampler matches mean and variance") {
  struct Case {
    double p, q;
  };
  for (const auto& c : {Case{2.0, 3.0}, Case{0.5, 0.5}, Case{8.0, 1.5},
                        Case{30.0, 70.0}}) {
    CAPTURE(c.p);
    CAPTURE(c.q);
    RngStream rng(13, static_cast<std::uint64_t>(c.p * 1000 + c.q));
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double w = sample_beta(rng, c.p, c.q);
      CHECK(w > 0.0);
      CHECK(w < 1.0);
      sum += w;
      sq += w * w;
    }
    const double mean_ref = c.p / (c.p + c.q);
    const double var_ref =
        c.p * c.q / ((c.p + c.q) * (c.p + c.q) * (c.p + c.q + 1.0));
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::fabs(mean - mean_ref) <
          6.0 * std::sqrt(var_ref / static_cast<double>(n)));
    CHECK(std::fabs(var - var_ref) / var_ref < 0.1);
  }
}

TEST_CASE("beta sampler survives extreme shapes") {
  RngStream rng(17, 0);
  for (int i = 0; i < 20000; ++i) {
    const double w = sample_beta(rng, 0.001, 0.002);
    CHECK(std::isfinite(w));
    CHECK(w > 0.0);
    CHECK(w < 1.0);
  }
  for (int i = 0; i < 20000; ++i) {
    const double w = sample_beta(rng, 1e4, 3.0);
    CHECK(w > 0.0);
    CHECK(w < 1.0);
  }
}

TEST_CASE("student t sampler is symmetric with heavy tails") {
  RngStream rng(19, 0);
  const int n = 200000;
  const double nu = 5.0;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = sample_student_t(rng, nu);
    sum += t;
    sq += t * t;
  }
  CHECK(std::fabs(sum / n) < 0.02);
  // var = nu / (nu - 2) = 5/3
  CHECK(std::fabs(sq / n - nu / (nu - 2.0)) < 0.06);
}

TEST_CASE("uniform integer sampler covers the range uniformly") {
  RngStream rng(23, 0);
  const std::int64_t lo = 200, hi = 207;
  std::vector<int> counts(8, 0);
  const int n = 80000;
  for (int i = 0; i < n; ++i) {
    const std::int64_t v = sample_uniform_int(rng, lo, hi);
    REQUIRE(v >= lo);
    REQUIRE(v <= hi);
    ++counts[static_cast<std::size_t>(v - lo)];
  }
  for (const int c : counts)
    CHECK(std::fabs(c - n / 8.0) < 5.0 * std::sqrt(n * (1.0 / 8) * (7.0 / 8)));
  CHECK(sample_uniform_int(rng, 5, 5) == 5);
  CHECK_THROWS_AS(sample_uniform_int(rng, 6, 5), std::domain_error);
}

TEST_CASE("bivariate normal matches mean and covariance") {
  RngStream rng(29, 0);
  Vector2 mean(1.5, -2.0);
  Matrix2 cov;
  cov << 2.0, 0.0, 0.0, 0.5;
  const int n = 100000;
  Vector2 sum = Vector2::Zero();
  Matrix2 sq = Matrix2::Zero();
  for (int i = 0; i < n; ++i) {
    const Vector2 v = sample_normal(rng, mean, cov);
    sum += v;
    sq += (v - mean) * (v - mean).transpose();
  }
  const Vector2 m = sum / n;
  const Matrix2 c = sq / n;
  CHECK(std::fabs(m(0) - 1.5) < 0.03);
  CHECK(std::fabs(m(1) + 2.0) < 0.03);
  CHECK(std::fabs(c(0, 0) - 2.0) < 0.06);
  CHECK(std::fabs(c(1, 1) - 0.5) < 0.02);
  CHECK(std::fabs(c(0, 1)) < 0.03);
}

TEST_CASE("bivariate normal accepts a zero covariance") {
  RngStream rng(31, 0);
  const Vector2 mean(0.25, -0.75);
  const Vector2 v = sample_normal(rng, mean, Matrix2::Zero());
  CHECK(v(0) == 0.25);
  CHECK(v(1) == -0.75);
  Matrix2 bad;
  bad << 1.0, 2.0, 2.0, 1.0;  // indefinite
  CHECK_THROWS_AS(sample_normal(rng, mean, bad), std::domain_error);
}

TEST_CASE("seed and stream accessors round-trip") {
  RngStream rng(1234, 56);
  CHECK(rng.seed() == 1234);
  CHECK(rng.stream_id() == 56);
}

}  // TEST_SUITE
