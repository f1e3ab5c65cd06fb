// Shared generators and oracles for the test suites.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "zibbmr/likelihood.hpp"
#include "zibbmr/model.hpp"
#include "zibbmr/rng.hpp"
#include "zibbmr/special_functions.hpp"

namespace zibbmr::testing {

// Random model parameters with moderate link scales so that probabilities
// stay away from the clamping region and finite differences are smooth.
inline Theta random_theta(RngStream& rng, Index dim_x, Index dim_z) {
  Theta th;
  th.phi = 0.5 + 19.5 * rng.uniform01();
  th.a = -1.0 + 2.0 * rng.uniform01();
  th.b = -1.0 + 2.0 * rng.uniform01();
  th.alpha = Vector(dim_x);
  th.beta = Vector(dim_z);
  for (Index j = 0; j < dim_x; ++j) th.alpha(j) = -0.8 + 1.6 * rng.uniform01();
  for (Index j = 0; j < dim_z; ++j) th.beta(j) = -0.8 + 1.6 * rng.uniform01();
  th.sigma1_sq = 0.3 + 1.2 * rng.uniform01();
  th.sigma2_sq = 0.3 + 1.2 * rng.uniform01();
  return th;
}

// Random dataset drawn from the model itself, plus the random effects used
// to generate it (handy for complete-data likelihood checks).
struct SyntheticData {
  Dataset data;
  std::vector<RandomEffect> effects;
};

inline SyntheticData random_dataset(RngStream& rng, const Theta& theta,
                                    Index n_subjects, Index t_per_subject,
                                    std::int64_t s_lo = 20,
                                    std::int64_t s_hi = 200) {
  SyntheticData out;
  out.data.dim_x = theta.alpha.size();
  out.data.dim_z = theta.beta.size();
  for (Index i = 0; i < n_subjects; ++i) {
    Subject sub;
    sub.id = "s" + std::to_string(i + 1);
    RandomEffect re;
    re.a_i = theta.a + std::sqrt(theta.sigma1_sq) * sample_normal(rng);
    re.b_i = theta.b + std::sqrt(theta.sigma2_sq) * sample_normal(rng);
    for (Index t = 0; t < t_per_subject; ++t) {
      Observation o;
      o.x = Vector(out.data.dim_x);
      o.z = Vector(out.data.dim_z);
      for (Index j = 0; j < out.data.dim_x; ++j) o.x(j) = sample_normal(rng);
      for (Index j = 0; j < out.data.dim_z; ++j) o.z(j) = sample_normal(rng);
      o.s = sample_uniform_int(rng, s_lo, s_hi);
      const auto lp = linear_predictors(theta, re, o.x, o.z);
      const double p = expit(lp.eta_p);
      const double u = expit(lp.eta_u);
      if (rng.uniform01() < 1.0 - p) {
        o.y = 0;
      } else {
        const double w =
            sample_beta(rng, u * theta.phi, (1.0 - u) * theta.phi);
        std::int64_t y = 0;
        for (std::int64_t k = 0; k < o.s; ++k)
          if (rng.uniform01() < w) ++y;
        o.y = y;
      }
      sub.obs.push_back(std::move(o));
    }
    out.data.subjects.push_back(std::move(sub));
    out.effects.push_back(re);
  }
  out.data.validate();
  return out;
}

// Double-exponential (tanh-sinh) quadrature for
//   ln integral_0^1 Binom(y | s, w) Beta(w | u*phi, (1-u)*phi) dw
// computed without the beta-function shortcut. The substitution
// w = expit(pi * sinh(t)) turns endpoint singularities into
// double-exponential decay; the trapezoid sum then converges fast.
// Log-space throughout so extreme shapes stay finite.
inline double betabin_log_pmf_quadrature(std::int64_t y, std::int64_t s,
                                         double u, double phi) {
  const double a = u * phi;
  const double b = (1.0 - u) * phi;
  const double yd = static_cast<double>(y);
  const double sd = static_cast<double>(s);
  const double log_comb = log_binom_coef(sd, yd);
  const double log_beta_norm = log_beta(a, b);

  constexpr double pi = std::numbers::pi;
  const double t_max = 10.0;
  const double h = 0.002;
  const auto n = static_cast<std::int64_t>(std::floor(t_max / h));

  double max_log = -std::numeric_limits<double>::infinity();
  std::vector<double> logs;
  logs.reserve(static_cast<std::size_t>(2 * n + 1));
  for (std::int64_t k = -n; k <= n; ++k) {
    const double t = static_cast<double>(k) * h;
    const double g2 = pi * std::sinh(t);  // 2g in the tanh identity
    const double log_w = -log1pexp(-g2);
    const double log_1mw = -log1pexp(g2);
    // dw/dt = pi * cosh(t) * w * (1 - w)
    const double log_jac = std::log(pi * std::cosh(t)) + log_w + log_1mw;
    const double val = log_comb - log_beta_norm + (yd + a - 1.0) * log_w +
                       (sd - yd + b - 1.0) * log_1mw + log_jac;
    if (std::isfinite(val)) {
      logs.push_back(val);
      if (val > max_log) max_log = val;
    }
  }
  double acc = 0.0;
  for (const double v : logs) acc += std::exp(v - max_log);
  return max_log + std::log(acc) + std::log(h);
}

struct PosteriorMoments {
  double mean_a = 0.0;
  double mean_b = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
};

// Tensor-product Gauss-Hermite moments of the exact conditional posterior of
// one subject's random effect.
inline PosteriorMoments posterior_moments_gh(const Theta& th,
                                             const Subject& sub, int n) {
  const auto gh = gauss_hermite(n);
  const double sa = std::sqrt(2.0 * th.sigma1_sq);
  const double sb = std::sqrt(2.0 * th.sigma2_sq);
  Matrix ll(n, n);
  double max_ll = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const RandomEffect re{th.a + sa * gh.nodes(j), th.b + sb * gh.nodes(k)};
      ll(j, k) = conditional_loglik(th, sub, re) + std::log(gh.weights(j)) +
                 std::log(gh.weights(k));
      max_ll = std::max(max_ll, ll(j, k));
    }
  double z = 0.0, za = 0.0, zb = 0.0, zaa = 0.0, zbb = 0.0;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const double e = std::exp(ll(j, k) - max_ll);
      const double aval = th.a + sa * gh.nodes(j);
      const double bval = th.b + sb * gh.nodes(k);
      z += e;
      za += e * aval;
      zb += e * bval;
      zaa += e * aval * aval;
      zbb += e * bval * bval;
    }
  PosteriorMoments m;
  m.mean_a = za / z;
  m.mean_b = zb / z;
  m.var_a = zaa / z - m.mean_a * m.mean_a;
  m.var_b = zbb / z - m.mean_b * m.mean_b;
  return m;
}

}  // namespace zibbmr::testing
