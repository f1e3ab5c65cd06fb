#pragma once

// Zero-inflated beta-binomial mixed model.
//
// For subject i at occasion t, with trial count S_it and covariates x_it,
// z_it, the response is
//
//   Y_it = 0                                  with probability 1 - p_it,
//   Y_it ~ BetaBin(S_it, u_it phi, (1-u_it) phi) with probability p_it,
//
//   logit p_it = a_i + x_it' alpha,   logit u_it = b_i + z_it' beta,
//
// and the subject effects phi_i = (a_i, b_i)' are bivariate normal with mean
// (a, b)' and diagonal covariance diag(sigma1^2, sigma2^2).  The parameter
// vector is theta = (phi, a, b, alpha, beta, sigma1^2, sigma2^2).
//
// An observed zero contributes only the structural-zero mass 1 - p_it; the
// count component enters the likelihood exactly when Y_it > 0.

#include <cstdint>
#include <string>
#include <vector>

#include "zibbmr/types.hpp"

namespace zibbmr {

struct Observation {
  std::int64_t y = 0;
  std::int64_t s = 1;
  Vector x;
  Vector z;
};

struct Subject {
  std::string id;
  std::vector<Observation> obs;
};

struct Dataset {
  std::vector<Subject> subjects;
  Index dim_x = 0;
  Index dim_z = 0;

  Index n_subjects() const { return static_cast<Index>(subjects.size()); }
  Index n_obs() const;

  // Throws std::invalid_argument on inconsistent shapes or invalid counts
  // (s < 1, y < 0, y > s).  Error messages name the offending subject.
  void validate() const;
};

struct Theta {
  double phi = 1.0;
  double a = 0.0;
  double b = 0.0;
  Vector alpha;
  Vector beta;
  double sigma1_sq = 1.0;
  double sigma2_sq = 1.0;

  Vector2 mu() const { return Vector2(a, b); }
  Vector2 g_diag() const { return Vector2(sigma1_sq, sigma2_sq); }
  void validate() const;  // throws std::invalid_argument
};

struct RandomEffect {
  double a_i = 0.0;
  double b_i = 0.0;

  Vector2 vec() const { return Vector2(a_i, b_i); }
  static RandomEffect from(const Vector2& v) { return {v(0), v(1)}; }
};

// Packed parameter order: phi, a, b, alpha_1.., beta_1.., sigma1_sq,
// sigma2_sq.  Shared by the score/Hessian, the Louis accumulators, and the
// reported standard errors.
struct ThetaLayout {
  Index dim_x = 0;
  Index dim_z = 0;

  static constexpr Index kPhi = 0;
  static constexpr Index kA = 1;
  static constexpr Index kB = 2;
  Index alpha(Index j) const { return 3 + j; }
  Index beta(Index j) const { return 3 + dim_x + j; }
  Index sigma1_sq() const { return 3 + dim_x + dim_z; }
  Index sigma2_sq() const { return 4 + dim_x + dim_z; }
  Index size() const { return 5 + dim_x + dim_z; }
};

std::vector<std::string> param_names(Index dim_x, Index dim_z);
Vector pack_theta(const Theta& theta);
Theta unpack_theta(const Vector& packed, Index dim_x, Index dim_z);

// Probabilities produced by the links are kept strictly inside (0, 1) so
// that log terms stay finite even for extreme linear predictors.
inline constexpr double kProbEps = 1e-12;

inline double clamp_prob(double p) {
  if (p < kProbEps) return kProbEps;
  if (p > 1.0 - kProbEps) return 1.0 - kProbEps;
  return p;
}

struct LinearPredictors {
  double eta_p = 0.0;  // logit p_it
  double eta_u = 0.0;  // logit u_it
};

LinearPredictors linear_predictors(const Theta& theta, const RandomEffect& re,
                                   const Vector& x, const Vector& z);

// ln P(Y = y | S = s) under BetaBin(s, u phi, (1-u) phi).
double betabin_log_pmf(std::int64_t y, std::int64_t s, double u, double phi);

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;
};

// Mean s*u and variance s*u*(1-u)*(1 + (s-1)/(phi+1)); the bracket is the
// overdispersion factor relative to Binomial(s, u).
MeanVar betabin_mean_var(std::int64_t s, double u, double phi);

// One observation's mixture log density given success probability p and
// count-component mean u.
double mixture_log_density(std::int64_t y, std::int64_t s, double p, double u,
                           double phi);

// Sum of mixture log densities over one subject's occasions at a fixed
// random effect (links evaluated and clamped internally).
double conditional_loglik(const Theta& theta, const Subject& subject,
                          const RandomEffect& re);

// Joint log density of (data, random effects): conditional_loglik summed
// over subjects plus the Gaussian log density of each random effect.
double complete_data_loglik(const Dataset& data, const Theta& theta,
                            const std::vector<RandomEffect>& re);

// Analytic gradient and Hessian of complete_data_loglik in theta, packed per
// ThetaLayout.  The Hessian's cross blocks between (phi, beta), alpha, and
// the Gaussian parameters vanish identically.
Vector complete_data_score(const Dataset& data, const Theta& theta,
                           const std::vector<RandomEffect>& re);
Matrix complete_data_hessian(const Dataset& data, const Theta& theta,
                             const std::vector<RandomEffect>& re);

}  // namespace zibbmr
