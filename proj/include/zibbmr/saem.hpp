#pragma once

// Stochastic-approximation EM driver.
//
// Iteration q: each chain runs one MH sweep at theta^(q-1); the Gaussian
// sufficient statistics F1 = sum_i phi_i and F2 = sum_i phi_i phi_i' are
// folded in with step gamma_q (chain sums averaged over chains); the M-step
// gives (a, b) and diag(G) in closed form from the statistics, while
// (beta, phi) and alpha maximize the simulated complete-data terms
// numerically and are then relaxed toward the previous iterate with the same
// gamma_q.  Step sizes are gamma_q = 1 for q <= K1 (burn-in, full updates)
// and 1/(q - K1) afterwards (averaging phase).  Louis accumulators tracked
// alongside deliver standard errors from the observed-information estimate
// -H = -(G_louis - D D').

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zibbmr/likelihood.hpp"
#include "zibbmr/model.hpp"
#include "zibbmr/sampler.hpp"

namespace zibbmr {

struct StepSchedule {
  int k1 = 750;
  int k2 = 250;

  // q is 1-based.
  double gamma(int q) const { return q <= k1 ? 1.0 : 1.0 / (q - k1); }
  int total() const { return k1 + k2; }
  void validate() const;
};

struct SufficientStats {
  Vector2 f1 = Vector2::Zero();
  Matrix2 f2 = Matrix2::Zero();
};

// F <- F + gamma * (mean over chains of the per-subject sums - F).
void sa_update_stats(SufficientStats& stats,
                     const std::vector<ChainState>& chains, double gamma);

struct GaussianMStep {
  Vector2 mu;
  Vector2 g_diag;  // floored at 1e-8
};

// Closed-form Gaussian maximizer: mu = F1 / N, G = diag(F2/N - mu mu').
GaussianMStep mstep_gaussian(const SufficientStats& stats, Index n_subjects);

// Coordinates pinned to fixed values during optimization (reduced fits).
using FixedCoords = std::vector<std::pair<Index, double>>;

struct BetabinMStep {
  Vector beta;
  double phi = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Maximizes the simulated count-component objective over (beta, ln phi) by
// BFGS with analytic digamma gradients, warm-started at (beta0, phi0).
// Throws if the data carry no positive counts.
BetabinMStep mstep_betabin(const Dataset& data,
                           const std::vector<ChainState>& chains,
                           const Vector& beta0, double phi0,
                           const FixedCoords& fixed_beta, int max_iter = 200);

struct LogisticMStep {
  Vector alpha;
  bool converged = false;
  bool ridged = false;  // separation detected, ridge penalty applied
  int iterations = 0;
};

// Maximizes the zero-indicator logistic objective over alpha by Newton
// iteration with the chain intercepts a_i as offsets.
LogisticMStep mstep_logistic(const Dataset& data,
                             const std::vector<ChainState>& chains,
                             const Vector& alpha0,
                             const FixedCoords& fixed_alpha,
                             int max_iter = 50);

// theta <- theta + gamma * (tilde - theta) for phi, alpha, beta; the
// Gaussian components (a, b, variances) are taken from tilde as-is since
// their smoothing already happened through the sufficient statistics.
// phi is floored at 1e-6.
Theta smooth_params(const Theta& theta, const Theta& tilde, double gamma);

// Conditional moment tracker feeding the importance-sampling proposal.
void update_conditional_moments(ConditionalMoments& moments,
                                const std::vector<ChainState>& chains,
                                double gamma);

struct LouisAccumulators {
  Vector d;
  Matrix g;

  explicit LouisAccumulators(Index dim)
      : d(Vector::Zero(dim)), g(Matrix::Zero(dim, dim)) {}
  Matrix h() const { return g - d * d.transpose(); }
};

// D <- D + gamma * (mean_chains score - D),
// G <- G + gamma * (mean_chains [hessian + score score'] - G).
void update_louis(LouisAccumulators& acc, const Dataset& data,
                  const Theta& theta, const std::vector<ChainState>& chains,
                  double gamma);

// sqrt of the diagonal of (-H)^{-1}; empty when -H is not positive definite.
std::optional<Vector> louis_standard_errors(const LouisAccumulators& acc);

enum class SeMethod { kLouis, kNone };

// Whether conditional moments accumulate over every iteration or only the
// averaging (K2) phase.
enum class MomentsPhase { kAll, kAveragingOnly };

struct FitConfig {
  int chains = 5;
  StepSchedule steps;
  KernelSchedule kernels;
  Mode mode = Mode::kOriginal;
  std::uint64_t seed = 1;
  double target_accept = 0.3;
  ISConfig is;
  SeMethod se_method = SeMethod::kLouis;
  MomentsPhase moments_phase = MomentsPhase::kAll;
  int threads = 1;
  int max_mstep_iter = 200;
  std::optional<Theta> init;
  FixedCoords fixed_alpha;
  FixedCoords fixed_beta;

  void validate() const;
};

struct FitDiagnostics {
  double accept_kern1 = 0.0;
  double accept_kern2 = 0.0;
  double accept_kern3 = 0.0;
  int mstep_nonconverged = 0;
  int logistic_ridged_iters = 0;
  // Mean absolute packed-parameter step over the last 50 iterations.
  double final_drift = 0.0;
  bool se_available = false;
};

struct FitResult {
  bool ok = false;
  std::string error;
  Theta theta;
  std::vector<std::string> names;
  std::optional<Vector> se;
  double loglik = 0.0;
  double loglik_mc_se = 0.0;
  ConditionalMoments moments;
  Matrix trajectory;  // one packed theta row per iteration
  FitDiagnostics diag;
};

// Deterministic data-driven starting point: intercepts from the marginal
// positive fraction and the mean positive ratio, zero slopes, phi = 10,
// variances 0.3.
Theta default_init(const Dataset& data);

FitResult fit(const Dataset& data, const FitConfig& config);

}  // namespace zibbmr
