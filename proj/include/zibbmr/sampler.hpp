#pragma once

// Metropolis-Hastings machinery for the subject random effects
// phi_i = (a_i, b_i).  Three proposal kernels are cycled within one sweep:
//
//   kern1  independence draw from the current prior N(mu, G); the proposal
//          density cancels the prior, so the ratio is the conditional
//          likelihood ratio alone,
//   kern2  bivariate random walk N(current, Omega), Omega adapted toward a
//          target acceptance rate,
//   kern3  single-site walk: one uniformly chosen coordinate moved by a
//          standard normal increment.
//
// Two target modes are supported.  The original mode integrates the latent
// beta probabilities out through the beta-binomial mass.  The augmented mode
// carries an explicit w_it ~ Beta for every positive count, refreshed by a
// Gibbs draw from its exact conditional between random-effect moves; the
// binomial factor f(y | s, w) is free of phi_i, so acceptance ratios reduce
// to gamma-function and zero-mass terms.

#include <vector>

#include "zibbmr/model.hpp"
#include "zibbmr/rng.hpp"

namespace zibbmr {

enum class Mode { kOriginal, kAugmented };

enum class KernelKind { kIndependence, kRandomWalk, kSingleSite };

struct KernelSchedule {
  int m1 = 2;
  int m2 = 2;
  int m3 = 2;
};

struct AcceptCounts {
  long proposed = 0;
  long accepted = 0;
  double rate() const {
    return proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0;
  }
};

// Dataset views rebuilt once per iteration: covariate projections x'alpha,
// z'beta and every lgamma term that does not involve the random effect.
struct PreparedObs {
  std::int64_t y = 0;
  std::int64_t s = 1;
  double xa = 0.0;       // x' alpha
  double zb = 0.0;       // z' beta
  double lg_s_phi = 0.0; // ln Gamma(s + phi)
};

struct PreparedData {
  std::vector<std::vector<PreparedObs>> subjects;
  Theta theta;
  double lg_phi = 0.0;  // ln Gamma(phi)
};

PreparedData prepare_data(const Dataset& data, const Theta& theta);

// One MCMC chain.  Each subject owns an RngStream, so draws are reproducible
// regardless of how chains or subjects are scheduled across threads.  The
// cached target is split into the part driven by a_i (zero-indicator terms)
// and by b_i (count terms): single-site moves then only recompute the factor
// they touch.
struct ChainState {
  std::vector<RandomEffect> re;
  std::vector<RngStream> streams;
  Matrix2 omega = Matrix2::Identity();

  // Augmented-mode latents, indexed like the observations; slots with y = 0
  // hold NaN and are never read.
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> ln_w;
  std::vector<std::vector<double>> ln_1mw;

  std::vector<double> lp_p;  // cached sum of zero-indicator terms
  std::vector<double> lp_u;  // cached sum of count terms

  AcceptCounts kern1, kern2, kern3;
  AcceptCounts window2;  // kern2 tallies since the last omega adaptation
};

// Builds a chain: random effects drawn from N(mu0, G0) via the per-subject
// streams (stream ids are 1 + chain_index * n_subjects + subject_index under
// the given seed), w initialized at (y + 1/2) / (s + 1).
ChainState init_chain(const Dataset& data, const Theta& theta0, Mode mode,
                      std::uint64_t seed, Index chain_index,
                      const Matrix2& omega0);

// Recomputes the cached subject targets for the current theta (and, in
// augmented mode, the current w).  Must be called after prepare_data when
// theta changes.
void refresh_cache(const PreparedData& prep, ChainState& chain, Mode mode);

// Proposal draws.
Vector2 propose_kern1(RngStream& rng, const Theta& theta);
Vector2 propose_kern2(RngStream& rng, const RandomEffect& re,
                      const Matrix2& omega);
struct SingleSiteProposal {
  int component = 0;  // 0 moves a_i, 1 moves b_i
  Vector2 value;
};
SingleSiteProposal propose_kern3(RngStream& rng, const RandomEffect& re);

// Log acceptance ratios in closed form, written as the explicit sums of
// log-Beta/log-Gamma and zero-mass terms.  kIndependence omits the Gaussian
// prior ratio (it cancels against the proposal); the symmetric kernels add
// it.  These are the reference implementations; mh_sweep reproduces the same
// values through its cached targets.
double log_accept_original(const Theta& theta, const Subject& subject,
                           const RandomEffect& current,
                           const RandomEffect& candidate, KernelKind kind);
double log_accept_augmented(const Theta& theta, const Subject& subject,
                            const std::vector<double>& w,
                            const RandomEffect& current,
                            const RandomEffect& candidate, KernelKind kind);

// Exact conditional refresh of subject i's latents:
// w_it | rest ~ Beta(y_it + u_it phi, s_it - y_it + (1 - u_it) phi) for every
// positive count.  Requires augmented mode (w allocated).
void gibbs_update_w(const PreparedData& prep, ChainState& chain, Index i);

// One full sweep: for each subject, m1 independence updates, m2 random-walk
// updates and m3 single-site updates, with Gibbs w refreshes between kernel
// blocks in augmented mode.
void mh_sweep(const PreparedData& prep, ChainState& chain, Mode mode,
              const KernelSchedule& schedule);

// Scales the random-walk covariance by exp(gamma * (rate - target)) using
// the acceptance rate since the previous adaptation, clamping diagonal
// entries to [1e-6, 1e4], then resets the window tallies.
void adapt_omega(ChainState& chain, double target_rate, double gamma);

}  // namespace zibbmr
