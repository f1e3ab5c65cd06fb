#pragma once

// Marginal log likelihood ln p(Y; theta) = sum_i ln integral of
// p(Y_i | phi_i) N2(phi_i; mu, G) d phi_i.  Two routes: tensor-product
// Gauss-Hermite quadrature (deterministic reference) and an importance
// sampler with a per-subject product-t proposal centered at estimated
// conditional moments of phi_i | Y_i.

#include <vector>

#include "zibbmr/model.hpp"
#include "zibbmr/rng.hpp"

namespace zibbmr {

struct GaussHermite {
  Vector nodes;    // ascending
  Vector weights;  // sum to sqrt(pi)
};

// Nodes and weights via the Golub-Welsch eigendecomposition of the Hermite
// Jacobi matrix; exact for polynomials of degree 2n - 1 against exp(-x^2).
GaussHermite gauss_hermite(int n);

// Per-subject conditional mean and second moment of phi_i | Y_i, accumulated
// by stochastic approximation during fitting.  Variances are floored so the
// importance proposal always has positive scale.
struct ConditionalMoments {
  std::vector<Vector2> mean;
  std::vector<Vector2> m2;  // running second moment E[phi phi] (componentwise)

  Vector2 var(Index i) const {
    const auto idx = static_cast<std::size_t>(i);
    Vector2 v;
    for (int k = 0; k < 2; ++k) {
      const double raw = m2[idx](k) - mean[idx](k) * mean[idx](k);
      v(k) = raw > 1e-8 ? raw : 1e-8;
    }
    return v;
  }
};

// Quadrature centered at the prior N(mu, G): nodes mu + sqrt(2) * sigma * z.
double loglik_quadrature(const Dataset& data, const Theta& theta,
                         const GaussHermite& gh);

// Quadrature centered and scaled per subject at the conditional moments;
// integrates p(Y_i | phi) N2(phi; mu, G) / N2(phi; m_i, V_i) against
// N2(phi; m_i, V_i).  Much tighter when the posterior is far from the prior.
double loglik_quadrature_adaptive(const Dataset& data, const Theta& theta,
                                  const ConditionalMoments& moments,
                                  const GaussHermite& gh);

struct ISConfig {
  int k = 500;     // draws per subject
  double nu = 5.0; // t degrees of freedom of the proposal
};

struct LoglikEstimate {
  double value = 0.0;
  double mc_se = 0.0;
};

// Importance-sampling estimate.  For subject i, draws
// phi^(k) = m_i + sd_i * t_k with t_k iid Student t(nu) componentwise, forms
// normalized weights in log space, and reports the delta-method Monte Carlo
// standard error of the summed log likelihood.  Subject i consumes the child
// stream master.child(i), so estimates are independent of threading.
LoglikEstimate loglik_importance(const Dataset& data, const Theta& theta,
                                 const ConditionalMoments& moments,
                                 const ISConfig& config, RngStream& master,
                                 int threads = 1);

}  // namespace zibbmr
