#pragma once

// Dense quasi-Newton minimizer used by the M-steps.  Dimensions here are
// tiny (number of count-model coefficients plus one), so a plain BFGS with
// an Armijo backtracking line search is the right tool.

#include <functional>

#include "zibbmr/types.hpp"

namespace zibbmr {

struct OptimResult {
  Vector x;
  double value = 0.0;
  Vector grad;
  int iterations = 0;
  bool converged = false;
};

// Minimizes fn, which must return the objective and fill grad.  Convergence
// is declared when the sup-norm of the gradient drops below
// tol * (1 + |value|).
OptimResult bfgs_minimize(
    const std::function<double(const Vector&, Vector&)>& fn, Vector x0,
    int max_iter = 200, double tol = 1e-6);

}  // namespace zibbmr
