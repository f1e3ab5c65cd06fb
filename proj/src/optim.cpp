#include "zibbmr/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace zibbmr {

OptimResult bfgs_minimize(
    const std::function<double(const Vector&, Vector&)>& fn, Vector x0,
    int max_iter, double tol) {
  const Index n = x0.size();
  if (n == 0) throw std::invalid_argument("bfgs_minimize: empty start point");

  OptimResult res;
  res.x = std::move(x0);
  res.grad = Vector::Zero(n);
  res.value = fn(res.x, res.grad);
  if (!std::isfinite(res.value))
    throw std::runtime_error("bfgs_minimize: objective not finite at start");

  Matrix h_inv = Matrix::Identity(n, n);
  bool reset_used = false;

  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    if (res.grad.lpNorm<Eigen::Infinity>() <=
        tol * (1.0 + std::fabs(res.value))) {
      res.converged = true;
      return res;
    }

    Vector dir = -(h_inv * res.grad);
    double slope = dir.dot(res.grad);
    if (!(slope < 0.0)) {
      // Stale curvature produced a non-descent direction; restart.
      h_inv.setIdentity();
      dir = -res.grad;
      slope = dir.dot(res.grad);
    }

    // Armijo backtracking.
    double step = 1.0;
    Vector x_new(n);
    Vector g_new(n);
    double f_new = res.value;
    bool accepted = false;
    for (int half = 0; half < 60; ++half) {
      x_new = res.x + step * dir;
      f_new = fn(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (reset_used) return res;  // converged stays false
      reset_used = true;
      h_inv.setIdentity();
      continue;
    }

    const Vector s = x_new - res.x;
    const Vector y = g_new - res.grad;
    const double sy = s.dot(y);
    res.x = std::move(x_new);
    res.value = f_new;
    res.grad = g_new;
    // Curvature guard: skip the update when s'y is too small for a stable
    // inverse-Hessian update.
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Matrix eye = Matrix::Identity(n, n);
      const Matrix left = eye - rho * (s * y.transpose());
      h_inv = left * h_inv * left.transpose() + rho * (s * s.transpose());
    }
  }
  return res;
}

}  // namespace zibbmr
