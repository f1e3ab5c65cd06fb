#include "zibbmr/likelihood.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "zibbmr/parallel.hpp"
#include "zibbmr/special_functions.hpp"

namespace zibbmr {

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;
constexpr double kLnPi = 1.1447298858494001741;

double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v)
    if (x > m) m = x;
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

// ln N2(phi; mu, diag(g1, g2)).
double gaussian2_log_density(const Vector2& phi, const Vector2& mu, double g1,
                             double g2) {
  const double d1 = phi(0) - mu(0);
  const double d2 = phi(1) - mu(1);
  return -kLn2Pi - 0.5 * std::log(g1) - 0.5 * std::log(g2) -
         0.5 * d1 * d1 / g1 - 0.5 * d2 * d2 / g2;
}

}  // namespace

GaussHermite gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n must be >= 1");
  Vector diag = Vector::Zero(n);
  Vector sub(std::max(0, n - 1));
  for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(0.5 * k);

  Eigen::SelfAdjointEigenSolver<Matrix> solver;
  solver.computeFromTridiagonal(diag, sub,
                                Eigen::DecompositionOptions::ComputeEigenvectors);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("gauss_hermite: eigensolve failed");

  GaussHermite gh;
  gh.nodes = solver.eigenvalues();  // ascending
  gh.weights = Vector(n);
  for (int k = 0; k < n; ++k) {
    const double v0 = solver.eigenvectors()(0, k);
    gh.weights(k) = kSqrtPi * v0 * v0;
  }
  return gh;
}

double loglik_quadrature(const Dataset& data, const Theta& theta,
                         const GaussHermite& gh) {
  data.validate();
  theta.validate();
  const int n = static_cast<int>(gh.nodes.size());
  const double sd1 = std::sqrt(theta.sigma1_sq);
  const double sd2 = std::sqrt(theta.sigma2_sq);
  const double sqrt2 = std::sqrt(2.0);

  std::vector<double> terms(static_cast<std::size_t>(n) * n);
  double total = 0.0;
  for (const auto& subject : data.subjects) {
    std::size_t idx = 0;
    for (int j = 0; j < n; ++j) {
      const double a_i = theta.a + sqrt2 * sd1 * gh.nodes(j);
      const double lw_j = std::log(gh.weights(j));
      for (int k = 0; k < n; ++k) {
        const double b_i = theta.b + sqrt2 * sd2 * gh.nodes(k);
        terms[idx++] = lw_j + std::log(gh.weights(k)) +
                       conditional_loglik(theta, subject, {a_i, b_i});
      }
    }
    total += log_sum_exp(terms) - kLnPi;
  }
  return total;
}

double loglik_quadrature_adaptive(const Dataset& data, const Theta& theta,
                                  const ConditionalMoments& moments,
                                  const GaussHermite& gh) {
  data.validate();
  theta.validate();
  if (moments.mean.size() != data.subjects.size())
    throw std::invalid_argument(
        "loglik_quadrature_adaptive: one moment pair per subject");
  const int n = static_cast<int>(gh.nodes.size());
  const double sqrt2 = std::sqrt(2.0);

  std::vector<double> terms(static_cast<std::size_t>(n) * n);
  double total = 0.0;
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const Vector2 center = moments.mean[i];
    const Vector2 var = moments.var(static_cast<Index>(i));
    const double sd1 = std::sqrt(var(0));
    const double sd2 = std::sqrt(var(1));
    std::size_t idx = 0;
    for (int j = 0; j < n; ++j) {
      const double a_i = center(0) + sqrt2 * sd1 * gh.nodes(j);
      const double lw_j = std::log(gh.weights(j));
      for (int k = 0; k < n; ++k) {
        const double b_i = center(1) + sqrt2 * sd2 * gh.nodes(k);
        const Vector2 phi(a_i, b_i);
        // Integrand relative to the centered Gaussian; the exp(-z^2) factor
        // of the rule corresponds to the centered density, whose own
        // normalization cancels against ln(pi) and the sds below.
        terms[idx++] =
            lw_j + std::log(gh.weights(k)) +
            conditional_loglik(theta, data.subjects[i], {a_i, b_i}) +
            gaussian2_log_density(phi, theta.mu(), theta.sigma1_sq,
                                  theta.sigma2_sq) -
            gaussian2_log_density(phi, center, var(0), var(1));
      }
    }
    total += log_sum_exp(terms) - kLnPi;
  }
  return total;
}

LoglikEstimate loglik_importance(const Dataset& data, const Theta& theta,
                                 const ConditionalMoments& moments,
                                 const ISConfig& config, RngStream& master,
                                 int threads) {
  data.validate();
  theta.validate();
  if (moments.mean.size() != data.subjects.size())
    throw std::invalid_argument(
        "loglik_importance: one moment pair per subject");
  if (config.k < 2) throw std::invalid_argument("loglik_importance: k < 2");
  if (!(config.nu > 0.0))
    throw std::invalid_argument("loglik_importance: nu must be > 0");

  const double nu = config.nu;
  const double lt_const =
      log_gamma(0.5 * (nu + 1.0)) - log_gamma(0.5 * nu) -
      0.5 * std::log(nu * 3.14159265358979323846);
  const Index n = data.n_subjects();

  std::vector<double> subject_ll(static_cast<std::size_t>(n));
  std::vector<double> subject_var(static_cast<std::size_t>(n));

  parallel_for(n, threads, [&](Index i) {
    const auto idx = static_cast<std::size_t>(i);
    RngStream rng = master.child(static_cast<std::uint64_t>(i));
    const Vector2 center = moments.mean[idx];
    const Vector2 var = moments.var(i);
    const double sd1 = std::sqrt(var(0));
    const double sd2 = std::sqrt(var(1));

    std::vector<double> log_w(static_cast<std::size_t>(config.k));
    for (int k = 0; k < config.k; ++k) {
      const double t1 = sample_student_t(rng, nu);
      const double t2 = sample_student_t(rng, nu);
      const RandomEffect phi{center(0) + sd1 * t1, center(1) + sd2 * t2};
      const double log_prop =
          2.0 * lt_const -
          0.5 * (nu + 1.0) *
              (std::log1p(t1 * t1 / nu) + std::log1p(t2 * t2 / nu)) -
          std::log(sd1) - std::log(sd2);
      log_w[static_cast<std::size_t>(k)] =
          conditional_loglik(theta, data.subjects[idx], phi) +
          gaussian2_log_density(phi.vec(), theta.mu(), theta.sigma1_sq,
                                theta.sigma2_sq) -
          log_prop;
    }

    double m = -std::numeric_limits<double>::infinity();
    for (double lw : log_w)
      if (lw > m) m = lw;
    if (!std::isfinite(m))
      throw std::runtime_error("loglik_importance: zero effective sample for subject " +
                               data.subjects[idx].id);
    double sum_r = 0.0;
    double sum_r2 = 0.0;
    for (double lw : log_w) {
      const double r = std::exp(lw - m);
      sum_r += r;
      sum_r2 += r * r;
    }
    const double kd = static_cast<double>(config.k);
    const double mean_r = sum_r / kd;
    const double var_r = (sum_r2 - kd * mean_r * mean_r) / (kd - 1.0);
    subject_ll[idx] = m + std::log(mean_r);
    // Delta method: Var(ln p_hat) ~= Var(p_hat) / p_hat^2.
    subject_var[idx] = var_r / (kd * mean_r * mean_r);
  });

  LoglikEstimate est;
  double var_acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    est.value += subject_ll[static_cast<std::size_t>(i)];
    var_acc += subject_var[static_cast<std::size_t>(i)];
  }
  est.mc_se = std::sqrt(var_acc);
  return est;
}

}  // namespace zibbmr
