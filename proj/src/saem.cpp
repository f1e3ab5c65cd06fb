#include "zibbmr/saem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "zibbmr/optim.hpp"
#include "zibbmr/parallel.hpp"
#include "zibbmr/special_functions.hpp"

namespace zibbmr {

void StepSchedule::validate() const {
  if (k1 < 1 || k2 < 1)
    throw std::invalid_argument("step schedule: k1 and k2 must be >= 1");
}

void FitConfig::validate() const {
  steps.validate();
  if (chains < 1) throw std::invalid_argument("fit config: chains must be >= 1");
  if (kernels.m1 < 0 || kernels.m2 < 0 || kernels.m3 < 0 ||
      kernels.m1 + kernels.m2 + kernels.m3 < 1)
    throw std::invalid_argument("fit config: kernel schedule needs >= 1 update");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw std::invalid_argument("fit config: target_accept outside (0, 1)");
  if (threads < 1) throw std::invalid_argument("fit config: threads must be >= 1");
  if (is.k < 2) throw std::invalid_argument("fit config: is.k must be >= 2");
  if (!(is.nu > 0.0)) throw std::invalid_argument("fit config: is.nu must be > 0");
  if (max_mstep_iter < 1)
    throw std::invalid_argument("fit config: max_mstep_iter must be >= 1");
}

void sa_update_stats(SufficientStats& stats,
                     const std::vector<ChainState>& chains, double gamma) {
  if (chains.empty()) throw std::invalid_argument("sa_update_stats: no chains");
  Vector2 f1 = Vector2::Zero();
  Matrix2 f2 = Matrix2::Zero();
  for (const auto& chain : chains) {
    for (const auto& re : chain.re) {
      const Vector2 v = re.vec();
      f1 += v;
      f2 += v * v.transpose();
    }
  }
  const double inv_m = 1.0 / static_cast<double>(chains.size());
  stats.f1 += gamma * (inv_m * f1 - stats.f1);
  stats.f2 += gamma * (inv_m * f2 - stats.f2);
}

GaussianMStep mstep_gaussian(const SufficientStats& stats, Index n_subjects) {
  if (n_subjects < 1)
    throw std::invalid_argument("mstep_gaussian: need n_subjects >= 1");
  const double n = static_cast<double>(n_subjects);
  GaussianMStep out;
  out.mu = stats.f1 / n;
  for (int k = 0; k < 2; ++k) {
    const double raw = stats.f2(k, k) / n - out.mu(k) * out.mu(k);
    out.g_diag(k) = raw > 1e-8 ? raw : 1e-8;
  }
  return out;
}

namespace {

// Flattened view of the count-component terms: one record per positive
// observation per chain.  z vectors are referenced from the dataset.
struct CountRecord {
  double y;
  double s;
  double offset;  // b_i + fixed-coordinate contribution
  const Vector* z;
};

std::vector<CountRecord> collect_count_records(
    const Dataset& data, const std::vector<ChainState>& chains,
    const FixedCoords& fixed_beta, const std::vector<Index>& free_idx) {
  std::vector<CountRecord> records;
  for (const auto& chain : chains) {
    for (std::size_t i = 0; i < data.subjects.size(); ++i) {
      const double b_i = chain.re[i].b_i;
      for (const auto& o : data.subjects[i].obs) {
        if (o.y == 0) continue;
        double offset = b_i;
        for (const auto& [j, v] : fixed_beta) offset += v * o.z(j);
        records.push_back({static_cast<double>(o.y),
                           static_cast<double>(o.s), offset, &o.z});
      }
    }
  }
  (void)free_idx;
  return records;
}

std::vector<Index> free_coords(Index dim, const FixedCoords& fixed) {
  std::vector<bool> pinned(static_cast<std::size_t>(dim), false);
  for (const auto& [j, v] : fixed) {
    if (j < 0 || j >= dim)
      throw std::invalid_argument("fixed coordinate index out of range");
    (void)v;
    pinned[static_cast<std::size_t>(j)] = true;
  }
  std::vector<Index> free_idx;
  for (Index j = 0; j < dim; ++j)
    if (!pinned[static_cast<std::size_t>(j)]) free_idx.push_back(j);
  return free_idx;
}

Vector merge_coords(Index dim, const std::vector<Index>& free_idx,
                    const Vector& free_vals, const FixedCoords& fixed) {
  Vector full = Vector::Zero(dim);
  for (std::size_t k = 0; k < free_idx.size(); ++k)
    full(free_idx[k]) = free_vals(static_cast<Index>(k));
  for (const auto& [j, v] : fixed) full(j) = v;
  return full;
}

}  // namespace

BetabinMStep mstep_betabin(const Dataset& data,
                           const std::vector<ChainState>& chains,
                           const Vector& beta0, double phi0,
                           const FixedCoords& fixed_beta, int max_iter) {
  if (chains.empty()) throw std::invalid_argument("mstep_betabin: no chains");
  if (beta0.size() != data.dim_z)
    throw std::invalid_argument("mstep_betabin: beta0 length mismatch");
  if (!(phi0 > 0.0))
    throw std::invalid_argument("mstep_betabin: phi0 must be > 0");
  const std::vector<Index> free_idx = free_coords(data.dim_z, fixed_beta);
  const auto records = collect_count_records(data, chains, fixed_beta, free_idx);
  if (records.empty())
    throw std::invalid_argument(
        "mstep_betabin: no positive counts, the count component is not "
        "identified");

  const double inv_m = 1.0 / static_cast<double>(chains.size());
  const Index n_free = static_cast<Index>(free_idx.size());

  // x = (free beta coordinates, ln phi); objective is the negative mean (over
  // chains) simulated count log likelihood without the binomial constant.
  const auto objective = [&](const Vector& x, Vector& grad) -> double {
    const double phi = std::exp(x(n_free));
    // Reject near-underflow phi outright: the true objective diverges there
    // anyway, and u * phi for clamped u must not underflow to zero inside
    // the gamma terms.
    if (!std::isfinite(phi) || phi < 1e-250 || phi > 1e12)
      return std::numeric_limits<double>::infinity();
    const double lg_phi = log_gamma(phi);
    const double dg_phi = digamma(phi);
    double value = 0.0;
    grad.setZero();
    for (const auto& r : records) {
      double eta = r.offset;
      for (Index k = 0; k < n_free; ++k)
        eta += x(k) * (*r.z)(free_idx[static_cast<std::size_t>(k)]);
      const double u = clamp_prob(expit(eta));
      const double a1 = r.y + u * phi;
      const double a2 = r.s - r.y + (1.0 - u) * phi;
      const double a3 = u * phi;
      const double a4 = (1.0 - u) * phi;
      value -= log_gamma(a1) + log_gamma(a2) - log_gamma(r.s + phi) -
               log_gamma(a3) - log_gamma(a4) + lg_phi;
      const double d1 = digamma(a1);
      const double d2 = digamma(a2);
      const double d3 = digamma(a3);
      const double d4 = digamma(a4);
      const double dd = d1 - d2 - d3 + d4;
      const double beta_term = u * (1.0 - u) * phi * dd;
      for (Index k = 0; k < n_free; ++k)
        grad(k) -= beta_term * (*r.z)(free_idx[static_cast<std::size_t>(k)]);
      grad(n_free) -= phi * (u * d1 + (1.0 - u) * d2 - digamma(r.s + phi) -
                             u * d3 - (1.0 - u) * d4 + dg_phi);
    }
    value *= inv_m;
    grad *= inv_m;
    return value;
  };

  Vector x0(n_free + 1);
  for (Index k = 0; k < n_free; ++k)
    x0(k) = beta0(free_idx[static_cast<std::size_t>(k)]);
  x0(n_free) = std::log(phi0);

  const OptimResult opt = bfgs_minimize(objective, std::move(x0), max_iter);
  BetabinMStep out;
  out.beta = merge_coords(data.dim_z, free_idx, opt.x.head(n_free), fixed_beta);
  out.phi = std::exp(opt.x(n_free));
  out.converged = opt.converged;
  out.iterations = opt.iterations;
  return out;
}

LogisticMStep mstep_logistic(const Dataset& data,
                             const std::vector<ChainState>& chains,
                             const Vector& alpha0,
                             const FixedCoords& fixed_alpha, int max_iter) {
  if (chains.empty()) throw std::invalid_argument("mstep_logistic: no chains");
  if (alpha0.size() != data.dim_x)
    throw std::invalid_argument("mstep_logistic: alpha0 length mismatch");
  const std::vector<Index> free_idx = free_coords(data.dim_x, fixed_alpha);
  const Index n_free = static_cast<Index>(free_idx.size());

  LogisticMStep out;
  if (n_free == 0) {
    out.alpha = merge_coords(data.dim_x, free_idx, Vector(), fixed_alpha);
    out.converged = true;
    return out;
  }

  struct ZeroRecord {
    double ind;
    double offset;
    const Vector* x;
  };
  std::vector<ZeroRecord> records;
  for (const auto& chain : chains) {
    for (std::size_t i = 0; i < data.subjects.size(); ++i) {
      const double a_i = chain.re[i].a_i;
      for (const auto& o : data.subjects[i].obs) {
        double offset = a_i;
        for (const auto& [j, v] : fixed_alpha) offset += v * o.x(j);
        records.push_back({o.y > 0 ? 1.0 : 0.0, offset, &o.x});
      }
    }
  }
  const double inv_m = 1.0 / static_cast<double>(chains.size());

  const auto evaluate = [&](const Vector& af, double ridge, double* value,
                            Vector* grad, Matrix* hess) {
    if (value) *value = 0.0;
    if (grad) grad->setZero();
    if (hess) hess->setZero();
    for (const auto& r : records) {
      double eta = r.offset;
      for (Index k = 0; k < n_free; ++k)
        eta += af(k) * (*r.x)(free_idx[static_cast<std::size_t>(k)]);
      const double p = clamp_prob(expit(eta));
      if (value)
        *value -= r.ind * std::log(p) + (1.0 - r.ind) * std::log1p(-p);
      if (grad || hess) {
        for (Index k = 0; k < n_free; ++k) {
          const double xk = (*r.x)(free_idx[static_cast<std::size_t>(k)]);
          if (grad) (*grad)(k) -= (r.ind - p) * xk;
          if (hess) {
            for (Index l = k; l < n_free; ++l)
              (*hess)(k, l) +=
                  p * (1.0 - p) * xk *
                  (*r.x)(free_idx[static_cast<std::size_t>(l)]);
          }
        }
      }
    }
    if (value) *value = *value * inv_m + 0.5 * ridge * af.squaredNorm();
    if (grad) *grad = *grad * inv_m + ridge * af;
    if (hess) {
      *hess *= inv_m;
      for (Index k = 0; k < n_free; ++k) {
        (*hess)(k, k) += ridge;
        for (Index l = 0; l < k; ++l) (*hess)(k, l) = (*hess)(l, k);
      }
    }
  };

  const auto solve = [&](double ridge, Vector af) {
    double value;
    Vector grad(n_free);
    Matrix hess(n_free, n_free);
    evaluate(af, ridge, &value, &grad, &hess);
    int it = 0;
    for (; it < max_iter; ++it) {
      if (grad.lpNorm<Eigen::Infinity>() <= 1e-8 * (1.0 + std::fabs(value))) {
        out.converged = true;
        break;
      }
      Eigen::LDLT<Matrix> ldlt(hess);
      Vector step = ldlt.info() == Eigen::Success
                        ? Vector(ldlt.solve(grad))
                        : Vector(grad / (hess.diagonal().maxCoeff() + 1e-10));
      // Backtrack until the objective improves.
      double scale = 1.0;
      for (int half = 0; half < 40; ++half) {
        Vector trial = af - scale * step;
        double trial_value;
        evaluate(trial, ridge, &trial_value, nullptr, nullptr);
        if (std::isfinite(trial_value) && trial_value <= value) {
          af = std::move(trial);
          value = trial_value;
          break;
        }
        scale *= 0.5;
      }
      evaluate(af, ridge, &value, &grad, &hess);
      if (af.lpNorm<Eigen::Infinity>() > 30.0) break;  // separation guard
    }
    out.iterations += it;
    return af;
  };

  out.converged = false;
  Vector af(n_free);
  for (Index k = 0; k < n_free; ++k)
    af(k) = alpha0(free_idx[static_cast<std::size_t>(k)]);
  af = solve(0.0, af);
  if (!out.converged || af.lpNorm<Eigen::Infinity>() > 30.0) {
    // Separation (or failure to converge unpenalized): refit with a small
    // ridge so the maximizer exists, and flag the result.
    out.ridged = true;
    out.converged = false;
    af = solve(1e-3, af.cwiseMin(30.0).cwiseMax(-30.0));
  }
  out.alpha = merge_coords(data.dim_x, free_idx, af, fixed_alpha);
  return out;
}

Theta smooth_params(const Theta& theta, const Theta& tilde, double gamma) {
  Theta next = tilde;
  next.phi = theta.phi + gamma * (tilde.phi - theta.phi);
  if (next.phi < 1e-6) next.phi = 1e-6;
  next.alpha = theta.alpha + gamma * (tilde.alpha - theta.alpha);
  next.beta = theta.beta + gamma * (tilde.beta - theta.beta);
  return next;
}

void update_conditional_moments(ConditionalMoments& moments,
                                const std::vector<ChainState>& chains,
                                double gamma) {
  if (chains.empty())
    throw std::invalid_argument("update_conditional_moments: no chains");
  const std::size_t n = chains.front().re.size();
  if (moments.mean.size() != n || moments.m2.size() != n)
    throw std::invalid_argument("update_conditional_moments: size mismatch");
  const double inv_m = 1.0 / static_cast<double>(chains.size());
  for (std::size_t i = 0; i < n; ++i) {
    Vector2 mean_i = Vector2::Zero();
    Vector2 m2_i = Vector2::Zero();
    for (const auto& chain : chains) {
      const Vector2 v = chain.re[i].vec();
      mean_i += v;
      m2_i += v.cwiseProduct(v);
    }
    moments.mean[i] += gamma * (inv_m * mean_i - moments.mean[i]);
    moments.m2[i] += gamma * (inv_m * m2_i - moments.m2[i]);
  }
}

void update_louis(LouisAccumulators& acc, const Dataset& data,
                  const Theta& theta, const std::vector<ChainState>& chains,
                  double gamma) {
  if (chains.empty()) throw std::invalid_argument("update_louis: no chains");
  const Index dim = acc.d.size();
  Vector mean_score = Vector::Zero(dim);
  Matrix mean_curv = Matrix::Zero(dim, dim);
  for (const auto& chain : chains) {
    const Vector s = complete_data_score(data, theta, chain.re);
    const Matrix h = complete_data_hessian(data, theta, chain.re);
    mean_score += s;
    mean_curv += h + s * s.transpose();
  }
  const double inv_m = 1.0 / static_cast<double>(chains.size());
  acc.d += gamma * (inv_m * mean_score - acc.d);
  acc.g += gamma * (inv_m * mean_curv - acc.g);
  acc.g = 0.5 * (acc.g + acc.g.transpose()).eval();
}

std::optional<Vector> louis_standard_errors(const LouisAccumulators& acc) {
  Matrix info = -acc.h();
  info = 0.5 * (info + info.transpose()).eval();
  if (!info.allFinite()) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<Matrix> es(info);
  if (es.info() != Eigen::Success) return std::nullopt;
  if (es.eigenvalues().minCoeff() <= 0.0) return std::nullopt;
  const Matrix cov = es.eigenvectors() *
                     es.eigenvalues().cwiseInverse().asDiagonal() *
                     es.eigenvectors().transpose();
  return Vector(cov.diagonal().cwiseSqrt());
}

Theta default_init(const Dataset& data) {
  double n_obs = 0.0;
  double n_pos = 0.0;
  double ratio_sum = 0.0;
  for (const auto& subject : data.subjects) {
    for (const auto& o : subject.obs) {
      n_obs += 1.0;
      if (o.y > 0) {
        n_pos += 1.0;
        ratio_sum += static_cast<double>(o.y) / static_cast<double>(o.s);
      }
    }
  }
  const auto squeeze = [](double v) {
    return v < 0.01 ? 0.01 : (v > 0.99 ? 0.99 : v);
  };
  Theta theta;
  theta.a = logit(squeeze(n_obs > 0 ? n_pos / n_obs : 0.5));
  theta.b = n_pos > 0 ? logit(squeeze(ratio_sum / n_pos)) : 0.0;
  theta.alpha = Vector::Zero(data.dim_x);
  theta.beta = Vector::Zero(data.dim_z);
  theta.phi = 10.0;
  theta.sigma1_sq = 0.3;
  theta.sigma2_sq = 0.3;
  return theta;
}

namespace {

double trajectory_drift(const Matrix& trajectory, int window) {
  const Index rows = trajectory.rows();
  if (rows < 2) return 0.0;
  const Index lo = std::max<Index>(1, rows - window);
  double acc = 0.0;
  for (Index q = lo; q < rows; ++q)
    acc += (trajectory.row(q) - trajectory.row(q - 1))
               .cwiseAbs()
               .maxCoeff();
  return acc / static_cast<double>(rows - lo);
}

}  // namespace

FitResult fit(const Dataset& data, const FitConfig& config) {
  data.validate();
  config.validate();

  const ThetaLayout lay{data.dim_x, data.dim_z};
  FitResult res;
  res.names = param_names(data.dim_x, data.dim_z);

  Theta theta = config.init ? *config.init : default_init(data);
  if (theta.alpha.size() != data.dim_x || theta.beta.size() != data.dim_z)
    throw std::invalid_argument("fit: init theta dimension mismatch");
  for (const auto& [j, v] : config.fixed_alpha) {
    if (j < 0 || j >= data.dim_x)
      throw std::invalid_argument("fit: fixed alpha index out of range");
    theta.alpha(j) = v;
  }
  for (const auto& [j, v] : config.fixed_beta) {
    if (j < 0 || j >= data.dim_z)
      throw std::invalid_argument("fit: fixed beta index out of range");
    theta.beta(j) = v;
  }
  theta.validate();

  const Index n = data.n_subjects();
  Matrix2 omega0 = Matrix2::Zero();
  omega0(0, 0) = 0.5 * theta.sigma1_sq;
  omega0(1, 1) = 0.5 * theta.sigma2_sq;

  std::vector<ChainState> chains;
  chains.reserve(static_cast<std::size_t>(config.chains));
  for (int c = 0; c < config.chains; ++c)
    chains.push_back(
        init_chain(data, theta, config.mode, config.seed, c, omega0));

  SufficientStats stats;
  res.moments.mean.assign(static_cast<std::size_t>(n), Vector2::Zero());
  res.moments.m2.assign(static_cast<std::size_t>(n), Vector2::Zero());
  LouisAccumulators louis(lay.size());

  const int total = config.steps.total();
  res.trajectory = Matrix::Zero(total, lay.size());

  int q = 1;
  try {
    for (; q <= total; ++q) {
      const double gamma = config.steps.gamma(q);
      const PreparedData prep = prepare_data(data, theta);
      parallel_for(static_cast<Index>(chains.size()), config.threads,
                   [&](Index c) {
                     auto& chain = chains[static_cast<std::size_t>(c)];
                     refresh_cache(prep, chain, config.mode);
                     mh_sweep(prep, chain, config.mode, config.kernels);
                   });
      for (auto& chain : chains)
        adapt_omega(chain, config.target_accept, gamma);

      sa_update_stats(stats, chains, gamma);
      if (config.moments_phase == MomentsPhase::kAll || q > config.steps.k1)
        update_conditional_moments(res.moments, chains, gamma);

      const BetabinMStep bb =
          mstep_betabin(data, chains, theta.beta, theta.phi,
                        config.fixed_beta, config.max_mstep_iter);
      const LogisticMStep lg =
          mstep_logistic(data, chains, theta.alpha, config.fixed_alpha);
      const GaussianMStep gauss = mstep_gaussian(stats, n);
      if (!bb.converged || !lg.converged) ++res.diag.mstep_nonconverged;
      if (lg.ridged) ++res.diag.logistic_ridged_iters;

      Theta tilde = theta;
      tilde.phi = bb.phi;
      tilde.beta = bb.beta;
      tilde.alpha = lg.alpha;
      tilde.a = gauss.mu(0);
      tilde.b = gauss.mu(1);
      tilde.sigma1_sq = gauss.g_diag(0);
      tilde.sigma2_sq = gauss.g_diag(1);
      theta = smooth_params(theta, tilde, gamma);

      const Vector packed = pack_theta(theta);
      if (!packed.allFinite())
        throw std::runtime_error("fit: non-finite parameter at iteration " +
                                 std::to_string(q));
      res.trajectory.row(q - 1) = packed.transpose();

      if (config.se_method == SeMethod::kLouis)
        update_louis(louis, data, theta, chains, gamma);
    }

    res.theta = theta;
    long p1 = 0, a1 = 0, p2 = 0, a2 = 0, p3 = 0, a3 = 0;
    for (const auto& chain : chains) {
      p1 += chain.kern1.proposed;
      a1 += chain.kern1.accepted;
      p2 += chain.kern2.proposed;
      a2 += chain.kern2.accepted;
      p3 += chain.kern3.proposed;
      a3 += chain.kern3.accepted;
    }
    res.diag.accept_kern1 = p1 > 0 ? static_cast<double>(a1) / p1 : 0.0;
    res.diag.accept_kern2 = p2 > 0 ? static_cast<double>(a2) / p2 : 0.0;
    res.diag.accept_kern3 = p3 > 0 ? static_cast<double>(a3) / p3 : 0.0;
    res.diag.final_drift = trajectory_drift(res.trajectory, 50);

    if (config.se_method == SeMethod::kLouis) {
      res.se = louis_standard_errors(louis);
      res.diag.se_available = res.se.has_value();
    }

    RngStream is_stream(config.seed,
                        1 + static_cast<std::uint64_t>(config.chains) *
                                static_cast<std::uint64_t>(n));
    const LoglikEstimate ll = loglik_importance(
        data, theta, res.moments, config.is, is_stream, config.threads);
    res.loglik = ll.value;
    res.loglik_mc_se = ll.mc_se;
    res.ok = true;
  } catch (const std::exception& e) {
    res.theta = theta;
    res.error = e.what();
    res.ok = false;
    if (q <= total) {
      const Matrix partial = res.trajectory.topRows(q - 1);
      res.trajectory = partial;
    }
  }
  return res;
}

}  // namespace zibbmr
