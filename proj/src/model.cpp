#include "zibbmr/model.hpp"

#include <cmath>
#include <stdexcept>

#include "zibbmr/special_functions.hpp"

namespace zibbmr {

Index Dataset::n_obs() const {
  Index n = 0;
  for (const auto& subject : subjects) n += static_cast<Index>(subject.obs.size());
  return n;
}

void Dataset::validate() const {
  if (subjects.empty()) throw std::invalid_argument("dataset: no subjects");
  for (const auto& subject : subjects) {
    if (subject.obs.empty())
      throw std::invalid_argument("dataset: subject " + subject.id +
                                  " has no observations");
    for (const auto& o : subject.obs) {
      if (o.s < 1)
        throw std::invalid_argument("dataset: subject " + subject.id +
                                    " has s < 1");
      if (o.y < 0 || o.y > o.s)
        throw std::invalid_argument("dataset: subject " + subject.id +
                                    " has y outside [0, s]");
      if (o.x.size() != dim_x || o.z.size() != dim_z)
        throw std::invalid_argument("dataset: subject " + subject.id +
                                    " has covariate length mismatch");
    }
  }
}

void Theta::validate() const {
  const bool finite = std::isfinite(phi) && std::isfinite(a) &&
                      std::isfinite(b) && alpha.allFinite() &&
                      beta.allFinite() && std::isfinite(sigma1_sq) &&
                      std::isfinite(sigma2_sq);
  if (!finite) throw std::invalid_argument("theta: non-finite component");
  if (!(phi > 0.0)) throw std::invalid_argument("theta: phi must be > 0");
  if (!(sigma1_sq > 0.0) || !(sigma2_sq > 0.0))
    throw std::invalid_argument("theta: variances must be > 0");
}

std::vector<std::string> param_names(Index dim_x, Index dim_z) {
  std::vector<std::string> names = {"phi", "a", "b"};
  for (Index j = 0; j < dim_x; ++j)
    names.push_back("alpha_" + std::to_string(j + 1));
  for (Index j = 0; j < dim_z; ++j)
    names.push_back("beta_" + std::to_string(j + 1));
  names.push_back("sigma1_sq");
  names.push_back("sigma2_sq");
  return names;
}

Vector pack_theta(const Theta& theta) {
  const ThetaLayout lay{theta.alpha.size(), theta.beta.size()};
  Vector v(lay.size());
  v(ThetaLayout::kPhi) = theta.phi;
  v(ThetaLayout::kA) = theta.a;
  v(ThetaLayout::kB) = theta.b;
  for (Index j = 0; j < lay.dim_x; ++j) v(lay.alpha(j)) = theta.alpha(j);
  for (Index j = 0; j < lay.dim_z; ++j) v(lay.beta(j)) = theta.beta(j);
  v(lay.sigma1_sq()) = theta.sigma1_sq;
  v(lay.sigma2_sq()) = theta.sigma2_sq;
  return v;
}

Theta unpack_theta(const Vector& packed, Index dim_x, Index dim_z) {
  const ThetaLayout lay{dim_x, dim_z};
  if (packed.size() != lay.size())
    throw std::invalid_argument("unpack_theta: length mismatch");
  Theta theta;
  theta.phi = packed(ThetaLayout::kPhi);
  theta.a = packed(ThetaLayout::kA);
  theta.b = packed(ThetaLayout::kB);
  theta.alpha = packed.segment(3, dim_x);
  theta.beta = packed.segment(3 + dim_x, dim_z);
  theta.sigma1_sq = packed(lay.sigma1_sq());
  theta.sigma2_sq = packed(lay.sigma2_sq());
  return theta;
}

LinearPredictors linear_predictors(const Theta& theta, const RandomEffect& re,
                                   const Vector& x, const Vector& z) {
  return {re.a_i + theta.alpha.dot(x), re.b_i + theta.beta.dot(z)};
}

double betabin_log_pmf(std::int64_t y, std::int64_t s, double u, double phi) {
  if (s < 1) throw std::domain_error("betabin_log_pmf: s must be >= 1");
  if (y < 0 || y > s)
    throw std::domain_error("betabin_log_pmf: y outside [0, s]");
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("betabin_log_pmf: u outside (0, 1)");
  if (!(phi > 0.0)) throw std::domain_error("betabin_log_pmf: phi must be > 0");
  const double yd = static_cast<double>(y);
  const double sd = static_cast<double>(s);
  return log_binom_coef(sd, yd) +
         log_beta(yd + u * phi, sd - yd + (1.0 - u) * phi) -
         log_beta(u * phi, (1.0 - u) * phi);
}

MeanVar betabin_mean_var(std::int64_t s, double u, double phi) {
  if (s < 1) throw std::domain_error("betabin_mean_var: s must be >= 1");
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("betabin_mean_var: u outside (0, 1)");
  if (!(phi > 0.0))
    throw std::domain_error("betabin_mean_var: phi must be > 0");
  const double sd = static_cast<double>(s);
  const double mean = sd * u;
  const double var = sd * u * (1.0 - u) * (1.0 + (sd - 1.0) / (phi + 1.0));
  return {mean, var};
}

double mixture_log_density(std::int64_t y, std::int64_t s, double p, double u,
                           double phi) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("mixture_log_density: p outside (0, 1)");
  if (y == 0) return std::log1p(-p);
  return std::log(p) + betabin_log_pmf(y, s, u, phi);
}

double conditional_loglik(const Theta& theta, const Subject& subject,
                          const RandomEffect& re) {
  double total = 0.0;
  for (const auto& o : subject.obs) {
    const auto lp = linear_predictors(theta, re, o.x, o.z);
    const double p = clamp_prob(expit(lp.eta_p));
    const double u = clamp_prob(expit(lp.eta_u));
    total += mixture_log_density(o.y, o.s, p, u, theta.phi);
  }
  return total;
}

namespace {

double gaussian_log_density(const RandomEffect& re, const Theta& theta) {
  const double da = re.a_i - theta.a;
  const double db = re.b_i - theta.b;
  return -kLn2Pi - 0.5 * std::log(theta.sigma1_sq) -
         0.5 * std::log(theta.sigma2_sq) - 0.5 * da * da / theta.sigma1_sq -
         0.5 * db * db / theta.sigma2_sq;
}

}  // namespace

double complete_data_loglik(const Dataset& data, const Theta& theta,
                            const std::vector<RandomEffect>& re) {
  if (re.size() != data.subjects.size())
    throw std::invalid_argument("complete_data_loglik: one effect per subject");
  double total = 0.0;
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    total += gaussian_log_density(re[i], theta);
    total += conditional_loglik(theta, data.subjects[i], re[i]);
  }
  return total;
}

Vector complete_data_score(const Dataset& data, const Theta& theta,
                           const std::vector<RandomEffect>& re) {
  if (re.size() != data.subjects.size())
    throw std::invalid_argument("complete_data_score: one effect per subject");
  const ThetaLayout lay{data.dim_x, data.dim_z};
  Vector score = Vector::Zero(lay.size());
  const double phi = theta.phi;
  const double s1 = theta.sigma1_sq;
  const double s2 = theta.sigma2_sq;

  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const double da = re[i].a_i - theta.a;
    const double db = re[i].b_i - theta.b;
    score(ThetaLayout::kA) += da / s1;
    score(ThetaLayout::kB) += db / s2;
    score(lay.sigma1_sq()) += -0.5 / s1 + 0.5 * da * da / (s1 * s1);
    score(lay.sigma2_sq()) += -0.5 / s2 + 0.5 * db * db / (s2 * s2);

    for (const auto& o : data.subjects[i].obs) {
      const auto lp = linear_predictors(theta, re[i], o.x, o.z);
      const double p = clamp_prob(expit(lp.eta_p));
      const double ind = o.y > 0 ? 1.0 : 0.0;
      score.segment(3, lay.dim_x) += (ind - p) * o.x;
      if (o.y == 0) continue;

      const double u = clamp_prob(expit(lp.eta_u));
      const double yd = static_cast<double>(o.y);
      const double sd = static_cast<double>(o.s);
      const double d1 = digamma(yd + u * phi);
      const double d2 = digamma(sd - yd + (1.0 - u) * phi);
      const double d3 = digamma(u * phi);
      const double d4 = digamma((1.0 - u) * phi);
      // d/du of the count log density, divided by phi.
      const double dd = d1 - d2 - d3 + d4;
      score.segment(3 + lay.dim_x, lay.dim_z) +=
          (u * (1.0 - u) * phi * dd) * o.z;
      score(ThetaLayout::kPhi) += u * d1 + (1.0 - u) * d2 -
                                  digamma(sd + phi) - u * d3 -
                                  (1.0 - u) * d4 + digamma(phi);
    }
  }
  return score;
}

Matrix complete_data_hessian(const Dataset& data, const Theta& theta,
                             const std::vector<RandomEffect>& re) {
  if (re.size() != data.subjects.size())
    throw std::invalid_argument("complete_data_hessian: one effect per subject");
  const ThetaLayout lay{data.dim_x, data.dim_z};
  Matrix hess = Matrix::Zero(lay.size(), lay.size());
  const double phi = theta.phi;
  const double s1 = theta.sigma1_sq;
  const double s2 = theta.sigma2_sq;
  const double n = static_cast<double>(data.subjects.size());

  hess(ThetaLayout::kA, ThetaLayout::kA) = -n / s1;
  hess(ThetaLayout::kB, ThetaLayout::kB) = -n / s2;
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const double da = re[i].a_i - theta.a;
    const double db = re[i].b_i - theta.b;
    hess(ThetaLayout::kA, lay.sigma1_sq()) += -da / (s1 * s1);
    hess(ThetaLayout::kB, lay.sigma2_sq()) += -db / (s2 * s2);
    hess(lay.sigma1_sq(), lay.sigma1_sq()) +=
        0.5 / (s1 * s1) - da * da / (s1 * s1 * s1);
    hess(lay.sigma2_sq(), lay.sigma2_sq()) +=
        0.5 / (s2 * s2) - db * db / (s2 * s2 * s2);

    for (const auto& o : data.subjects[i].obs) {
      const auto lp = linear_predictors(theta, re[i], o.x, o.z);
      const double p = clamp_prob(expit(lp.eta_p));
      hess.block(3, 3, lay.dim_x, lay.dim_x) -=
          (p * (1.0 - p)) * (o.x * o.x.transpose());
      if (o.y == 0) continue;

      const double u = clamp_prob(expit(lp.eta_u));
      const double yd = static_cast<double>(o.y);
      const double sd = static_cast<double>(o.s);
      const double d1 = digamma(yd + u * phi);
      const double d2 = digamma(sd - yd + (1.0 - u) * phi);
      const double d3 = digamma(u * phi);
      const double d4 = digamma((1.0 - u) * phi);
      const double t1 = trigamma(yd + u * phi);
      const double t2 = trigamma(sd - yd + (1.0 - u) * phi);
      const double t3 = trigamma(u * phi);
      const double t4 = trigamma((1.0 - u) * phi);
      const double dd = d1 - d2 - d3 + d4;            // (d/du log f) / phi
      const double ee = t1 + t2 - t3 - t4;            // (d dd / du) / phi
      const double ff = u * t1 - (1.0 - u) * t2 - u * t3 + (1.0 - u) * t4;
      const double up = u * (1.0 - u);

      hess.block(3 + lay.dim_x, 3 + lay.dim_x, lay.dim_z, lay.dim_z) +=
          (up * phi * ((1.0 - 2.0 * u) * dd + up * phi * ee)) *
          (o.z * o.z.transpose());
      const Vector phi_beta = (up * (dd + phi * ff)) * o.z;
      for (Index j = 0; j < lay.dim_z; ++j) {
        hess(ThetaLayout::kPhi, lay.beta(j)) += phi_beta(j);
      }
      hess(ThetaLayout::kPhi, ThetaLayout::kPhi) +=
          u * u * t1 + (1.0 - u) * (1.0 - u) * t2 - trigamma(sd + phi) -
          u * u * t3 - (1.0 - u) * (1.0 - u) * t4 + trigamma(phi);
    }
  }
  // Mirror the strictly upper entries filled above.
  Matrix sym = hess.selfadjointView<Eigen::Upper>();
  return sym;
}

}  // namespace zibbmr
