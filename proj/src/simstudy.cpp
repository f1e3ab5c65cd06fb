#include "zibbmr/simstudy.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "zibbmr/inference.hpp"
#include "zibbmr/parallel.hpp"
#include "zibbmr/special_functions.hpp"

namespace zibbmr {

void SettingSpec::validate() const {
  if (n_subjects < 1)
    throw std::invalid_argument("setting: n_subjects must be >= 1");
  if (t_per_subject < 1)
    throw std::invalid_argument("setting: t_per_subject must be >= 1");
  if (s_lo < 1 || s_hi < s_lo)
    throw std::invalid_argument("setting: trial-count range is empty");
  if (phi_law.random && !(phi_law.lo > 0.0 && phi_law.hi >= phi_law.lo))
    throw std::invalid_argument("setting: invalid dispersion law bounds");
  if (!phi_law.random && !(phi_law.value > 0.0))
    throw std::invalid_argument("setting: fixed dispersion must be > 0");
  const Index want = plan == CovariatePlan::kBinaryHalf ? 1 : 2;
  if (theta_true.alpha.size() != want || theta_true.beta.size() != want ||
      init.alpha.size() != want || init.beta.size() != want)
    throw std::invalid_argument(
        "setting: covariate plan and coefficient dimensions disagree");
  if (plan == CovariatePlan::kBinaryHalfPlusNormal && !(cov_sd > 0.0))
    throw std::invalid_argument("setting: cov_sd must be > 0");
  theta_true.validate();
  init.validate();
  if (default_chains < 1)
    throw std::invalid_argument("setting: default_chains must be >= 1");
}

namespace {

Theta make_theta(double phi, double a, double b, std::vector<double> alpha,
                 std::vector<double> beta, double sigma1, double sigma2) {
  Theta t;
  t.phi = phi;
  t.a = a;
  t.b = b;
  t.alpha = Eigen::Map<const Vector>(alpha.data(),
                                     static_cast<Index>(alpha.size()));
  t.beta =
      Eigen::Map<const Vector>(beta.data(), static_cast<Index>(beta.size()));
  // The study protocol states variance components as standard deviations.
  t.sigma1_sq = sigma1 * sigma1;
  t.sigma2_sq = sigma2 * sigma2;
  return t;
}

}  // namespace

SettingSpec builtin_setting(int id) {
  SettingSpec spec;
  spec.id = id;
  switch (id) {
    case 1:
      spec.theta_true = make_theta(6.4, -0.5, -0.5, {0.5}, {0.5}, 0.7, 0.5);
      spec.plan = CovariatePlan::kBinaryHalf;
      spec.phi_law = PhiLaw::fixed(6.4);
      spec.init = make_theta(18.0, -0.3, 0.2, {0.8}, {0.1}, 0.48, 0.72);
      break;
    case 2:
      spec.theta_true = make_theta(10.4, -0.5, 0.5, {0.5}, {-0.5}, 1.4, 0.8);
      spec.plan = CovariatePlan::kBinaryHalf;
      spec.phi_law = PhiLaw::fixed(10.4);
      spec.init = make_theta(18.0, -0.3, 0.2, {0.8}, {0.1}, 0.48, 0.72);
      break;
    case 3:
      spec.theta_true = make_theta(12.3, -1.8, -0.9, {0.8, -0.7}, {0.6, -0.9},
                                   1.35, 1.28);
      spec.plan = CovariatePlan::kBinaryHalfPlusNormal;
      spec.cov_mean = 2.0;
      spec.cov_sd = 1.0;
      spec.phi_law = PhiLaw::fixed(12.3);
      spec.init = make_theta(6.0, 0.4, -0.7, {0.3, -0.2}, {0.2, 0.1}, 0.28,
                             0.61);
      break;
    case 4:
      // Dispersion is redrawn per dataset; theta_true.phi holds the center.
      spec.theta_true =
          make_theta(6.0, 0.5, -0.5, {0.0, -0.5}, {0.0, 0.5}, 0.7, 0.5);
      spec.plan = CovariatePlan::kBinaryHalfPlusNormal;
      spec.cov_mean = 1.0;
      spec.cov_sd = 1.0;
      spec.phi_law = PhiLaw::uniform(2.0, 10.0);
      spec.init = make_theta(6.0, 0.4, -0.7, {0.3, -0.2}, {0.2, 0.1}, 0.28,
                             0.61);
      spec.default_chains = 10;
      break;
    default:
      throw std::invalid_argument("builtin_setting: id must be 1..4");
  }
  return spec;
}

GeneratedData generate_dataset(const SettingSpec& spec, RngStream& rng) {
  spec.validate();
  GeneratedData out;
  out.truth = spec.theta_true;
  if (spec.phi_law.random)
    out.truth.phi =
        spec.phi_law.lo + (spec.phi_law.hi - spec.phi_law.lo) * rng.uniform01();

  const Index n = spec.n_subjects;
  const Index dim = spec.theta_true.alpha.size();
  out.data.dim_x = dim;
  out.data.dim_z = dim;
  out.data.subjects.reserve(static_cast<std::size_t>(n));

  const Vector2 mu = spec.theta_true.mu();
  Matrix2 g = Matrix2::Zero();
  g(0, 0) = spec.theta_true.sigma1_sq;
  g(1, 1) = spec.theta_true.sigma2_sq;

  for (Index i = 0; i < n; ++i) {
    Subject subject;
    subject.id = "s" + std::to_string(i + 1);
    subject.obs.reserve(static_cast<std::size_t>(spec.t_per_subject));
    const Vector2 re = sample_normal(rng, mu, g);
    const double binary = i < n / 2 ? 0.0 : 1.0;
    for (int t = 1; t <= spec.t_per_subject; ++t) {
      Observation o;
      o.x = Vector(dim);
      o.x(0) = binary;
      if (dim == 2)
        o.x(1) = sample_normal(rng, spec.cov_mean, spec.cov_sd);
      o.z = o.x;
      o.s = sample_uniform_int(rng, spec.s_lo, spec.s_hi);
      const double p = expit(re(0) + spec.theta_true.alpha.dot(o.x));
      const double u = expit(re(1) + spec.theta_true.beta.dot(o.z));
      if (rng.uniform01() < 1.0 - p) {
        o.y = 0;
      } else {
        const double w =
            sample_beta(rng, u * out.truth.phi, (1.0 - u) * out.truth.phi);
        std::int64_t y = 0;
        for (std::int64_t j = 0; j < o.s; ++j)
          if (rng.uniform01() < w) ++y;
        o.y = y;
      }
      subject.obs.push_back(std::move(o));
    }
    out.data.subjects.push_back(std::move(subject));
  }
  out.data.validate();
  return out;
}

namespace {

// Packed parameter values with variance components mapped to the standard
// deviation scale, matching how study tables report them.
Vector report_scale(const Theta& theta) {
  Vector v = pack_theta(theta);
  const Index d = v.size();
  v(d - 2) = std::sqrt(v(d - 2));
  v(d - 1) = std::sqrt(v(d - 1));
  return v;
}

std::vector<std::string> report_names(Index dim_x, Index dim_z) {
  std::vector<std::string> names = param_names(dim_x, dim_z);
  names[names.size() - 2] = "sigma1";
  names[names.size() - 1] = "sigma2";
  return names;
}

}  // namespace

std::vector<MetricRow> compute_metrics(const std::vector<Theta>& estimates,
                                       const std::vector<Theta>& truths) {
  if (estimates.empty())
    throw std::invalid_argument("compute_metrics: no estimates");
  if (estimates.size() != truths.size())
    throw std::invalid_argument("compute_metrics: estimate/truth mismatch");
  const Index dim_x = estimates.front().alpha.size();
  const Index dim_z = estimates.front().beta.size();
  const auto names = report_names(dim_x, dim_z);
  const Index dim = static_cast<Index>(names.size());
  const double r = static_cast<double>(estimates.size());

  Vector bias = Vector::Zero(dim);
  Vector mse = Vector::Zero(dim);
  Vector mae = Vector::Zero(dim);
  Vector true_mean = Vector::Zero(dim);
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    const Vector dev = report_scale(estimates[k]) - report_scale(truths[k]);
    bias += dev;
    mse += dev.cwiseProduct(dev);
    mae += dev.cwiseAbs();
    true_mean += report_scale(truths[k]);
  }
  bias /= r;
  mse /= r;
  mae /= r;
  true_mean /= r;

  std::vector<MetricRow> rows;
  rows.reserve(static_cast<std::size_t>(dim));
  for (Index j = 0; j < dim; ++j) {
    MetricRow row;
    row.parameter = names[static_cast<std::size_t>(j)];
    row.true_value = true_mean(j);
    row.bias = bias(j);
    row.rmse = std::sqrt(mse(j));
    row.mae = mae(j);
    row.n_replicates = static_cast<int>(estimates.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<MetricRow> compute_metrics(const std::vector<Theta>& estimates,
                                       const Theta& theta_true) {
  return compute_metrics(estimates,
                         std::vector<Theta>(estimates.size(), theta_true));
}

ReplicationResult run_replications(const SettingSpec& spec,
                                   const FitConfig& base, int n_reps,
                                   std::uint64_t seed, int parallelism) {
  spec.validate();
  if (n_reps < 1)
    throw std::invalid_argument("run_replications: n_reps must be >= 1");

  ReplicationResult out;
  out.n_reps = n_reps;
  out.records.resize(static_cast<std::size_t>(n_reps));
  parallel_for(static_cast<Index>(n_reps), parallelism, [&](Index r) {
    RepRecord& rec = out.records[static_cast<std::size_t>(r)];
    rec.rep = static_cast<int>(r);
    try {
      RngStream data_stream(seed, 2 * static_cast<std::uint64_t>(r));
      const GeneratedData gen = generate_dataset(spec, data_stream);
      rec.truth = gen.truth;
      FitConfig cfg = base;
      cfg.seed = detail::mix64(seed, 2 * static_cast<std::uint64_t>(r) + 1);
      cfg.threads = 1;
      if (!cfg.init) cfg.init = spec.init;
      const FitResult fr = fit(gen.data, cfg);
      if (!fr.ok) {
        rec.error = fr.error;
        return;
      }
      rec.ok = true;
      rec.estimate = fr.theta;
      rec.se = fr.se;
      rec.loglik = fr.loglik;
      rec.loglik_mc_se = fr.loglik_mc_se;
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
  });

  std::vector<Theta> estimates;
  std::vector<Theta> truths;
  std::string first_error;
  for (const auto& rec : out.records) {
    if (rec.ok) {
      estimates.push_back(rec.estimate);
      truths.push_back(rec.truth);
    } else {
      ++out.n_fail;
      if (first_error.empty()) first_error = rec.error;
    }
  }
  if (2 * out.n_fail > out.n_reps)
    throw std::runtime_error(
        "run_replications: " + std::to_string(out.n_fail) + " of " +
        std::to_string(out.n_reps) +
        " replicates failed; first failure: " + first_error);
  if (!estimates.empty()) out.metrics = compute_metrics(estimates, truths);
  return out;
}

Type1Result type1_study(const SettingSpec& spec, const FitConfig& base,
                        int n_reps, std::uint64_t seed, int parallelism,
                        std::vector<double> levels) {
  spec.validate();
  if (n_reps < 1)
    throw std::invalid_argument("type1_study: n_reps must be >= 1");
  if (spec.theta_true.alpha.size() < 2 ||
      spec.theta_true.alpha(0) != 0.0 || spec.theta_true.beta(0) != 0.0)
    throw std::invalid_argument(
        "type1_study: design must have a truly-zero first slope in both "
        "predictors");

  Type1Result out;
  out.n_reps = n_reps;
  out.records.resize(static_cast<std::size_t>(n_reps));
  parallel_for(static_cast<Index>(n_reps), parallelism, [&](Index r) {
    Type1Record& rec = out.records[static_cast<std::size_t>(r)];
    rec.rep = static_cast<int>(r);
    try {
      RngStream data_stream(seed, 2 * static_cast<std::uint64_t>(r));
      const GeneratedData gen = generate_dataset(spec, data_stream);

      FitConfig full = base;
      full.seed = detail::mix64(seed, 2 * static_cast<std::uint64_t>(r) + 1);
      full.threads = 1;
      full.se_method = SeMethod::kLouis;
      if (!full.init) full.init = spec.init;
      const FitResult fr = fit(gen.data, full);
      if (!fr.ok) {
        rec.error = "full fit: " + fr.error;
        return;
      }
      if (!fr.se) {
        rec.error = "full fit: standard errors unavailable";
        return;
      }

      FitConfig reduced = full;
      reduced.se_method = SeMethod::kNone;
      reduced.fixed_alpha = {{0, 0.0}};
      reduced.fixed_beta = {{0, 0.0}};
      const FitResult rr = fit(gen.data, reduced);
      if (!rr.ok) {
        rec.error = "reduced fit: " + rr.error;
        return;
      }

      const ThetaLayout lay{gen.data.dim_x, gen.data.dim_z};
      rec.est_alpha1 = fr.theta.alpha(0);
      rec.se_alpha1 = (*fr.se)(lay.alpha(0));
      rec.est_beta1 = fr.theta.beta(0);
      rec.se_beta1 = (*fr.se)(lay.beta(0));
      rec.p_wald_alpha1 = wald_test(rec.est_alpha1, rec.se_alpha1).p_value;
      rec.p_wald_beta1 = wald_test(rec.est_beta1, rec.se_beta1).p_value;
      const double mc = std::hypot(fr.loglik_mc_se, rr.loglik_mc_se);
      const TestResult lr = lrt_test(fr.loglik, rr.loglik, 2, mc);
      rec.lrt_stat = lr.statistic;
      rec.p_lrt = lr.p_value;
      rec.lrt_noise_warning = lr.noise_warning;
      rec.ok = true;
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
  });

  int n_ok = 0;
  std::string first_error;
  for (const auto& rec : out.records) {
    if (rec.ok) {
      ++n_ok;
    } else {
      ++out.n_fail;
      if (first_error.empty()) first_error = rec.error;
    }
  }
  if (2 * out.n_fail > out.n_reps)
    throw std::runtime_error("type1_study: " + std::to_string(out.n_fail) +
                             " of " + std::to_string(out.n_reps) +
                             " replicates failed; first failure: " +
                             first_error);

  for (const double level : levels) {
    Type1Rates row;
    row.level = level;
    if (n_ok > 0) {
      int ra = 0, rb = 0, rl = 0;
      for (const auto& rec : out.records) {
        if (!rec.ok) continue;
        if (rec.p_wald_alpha1 < level) ++ra;
        if (rec.p_wald_beta1 < level) ++rb;
        if (rec.p_lrt < level) ++rl;
      }
      row.wald_alpha1 = static_cast<double>(ra) / n_ok;
      row.wald_beta1 = static_cast<double>(rb) / n_ok;
      row.lrt_joint = static_cast<double>(rl) / n_ok;
    }
    out.rates.push_back(row);
  }
  return out;
}

}  // namespace zibbmr
