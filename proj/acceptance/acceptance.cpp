// Release gate: ten numbered criteria, each checked against the tolerances
// pinned in this file and reported as one [PASS]/[FAIL] line (indented lines
// carry per-case detail).  Usage:
//
//   zibbmr_acceptance [--criteria 1,2,10]
//
// Default is all ten.  Exit status is the number of failed criteria; 64
// signals a usage error.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "zibbmr/io.hpp"
#include "zibbmr/likelihood.hpp"
#include "zibbmr/model.hpp"
#include "zibbmr/rng.hpp"
#include "zibbmr/saem.hpp"
#include "zibbmr/sampler.hpp"
#include "zibbmr/simstudy.hpp"
#include "zibbmr/special_functions.hpp"

namespace {

using namespace zibbmr;

struct Outcome {
  bool pass = false;
  std::string summary;
  std::vector<std::string> lines;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5g", v);
  return buf;
}

int hw_threads() {
  const unsigned h = std::thread::hardware_concurrency();
  return h == 0 ? 1 : static_cast<int>(std::min(h, 8u));
}

// Oracles below stick to <cmath> so they share no code with the library
// implementations they check.
double std_log1pexp(double v) {
  return v > 500.0 ? v : std::log1p(std::exp(v));
}

double std_lbeta(double p, double q) {
  return std::lgamma(p) + std::lgamma(q) - std::lgamma(p + q);
}

double std_lbinom(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
         std::lgamma(n - k + 1.0);
}

double cl(double p) {
  return std::min(std::max(p, 1e-12), 1.0 - 1e-12);
}

double std_expit(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// ---- criterion 1: pmf normalization ------------------------------------

Outcome criterion_pmf_normalization() {
  RngStream rng(9001, 1);
  double worst = 0.0;
  for (int c = 0; c < 200; ++c) {
    const std::int64_t s = sample_uniform_int(rng, 1, 50);
    const double u = 0.01 + 0.98 * rng.uniform01();
    const double phi = 0.1 * std::pow(1000.0, rng.uniform01());
    double total = 0.0;
    for (std::int64_t y = 0; y <= s; ++y)
      total += std::exp(betabin_log_pmf(y, s, u, phi));
    worst = std::max(worst, std::fabs(total - 1.0));
  }
  Outcome out;
  out.pass = worst <= 1e-10;
  out.summary = "max |sum - 1| = " + sci(worst) + " over 200 draws (tol 1e-10)";
  return out;
}

// ---- criterion 2: pmf equals the binomial-beta integral -----------------

// Double-exponential quadrature of  C(s,y) w^y (1-w)^(s-y)
// Beta(w; u phi, (1-u) phi)  over (0, 1); the tanh-sinh substitution
// w = expit(pi sinh t) absorbs the integrable endpoint singularities.
double binomial_beta_integral(std::int64_t y, std::int64_t s, double u,
                              double phi) {
  const double c1 = static_cast<double>(y) + u * phi;
  const double c2 = static_cast<double>(s - y) + (1.0 - u) * phi;
  const double lconst = std_lbinom(static_cast<double>(s),
                                   static_cast<double>(y)) -
                        std_lbeta(u * phi, (1.0 - u) * phi);
  const double h = 0.01;
  const int n = 1361;  // t in [-6.8, 6.8]
  double acc = 0.0;
  for (int j = 0; j < n; ++j) {
    const double t = -6.8 + h * j;
    const double g = 0.5 * std::numbers::pi * std::sinh(t);
    const double lnw = -std_log1pexp(-2.0 * g);
    const double ln1mw = -std_log1pexp(2.0 * g);
    const double lncosh =
        std::fabs(t) + std::log1p(std::exp(-2.0 * std::fabs(t))) -
        std::numbers::ln2;
    const double le = lconst + (c1 - 1.0) * lnw + (c2 - 1.0) * ln1mw + lnw +
                      ln1mw + std::log(std::numbers::pi) + lncosh;
    acc += std::exp(le);
  }
  return acc * h;
}

Outcome criterion_hierarchical_equivalence() {
  RngStream rng(9002, 1);
  double worst = 0.0;
  for (int c = 0; c < 50; ++c) {
    const std::int64_t s = sample_uniform_int(rng, 1, 40);
    const std::int64_t y = sample_uniform_int(rng, 0, s);
    const double u = 0.05 + 0.90 * rng.uniform01();
    const double phi = 0.5 * std::pow(100.0, rng.uniform01());
    const double pmf = std::exp(betabin_log_pmf(y, s, u, phi));
    const double oracle = binomial_beta_integral(y, s, u, phi);
    double err = std::fabs(pmf - oracle);
    if (oracle > 1e-6) err /= oracle;
    worst = std::max(worst, err);
  }
  Outcome out;
  out.pass = worst <= 1e-8;
  out.summary =
      "max pmf vs integral error = " + sci(worst) + " over 50 cases (tol 1e-8)";
  return out;
}

// ---- criterion 3: acceptance ratios vs direct density differences -------

// Subject-level target rebuilt from scratch: zero-indicator mass for every
// observation plus either the beta-binomial mass (original) or the beta
// density of the carried latents (augmented) for the positive counts.
double oracle_target(const Theta& theta, const Subject& subject,
                     const std::vector<double>& w, const RandomEffect& re,
                     Mode mode) {
  double total = 0.0;
  for (std::size_t t = 0; t < subject.obs.size(); ++t) {
    const Observation& o = subject.obs[t];
    double xa = 0.0, zb = 0.0;
    for (Index k = 0; k < o.x.size(); ++k) xa += o.x(k) * theta.alpha(k);
    for (Index k = 0; k < o.z.size(); ++k) zb += o.z(k) * theta.beta(k);
    const double p = cl(std_expit(re.a_i + xa));
    if (o.y == 0) {
      total += std::log(1.0 - p);
      continue;
    }
    total += std::log(p);
    const double u = cl(std_expit(re.b_i + zb));
    const double c1 = u * theta.phi;
    const double c2 = (1.0 - u) * theta.phi;
    if (mode == Mode::kOriginal) {
      const double yd = static_cast<double>(o.y);
      const double sd = static_cast<double>(o.s);
      total += std_lbinom(sd, yd) + std_lbeta(yd + c1, sd - yd + c2) -
               std_lbeta(c1, c2);
    } else {
      total += (c1 - 1.0) * std::log(w[t]) + (c2 - 1.0) * std::log1p(-w[t]) -
               std_lbeta(c1, c2);
    }
  }
  return total;
}

double oracle_prior(const Theta& theta, const RandomEffect& re) {
  const double da = re.a_i - theta.a;
  const double db = re.b_i - theta.b;
  return -std::log(2.0 * std::numbers::pi) -
         0.5 * std::log(theta.sigma1_sq * theta.sigma2_sq) -
         0.5 * (da * da / theta.sigma1_sq + db * db / theta.sigma2_sq);
}

Outcome criterion_acceptance_ratios() {
  RngStream rng(9003, 1);
  double worst = 0.0;
  for (int mode_ix = 0; mode_ix < 2; ++mode_ix) {
    const Mode mode = mode_ix == 0 ? Mode::kOriginal : Mode::kAugmented;
    for (KernelKind kind : {KernelKind::kIndependence, KernelKind::kRandomWalk,
                            KernelKind::kSingleSite}) {
      for (int c = 0; c < 100; ++c) {
        const Index dx = sample_uniform_int(rng, 1, 2);
        const Index dz = sample_uniform_int(rng, 1, 2);
        Theta theta;
        theta.phi = 0.5 + 10.0 * rng.uniform01();
        theta.a = 2.0 * rng.uniform01() - 1.0;
        theta.b = 2.0 * rng.uniform01() - 1.0;
        theta.alpha = Vector(dx);
        theta.beta = Vector(dz);
        for (Index k = 0; k < dx; ++k) theta.alpha(k) = 0.6 * sample_normal(rng);
        for (Index k = 0; k < dz; ++k) theta.beta(k) = 0.6 * sample_normal(rng);
        theta.sigma1_sq = 0.2 + rng.uniform01();
        theta.sigma2_sq = 0.2 + rng.uniform01();

        Subject subject;
        subject.id = "s";
        const std::int64_t tt = sample_uniform_int(rng, 2, 5);
        std::vector<double> w;
        for (std::int64_t t = 0; t < tt; ++t) {
          Observation o;
          o.s = sample_uniform_int(rng, 3, 80);
          o.y = rng.uniform01() < 0.4 ? 0 : sample_uniform_int(rng, 1, o.s);
          o.x = Vector(dx);
          o.z = Vector(dz);
          for (Index k = 0; k < dx; ++k) o.x(k) = sample_normal(rng);
          for (Index k = 0; k < dz; ++k) o.z(k) = sample_normal(rng);
          subject.obs.push_back(o);
          w.push_back(o.y > 0 ? 0.02 + 0.96 * rng.uniform01()
                              : std::numeric_limits<double>::quiet_NaN());
        }

        const RandomEffect cur{theta.a + sample_normal(rng),
                               theta.b + sample_normal(rng)};
        RandomEffect cand = cur;
        if (kind == KernelKind::kSingleSite) {
          if (sample_uniform_int(rng, 0, 1) == 0)
            cand.a_i += sample_normal(rng);
          else
            cand.b_i += sample_normal(rng);
        } else {
          cand.a_i += sample_normal(rng);
          cand.b_i += sample_normal(rng);
        }

        const double formula =
            mode == Mode::kOriginal
                ? log_accept_original(theta, subject, cur, cand, kind)
                : log_accept_augmented(theta, subject, w, cur, cand, kind);
        double oracle = oracle_target(theta, subject, w, cand, mode) -
                        oracle_target(theta, subject, w, cur, mode);
        if (kind != KernelKind::kIndependence)
          oracle += oracle_prior(theta, cand) - oracle_prior(theta, cur);
        worst = std::max(worst, std::fabs(formula - oracle));
      }
    }
  }
  Outcome out;
  out.pass = worst <= 1e-10;
  out.summary = "max |formula - density difference| = " + sci(worst) +
                " over 2 modes x 3 kernels x 100 configs (tol 1e-10)";
  return out;
}

// ---- criterion 4: Gibbs conditional of the latent beta probabilities ----

Outcome criterion_gibbs_conditional() {
  RngStream rng(9004, 1);
  double worst = 0.0;
  Outcome out;
  for (int c = 0; c < 10; ++c) {
    const std::int64_t s = sample_uniform_int(rng, 5, 60);
    const std::int64_t y = sample_uniform_int(rng, 1, s - 1);
    const double u = 0.1 + 0.8 * rng.uniform01();
    const double phi = 2.0 + 28.0 * rng.uniform01();

    Dataset data;
    data.dim_x = 0;
    data.dim_z = 0;
    Subject subject;
    subject.id = "s1";
    Observation o;
    o.y = y;
    o.s = s;
    o.x = Vector(0);
    o.z = Vector(0);
    subject.obs.push_back(o);
    data.subjects.push_back(subject);

    Theta theta;
    theta.phi = phi;
    theta.a = 0.0;
    theta.b = logit(u);
    theta.alpha = Vector(0);
    theta.beta = Vector(0);
    theta.sigma1_sq = 0.5;
    theta.sigma2_sq = 0.5;

    const PreparedData prep = prepare_data(data, theta);
    ChainState chain = init_chain(data, theta, Mode::kAugmented,
                                  9100 + static_cast<std::uint64_t>(c), 0,
                                  Matrix2::Identity());
    chain.re[0] = RandomEffect{0.0, logit(u)};
    refresh_cache(prep, chain, Mode::kAugmented);

    const int n_draw = 100000;
    std::vector<double> draws(static_cast<std::size_t>(n_draw));
    for (auto& d : draws) {
      gibbs_update_w(prep, chain, 0);
      d = chain.w[0][0];
    }
    std::sort(draws.begin(), draws.end());

    // Midpoint-grid CDF of the conditional density
    // w^(y + u phi - 1) (1 - w)^(s - y + (1-u) phi - 1); both exponents are
    // bounded away from -1 by construction, so the density is bounded.
    const int m = 20000;
    const double c1 = static_cast<double>(y) + u * phi;
    const double c2 = static_cast<double>(s - y) + (1.0 - u) * phi;
    std::vector<double> cdf(static_cast<std::size_t>(m));
    double total = 0.0;
    for (int j = 0; j < m; ++j) {
      const double w = (j + 0.5) / m;
      total += std::exp((c1 - 1.0) * std::log(w) +
                        (c2 - 1.0) * std::log1p(-w));
      cdf[static_cast<std::size_t>(j)] = total;
    }
    for (auto& v : cdf) v /= total;
    const auto grid_cdf = [&](double x) {
      const double p = x * m - 0.5;
      if (p <= 0.0) return cdf.front() * (x * m) / 0.5;
      if (p >= m - 1) return 1.0;
      const int j0 = static_cast<int>(p);
      const double frac = p - j0;
      const auto j = static_cast<std::size_t>(j0);
      return cdf[j] + frac * (cdf[j + 1] - cdf[j]);
    };

    double ks = 0.0;
    for (int i = 0; i < n_draw; ++i) {
      const double f = grid_cdf(draws[static_cast<std::size_t>(i)]);
      ks = std::max(ks, std::fabs(f - static_cast<double>(i) / n_draw));
      ks = std::max(ks, std::fabs(static_cast<double>(i + 1) / n_draw - f));
    }
    out.lines.push_back("case " + std::to_string(c + 1) + ": y=" +
                        std::to_string(y) + " s=" + std::to_string(s) +
                        " u=" + num(u) + " phi=" + num(phi) +
                        " KS=" + num(ks));
    worst = std::max(worst, ks);
  }
  out.pass = worst < 0.01;
  out.summary = "max KS distance = " + num(worst) +
                " over 10 cases at 1e5 draws (tol 0.01)";
  return out;
}

// ---- criterion 5: complete-data score vs finite differences -------------

Outcome criterion_score_fd() {
  RngStream rng(9005, 1);
  double worst = 0.0;
  for (int c = 0; c < 50; ++c) {
    const Index dx = sample_uniform_int(rng, 1, 2);
    const Index dz = sample_uniform_int(rng, 1, 2);
    Theta theta;
    theta.phi = 1.0 + 12.0 * rng.uniform01();
    theta.a = 2.0 * rng.uniform01() - 1.0;
    theta.b = 2.0 * rng.uniform01() - 1.0;
    theta.alpha = Vector(dx);
    theta.beta = Vector(dz);
    for (Index k = 0; k < dx; ++k) theta.alpha(k) = 0.6 * sample_normal(rng);
    for (Index k = 0; k < dz; ++k) theta.beta(k) = 0.6 * sample_normal(rng);
    theta.sigma1_sq = 0.3 + 0.8 * rng.uniform01();
    theta.sigma2_sq = 0.3 + 0.8 * rng.uniform01();

    Dataset data;
    data.dim_x = dx;
    data.dim_z = dz;
    std::vector<RandomEffect> re;
    for (int i = 0; i < 4; ++i) {
      Subject subject;
      subject.id = "s" + std::to_string(i);
      for (int t = 0; t < 3; ++t) {
        Observation o;
        o.s = sample_uniform_int(rng, 2, 60);
        o.y = rng.uniform01() < 0.35 ? 0 : sample_uniform_int(rng, 1, o.s);
        o.x = Vector(dx);
        o.z = Vector(dz);
        for (Index k = 0; k < dx; ++k) o.x(k) = sample_normal(rng);
        for (Index k = 0; k < dz; ++k) o.z(k) = sample_normal(rng);
        subject.obs.push_back(o);
      }
      data.subjects.push_back(subject);
      re.push_back(RandomEffect::from(
          sample_normal(rng, theta.mu(), theta.g_diag().asDiagonal())));
    }

    const Vector score = complete_data_score(data, theta, re);
    const Vector packed = pack_theta(theta);
    for (Index k = 0; k < packed.size(); ++k) {
      const double h = 1e-5 * std::max(1.0, std::fabs(packed(k)));
      Vector hi = packed, lo = packed;
      hi(k) += h;
      lo(k) -= h;
      const double fp =
          complete_data_loglik(data, unpack_theta(hi, dx, dz), re);
      const double fm =
          complete_data_loglik(data, unpack_theta(lo, dx, dz), re);
      const double fd = (fp - fm) / (2.0 * h);
      const double err = std::fabs(score(k) - fd) / std::max(1.0, std::fabs(fd));
      worst = std::max(worst, err);
    }
  }
  Outcome out;
  out.pass = worst <= 1e-5;
  out.summary = "max relative score error = " + sci(worst) +
                " over 50 configs (tol 1e-5)";
  return out;
}

// ---- criterion 6: importance sampling vs quadrature ----------------------

struct IsSetup {
  Dataset data;
  Theta theta;
  ConditionalMoments moments;
  double ref = 0.0;
};

const IsSetup& is_setup() {
  static const IsSetup setup = [] {
    IsSetup s;
    SettingSpec spec = builtin_setting(1);
    spec.n_subjects = 5;
    spec.t_per_subject = 3;
    RngStream rng(9006, 0);
    GeneratedData gen = generate_dataset(spec, rng);
    s.data = gen.data;
    s.theta = gen.truth;

    // Conditional moments by direct two-dimensional quadrature per subject.
    const GaussHermite gh = gauss_hermite(24);
    const double s1 = std::sqrt(s.theta.sigma1_sq);
    const double s2 = std::sqrt(s.theta.sigma2_sq);
    for (const Subject& subject : s.data.subjects) {
      std::vector<double> lw;
      std::vector<Vector2> nodes;
      for (Index j = 0; j < gh.nodes.size(); ++j) {
        for (Index k = 0; k < gh.nodes.size(); ++k) {
          const RandomEffect re{
              s.theta.a + std::numbers::sqrt2 * s1 * gh.nodes(j),
              s.theta.b + std::numbers::sqrt2 * s2 * gh.nodes(k)};
          lw.push_back(conditional_loglik(s.theta, subject, re) +
                       std::log(gh.weights(j)) + std::log(gh.weights(k)));
          nodes.push_back(re.vec());
        }
      }
      const double wmax = *std::max_element(lw.begin(), lw.end());
      double norm = 0.0;
      Vector2 m1 = Vector2::Zero();
      Vector2 m2 = Vector2::Zero();
      for (std::size_t ix = 0; ix < lw.size(); ++ix) {
        const double wgt = std::exp(lw[ix] - wmax);
        norm += wgt;
        m1 += wgt * nodes[ix];
        m2 += wgt * nodes[ix].cwiseProduct(nodes[ix]);
      }
      s.moments.mean.push_back(m1 / norm);
      s.moments.m2.push_back(m2 / norm);
    }

    s.ref = loglik_quadrature_adaptive(s.data, s.theta, s.moments,
                                       gauss_hermite(40));
    return s;
  }();
  return setup;
}

Outcome criterion_is_vs_quadrature() {
  const IsSetup& s = is_setup();
  int hits = 0;
  std::vector<double> ses;
  for (int r = 0; r < 100; ++r) {
    RngStream master(9006, 1000 + static_cast<std::uint64_t>(r));
    const LoglikEstimate est =
        loglik_importance(s.data, s.theta, s.moments, ISConfig{}, master, 1);
    if (est.mc_se > 0.0 && std::fabs(est.value - s.ref) <= 3.0 * est.mc_se)
      ++hits;
    ses.push_back(est.mc_se);
  }
  std::sort(ses.begin(), ses.end());
  Outcome out;
  out.pass = hits >= 95;
  out.summary = std::to_string(hits) +
                "/100 estimates within 3 MC SE of quadrature (need >= 95); "
                "ref = " + num(s.ref) + ", median mc_se = " + num(ses[50]);
  return out;
}

// ---- criteria 7 and 9: recovery benchmark and SE calibration ------------

const ReplicationResult& recovery_study() {
  static const ReplicationResult result = [] {
    SettingSpec spec = builtin_setting(1);  // 50 subjects, 10 occasions
    FitConfig base;
    base.chains = spec.default_chains;
    return run_replications(spec, base, 100, 70101, hw_threads());
  }();
  return result;
}

struct Envelope {
  const char* name;
  double bias_cap;  // 2x the benchmark bias magnitude
  double rmse_cap;  // 1.5x the benchmark rmse
};

constexpr Envelope kEnvelopes[] = {
    {"a", 2.0 * 0.0001, 1.5 * 0.1419},
    {"alpha_1", 2.0 * 0.0024, 1.5 * 0.2031},
    {"b", 2.0 * 0.0012, 1.5 * 0.0955},
    {"beta_1", 2.0 * 0.0012, 1.5 * 0.1336},
    {"sigma1", 2.0 * 0.0210, 1.5 * 0.1135},
    {"sigma2", 2.0 * 0.0136, 1.5 * 0.0632},
    {"phi", 2.0 * 0.0431, 1.5 * 0.4741},
};

Outcome criterion_recovery() {
  const ReplicationResult& rep = recovery_study();
  Outcome out;
  out.pass = true;
  int checked = 0;
  for (const Envelope& env : kEnvelopes) {
    for (const MetricRow& row : rep.metrics) {
      if (row.parameter != env.name) continue;
      ++checked;
      const bool bias_ok = std::fabs(row.bias) <= env.bias_cap;
      const bool rmse_ok = row.rmse <= env.rmse_cap;
      out.pass = out.pass && bias_ok && rmse_ok;
      std::string line = std::string(env.name) + ": bias " + num(row.bias) +
                         " (cap " + num(env.bias_cap) + ")" +
                         (bias_ok ? "" : " [bias out]") + ", rmse " +
                         num(row.rmse) + " (cap " + num(env.rmse_cap) + ")" +
                         (rmse_ok ? "" : " [rmse out]");
      out.lines.push_back(std::move(line));
    }
  }
  if (checked != 7) out.pass = false;
  out.summary = "100 replicates, " + std::to_string(rep.n_fail) +
                " failed; bias within 2x and rmse within 1.5x of the "
                "benchmark for " +
                std::to_string(checked) + "/7 parameters tracked";
  return out;
}

Outcome criterion_se_calibration() {
  const ReplicationResult& rep = recovery_study();
  const ThetaLayout lay{1, 1};
  const std::array<std::pair<const char*, Index>, 4> targets = {
      {{"a", ThetaLayout::kA},
       {"alpha_1", lay.alpha(0)},
       {"b", ThetaLayout::kB},
       {"beta_1", lay.beta(0)}}};
  Outcome out;
  out.pass = true;
  int with_se = 0;
  for (const RepRecord& rec : rep.records)
    if (rec.ok && rec.se.has_value()) ++with_se;
  for (const auto& [name, k] : targets) {
    std::vector<double> est;
    std::vector<double> se;
    for (const RepRecord& rec : rep.records) {
      if (!rec.ok) continue;
      est.push_back(pack_theta(rec.estimate)(k));
      if (rec.se.has_value()) se.push_back((*rec.se)(k));
    }
    if (se.size() < 10 || est.size() < 10) {
      out.pass = false;
      out.lines.push_back(std::string(name) + ": too few records with SEs (" +
                          std::to_string(se.size()) + ")");
      continue;
    }
    double mean = 0.0;
    for (double v : est) mean += v;
    mean /= static_cast<double>(est.size());
    double var = 0.0;
    for (double v : est) var += (v - mean) * (v - mean);
    var /= static_cast<double>(est.size() - 1);
    const double sd = std::sqrt(var);
    std::sort(se.begin(), se.end());
    const std::size_t n = se.size();
    const double med =
        n % 2 == 1 ? se[n / 2] : 0.5 * (se[n / 2 - 1] + se[n / 2]);
    const double ratio = med / sd;
    const bool ok = ratio >= 0.7 && ratio <= 1.3;
    out.pass = out.pass && ok;
    out.lines.push_back(std::string(name) + ": median SE " + num(med) +
                        " / empirical SD " + num(sd) + " = " + num(ratio) +
                        (ok ? "" : " [outside 0.7..1.3]"));
  }
  out.summary = "median Louis SE over empirical SD within [0.7, 1.3] for the "
                "fixed effects (" +
                std::to_string(with_se) + "/100 replicates reported SEs)";
  return out;
}

// ---- criterion 8: type-one error calibration -----------------------------

Outcome criterion_type1() {
  SettingSpec spec = builtin_setting(4);
  spec.n_subjects = 30;
  FitConfig base;
  base.chains = spec.default_chains;
  const Type1Result res = type1_study(spec, base, 200, 80101, hw_threads());

  Outcome out;
  out.pass = false;
  for (const Type1Rates& r : res.rates) {
    out.lines.push_back("level " + num(r.level) + ": wald alpha_1 " +
                        num(r.wald_alpha1) + ", wald beta_1 " +
                        num(r.wald_beta1) + ", lrt " + num(r.lrt_joint));
    if (r.level == 0.05) {
      const bool wa = r.wald_alpha1 >= 0.04 && r.wald_alpha1 <= 0.12;
      const bool wb = r.wald_beta1 >= 0.04 && r.wald_beta1 <= 0.12;
      const bool lr = r.lrt_joint >= 0.02 && r.lrt_joint <= 0.10;
      out.pass = wa && wb && lr;
      out.summary = "200 replicates, " + std::to_string(res.n_fail) +
                    " failed; at level 0.05: wald alpha_1 " +
                    num(r.wald_alpha1) + (wa ? "" : " [out]") +
                    " in [0.04, 0.12], wald beta_1 " + num(r.wald_beta1) +
                    (wb ? "" : " [out]") + " in [0.04, 0.12], lrt " +
                    num(r.lrt_joint) + (lr ? "" : " [out]") + " in [0.02, 0.10]";
    }
  }
  if (out.summary.empty()) out.summary = "no 0.05 level reported";
  return out;
}

// ---- criterion 10: determinism -------------------------------------------

Outcome run_criterion(int id);

Outcome criterion_determinism() {
  Outcome out;
  out.pass = true;
  const auto note = [&](const std::string& what, bool same) {
    out.pass = out.pass && same;
    out.lines.push_back(what + (same ? ": identical" : ": DIFFERS"));
  };

  // Seeded criteria rerun byte-identically.
  for (int id = 1; id <= 6; ++id) {
    const Outcome a = run_criterion(id);
    const Outcome b = run_criterion(id);
    note("criterion " + std::to_string(id) + " rerun",
         a.summary == b.summary && a.lines == b.lines);
  }

  // Full fit, 1 vs 3 threads, serialized result bytes.
  {
    SettingSpec spec = builtin_setting(1);
    spec.n_subjects = 20;
    spec.t_per_subject = 5;
    RngStream rng(9010, 0);
    const GeneratedData gen = generate_dataset(spec, rng);
    RunConfig rc;
    rc.fit.chains = 3;
    rc.fit.steps = {60, 30};
    rc.fit.is.k = 200;
    rc.fit.seed = 11;
    rc.fit.init = spec.init;
    const auto run_one = [&](int threads) {
      RunConfig c = rc;
      c.fit.threads = threads;
      return fit_result_to_json(fit(gen.data, c.fit), c).dump();
    };
    note("fit result, 1 vs 3 threads", run_one(1) == run_one(3));
  }

  // Replication table, serial vs parallel scheduling.
  {
    SettingSpec tiny = builtin_setting(1);
    tiny.n_subjects = 12;
    tiny.t_per_subject = 4;
    tiny.s_lo = 50;
    tiny.s_hi = 200;
    FitConfig base;
    base.chains = 2;
    base.steps = {30, 15};
    base.se_method = SeMethod::kNone;
    base.is.k = 200;
    const auto table = [&](int par) {
      const ReplicationResult r = run_replications(tiny, base, 4, 1100, par);
      return metrics_to_csv(tiny.id, r.metrics, r.n_fail);
    };
    note("replication table, parallelism 1 vs 3", table(1) == table(3));
  }

  // Importance-sampling log likelihood, 1 vs 2 threads, bitwise.
  {
    const IsSetup& s = is_setup();
    RngStream m1(9011, 0), m2(9011, 0);
    const LoglikEstimate a =
        loglik_importance(s.data, s.theta, s.moments, ISConfig{}, m1, 1);
    const LoglikEstimate b =
        loglik_importance(s.data, s.theta, s.moments, ISConfig{}, m2, 2);
    note("loglik estimate, 1 vs 2 threads",
         a.value == b.value && a.mc_se == b.mc_se);
  }

  // Type-one study table, serial vs parallel scheduling.
  {
    SettingSpec spec = builtin_setting(4);
    spec.n_subjects = 30;
    spec.t_per_subject = 8;
    spec.s_lo = 100;
    spec.s_hi = 400;
    FitConfig base;
    base.chains = 3;
    base.steps = {150, 100};
    const auto table = [&](int par) {
      return type1_to_csv(spec.id, type1_study(spec, base, 4, 99, par));
    };
    note("type-one table, parallelism 1 vs 2", table(1) == table(2));
  }

  out.summary = out.pass ? "all reruns and thread counts byte-identical"
                         : "determinism violated, see below";
  return out;
}

// ---- runner ---------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  Outcome (*fn)();
};

constexpr Criterion kCriteria[] = {
    {1, "pmf normalization", 1.0, criterion_pmf_normalization},
    {2, "pmf equals its binomial-beta integral", 5.0,
     criterion_hierarchical_equivalence},
    {3, "acceptance ratios match density differences", 5.0,
     criterion_acceptance_ratios},
    {4, "Gibbs conditional of the latent probabilities", 30.0,
     criterion_gibbs_conditional},
    {5, "complete-data score matches finite differences", 10.0,
     criterion_score_fd},
    {6, "importance sampling agrees with quadrature", 120.0,
     criterion_is_vs_quadrature},
    {7, "setting-1 recovery within the benchmark envelope", 3600.0,
     criterion_recovery},
    {8, "setting-4 type-one error calibration", 14400.0, criterion_type1},
    {9, "Louis standard errors calibrated", 14400.0, criterion_se_calibration},
    {10, "byte-identical across reruns and thread counts", 3600.0,
     criterion_determinism},
};

Outcome run_criterion(int id) {
  for (const Criterion& c : kCriteria)
    if (c.id == id) return c.fn();
  Outcome out;
  out.summary = "unknown criterion";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    std::string value;
    if (arg == "--criteria" && i + 1 < argc) {
      value = argv[++i];
    } else if (arg.rfind("--criteria=", 0) == 0) {
      value = arg.substr(std::string("--criteria=").size());
    } else {
      std::fprintf(stderr, "usage: %s [--criteria 1,2,10]\n", argv[0]);
      return 64;
    }
    std::size_t pos = 0;
    while (pos < value.size()) {
      const std::size_t comma = value.find(',', pos);
      const std::string tok =
          value.substr(pos, comma == std::string::npos ? comma : comma - pos);
      try {
        const int id = std::stoi(tok);
        if (id < 1 || id > 10) throw std::out_of_range("id");
        selected.push_back(id);
      } catch (const std::exception&) {
        std::fprintf(stderr, "error: bad criterion id '%s'\n", tok.c_str());
        return 64;
      }
      pos = comma == std::string::npos ? value.size() : comma + 1;
    }
  }
  if (selected.empty())
    for (const Criterion& c : kCriteria) selected.push_back(c.id);

  int failures = 0;
  for (const int id : selected) {
    const Criterion* crit = nullptr;
    for (const Criterion& c : kCriteria)
      if (c.id == id) crit = &c;
    if (crit == nullptr) continue;

    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = crit->fn();
    } catch (const std::exception& e) {
      out.pass = false;
      out.summary = std::string("exception: ") + e.what();
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    const bool in_time = dt < crit->limit_s;
    const bool pass = out.pass && in_time;
    std::printf("[%s] %2d %s: %s; %.2f s (limit %g s)%s\n",
                pass ? "PASS" : "FAIL", crit->id, crit->name,
                out.summary.c_str(), dt, crit->limit_s,
                in_time ? "" : " [over time]");
    for (const std::string& line : out.lines)
      std::printf("    %s\n", line.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
  }
  std::printf("%zu criteria run, %d failed\n", selected.size(), failures);
  return failures;
}
