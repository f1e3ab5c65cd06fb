#include "zibbmr/sampler.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "zibbmr/special_functions.hpp"

namespace zibbmr {

namespace {

// Zero-indicator terms of one subject's conditional log likelihood as a
// function of a_i.  Probabilities are clamped exactly as in the model layer
// so cached-target differences match the closed-form acceptance ratios.
double p_part(const std::vector<PreparedObs>& obs, double a_i) {
  double total = 0.0;
  for (const auto& o : obs) {
    const double p = clamp_prob(expit(a_i + o.xa));
    total += o.y == 0 ? std::log1p(-p) : std::log(p);
  }
  return total;
}

// Count terms as a function of b_i, beta-binomial form.  The binomial
// coefficient is constant in the random effect and dropped.
double u_part_original(const PreparedData& prep,
                       const std::vector<PreparedObs>& obs, double b_i) {
  const double phi = prep.theta.phi;
  double total = 0.0;
  for (const auto& o : obs) {
    if (o.y == 0) continue;
    const double u = clamp_prob(expit(b_i + o.zb));
    const double yd = static_cast<double>(o.y);
    const double sd = static_cast<double>(o.s);
    total += log_gamma(yd + u * phi) + log_gamma(sd - yd + (1.0 - u) * phi) -
             o.lg_s_phi - log_gamma(u * phi) - log_gamma((1.0 - u) * phi) +
             prep.lg_phi;
  }
  return total;
}

// Count terms given the augmented latents; the binomial factor f(y | s, w)
// does not involve (b_i, phi) and is dropped.
double u_part_augmented(const PreparedData& prep,
                        const std::vector<PreparedObs>& obs,
                        const std::vector<double>& ln_w,
                        const std::vector<double>& ln_1mw, double b_i) {
  const double phi = prep.theta.phi;
  double total = 0.0;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    const auto& o = obs[t];
    if (o.y == 0) continue;
    const double u = clamp_prob(expit(b_i + o.zb));
    total += (u * phi - 1.0) * ln_w[t] + ((1.0 - u) * phi - 1.0) * ln_1mw[t] -
             log_gamma(u * phi) - log_gamma((1.0 - u) * phi) + prep.lg_phi;
  }
  return total;
}

// Gaussian prior log density up to constants that cancel in ratios.
double prior_core(const Theta& theta, double a_i, double b_i) {
  const double da = a_i - theta.a;
  const double db = b_i - theta.b;
  return -0.5 * (da * da / theta.sigma1_sq + db * db / theta.sigma2_sq);
}

}  // namespace

PreparedData prepare_data(const Dataset& data, const Theta& theta) {
  PreparedData prep;
  prep.theta = theta;
  prep.lg_phi = log_gamma(theta.phi);
  prep.subjects.resize(data.subjects.size());
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const auto& subject = data.subjects[i];
    auto& out = prep.subjects[i];
    out.resize(subject.obs.size());
    for (std::size_t t = 0; t < subject.obs.size(); ++t) {
      const auto& o = subject.obs[t];
      auto& po = out[t];
      po.y = o.y;
      po.s = o.s;
      po.xa = theta.alpha.dot(o.x);
      po.zb = theta.beta.dot(o.z);
      po.lg_s_phi =
          o.y > 0 ? log_gamma(static_cast<double>(o.s) + theta.phi) : 0.0;
    }
  }
  return prep;
}

ChainState init_chain(const Dataset& data, const Theta& theta0, Mode mode,
                      std::uint64_t seed, Index chain_index,
                      const Matrix2& omega0) {
  const Index n = data.n_subjects();
  ChainState chain;
  chain.omega = omega0;
  chain.re.resize(static_cast<std::size_t>(n));
  chain.streams.reserve(static_cast<std::size_t>(n));
  chain.lp_p.assign(static_cast<std::size_t>(n), 0.0);
  chain.lp_u.assign(static_cast<std::size_t>(n), 0.0);

  Matrix2 g0 = Matrix2::Zero();
  g0(0, 0) = theta0.sigma1_sq;
  g0(1, 1) = theta0.sigma2_sq;
  for (Index i = 0; i < n; ++i) {
    chain.streams.emplace_back(
        seed, 1 + static_cast<std::uint64_t>(chain_index) *
                      static_cast<std::uint64_t>(n) +
                  static_cast<std::uint64_t>(i));
    const Vector2 draw = sample_normal(chain.streams.back(), theta0.mu(), g0);
    chain.re[static_cast<std::size_t>(i)] = RandomEffect::from(draw);
  }

  if (mode == Mode::kAugmented) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    chain.w.resize(static_cast<std::size_t>(n));
    chain.ln_w.resize(static_cast<std::size_t>(n));
    chain.ln_1mw.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const auto& obs = data.subjects[static_cast<std::size_t>(i)].obs;
      auto& wi = chain.w[static_cast<std::size_t>(i)];
      auto& lwi = chain.ln_w[static_cast<std::size_t>(i)];
      auto& l1wi = chain.ln_1mw[static_cast<std::size_t>(i)];
      wi.assign(obs.size(), nan);
      lwi.assign(obs.size(), nan);
      l1wi.assign(obs.size(), nan);
      for (std::size_t t = 0; t < obs.size(); ++t) {
        if (obs[t].y == 0) continue;
        const double w0 = (static_cast<double>(obs[t].y) + 0.5) /
                          (static_cast<double>(obs[t].s) + 1.0);
        wi[t] = w0;
        lwi[t] = std::log(w0);
        l1wi[t] = std::log1p(-w0);
      }
    }
  }
  return chain;
}

void refresh_cache(const PreparedData& prep, ChainState& chain, Mode mode) {
  for (std::size_t i = 0; i < prep.subjects.size(); ++i) {
    const auto& obs = prep.subjects[i];
    chain.lp_p[i] = p_part(obs, chain.re[i].a_i);
    chain.lp_u[i] =
        mode == Mode::kOriginal
            ? u_part_original(prep, obs, chain.re[i].b_i)
            : u_part_augmented(prep, obs, chain.ln_w[i], chain.ln_1mw[i],
                               chain.re[i].b_i);
  }
}

Vector2 propose_kern1(RngStream& rng, const Theta& theta) {
  Matrix2 g = Matrix2::Zero();
  g(0, 0) = theta.sigma1_sq;
  g(1, 1) = theta.sigma2_sq;
  return sample_normal(rng, theta.mu(), g);
}

Vector2 propose_kern2(RngStream& rng, const RandomEffect& re,
                      const Matrix2& omega) {
  return sample_normal(rng, re.vec(), omega);
}

SingleSiteProposal propose_kern3(RngStream& rng, const RandomEffect& re) {
  SingleSiteProposal prop;
  prop.component = static_cast<int>(sample_uniform_int(rng, 0, 1));
  prop.value = re.vec();
  prop.value(prop.component) += sample_normal(rng);
  return prop;
}

double log_accept_original(const Theta& theta, const Subject& subject,
                           const RandomEffect& current,
                           const RandomEffect& candidate, KernelKind kind) {
  const double phi = theta.phi;
  double delta = 0.0;
  for (const auto& o : subject.obs) {
    const auto lp_cur = linear_predictors(theta, current, o.x, o.z);
    const auto lp_cand = linear_predictors(theta, candidate, o.x, o.z);
    const double p_cur = clamp_prob(expit(lp_cur.eta_p));
    const double p_cand = clamp_prob(expit(lp_cand.eta_p));
    if (o.y == 0) {
      delta += std::log1p(-p_cand) - std::log1p(-p_cur);
      continue;
    }
    const double u_cur = clamp_prob(expit(lp_cur.eta_u));
    const double u_cand = clamp_prob(expit(lp_cand.eta_u));
    const double yd = static_cast<double>(o.y);
    const double sd = static_cast<double>(o.s);
    delta += std::log(p_cand) - std::log(p_cur) +
             log_beta(yd + u_cand * phi, sd - yd + (1.0 - u_cand) * phi) -
             log_beta(u_cand * phi, (1.0 - u_cand) * phi) -
             log_beta(yd + u_cur * phi, sd - yd + (1.0 - u_cur) * phi) +
             log_beta(u_cur * phi, (1.0 - u_cur) * phi);
  }
  if (kind != KernelKind::kIndependence) {
    delta += prior_core(theta, candidate.a_i, candidate.b_i) -
             prior_core(theta, current.a_i, current.b_i);
  }
  return delta;
}

double log_accept_augmented(const Theta& theta, const Subject& subject,
                            const std::vector<double>& w,
                            const RandomEffect& current,
                            const RandomEffect& candidate, KernelKind kind) {
  if (w.size() != subject.obs.size())
    throw std::invalid_argument("log_accept_augmented: w length mismatch");
  const double phi = theta.phi;
  double delta = 0.0;
  for (std::size_t t = 0; t < subject.obs.size(); ++t) {
    const auto& o = subject.obs[t];
    const auto lp_cur = linear_predictors(theta, current, o.x, o.z);
    const auto lp_cand = linear_predictors(theta, candidate, o.x, o.z);
    const double p_cur = clamp_prob(expit(lp_cur.eta_p));
    const double p_cand = clamp_prob(expit(lp_cand.eta_p));
    if (o.y == 0) {
      delta += std::log1p(-p_cand) - std::log1p(-p_cur);
      continue;
    }
    const double u_cur = clamp_prob(expit(lp_cur.eta_u));
    const double u_cand = clamp_prob(expit(lp_cand.eta_u));
    delta += std::log(p_cand) - std::log(p_cur) + log_gamma(u_cur * phi) +
             log_gamma((1.0 - u_cur) * phi) - log_gamma(u_cand * phi) -
             log_gamma((1.0 - u_cand) * phi) +
             phi * (u_cand - u_cur) * (std::log(w[t]) - std::log1p(-w[t]));
  }
  if (kind != KernelKind::kIndependence) {
    delta += prior_core(theta, candidate.a_i, candidate.b_i) -
             prior_core(theta, current.a_i, current.b_i);
  }
  return delta;
}

void gibbs_update_w(const PreparedData& prep, ChainState& chain, Index i) {
  if (chain.w.empty())
    throw std::logic_error("gibbs_update_w: chain has no augmented latents");
  const auto idx = static_cast<std::size_t>(i);
  const auto& obs = prep.subjects[idx];
  const double phi = prep.theta.phi;
  const double b_i = chain.re[idx].b_i;
  auto& rng = chain.streams[idx];
  for (std::size_t t = 0; t < obs.size(); ++t) {
    const auto& o = obs[t];
    if (o.y == 0) continue;
    const double u = clamp_prob(expit(b_i + o.zb));
    const double yd = static_cast<double>(o.y);
    const double sd = static_cast<double>(o.s);
    const double w =
        sample_beta(rng, yd + u * phi, sd - yd + (1.0 - u) * phi);
    chain.w[idx][t] = w;
    chain.ln_w[idx][t] = std::log(w);
    chain.ln_1mw[idx][t] = std::log1p(-w);
  }
  chain.lp_u[idx] =
      u_part_augmented(prep, obs, chain.ln_w[idx], chain.ln_1mw[idx], b_i);
}

void mh_sweep(const PreparedData& prep, ChainState& chain, Mode mode,
              const KernelSchedule& schedule) {
  const Theta& theta = prep.theta;
  for (std::size_t i = 0; i < prep.subjects.size(); ++i) {
    const auto& obs = prep.subjects[i];
    auto& rng = chain.streams[i];

    const auto u_part = [&](double b_i) {
      return mode == Mode::kOriginal
                 ? u_part_original(prep, obs, b_i)
                 : u_part_augmented(prep, obs, chain.ln_w[i], chain.ln_1mw[i],
                                    b_i);
    };

    if (mode == Mode::kAugmented) gibbs_update_w(prep, chain, Index(i));

    for (int r = 0; r < schedule.m1; ++r) {
      ++chain.kern1.proposed;
      const Vector2 cand = propose_kern1(rng, theta);
      const double cand_p = p_part(obs, cand(0));
      const double cand_u = u_part(cand(1));
      const double delta = cand_p + cand_u - chain.lp_p[i] - chain.lp_u[i];
      if (std::log(rng.open01()) < delta) {
        chain.re[i] = RandomEffect::from(cand);
        chain.lp_p[i] = cand_p;
        chain.lp_u[i] = cand_u;
        ++chain.kern1.accepted;
      }
    }

    if (mode == Mode::kAugmented) gibbs_update_w(prep, chain, Index(i));

    for (int r = 0; r < schedule.m2; ++r) {
      ++chain.kern2.proposed;
      ++chain.window2.proposed;
      const Vector2 cand = propose_kern2(rng, chain.re[i], chain.omega);
      const double cand_p = p_part(obs, cand(0));
      const double cand_u = u_part(cand(1));
      const double delta = cand_p + cand_u - chain.lp_p[i] - chain.lp_u[i] +
                           prior_core(theta, cand(0), cand(1)) -
                           prior_core(theta, chain.re[i].a_i, chain.re[i].b_i);
      if (std::log(rng.open01()) < delta) {
        chain.re[i] = RandomEffect::from(cand);
        chain.lp_p[i] = cand_p;
        chain.lp_u[i] = cand_u;
        ++chain.kern2.accepted;
        ++chain.window2.accepted;
      }
    }

    if (mode == Mode::kAugmented) gibbs_update_w(prep, chain, Index(i));

    for (int r = 0; r < schedule.m3; ++r) {
      ++chain.kern3.proposed;
      const auto prop = propose_kern3(rng, chain.re[i]);
      double delta;
      double cand_part;
      if (prop.component == 0) {
        cand_part = p_part(obs, prop.value(0));
        const double da_new = prop.value(0) - theta.a;
        const double da_old = chain.re[i].a_i - theta.a;
        delta = cand_part - chain.lp_p[i] -
                0.5 * (da_new * da_new - da_old * da_old) / theta.sigma1_sq;
      } else {
        cand_part = u_part(prop.value(1));
        const double db_new = prop.value(1) - theta.b;
        const double db_old = chain.re[i].b_i - theta.b;
        delta = cand_part - chain.lp_u[i] -
                0.5 * (db_new * db_new - db_old * db_old) / theta.sigma2_sq;
      }
      if (std::log(rng.open01()) < delta) {
        if (prop.component == 0) {
          chain.re[i].a_i = prop.value(0);
          chain.lp_p[i] = cand_part;
        } else {
          chain.re[i].b_i = prop.value(1);
          chain.lp_u[i] = cand_part;
        }
        ++chain.kern3.accepted;
      }
    }
  }
}

void adapt_omega(ChainState& chain, double target_rate, double gamma) {
  if (chain.window2.proposed > 0) {
    const double rate = chain.window2.rate();
    chain.omega *= std::exp(gamma * (rate - target_rate));
    for (int k = 0; k < 2; ++k) {
      if (chain.omega(k, k) < 1e-6) chain.omega(k, k) = 1e-6;
      if (chain.omega(k, k) > 1e4) chain.omega(k, k) = 1e4;
    }
  }
  chain.window2 = AcceptCounts{};
}

}  // namespace zibbmr
