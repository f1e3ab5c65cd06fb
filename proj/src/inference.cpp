#include "zibbmr/inference.hpp"

#include <cmath>
#include <stdexcept>

#include "zibbmr/special_functions.hpp"

namespace zibbmr {

double chi_square_sf(double x, int df) {
  if (df < 1) throw std::invalid_argument("chi_square_sf: df must be >= 1");
  if (!(x >= 0.0)) {
    if (std::isnan(x)) throw std::invalid_argument("chi_square_sf: x is NaN");
    return 1.0;
  }
  return reg_gamma_q(0.5 * df, 0.5 * x);
}

TestResult wald_test(double estimate, double se, double null_value) {
  if (!(se > 0.0) || !std::isfinite(se))
    throw std::invalid_argument("wald_test: se must be positive and finite");
  TestResult r;
  r.kind = "wald";
  r.df = 1;
  const double z = (estimate - null_value) / se;
  r.statistic = z * z;
  r.p_value = std::erfc(std::fabs(z) / std::sqrt(2.0));
  return r;
}

TestResult lrt_test(double loglik_full, double loglik_reduced, int df,
                    double mc_se) {
  if (df < 1) throw std::invalid_argument("lrt_test: df must be >= 1");
  if (!std::isfinite(loglik_full) || !std::isfinite(loglik_reduced))
    throw std::invalid_argument("lrt_test: log likelihoods must be finite");
  TestResult r;
  r.kind = "lrt";
  r.df = df;
  double stat = 2.0 * (loglik_full - loglik_reduced);
  if (stat < 0.0) {
    // A nested model cannot beat the full one; a small negative value is
    // estimator noise, a large one deserves a flag.
    if (stat < -6.0 * mc_se) r.noise_warning = true;
    stat = 0.0;
  }
  r.statistic = stat;
  r.p_value = chi_square_sf(stat, df);
  return r;
}

}  // namespace zibbmr
