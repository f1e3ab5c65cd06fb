#pragma once

#include <string>

namespace zibbmr {

// Outcome of a single hypothesis test.  `noise_warning` is set when a
// likelihood ratio statistic came out negative by more than Monte Carlo
// noise would explain, which usually means the two fits are not nested or
// one of them is poorly converged.
struct TestResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  std::string kind;
  bool noise_warning = false;
};

// Upper tail of the chi-square distribution with `df` degrees of freedom.
double chi_square_sf(double x, int df);

// Two-sided Wald test of H0: parameter == null_value given a point estimate
// and its standard error.
TestResult wald_test(double estimate, double se, double null_value = 0.0);

// Likelihood ratio test from full and reduced maximized log likelihoods.
// When the log likelihoods are importance sampling estimates, pass the
// combined Monte Carlo standard error so small negative statistics can be
// floored without a warning.
TestResult lrt_test(double loglik_full, double loglik_reduced, int df,
                    double mc_se = 0.0);

}  // namespace zibbmr
