#pragma once

#include <map>
#include <string>
#include <vector>

#include "vnb/errors.hpp"

namespace vnb {

// Named groups of scalar samples (ordered map keeps every report stable).
struct GroupSamples {
  std::map<std::string, std::vector<double>> groups;
};

struct AnovaResult {
  double f_value = 0.0;
  std::size_t df_between = 0;
  std::size_t df_within = 0;
  double p_value = 1.0;
};

struct TukeyPair {
  std::string group_a;
  std::string group_b;
  double mean_diff = 0.0;  // mean(a) - mean(b)
  double q = 0.0;
  double p_value = 1.0;    // FWER-corrected via the studentized range
  bool significant = false;
};

struct TukeyResult {
  double alpha = 0.05;
  double q_critical = 0.0;  // studentized-range quantile at 1 - alpha
  std::vector<TukeyPair> pairs;
};

struct CorrelationResult {
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::string method = "pearson, two-sided t";
};

// Mean absolute difference of two equal-length lists.
double mae(const std::vector<double>& a, const std::vector<double>& b);

// Sample Pearson correlation; two-sided p from the t distribution with n-2
// degrees of freedom. Requires n >= 3 and nonconstant inputs.
CorrelationResult pearson(const std::vector<double>& x, const std::vector<double>& y);

// One-way fixed-effects ANOVA.
AnovaResult anova_oneway(const GroupSamples& gs);

// Tukey-Kramer HSD over all group pairs (handles unequal group sizes).
TukeyResult tukey_hsd(const GroupSamples& gs, double alpha = 0.05);

// ---- distribution machinery (exposed for tests and oracles) ----

// Regularized incomplete beta I_x(a, b), Lentz continued fraction with the
// symmetry split at x = (a+1)/(a+b+2).
double incomplete_beta(double a, double b, double x);

// Two-sided p for a t statistic with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

// Upper tail of the F distribution.
double f_distribution_sf(double f, double df1, double df2);

// CDF of the studentized range with k groups and df within-group degrees of
// freedom, by two-level adaptive Gauss-Legendre quadrature (outer over the
// chi-scaled spread, inner over the normal range), absolute tolerance 1e-6.
double studentized_range_cdf(double q, std::size_t k, double df);

// Inverse of the above by bisection.
double studentized_range_quantile(double p, std::size_t k, double df);

// ---- small descriptive helpers ----

// Type-7 (linear interpolation) quantile of an unsorted sample.
double quantile(std::vector<double> values, double p);

struct BoxStats {
  std::size_t n = 0;
  double q1 = 0.0, median = 0.0, q3 = 0.0;
  double whisker_low = 0.0, whisker_high = 0.0;  // most extreme inliers (1.5 IQR)
  std::vector<double> outliers;
};

BoxStats box_stats(const std::vector<double>& values);

}  // namespace vnb
