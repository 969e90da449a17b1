#include "vnb/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vnb {

namespace {

// Continued fraction for the incomplete beta (Lentz's method).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw numeric_error("incomplete beta continued fraction did not converge");
}

constexpr double kSqrt2 = 1.4142135623730950488016887242097;
constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

inline double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

// 15-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr double kGlNode[15] = {
    -0.98799251802048542849, -0.93727339240070590431, -0.84820658341042721620,
    -0.72441773136017004742, -0.57097217260853884754, -0.39415134707756336990,
    -0.20119409399743452230, 0.0,
    0.20119409399743452230,  0.39415134707756336990,  0.57097217260853884754,
    0.72441773136017004742,  0.84820658341042721620,  0.93727339240070590431,
    0.98799251802048542849};
constexpr double kGlWeight[15] = {
    0.03075324199611726835, 0.07036604748810812471, 0.10715922046717193501,
    0.13957067792615431445, 0.16626920581699393355, 0.18616100001556221103,
    0.19843148532711157646, 0.20257824192556127288,
    0.19843148532711157646, 0.18616100001556221103, 0.16626920581699393355,
    0.13957067792615431445, 0.10715922046717193501, 0.07036604748810812471,
    0.03075324199611726835};

template <typename F>
double gl15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double acc = 0.0;
  for (int i = 0; i < 15; ++i) acc += kGlWeight[i] * f(c + h * kGlNode[i]);
  return acc * h;
}

template <typename F>
double adaptive_gl(const F& f, double a, double b, double tol, int depth) {
  const double whole = gl15(f, a, b);
  const double mid = 0.5 * (a + b);
  const double halves = gl15(f, a, mid) + gl15(f, mid, b);
  if (std::abs(whole - halves) <= tol || depth >= 24) return halves;
  return adaptive_gl(f, a, mid, 0.5 * tol, depth + 1) +
         adaptive_gl(f, mid, b, 0.5 * tol, depth + 1);
}

// CDF of the range of k iid standard normals.
double normal_range_cdf(double w, std::size_t k, double tol) {
  if (w <= 0.0) return 0.0;
  const auto integrand = [w, k](double z) {
    const double span = norm_cdf(z) - norm_cdf(z - w);
    return norm_pdf(z) * std::pow(span, static_cast<double>(k - 1));
  };
  // phi(z) underflows past |z| ~ 9; the span factor only widens the window
  // on the left by w.
  const double lo = -9.0;
  const double hi = 9.0 + w;
  return static_cast<double>(k) * adaptive_gl(integrand, lo, hi, tol, 0);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw config_error("incomplete_beta: a, b must be positive");
  if (x < 0.0 || x > 1.0) throw config_error("incomplete_beta: x must lie in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw config_error("t distribution needs df > 0");
  if (!std::isfinite(t)) return 0.0;
  const double x = df / (df + t * t);
  return incomplete_beta(0.5 * df, 0.5, x);
}

double f_distribution_sf(double f, double df1, double df2) {
  if (!(df1 > 0.0) || !(df2 > 0.0)) throw config_error("F distribution needs positive df");
  if (f <= 0.0) return 1.0;
  return incomplete_beta(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * f));
}

double studentized_range_cdf(double q, std::size_t k, double df) {
  if (k < 2) throw config_error("studentized range needs k >= 2");
  if (!(df > 0.0)) throw config_error("studentized range needs df > 0");
  if (q <= 0.0) return 0.0;

  constexpr double kTol = 1e-6;

  // Outer variable s ~ chi_df / sqrt(df): density
  //   f(s) = 2 (df/2)^{df/2} / Gamma(df/2) * s^{df-1} e^{-df s^2 / 2}.
  const double half_df = 0.5 * df;
  const double ln_norm = std::log(2.0) + half_df * std::log(half_df) - std::lgamma(half_df);
  const auto s_density = [&](double s) {
    return std::exp(ln_norm + (df - 1.0) * std::log(s) - half_df * s * s);
  };
  const auto integrand = [&](double s) {
    return s_density(s) * normal_range_cdf(q * s, k, kTol * 0.1);
  };

  // The density is concentrated near 1 with spread ~ 1/sqrt(df); the bound
  // below keeps the discarded tail far under the tolerance for any df >= 1.
  const double s_max = 3.0 + std::sqrt(90.0 / df);
  return std::min(1.0, adaptive_gl(integrand, 1e-12, s_max, kTol, 0));
}

double studentized_range_quantile(double p, std::size_t k, double df) {
  if (!(p > 0.0) || !(p < 1.0)) throw config_error("quantile needs p in (0,1)");
  double lo = 0.0, hi = 4.0;
  while (studentized_range_cdf(hi, k, df) < p) {
    hi *= 2.0;
    if (hi > 1e6) throw numeric_error("studentized range quantile out of range");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (studentized_range_cdf(mid, k, df) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-9 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

double mae(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || a.size() != b.size()) {
    throw data_error("mae: inputs must be nonempty and equal length");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

CorrelationResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw data_error("pearson: unequal lengths");
  const std::size_t n = x.size();
  if (n < 3) throw data_error("pearson: need n >= 3");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw data_error("pearson: constant input");

  CorrelationResult res;
  res.n = n;
  res.rho = sxy / std::sqrt(sxx * syy);
  res.rho = std::clamp(res.rho, -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  if (std::abs(res.rho) >= 1.0) {
    res.p_value = 0.0;
  } else {
    const double t = res.rho * std::sqrt(df / (1.0 - res.rho * res.rho));
    res.p_value = student_t_two_sided_p(t, df);
  }
  return res;
}

namespace {

struct GroupMoments {
  std::size_t total_n = 0;
  double grand_mean = 0.0;
  double ssb = 0.0;
  double ssw = 0.0;
};

GroupMoments moments(const GroupSamples& gs) {
  GroupMoments m;
  double grand_sum = 0.0;
  for (const auto& [name, values] : gs.groups) {
    m.total_n += values.size();
    for (double v : values) grand_sum += v;
  }
  m.grand_mean = grand_sum / static_cast<double>(m.total_n);
  for (const auto& [name, values] : gs.groups) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    m.ssb += static_cast<double>(values.size()) * (mean - m.grand_mean) * (mean - m.grand_mean);
    for (double v : values) m.ssw += (v - mean) * (v - mean);
  }
  return m;
}

}  // namespace

AnovaResult anova_oneway(const GroupSamples& gs) {
  const std::size_t k = gs.groups.size();
  if (k < 2) throw data_error("anova: need at least 2 groups");
  for (const auto& [name, values] : gs.groups) {
    if (values.empty()) throw data_error("anova: group '" + name + "' is empty");
  }
  const GroupMoments m = moments(gs);
  if (m.total_n <= k) throw data_error("anova: total n must exceed the number of groups");

  AnovaResult res;
  res.df_between = k - 1;
  res.df_within = m.total_n - k;
  if (m.ssw == 0.0 && m.ssb == 0.0) {
    throw data_error("anova: zero variance everywhere, F undefined");
  }
  if (m.ssw == 0.0) {
    res.f_value = std::numeric_limits<double>::infinity();
    res.p_value = 0.0;
    return res;
  }
  res.f_value = (m.ssb / static_cast<double>(res.df_between)) /
                (m.ssw / static_cast<double>(res.df_within));
  res.p_value = f_distribution_sf(res.f_value, static_cast<double>(res.df_between),
                                  static_cast<double>(res.df_within));
  return res;
}

TukeyResult tukey_hsd(const GroupSamples& gs, double alpha) {
  const std::size_t k = gs.groups.size();
  if (k < 2) throw data_error("tukey: need at least 2 groups");
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw config_error("tukey: alpha must lie in (0,1)");
  for (const auto& [name, values] : gs.groups) {
    if (values.size() < 2) throw data_error("tukey: group '" + name + "' has n < 2");
  }
  const GroupMoments m = moments(gs);
  const double df_w = static_cast<double>(m.total_n - k);
  const double msw = m.ssw / df_w;
  if (!(msw > 0.0)) throw data_error("tukey: zero within-group variance");

  std::vector<std::pair<std::string, const std::vector<double>*>> items;
  for (const auto& [name, values] : gs.groups) items.emplace_back(name, &values);

  TukeyResult res;
  res.alpha = alpha;
  res.q_critical = studentized_range_quantile(1.0 - alpha, k, df_w);
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      const auto& a = *items[i].second;
      const auto& b = *items[j].second;
      double mean_a = 0.0, mean_b = 0.0;
      for (double v : a) mean_a += v;
      for (double v : b) mean_b += v;
      mean_a /= static_cast<double>(a.size());
      mean_b /= static_cast<double>(b.size());

      TukeyPair pair;
      pair.group_a = items[i].first;
      pair.group_b = items[j].first;
      pair.mean_diff = mean_a - mean_b;
      // Tukey-Kramer standard error for unequal group sizes.
      const double se = std::sqrt(0.5 * msw * (1.0 / static_cast<double>(a.size()) +
                                               1.0 / static_cast<double>(b.size())));
      pair.q = std::abs(pair.mean_diff) / se;
      pair.p_value = std::clamp(1.0 - studentized_range_cdf(pair.q, k, df_w), 0.0, 1.0);
      pair.significant = pair.p_value < alpha;
      res.pairs.push_back(std::move(pair));
    }
  }
  return res;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw data_error("quantile: empty sample");
  if (p < 0.0 || p > 1.0) throw config_error("quantile: p must lie in [0,1]");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - std::floor(h)) * (values[lo + 1] - values[lo]);
}

BoxStats box_stats(const std::vector<double>& values) {
  if (values.empty()) throw data_error("box_stats: empty sample");
  BoxStats bs;
  bs.n = values.size();
  bs.q1 = quantile(values, 0.25);
  bs.median = quantile(values, 0.5);
  bs.q3 = quantile(values, 0.75);
  const double iqr = bs.q3 - bs.q1;
  const double lo_fence = bs.q1 - 1.5 * iqr;
  const double hi_fence = bs.q3 + 1.5 * iqr;
  bs.whisker_low = bs.q3;
  bs.whisker_high = bs.q1;
  bool any_inlier = false;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      bs.outliers.push_back(v);
    } else {
      any_inlier = true;
      bs.whisker_low = std::min(bs.whisker_low, v);
      bs.whisker_high = std::max(bs.whisker_high, v);
    }
  }
  if (!any_inlier) {
    bs.whisker_low = bs.median;
    bs.whisker_high = bs.median;
  }
  std::sort(bs.outliers.begin(), bs.outliers.end());
  return bs;
}

}  // namespace vnb
