#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace brownsim {

namespace detail {

inline double ln_gamma(double x) {
  // Lanczos approximation, g = 7
  static const double coef[9] = {0.99999999999980993,  676.5203681218851,
                                 -1259.1392167224028,  771.32342877765313,
                                 -176.61502916214059,  12.507343278686905,
                                 -0.13857109526572012, 9.9843695780195716e-6,
                                 1.5056327351493116e-7};
  if (x < 0.5) {
    // reflection
    return std::log(3.14159265358979323846 / std::sin(3.14159265358979323846 * x)) -
           ln_gamma(1.0 - x);
  }
  x -= 1.0;
  double a = coef[0];
  double t = x + 7.5;
  for (int i = 1; i < 9; ++i) a += coef[i] / (x + i);
  return 0.5 * std::log(2.0 * 3.14159265358979323846) + (x + 0.5) * std::log(t) - t +
         std::log(a);
}

/// Continued-fraction evaluation of the regularized incomplete beta
/// function I_x(a, b) (Lentz's method).
inline double incomplete_beta(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("incomplete_beta: x outside [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  auto contfrac = [](double a_, double b_, double x_) {
    const double tiny = 1e-300;
    const double eps = 1e-15;
    double qab = a_ + b_;
    double qap = a_ + 1.0;
    double qam = a_ - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x_ / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
      int m2 = 2 * m;
      double aa = m * (b_ - m) * x_ / ((qam + m2) * (a_ + m2));
      d = 1.0 + aa * d;
      if (std::abs(d) < tiny) d = tiny;
      c = 1.0 + aa / c;
      if (std::abs(c) < tiny) c = tiny;
      d = 1.0 / d;
      h *= d * c;
      aa = -(a_ + m) * (qab + m) * x_ / ((a_ + m2) * (qap + m2));
      d = 1.0 + aa * d;
      if (std::abs(d) < tiny) d = tiny;
      c = 1.0 + aa / c;
      if (std::abs(c) < tiny) c = tiny;
      d = 1.0 / d;
      double del = d * c;
      h *= del;
      if (std::abs(del - 1.0) < eps) break;
    }
    return h;
  };

  double front =
      std::exp(ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * std::log(x) +
               b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * contfrac(a, b, x) / a;
  }
  return 1.0 - std::exp(ln_gamma(a + b) - ln_gamma(b) - ln_gamma(a) +
                        b * std::log(1.0 - x) + a * std::log(x)) *
                   contfrac(b, a, 1.0 - x) / b;
}

}  // namespace detail

/// Two-sided tail probability of the Student-t distribution.
inline double student_t_two_sided_p(double t, double dof) {
  if (dof <= 0.0) throw std::invalid_argument("dof must be > 0");
  double x = dof / (dof + t * t);
  return detail::incomplete_beta(dof / 2.0, 0.5, x);
}

inline double student_t_cdf(double t, double dof) {
  double p = student_t_two_sided_p(std::abs(t), dof) / 2.0;
  return t >= 0.0 ? 1.0 - p : p;
}

/// Upper quantile t such that P(T <= t) = p, via bisection on the CDF;
/// accurate to about 1e-10.
inline double student_t_quantile(double p, double dof) {
  if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("p must be in (0,1)");
  if (p == 0.5) return 0.0;
  double lo = -1e8;
  double hi = 1e8;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, dof) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(lo))) break;
  }
  return 0.5 * (lo + hi);
}

struct MeanCi {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Student-t 95% confidence interval: mean +/- t(0.975, n-1) * s / sqrt(n).
inline MeanCi mean_ci95(std::span<const double> samples) {
  std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("mean_ci95 needs at least 2 samples");
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  double sd = std::sqrt(ss / static_cast<double>(n - 1));
  double half =
      student_t_quantile(0.975, static_cast<double>(n - 1)) * sd / std::sqrt(static_cast<double>(n));
  return {mean, mean - half, mean + half};
}

struct PairedComparison {
  std::string name_a;
  std::string name_b;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double difference = 0.0;  // mean of (a - b)
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// Paired two-sided t-test on per-index differences. Zero-variance
/// differences degenerate to p = 1 when identical and p = 0 otherwise.
inline PairedComparison paired_ttest(std::span<const double> a, std::span<const double> b,
                                     std::string_view name_a = "a",
                                     std::string_view name_b = "b") {
  if (a.size() != b.size()) throw std::invalid_argument("paired_ttest: length mismatch");
  std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("paired_ttest needs at least 2 pairs");

  PairedComparison out;
  out.name_a = std::string(name_a);
  out.name_b = std::string(name_b);
  out.n = n;
  double mean_d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.mean_a += a[i];
    out.mean_b += b[i];
    mean_d += a[i] - b[i];
  }
  out.mean_a /= static_cast<double>(n);
  out.mean_b /= static_cast<double>(n);
  mean_d /= static_cast<double>(n);
  out.difference = mean_d;

  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = (a[i] - b[i]) - mean_d;
    ss += d * d;
  }
  double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) {
    out.ci_lo = out.ci_hi = mean_d;
    out.p_value = (mean_d == 0.0) ? 1.0 : 0.0;
    return out;
  }
  double se = sd / std::sqrt(static_cast<double>(n));
  double t = mean_d / se;
  double tq = student_t_quantile(0.975, static_cast<double>(n - 1));
  out.ci_lo = mean_d - tq * se;
  out.ci_hi = mean_d + tq * se;
  out.p_value = student_t_two_sided_p(t, static_cast<double>(n - 1));
  return out;
}

}  // namespace brownsim
