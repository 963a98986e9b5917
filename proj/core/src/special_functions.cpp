#include "canopy/special_functions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "canopy/error.hpp"

namespace canopy::stats {

namespace {

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the center.
constexpr std::array<double, 4> kGaussWeights = {0.129484966168869693270611432679082,
                                                 0.279705391489276667901467771423780,
                                                 0.381830050505118944950369775488975,
                                                 0.417959183673469387755102040816327};

struct Estimate {
  double value;
  double error;
};

Estimate gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (std::size_t i = 0; i < 7; ++i) {
    const double dx = h * kKronrodNodes[i];
    const double sum = f(c - dx) + f(c + dx);
    kronrod += kKronrodWeights[i] * sum;
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * sum;
  }
  return {kronrod * h, std::abs((kronrod - gauss) * h)};
}

double adapt(const std::function<double(double)>& f, double a, double b, Estimate whole, double rel_tol,
             double abs_tol, double scale, int depth) {
  const double tol = std::max(abs_tol, rel_tol * scale);
  if (whole.error <= tol || depth >= 40 || b - a <= 1e-15 * (std::abs(a) + std::abs(b))) return whole.value;
  const double m = 0.5 * (a + b);
  const auto left = gk15(f, a, m);
  const auto right = gk15(f, m, b);
  const double refined = left.value + right.value;
  const double next_scale = std::max(scale, std::abs(refined));
  return adapt(f, a, m, left, rel_tol, abs_tol, next_scale, depth + 1) +
         adapt(f, m, b, right, rel_tol, abs_tol, next_scale, depth + 1);
}

double beta_continued_fraction(double x, double a, double b) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

// k * phi(z) * (Phi(z)^(k-1) - (Phi(z) - Phi(z - w))^(k-1)), with the
// difference of powers evaluated without cancellation.
double range_tail_integrand(double z, double w, int k) {
  const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  if (phi == 0.0) return 0.0;
  const double upper = normal_cdf(z);
  if (upper == 0.0) return 0.0;
  const double lower = normal_cdf(z - w);
  const double m = k - 1;
  const double ratio = lower / upper;
  const double diff = ratio >= 1.0 ? std::pow(upper, m) : -std::pow(upper, m) * std::expm1(m * std::log1p(-ratio));
  return k * phi * diff;
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol, double abs_tol,
                 int panels) {
  if (!(b > a)) return 0.0;
  panels = std::max(1, panels);
  const double width = (b - a) / panels;
  std::vector<Estimate> pieces;
  pieces.reserve(static_cast<std::size_t>(panels));
  double scale = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double lo = a + width * i;
    const double hi = i + 1 == panels ? b : a + width * (i + 1);
    pieces.push_back(gk15(f, lo, hi));
    scale += pieces.back().value;
  }
  scale = std::abs(scale);
  double total = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double lo = a + width * i;
    const double hi = i + 1 == panels ? b : a + width * (i + 1);
    total += adapt(f, lo, hi, pieces[static_cast<std::size_t>(i)], rel_tol, abs_tol, scale, 0);
  }
  return total;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double regularized_beta(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw Error(ErrorKind::Validation, "incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * beta_continued_fraction(x, a, b) / a;
  return 1.0 - std::exp(log_front) * beta_continued_fraction(1.0 - x, b, a) / b;
}

double f_sf(double f, double d1, double d2) {
  if (!(d1 > 0.0 && d2 > 0.0)) throw Error(ErrorKind::Validation, "F distribution needs positive degrees of freedom");
  if (!(f > 0.0)) return 1.0;
  if (std::isinf(f)) return 0.0;
  // P(F > f) = I_{d2/(d2 + d1 f)}(d2/2, d1/2)
  return regularized_beta(d2 / (d2 + d1 * f), 0.5 * d2, 0.5 * d1);
}

double t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw Error(ErrorKind::Validation, "t distribution needs positive degrees of freedom");
  if (std::isinf(t)) return 0.0;
  return regularized_beta(df / (df + t * t), 0.5 * df, 0.5);
}

double normal_range_sf(double w, int k) {
  if (k < 2) throw Error(ErrorKind::Validation, "range distribution needs k >= 2");
  if (!(w > 0.0)) return 1.0;
  // Integrand mass sits between the min and max of k normals: z in [-9, w + 9].
  const double lo = -9.0;
  const double hi = w + 9.0;
  const int panels = std::max(8, static_cast<int>(std::ceil((hi - lo) / 2.0)));
  const double v = integrate([&](double z) { return range_tail_integrand(z, w, k); }, lo, hi, 1e-13, 0.0, panels);
  return std::clamp(v, 0.0, 1.0);
}

double studentized_range_sf(double q, int k, double df) {
  if (k < 2) throw Error(ErrorKind::Validation, "studentized range needs k >= 2");
  if (!(df > 0.0)) throw Error(ErrorKind::Validation, "studentized range needs df > 0");
  if (!(q > 0.0)) return 1.0;
  if (std::isinf(df)) return normal_range_sf(q, k);

  // s = sqrt(chi2_df / df) has log-density
  //   (df/2) log df - lgamma(df/2) - (df/2 - 1) log 2 + (df - 1) log s - df s^2 / 2.
  const double log_norm = 0.5 * df * std::log(df) - std::lgamma(0.5 * df) - (0.5 * df - 1.0) * std::log(2.0);
  auto integrand = [&](double s) {
    if (s <= 0.0) return 0.0;
    const double log_density = log_norm + (df - 1.0) * std::log(s) - 0.5 * df * s * s;
    const double density = std::exp(log_density);
    if (density == 0.0) return 0.0;
    return density * normal_range_sf(q * s, k);
  };
  const double hi = std::max(3.0, 1.0 + 14.0 / std::sqrt(df));
  const double v = integrate(integrand, 0.0, hi, 1e-12, 0.0, 32);
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace canopy::stats
