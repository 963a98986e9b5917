#pragma once

#include <functional>

namespace canopy::stats {

/// Adaptive Gauss-Kronrod (7/15) quadrature on [a, b], splitting [a, b]
/// into `panels` equal pieces first. Converges when each piece's error
/// estimate is below max(abs_tol, rel_tol * |running total|).
double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-13,
                 double abs_tol = 0.0, int panels = 8);

/// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
double regularized_beta(double x, double a, double b);

/// Standard normal CDF and upper tail, both accurate in the far tails.
double normal_cdf(double x);
double normal_sf(double x);

/// P(F > f) for an F(d1, d2) variate.
double f_sf(double f, double d1, double d2);

/// Two-sided P(|T| > t) for Student's t with df degrees of freedom.
double t_two_sided_p(double t, double df);

/// P(range of k iid standard normals > w).
double normal_range_sf(double w, int k);

/// P(Q > q) for the studentized range with k means and df error degrees of
/// freedom. df may be +infinity, in which case this reduces to normal_range_sf.
double studentized_range_sf(double q, int k, double df);

}  // namespace canopy::stats
