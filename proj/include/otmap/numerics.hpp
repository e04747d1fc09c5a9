#pragma once

#include <functional>
#include <span>
#include <vector>

namespace otmap {

/// Adaptive Gauss-Kronrod (61 point) quadrature on [a, b].
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-13);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights);

/// Least-squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

/// Linear-interpolated quantile of a sample, p in [0, 1].
double quantile(std::vector<double> values, double p);

double median(std::vector<double> values);

}  // namespace otmap
