#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace pathweight {

// Pairwise (cascade) summation. The association order depends only on the
// length of the input, so results are reproducible.
double pairwise_sum(std::span<const double> values);

double mean(std::span<const double> values);

// Unbiased (k-1) sample variance; 0 for fewer than two values.
double sample_variance(std::span<const double> values);

// Composite trapezoid rule on arbitrary (strictly increasing) nodes.
double trapezoid(std::span<const double> nodes, std::span<const double> values);

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [a, b].
QuadratureRule gauss_legendre(int n, double a, double b);

// Integral of fn over [a, b] split at the given breakpoints, with an n-point
// Gauss-Legendre rule on each of `panels` sub-panels per segment. Endpoints
// and breakpoints are never evaluated, so jump discontinuities placed at
// breakpoints are integrated without one-sided ambiguity.
double integrate_piecewise(const std::function<double(double)>& fn, double a, double b,
                           std::span<const double> breakpoints, int panels = 64, int n = 8);

}  // namespace pathweight
