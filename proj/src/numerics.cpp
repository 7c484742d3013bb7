#include "pathweight/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pathweight/errors.hpp"

namespace pathweight {

namespace {

double pairwise_sum_impl(const double* data, std::size_t n) {
    if (n <= 16) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += data[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum_impl(data, half) + pairwise_sum_impl(data + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
    return pairwise_sum_impl(values.data(), values.size());
}

double mean(std::span<const double> values) {
    if (values.empty()) throw InputError("mean of an empty sample");
    return pairwise_sum(values) / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
    const std::size_t k = values.size();
    if (k < 2) return 0.0;
    const double m = mean(values);
    std::vector<double> sq(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double c = values[i] - m;
        sq[i] = c * c;
    }
    return pairwise_sum(sq) / static_cast<double>(k - 1);
}

double trapezoid(std::span<const double> nodes, std::span<const double> values) {
    if (nodes.size() != values.size()) throw InputError("trapezoid: node/value length mismatch");
    double s = 0.0;
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        s += 0.5 * (nodes[i] - nodes[i - 1]) * (values[i] + values[i - 1]);
    }
    return s;
}

QuadratureRule gauss_legendre(int n, double a, double b) {
    if (n < 1) throw InputError("gauss_legendre: need at least one node");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.nodes[i] = mid - half * z;
        rule.nodes[n - 1 - i] = mid + half * z;
        rule.weights[i] = half * w;
        rule.weights[n - 1 - i] = half * w;
    }
    return rule;
}

double integrate_piecewise(const std::function<double(double)>& fn, double a, double b,
                           std::span<const double> breakpoints, int panels, int n) {
    if (!(b >= a)) throw InputError("integrate_piecewise: b < a");
    std::vector<double> cuts{a};
    for (double c : breakpoints) {
        if (c > a && c < b) cuts.push_back(c);
    }
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    const QuadratureRule ref = gauss_legendre(n, 0.0, 1.0);
    double total = 0.0;
    for (std::size_t s = 1; s < cuts.size(); ++s) {
        const double lo = cuts[s - 1];
        const double width = (cuts[s] - lo) / panels;
        if (width <= 0.0) continue;
        for (int p = 0; p < panels; ++p) {
            const double left = lo + p * width;
            for (int q = 0; q < n; ++q) {
                total += width * ref.weights[q] * fn(left + width * ref.nodes[q]);
            }
        }
    }
    return total;
}

}  // namespace pathweight
