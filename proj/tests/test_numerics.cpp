#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "pathweight/errors.hpp"
#include "pathweight/numerics.hpp"

using namespace pathweight;

TEST_SUITE("numerics") {
    TEST_CASE("pairwise sum matches exact integer sums") {
        std::vector<double> v(1001);
        std::iota(v.begin(), v.end(), 0.0);
        CHECK(pairwise_sum(v) == 500500.0);
        CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
    }

    TEST_CASE("pairwise sum is more accurate than naive accumulation") {
        std::vector<double> v(1 << 20, 0.1);
        const double exact = 0.1 * (1 << 20);
        double naive = 0.0;
        for (double x : v) naive += x;
        CHECK(std::abs(pairwise_sum(v) - exact) <= std::abs(naive - exact));
        CHECK(std::abs(pairwise_sum(v) - exact) < 1e-9);
    }

    TEST_CASE("mean and unbiased variance") {
        const std::vector<double> v{1, 2, 3, 4};
        CHECK(mean(v) == 2.5);
        CHECK(sample_variance(v) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
        CHECK(sample_variance(std::vector<double>{7.0}) == 0.0);
        CHECK_THROWS_AS(mean(std::vector<double>{}), InputError);
    }

    TEST_CASE("trapezoid is exact for linear functions") {
        const std::vector<double> x{0.0, 0.3, 1.0, 2.5};
        std::vector<double> y;
        for (double t : x) y.push_back(2 * t + 1);
        CHECK(trapezoid(x, y) == doctest::Approx(2.5 * 2.5 + 2.5).epsilon(1e-14));
    }

    TEST_CASE("gauss legendre integrates polynomials exactly") {
        const auto r = gauss_legendre(5, -1.0, 2.0);
        double s = 0.0;
        for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], 9);
        CHECK(s == doctest::Approx((std::pow(2.0, 10) - 1.0) / 10.0).epsilon(1e-13));
    }

    TEST_CASE("piecewise integration handles jumps at breakpoints") {
        const std::vector<double> bp{0.2};
        const double v = integrate_piecewise([](double t) { return t < 0.2 ? 3.0 : 0.0; }, 0.0, 1.0, bp);
        CHECK(v == doctest::Approx(0.6).epsilon(1e-14));
        const double s = integrate_piecewise([](double t) { return std::sin(t) * std::sin(t); }, 0.0, 1.0, {});
        CHECK(s == doctest::Approx(0.5 - std::sin(2.0) / 4.0).epsilon(1e-14));
    }
}
