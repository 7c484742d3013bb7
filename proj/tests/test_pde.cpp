#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "pathweight/bounds.hpp"
#include "pathweight/errors.hpp"
#include "pathweight/estimators.hpp"
#include "pathweight/models.hpp"
#include "pathweight/pde.hpp"
#include "pathweight/sde.hpp"

using namespace pathweight;
using sde::ControlField;
using sde::StoppingSpec;
using sde::TimeGrid;

namespace {

ControlField constant_field(double eps) {
    return ControlField::analytic(1, [eps](std::span<const double>, double, std::span<double> out) { out[0] = eps; });
}

ControlField sine_field(double eps, double freq) {
    return ControlField::analytic(1, [eps, freq](std::span<const double> x, double, std::span<double> out) {
        out[0] = eps * std::sin(freq * x[0]);
    });
}

double control_gap(const pde::PdeSolution& hjb, const pde::SmallNoiseV0& v0, double eta) {
    const auto& g = hjb.grid();
    const auto& table = hjb.control_table();
    double gap = 0.0;
    for (int n = 0; n <= g.nt(); ++n)
        for (int i = 0; i < g.nx(); ++i) {
            const double x = g.x(i);
            if (x < 0.05 || x > 1.0) continue;
            const double u = table[static_cast<std::size_t>(n) * g.nx() + i] * std::sqrt(eta);
            gap = std::max(gap, std::abs(u - v0.u0(x, g.t(n))));
        }
    return gap;
}

}  // namespace

TEST_SUITE("pde") {
    TEST_CASE("psi is one for a vanishing payoff") {
        const models::DoubleWell dw;
        const auto sol = pde::solve_psi_backward(dw.model(), {}, [](std::span<const double>) { return 0.0; }, dw.grid(201, 100));
        for (double v : sol.field()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(sol.kind() == pde::FieldKind::psi);
        for (double u : sol.control_table()) CHECK(std::abs(u) < 1e-10);
    }

    TEST_CASE("Thomas solver") {
        const std::vector<double> lo{0.0, -1.0, -1.0, -1.0}, diag{4.0, 4.0, 4.0, 4.0}, up{-1.0, -1.0, -1.0, 0.0};
        const std::vector<double> x{1.0, -2.0, 0.5, 3.0};
        std::vector<double> rhs(4);
        for (int i = 0; i < 4; ++i) {
            rhs[i] = diag[i] * x[i];
            if (i > 0) rhs[i] += lo[i] * x[i - 1];
            if (i < 3) rhs[i] += up[i] * x[i + 1];
        }
        const auto sol = pde::thomas(lo, diag, up, rhs);
        for (int i = 0; i < 4; ++i) CHECK(sol[i] == doctest::Approx(x[i]).epsilon(1e-14));
    }

    TEST_CASE("scalar OU control from psi") {
        const double a = -1.0, b = 0.8;
        const auto ou = models::make_ou_scalar(a, b, 1.0, 1.0);
        const pde::Grid1D grid(-4.0, 4.0, 801, 1000, 1.0);
        const auto sol = pde::solve_psi_backward(ou.model(), {}, ou.g(), grid);
        const auto& table = sol.control_table();
        for (int n = 0; n < grid.nt(); n += 50)
            for (int i = 0; i < grid.nx(); ++i) {
                const double x = grid.x(i);
                if (std::abs(x) > 2.0) continue;
                const double exact = ou.u_star(grid.t(n))(0);
                CHECK(table[static_cast<std::size_t>(n) * grid.nx() + i] == doctest::Approx(exact).epsilon(0.01));
            }
        const double exact_psi = std::exp(0.5 * b * b * (std::exp(2.0 * a) - 1.0) / (2.0 * a));
        CHECK(sol.interpolate(0.0, 0.0) == doctest::Approx(exact_psi).epsilon(0.01));
    }

    TEST_CASE("elliptic exit problem") {
        const auto cf = pde::hitting_closedform(1.0);
        const auto g = pde::solve_hitting_elliptic(1.0, 401);
        REQUIRE(g.x.size() == 401);
        for (std::size_t i = 0; i < g.x.size(); ++i) CHECK(g.values[i] == doctest::Approx(cf.psi(g.x[i])).epsilon(0.005));
        CHECK(g.values.front() == doctest::Approx(1.0));
        CHECK(cf.u_star(0.0) == 0.0);
        CHECK(pde::hitting_u_star_exponential_form(0.0) == 0.0);
        for (double x = -1.0; x <= 1.0; x += 0.01)
            CHECK(std::abs(cf.u_star(x) - pde::hitting_u_star_exponential_form(x)) < 1e-14);
        CHECK_THROWS_AS(pde::hitting_closedform(0.0), InputError);
    }

    TEST_CASE("zero viscosity value function") {
        const auto v0 = pde::smallnoise_v0(1.0, 1.0);
        for (double x : {-0.7, -0.2, 0.0, 0.3, 0.9}) CHECK(v0.V(x, 1.0) == doctest::Approx(v0.g(x)).epsilon(1e-15));
        CHECK(v0.V(1.0, 0.0) == 0.0);
        CHECK(v0.V(-1.0, 0.4) == 0.0);
        CHECK(v0.V(0.0, 0.0) == doctest::Approx(0.25).epsilon(1e-15));
        CHECK(v0.u0(0.5, 0.0) == doctest::Approx(0.25).epsilon(1e-14));
        const auto v4 = pde::smallnoise_v0(4.0, 1.0);
        CHECK(v4.V(2.0, 0.5) == 0.0);
        CHECK(v4.g(0.0) == doctest::Approx(2.0));
    }

    TEST_CASE("small-noise HJB terminal slice and control gap") {
        const double alpha = 1.0;
        const auto v0 = pde::smallnoise_v0(alpha, 1.0);
        {
            const models::SmallNoise sn{10.0, alpha, 0.1, 1.0};
            const auto sol = pde::solve_hjb_smallnoise(10.0, alpha, sn.grid(801, 200));
            const auto& g = sol.grid();
            for (int i = 0; i < g.nx(); i += 10) CHECK(sol.at(g.nt(), i) == doctest::Approx(v0.g(g.x(i))).epsilon(1e-10));
        }
        double prev = 1e300;
        for (double eta : {0.5, 0.1, 0.05}) {
            const models::SmallNoise sn{eta, alpha, 0.1, 1.0};
            const auto sol = pde::solve_hjb_smallnoise(eta, alpha, sn.grid(2001, 1000));
            const double gap = control_gap(sol, v0, eta);
            CHECK(gap < prev);
            prev = gap;
        }
        CHECK_THROWS_AS(pde::solve_hjb_smallnoise(0.0, alpha, models::SmallNoise{}.grid(101, 10)), InputError);
    }

    TEST_CASE("finite difference control gives a small relative error") {
        const models::SmallNoise sn{0.1, 1.0, 0.1, 1.0};
        const auto sol = pde::solve_hjb_smallnoise(sn.eta, sn.alpha, sn.grid());
        const auto b = sde::simulate_controlled(sn.model(), *sol.derived_control(), {}, sn.scaled_g(), TimeGrid(1.0, 1000),
                                                StoppingSpec::fixed(), 20000, 41);
        const auto e = estimators::importance_estimate(b);
        CHECK(e.rel_err_hat < 0.1);
        CHECK(e.z_hat == doctest::Approx(std::exp(-sol.interpolate(sn.x0, 0.0) / sn.eta)).epsilon(0.01));
    }

    TEST_CASE("h field") {
        const models::DoubleWell dw;
        const auto grid = dw.grid();
        const auto psi = pde::solve_psi_backward(dw.model(), {}, dw.g(), grid);
        const auto ustar = *psi.derived_control();

        const auto trivial = pde::solve_h_field(dw.model(), ustar, ControlField::zero(1), grid);
        for (double v : trivial.field()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

        const double eps = 0.3;
        const auto konst = pde::solve_h_field(dw.model(), ustar.minus(constant_field(eps)), constant_field(eps), grid);
        CHECK(konst.interpolate(dw.x0, 0.0) == doctest::Approx(std::exp(eps * eps)).epsilon(1e-6));
        CHECK(konst.kind() == pde::FieldKind::h_field);

        const auto delta = sine_field(eps, 3.0);
        const auto u = ustar.minus(delta);
        const auto h = pde::solve_h_field(dw.model(), u, delta, grid);
        const double r_pde = std::sqrt(h.interpolate(dw.x0, 0.0) - 1.0);
        const bounds::McSettings mc{TimeGrid(1.0, 1000), 100000, 42};
        const auto f2 = bounds::exact_error_mc(dw.model(), u, delta, bounds::ExactForm::under_u_plus_2delta, mc);
        CHECK(r_pde == doctest::Approx(f2.value).epsilon(0.15));
    }

    TEST_CASE("second moment") {
        const models::DoubleWell dw;
        const auto grid = dw.grid();
        const auto one = pde::solve_second_moment(dw.model(), ControlField::zero(1), {}, {}, grid);
        for (double v : one.field()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

        const auto psi = pde::solve_psi_backward(dw.model(), {}, dw.g(), grid);
        const auto ustar = *psi.derived_control();
        const double p0 = psi.interpolate(dw.x0, 0.0);
        const auto m_opt = pde::solve_second_moment(dw.model(), ustar, {}, dw.g(), grid);
        CHECK(m_opt.interpolate(dw.x0, 0.0) == doctest::Approx(p0 * p0).epsilon(0.01));

        const auto delta = sine_field(0.3, 3.0);
        const auto u = ustar.minus(delta);
        const auto m = pde::solve_second_moment(dw.model(), u, {}, dw.g(), grid);
        const auto h = pde::solve_h_field(dw.model(), u, delta, grid);
        CHECK(m.interpolate(dw.x0, 0.0) / (p0 * p0) == doctest::Approx(h.interpolate(dw.x0, 0.0)).epsilon(0.01));
    }

    TEST_CASE("grid refinement changes psi by less than half a percent") {
        const models::DoubleWell dw;
        const auto grid = dw.grid(301, 500);
        const auto coarse = pde::solve_psi_backward(dw.model(), {}, dw.g(), grid);
        const auto fine = pde::solve_psi_backward(dw.model(), {}, dw.g(), grid.refined());
        for (double x : {-1.0, -0.5, 0.0, 0.5, 1.0})
            CHECK(coarse.interpolate(x, 0.0) == doctest::Approx(fine.interpolate(x, 0.0)).epsilon(0.005));
        CHECK(grid.refined().nx() == 601);
        CHECK(grid.refined().nt() == 1000);
    }

    TEST_CASE("naive relative error from psi") {
        models::DoubleWell dw;
        dw.rho = 3.0;
        const double r = pde::naive_relative_error(dw.model(), dw.g(), dw.grid(), dw.x0);
        const auto b = sde::simulate_controlled(dw.model(), ControlField::zero(1), {}, dw.g(), TimeGrid(1.0, 2000),
                                                StoppingSpec::fixed(), 100000, 43);
        CHECK(estimators::importance_estimate(b).rel_err_hat == doctest::Approx(r).epsilon(0.1));
    }

    TEST_CASE("CSV export") {
        const models::DoubleWell dw;
        const auto sol = pde::solve_psi_backward(dw.model(), {}, dw.g(), dw.grid(11, 4));
        const auto path = std::filesystem::temp_directory_path() / "pathweight_pde_export.csv";
        sol.write_csv(path.string());
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        CHECK(line == "t,x,value");
        int rows = 0;
        while (std::getline(in, line)) ++rows;
        CHECK(rows == 5 * 11);
        std::filesystem::remove(path);
    }

    TEST_CASE("invalid grids") {
        CHECK_THROWS_AS(pde::Grid1D(1.0, -1.0, 11, 10, 1.0), InputError);
        CHECK_THROWS_AS(pde::Grid1D(-1.0, 1.0, 2, 10, 1.0), InputError);
        CHECK_THROWS_AS(pde::Grid1D(-1.0, 1.0, 11, 0, 1.0), InputError);
    }
}
