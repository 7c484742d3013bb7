#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pathweight/bounds.hpp"
#include "pathweight/estimators.hpp"
#include "pathweight/harness.hpp"
#include "pathweight/measures.hpp"
#include "pathweight/models.hpp"
#include "pathweight/pde.hpp"
#include "pathweight/rng.hpp"
#include "pathweight/sde.hpp"

using namespace pathweight;
using sde::ControlField;
using sde::PathBatch;
using sde::StoppingSpec;
using sde::TimeGrid;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Every batch seen by any criterion; criterion 5 checks all of them.
std::vector<double> g_chi2_gaps;
std::size_t g_batches = 0;

double chi2_gap(const PathBatch& b) {
    const auto lw = b.log_weighted_payoff();
    const auto est = estimators::estimate_from_log_weights(lw);
    const double chi2 = estimators::chi2_hat(b);
    double shift = -INFINITY;
    for (double v : lw) shift = std::max(shift, v);
    std::vector<long double> w(lw.size());
    long double s1 = 0.0L;
    for (std::size_t i = 0; i < lw.size(); ++i) {
        w[i] = std::exp(static_cast<long double>(lw[i] - shift));
        s1 += w[i];
    }
    const long double k = static_cast<long double>(lw.size());
    const long double m = s1 / k;
    long double ss = 0.0L;
    for (long double v : w) ss += (v - m) * (v - m);
    const long double var = ss / (k - 1.0L);
    const double independent = static_cast<double>(var / (m * m));
    const double r2 = est.rel_err_hat * est.rel_err_hat;
    const double scale = std::max(r2, 1e-300);
    return std::max(std::abs(chi2 - r2) / scale, std::abs(independent - r2) / std::max(scale, 1e-8));
}

PathBatch record(PathBatch b) {
    g_chi2_gaps.push_back(chi2_gap(b));
    ++g_batches;
    return b;
}

ControlField constant_field(int d, double eps) {
    return ControlField::analytic(d, [eps](std::span<const double>, double, std::span<double> out) {
        for (auto& v : out) v = eps;
    });
}

ControlField windowed_field(int d, double eps, double s) {
    return ControlField::analytic(d, [eps, s](std::span<const double>, double t, std::span<double> out) {
        for (auto& v : out) v = t < s ? eps : 0.0;
    });
}

std::string assertion_detail(const harness::ExperimentResult& r, const std::string& name, bool& ok) {
    for (const auto& a : r.assertions) {
        if (a.name == name) {
            ok = ok && a.passed;
            return name + (a.passed ? " ok" : " FAILED") + (a.detail.empty() ? "" : " (" + a.detail + ")");
        }
    }
    ok = false;
    return name + " missing";
}

Outcome criterion1() {
    const auto ou = models::make_ou(2, 101);
    const TimeGrid grid(1.0, 1000);
    const auto b = record(sde::simulate_controlled(ou.model(), ou.optimal_control(grid), {}, ou.g(), grid,
                                                   StoppingSpec::fixed(), 100000, 102));
    const auto e = estimators::importance_estimate(b);
    const Eigen::MatrixXd S = oracle::lyapunov_integral(ou.A, ou.B, 1.0, 20000);
    const double z = std::exp(0.5 * ou.alpha.dot(S * ou.alpha));
    const double dev = std::abs(e.z_hat - z) / e.stderr_z;
    return {e.rel_err_hat < 0.05 && dev <= 3.0,
            fmt("rel_err = %.4g (< 0.05), z_hat = %.10g, oracle = %.10g, |dev| = %.2f stderr (<= 3)", e.rel_err_hat,
                e.z_hat, z, dev)};
}

Outcome criterion2() {
    bool ok = true;
    std::string worst;
    double worst_rel = 0.0;
    for (int d : {1, 2, 4, 8}) {
        const auto ou = models::make_ou(d, derive_seed(201, static_cast<std::uint64_t>(d)));
        const TimeGrid grid(1.0, 250);
        const auto ustar = ou.optimal_control(grid);
        for (double eps : {0.1, 0.2, 0.3}) {
            const auto b = record(sde::simulate_controlled(ou.model(), ustar.plus(constant_field(d, eps)), {}, ou.g(),
                                                           grid, StoppingSpec::fixed(), 1000000,
                                                           derive_seed(202, static_cast<std::uint64_t>(d * 100 + eps * 10))));
            const double r = estimators::importance_estimate(b).rel_err_hat;
            const double exact = bounds::constant_delta_exact(eps, d, 1.0);
            const double rel = std::abs(r - exact) / exact;
            ok = ok && rel <= 0.10;
            if (rel >= worst_rel) {
                worst_rel = rel;
                worst = fmt("d = %d, eps = %.1f: r = %.4g vs %.4g", d, eps, r, exact);
            }
        }
    }
    return {ok, fmt("12 configurations, worst relative deviation %.3g (<= 0.10) at ", worst_rel) + worst};
}

Outcome criterion3() {
    bool ok = true;
    std::string worst;
    double worst_rel = 0.0;
    const double s = 0.2;
    for (int d : {1, 2, 4}) {
        const auto ou = models::make_ou(d, derive_seed(301, static_cast<std::uint64_t>(d)));
        const TimeGrid grid(1.0, 1000);
        const auto ustar = ou.optimal_control(grid);
        for (double eps : {0.1, 0.3, 0.5}) {
            const auto b = record(sde::simulate_controlled(ou.model(), ustar.plus(windowed_field(d, eps, s)), {}, ou.g(),
                                                           grid, StoppingSpec::fixed(), 200000,
                                                           derive_seed(302, static_cast<std::uint64_t>(d * 100 + eps * 10))));
            const double r = estimators::importance_estimate(b).rel_err_hat;
            const double exact = std::sqrt(std::expm1(d * eps * eps * s));
            const double rel = std::abs(r - exact) / exact;
            ok = ok && rel <= 0.10;
            if (rel >= worst_rel) {
                worst_rel = rel;
                worst = fmt("d = %d, eps = %.1f: r = %.4g vs %.4g", d, eps, r, exact);
            }
        }
    }
    return {ok, fmt("9 configurations, worst relative deviation %.3g (<= 0.10) at ", worst_rel) + worst};
}

Outcome criterion4() {
    const models::DoubleWell dw;
    const auto psi = pde::solve_psi_backward(dw.model(), {}, dw.g(), dw.grid());
    const auto ustar = *psi.derived_control();
    const TimeGrid grid(1.0, 2000);
    const double alpha = 50.0;
    bool ok = true;
    std::string detail;
    for (double eps : {0.25, 0.5, 1.0}) {
        const auto u = ustar.plus(ControlField::analytic(1, [eps, alpha](std::span<const double>, double t, std::span<double> out) {
            out[0] = eps * std::sin(alpha * t);
        }));
        const auto b = record(sde::simulate_controlled(dw.model(), u, {}, dw.g(), grid, StoppingSpec::fixed(), 100000,
                                                       derive_seed(401, static_cast<std::uint64_t>(eps * 100))));
        const double r = estimators::importance_estimate(b).rel_err_hat;
        const double exact = bounds::sine_perturbation_error(eps, alpha, 1.0);
        const double rel = std::abs(r - exact) / exact;
        ok = ok && rel <= 0.10;
        detail += fmt("eps = %.2f: r = %.4g vs %.4g (%.3g); ", eps, r, exact, rel);
    }
    // Composite Simpson rule for int_0^1 sin^2(50 t) dt.
    const int n = 200000;
    double simpson = 0.0;
    for (int j = 0; j <= n; ++j) {
        const double s = std::sin(alpha * j / n);
        simpson += (j == 0 || j == n ? 1.0 : (j % 2 ? 4.0 : 2.0)) * s * s;
    }
    simpson /= 3.0 * n;
    const double oracle = std::sqrt(std::expm1(simpson));
    const double at_one = bounds::sine_perturbation_error(1.0, alpha, 1.0);
    ok = ok && std::abs(at_one - oracle) <= 1e-10;
    return {ok, detail + fmt("closed form at (1, 50, 1) = %.6f, quadrature oracle %.6f (printed 0.8081)", at_one, oracle)};
}

Outcome criterion5() {
    {
        const auto ou = models::make_ou(3, 501);
        const TimeGrid grid(1.0, 200);
        for (double eps : {0.0, 0.3, 1.0})
            record(sde::simulate_controlled(ou.model(), ou.optimal_control(grid).plus(constant_field(3, eps)), {}, ou.g(),
                                           grid, StoppingSpec::fixed(), 50000, derive_seed(502, static_cast<std::uint64_t>(eps * 10))));
        const models::DoubleWell dw;
        record(sde::simulate_controlled(dw.model(), ControlField::zero(1), {}, dw.g(), grid, StoppingSpec::fixed(), 50000, 503));
        record(sde::brownian_exit_simulate(0.5, sde::HittingControl::perturbed, StoppingSpec::first_exit(-1.0, 1.0, 100.0),
                                           1e-3, 20000, 504));
    }
    double worst = 0.0;
    for (double g : g_chi2_gaps) worst = std::max(worst, g);
    return {worst <= 1e-12, fmt("%zu batches, largest relative gap between chi2_hat, an independent long double "
                                "recomputation and rel_err_hat^2: %.3g (<= 1e-12)",
                                g_batches, worst)};
}

Outcome criterion6() {
    Substream rng(601, 0);
    int violations = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 1 + static_cast<int>(rng.below(16));
        const double eps = 0.8 * rng.uniform();
        const double T = 0.1 + 3.0 * rng.uniform();
        const double I = d * eps * eps * T;
        const double exact = bounds::constant_delta_exact(eps, d, T);
        if (!(measures::kl_lower_bound(0.5 * I) <= exact && exact <= bounds::holder_analytic(I))) ++violations;
    }
    return {violations == 0, fmt("%d of 50 randomized configurations violate kl_lower <= exact <= holder", violations)};
}

Outcome criterion7() {
    const double dt = 1e-4;
    const auto stopping = StoppingSpec::first_exit(-1.0, 1.0, 100.0);
    const std::size_t k = 100000;
    const auto plain = record(sde::brownian_exit_simulate(0.0, sde::HittingControl::naive, stopping, dt, k, 701));
    const auto naive = estimators::importance_estimate(plain);
    const double psi0 = 1.0 / std::cosh(1.0);
    const double naive_dev = std::abs(naive.z_hat - psi0) / naive.stderr_z;
    bool ok = naive_dev <= 3.0;
    std::string detail = fmt("naive z = %.6f vs %.6f (%.2f stderr); ", naive.z_hat, psi0, naive_dev);
    for (double eps : {0.25, 0.5, 0.75}) {
        const auto tag = static_cast<std::uint64_t>(eps * 100);
        const auto direct = record(sde::brownian_exit_simulate(eps, sde::HittingControl::perturbed, stopping, dt, k,
                                                               derive_seed(702, tag)));
        const auto mirrored = record(sde::brownian_exit_simulate(eps, sde::HittingControl::mirrored, stopping, dt, k,
                                                                 derive_seed(703, tag)));
        const double r = estimators::importance_estimate(direct).rel_err_hat;
        const auto rep = bounds::hitting_error(eps, mirrored, plain, derive_seed(704, tag));
        const double rel = std::abs(rep.exact.value - r) / r;
        ok = ok && rel <= 0.15 && rep.jensen_lower.value <= rep.exact.value;
        detail += fmt("eps = %.2f: exact %.4g vs direct %.4g (%.3g), jensen %.4g; ", eps, rep.exact.value, r, rel,
                      rep.jensen_lower.value);
        if (eps == 0.75) {
            const double sep = std::abs(rep.naive_wrong.value - rep.exact.value) /
                               std::hypot(*rep.naive_wrong.std_error, *rep.exact.std_error);
            ok = ok && sep > 4.0;
            detail += fmt("naive_wrong %.4g separated by %.1f stderr (> 4)", rep.naive_wrong.value, sep);
        }
    }
    return {ok, detail};
}

Outcome criterion8() {
    const models::DoubleWell dw;
    const auto run = [&](const pde::Grid1D& grid) {
        const auto psi = pde::solve_psi_backward(dw.model(), {}, dw.g(), grid);
        const auto ustar = *psi.derived_control();
        const auto delta = constant_field(1, -0.3);
        const auto u = ustar.minus(delta);
        auto h = pde::solve_h_field(dw.model(), u, delta, grid);
        auto m = pde::solve_second_moment(dw.model(), u, {}, dw.g(), grid);
        return std::make_tuple(psi, h, m, u, delta);
    };
    const auto grid = dw.grid();
    const auto [psi, h, m, u, delta] = run(grid);
    const double r_pde = std::sqrt(h.interpolate(dw.x0, 0.0) - 1.0);
    const bounds::McSettings mc{TimeGrid(1.0, 2000), 100000, 801};
    const auto f2 = bounds::exact_error_mc(dw.model(), u, delta, bounds::ExactForm::under_u_plus_2delta, mc);
    const double rel_h = std::abs(r_pde - f2.value) / f2.value;

    double sup_rel = 0.0;
    for (int n = 0; n <= grid.nt(); ++n) {
        double num = 0.0, den = 0.0;
        for (int i = 0; i < grid.nx(); ++i) {
            if (std::abs(grid.x(i)) > 1.5) continue;
            const double target = h.at(n, i) * psi.at(n, i) * psi.at(n, i);
            num = std::max(num, std::abs(m.at(n, i) - target));
            den = std::max(den, std::abs(target));
        }
        sup_rel = std::max(sup_rel, num / den);
    }

    const auto [psi2, h2, m2, u2, d2] = run(grid.refined());
    double halving = 0.0;
    for (double x : {-1.5, -1.0, 0.0, 1.0, 1.5}) {
        halving = std::max(halving, std::abs(psi2.interpolate(x, 0.0) / psi.interpolate(x, 0.0) - 1.0));
        halving = std::max(halving, std::abs(h2.interpolate(x, 0.0) / h.interpolate(x, 0.0) - 1.0));
        halving = std::max(halving, std::abs(m2.interpolate(x, 0.0) / m.interpolate(x, 0.0) - 1.0));
    }
    const bool ok = rel_h <= 0.15 && sup_rel <= 0.01 && halving < 0.005;
    return {ok, fmt("sqrt(h - 1) = %.5g vs form 2 %.5g (%.3g <= 0.15); M vs h psi^2 inner sup %.3g (<= 0.01); "
                    "grid halving %.3g (< 0.005)",
                    r_pde, f2.value, rel_h, sup_rel, halving)};
}

harness::ExperimentResult run(const std::string& exp, std::size_t k, const std::string& sweep = "",
                              std::function<void(harness::ExperimentConfig&)> tweak = {}) {
    harness::ExperimentConfig c;
    c.experiment = exp;
    c.k = k;
    c.k_explicit = true;
    if (!sweep.empty()) c.sweep = harness::parse_sweep(sweep);
    if (tweak) tweak(c);
    return harness::run_experiment(c);
}

Outcome criterion9() {
    bool ok = true;
    const auto eta = run("smallnoise_eta", 2000, "eta:0.5,0.1,0.05,0.01");
    std::string detail = "gaps";
    for (const auto& r : eta.rows) detail += fmt(" %.4g", r.bound("control_gap"));
    detail += "; " + assertion_detail(eta, "control_gap_decreases_with_eta", ok);
    const auto T = run("smallnoise_T", 1000000, "T:0.5,1,2,4");
    detail += "; r(T)";
    for (const auto& r : T.rows) detail += fmt(" %.4g", r.estimate);
    detail += "; " + assertion_detail(T, "rel_err_nondecreasing_in_T", ok);
    return {ok, detail};
}

Outcome criterion10() {
    bool ok = true;
    std::string detail;
    const auto describe = [&](const harness::ExperimentResult& r, const char* label) {
        detail += std::string(label) + " pde";
        for (const auto& row : r.rows) detail += fmt(" %.4g", row.bound("pde"));
        detail += " sampled";
        for (const auto& row : r.rows) detail += fmt(" %.4g", row.estimate);
        detail += "; " + assertion_detail(r, "naive_r_nondecreasing_pde", ok);
        detail += "; " + assertion_detail(r, "naive_r_nondecreasing_sampled", ok) + "; ";
    };
    describe(run("doublewell_naive", 100000, "kappa:0.5,1,2,3"), "kappa (rho = 3):");
    describe(run("doublewell_naive", 100000, "rho:0.5,1,2,3"), "rho (kappa = 1):");
    const auto mult = run("doublewell_multiplicative", 100000, "zeta:0.6,0.7,0.8,0.9,1,1.1,1.2,1.3,1.4");
    detail += "zeta sampled";
    for (const auto& row : mult.rows) detail += fmt(" %.4g", row.estimate);
    detail += "; " + assertion_detail(mult, "sampled_minimum_at_zeta_1", ok);
    return {ok, detail};
}

Outcome criterion11() {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    Substream rng(1101, 0);
    const auto rvec = [&rng](int d) {
        VectorXd v(d);
        for (int i = 0; i < d; ++i) v[i] = rng.normal();
        return v;
    };
    double worst_kl = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const MatrixXd cp = oracle::random_spd(3, rng), cq = oracle::random_spd(3, rng);
        const VectorXd mp = rvec(3), mq = rvec(3);
        const double closed = measures::gaussian_kl(measures::GaussianMeasure(mp, cp), measures::GaussianMeasure(mq, cq));
        const double quad = oracle::kl_quadrature_3d(mp, cp, mq, cq);
        worst_kl = std::max(worst_kl, std::abs(closed - quad) / quad);
    }
    int chain_violations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + static_cast<int>(rng.below(8));
        const measures::GaussianMeasure p(rvec(d), oracle::random_spd(d, rng));
        const measures::GaussianMeasure q(rvec(d), oracle::random_spd(d, rng));
        const auto chain = measures::kl_marginal_chain(p, q);
        for (std::size_t j = 1; j < chain.size(); ++j)
            if (chain[j] < chain[j - 1]) ++chain_violations;
    }
    const measures::ParetoDensity p(1.5), q(3.0);
    const auto ext = measures::density_ratio_extremes(p.tabulate(1e4, 4001), q.tabulate(1e4, 4001));
    const double pareto_rel = std::abs(ext.M_hat / (1e6 / 2.0) - 1.0);
    const bool ok = worst_kl <= 1e-6 && chain_violations == 0 && pareto_rel <= 1e-9;
    return {ok, fmt("KL vs quadrature worst %.3g (<= 1e-6); chain violations %d of 100 pairs; "
                    "Pareto sup %.12g (rel %.3g <= 1e-9)",
                    worst_kl, chain_violations, ext.M_hat, pareto_rel)};
}

Outcome criterion12() {
    const int saved = omp_get_max_threads();
    int mismatches = 0;
    std::string detail;
    const std::vector<std::pair<std::string, std::function<void(harness::ExperimentConfig&)>>> cases = {
        {"gaussian_dim_sweep", [](harness::ExperimentConfig& c) { c.k = 20000; }},
        {"ou_perturbation", [](harness::ExperimentConfig& c) { c.k = 5000; c.n_steps = 100; }},
        {"doublewell_sine_space", [](harness::ExperimentConfig& c) { c.k = 3000; c.n_steps = 200; }},
        {"hitting_sweep", [](harness::ExperimentConfig& c) {
             c.k = 500;
             c.dt = 1e-3;
             c.sweep = harness::parse_sweep("eps:0.5");
         }},
    };
    for (const auto& [exp, tweak] : cases) {
        std::vector<std::string> csvs;
        for (int threads : {1, 4, 4, 2}) {
            omp_set_num_threads(threads);
            harness::ExperimentConfig c;
            c.experiment = exp;
            c.k_explicit = true;
            tweak(c);
            csvs.push_back(harness::render_csv(harness::run_experiment(c)));
        }
        bool same = true;
        for (const auto& s : csvs) same = same && s == csvs.front();
        if (!same) ++mismatches;
        detail += exp + (same ? " identical" : " DIFFERS") + "; ";
    }
    omp_set_num_threads(saved);
    return {mismatches == 0, detail + "threads 1, 4, 4, 2"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only;
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3, criterion4,
                                                            criterion5, criterion6, criterion7, criterion8,
                                                            criterion9, criterion10, criterion11, criterion12};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s criterion %d: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
