#include "pathweight/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "pathweight/bounds.hpp"
#include "pathweight/errors.hpp"
#include "pathweight/estimators.hpp"
#include "pathweight/measures.hpp"
#include "pathweight/models.hpp"
#include "pathweight/numerics.hpp"
#include "pathweight/pde.hpp"
#include "pathweight/rng.hpp"
#include "pathweight/sde.hpp"

namespace pathweight::harness {

double SweepRow::bound(const std::string& name) const {
    for (const auto& [key, value] : bound_values) {
        if (key == name) return value;
    }
    throw InputError("row has no column '" + name + "'");
}

namespace {

using Clock = std::chrono::steady_clock;

struct ExperimentSpec {
    std::string name;
    std::vector<std::string> bound_columns;
    std::vector<std::string> sweepable;
    Sweep default_sweep;
};

const std::vector<ExperimentSpec>& registry() {
    static const std::vector<ExperimentSpec> specs = {
        {"ou_perturbation", {"exact", "kl_lower", "holder_upper"}, {"eps", "d"}, {"eps", {0, 0.1, 0.2, 0.3, 0.4, 0.5}}},
        {"ou_windowed", {"exact", "kl_lower", "holder_upper"}, {"eps", "d"}, {"eps", {0, 0.1, 0.2, 0.3, 0.4, 0.5}}},
        {"doublewell_naive", {"pde"}, {"kappa", "rho"}, {"kappa", {0.5, 1, 2, 3, 5}}},
        {"doublewell_multiplicative", {"pde"}, {"zeta"}, {"zeta", {0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4}}},
        {"doublewell_sine_time", {"exact", "kl_lower", "holder_upper"}, {"eps"}, {"eps", {0, 0.25, 0.5, 0.75, 1.0}}},
        {"doublewell_sine_space", {"kl_lower"}, {"eps"}, {"eps", {0, 0.25, 0.5, 0.75, 1.0}}},
        {"hitting_sweep",
         {"exact", "exact_stderr", "jensen_lower", "naive_wrong"},
         {"eps"},
         {"eps", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}}},
        {"smallnoise_eta", {"l2_exp", "control_gap"}, {"eta"}, {"eta", {0.5, 0.1, 0.05, 0.01}}},
        {"smallnoise_T", {}, {"T"}, {"T", {0.5, 1, 2, 4}}},
        {"gaussian_dim_sweep", {"exact", "kl_lower"}, {"d"}, {"d", {1, 2, 4, 8, 16}}},
    };
    return specs;
}

const ExperimentSpec& spec_for(const std::string& name) {
    for (const auto& s : registry()) {
        if (s.name == name) return s;
    }
    throw InputError("unknown experiment '" + name + "'");
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int as_int(double v, const std::string& what) {
    if (v != std::floor(v) || v < 1 || v > 4096) throw InputError(what + " must be a positive integer");
    return static_cast<int>(v);
}

double positive(double v, const std::string& what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError(what + " must be > 0");
    return v;
}

class Runner {
public:
    Runner(const ExperimentConfig& cfg, ExperimentResult& res, const RowCallback& cb)
        : cfg_(cfg), res_(res), cb_(cb), spec_(spec_for(cfg.experiment)) {
        k_ = cfg.k_explicit ? cfg.k : (cfg.full ? std::size_t{1000000} : cfg.k);
        res_.k = k_;
        res_.experiment = cfg.experiment;
        res_.columns = csv_columns(cfg.experiment);
        const Sweep sweep = cfg.sweep.value_or(spec_.default_sweep);
        if (std::find(spec_.sweepable.begin(), spec_.sweepable.end(), sweep.parameter) == spec_.sweepable.end()) {
            throw InputError("experiment '" + cfg.experiment + "' cannot sweep '" + sweep.parameter + "'");
        }
        sweep_ = sweep;
        res_.swept_parameter = sweep.parameter;
        res_.config.sweep = sweep;
        rows_root_ = derive_seed(cfg.seed, "rows");
        res_.sub_seeds["rows"] = rows_root_;
        res_.sub_seeds["bootstrap"] = derive_seed(cfg.seed, "bootstrap");
    }

    void run() {
        const std::string& e = cfg_.experiment;
        if (e == "ou_perturbation") ou(false);
        else if (e == "ou_windowed") ou(true);
        else if (e == "doublewell_naive") doublewell_naive();
        else if (e == "doublewell_multiplicative") doublewell_multiplicative();
        else if (e == "doublewell_sine_time") doublewell_sine(true);
        else if (e == "doublewell_sine_space") doublewell_sine(false);
        else if (e == "hitting_sweep") hitting();
        else if (e == "smallnoise_eta") smallnoise_eta();
        else if (e == "smallnoise_T") smallnoise_T();
        else if (e == "gaussian_dim_sweep") gaussian();
    }

private:
    bool swept(const char* name) const { return sweep_.parameter == name; }
    double value(std::size_t i, const char* name, const std::optional<double>& configured, double fallback) const {
        return swept(name) ? sweep_.values[i] : configured.value_or(fallback);
    }
    std::uint64_t row_seed(std::size_t i) const { return derive_seed(rows_root_, static_cast<std::uint64_t>(i)); }
    std::uint64_t boot_seed(std::size_t i) const { return derive_seed(res_.sub_seeds.at("bootstrap"), i); }

    template <class Fn>
    void for_each_row(Fn&& fn) {
        for (std::size_t i = 0; i < sweep_.values.size(); ++i) {
            const auto start = Clock::now();
            SweepRow row;
            row.swept_value = sweep_.values[i];
            try {
                fn(i, row);
            } catch (const NumericalError& err) {
                throw NumericalError(cfg_.experiment + " at " + sweep_.parameter + " = " + fmt(row.swept_value) + ": " +
                                     err.what());
            }
            row.wall_time_ms =
                std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
            res_.rows.push_back(row);
            if (cb_) cb_(res_.rows.back());
        }
    }

    // Relative error and bootstrap error of a simulated batch.
    void fill_estimate(SweepRow& row, const sde::PathBatch& batch, std::size_t i) const {
        if (!batch.complete) throw NumericalError("batch incomplete: paths reached the time cap");
        const std::vector<double> lw = batch.log_weighted_payoff();
        row.estimate = estimators::estimate_from_log_weights(lw).rel_err_hat;
        row.std_error = estimators::bootstrap_rel_err_stderr(lw, boot_seed(i), cfg_.bootstrap);
    }

    int n_steps() const {
        const bool double_well = cfg_.experiment.rfind("doublewell_", 0) == 0;
        return cfg_.n_steps.value_or(double_well ? 2000 : 1000);
    }

    void assert_orderings() {
        bool ok = true;
        std::string detail;
        for (const auto& r : res_.rows) {
            const double kl = r.bound("kl_lower");
            const double ex = r.bound("exact");
            const double ho = r.bound("holder_upper");
            if (!(kl <= ex && ex <= ho)) {
                ok = false;
                detail += "violated at " + fmt(r.swept_value) + "; ";
            }
        }
        res_.assertions.push_back({"bound_ordering_kl_exact_holder", ok, detail});
    }

    void assert_monotone(const std::string& name, const std::string& column) {
        bool ok = true;
        for (std::size_t i = 1; i < res_.rows.size(); ++i) {
            const double a = column.empty() ? res_.rows[i - 1].estimate : res_.rows[i - 1].bound(column);
            const double b = column.empty() ? res_.rows[i].estimate : res_.rows[i].bound(column);
            if (res_.rows[i].swept_value >= res_.rows[i - 1].swept_value ? b < a : b > a) ok = false;
        }
        res_.assertions.push_back({name, ok, ""});
    }

    // ---------------------------------------------------------------------

    void ou(bool windowed) {
        const double T = positive(cfg_.T.value_or(1.0), "T");
        const double s = cfg_.window.value_or(0.2);
        const std::uint64_t ou_seed = cfg_.ou_seed.value_or(derive_seed(cfg_.seed, "ou_matrices"));
        res_.sub_seeds["ou_matrices"] = ou_seed;
        res_.config.T = T;
        res_.config.n_steps = n_steps();
        if (windowed) res_.config.window = s;
        for_each_row([&](std::size_t i, SweepRow& row) {
            const int d = swept("d") ? as_int(sweep_.values[i], "d") : cfg_.d.value_or(1);
            const double eps = value(i, "eps", cfg_.eps, 0.2);
            const models::OuProblem problem = models::make_ou(d, ou_seed, T);
            res_.ou_resamples[std::to_string(d)] = problem.resamples;
            const sde::TimeGrid grid(T, n_steps());
            const sde::ControlField u = problem.optimal_control(grid).with_perturbation(
                [eps, s, d, windowed](std::span<const double>, double t, std::span<double> out) {
                    const double v = (!windowed || t < s) ? eps : 0.0;
                    for (int j = 0; j < d; ++j) out[j] = v;
                });
            const sde::PathBatch batch = sde::simulate_controlled(problem.model(), u, {}, problem.g(), grid,
                                                                  sde::StoppingSpec::fixed(), k_, row_seed(i));
            fill_estimate(row, batch, i);
            const double active = windowed ? std::clamp(s, 0.0, T) : T;
            const double integral = d * eps * eps * active;
            const double exact =
                windowed ? bounds::constant_delta_error(bounds::TimeEnvelope::window(std::sqrt(d) * std::abs(eps), s), T)
                         : bounds::constant_delta_exact(eps, d, T);
            row.bound_values = {{"exact", exact},
                                {"kl_lower", measures::kl_lower_bound(0.5 * integral)},
                                {"holder_upper", bounds::holder_analytic(integral)}};
        });
        assert_orderings();
    }

    models::DoubleWell double_well(std::size_t i) const {
        models::DoubleWell dw;
        dw.kappa = positive(value(i, "kappa", cfg_.kappa, 1.0), "kappa");
        // kappa sweeps default to rho = 3.
        const double rho_default = cfg_.experiment == "doublewell_naive" && swept("kappa") ? 3.0 : 1.0;
        dw.rho = positive(value(i, "rho", cfg_.rho, rho_default), "rho");
        dw.B = positive(cfg_.B.value_or(1.0), "B");
        dw.horizon = positive(cfg_.T.value_or(1.0), "T");
        return dw;
    }

    pde::Grid1D dw_grid(const models::DoubleWell& dw) const {
        return dw.grid(cfg_.nx.value_or(601), cfg_.nt.value_or(1000));
    }

    void record_dw_config() {
        const models::DoubleWell dw = double_well(0);
        if (!swept("kappa")) res_.config.kappa = dw.kappa;
        if (!swept("rho")) res_.config.rho = dw.rho;
        res_.config.B = dw.B;
        res_.config.T = dw.horizon;
        res_.config.n_steps = n_steps();
        res_.config.nx = cfg_.nx.value_or(601);
        res_.config.nt = cfg_.nt.value_or(1000);
    }

    void doublewell_naive() {
        record_dw_config();
        for_each_row([&](std::size_t i, SweepRow& row) {
            const models::DoubleWell dw = double_well(i);
            const sde::SdeModel model = dw.model();
            const sde::TimeGrid grid(dw.horizon, n_steps());
            const sde::PathBatch batch = sde::simulate_controlled(model, sde::ControlField::zero(1), {}, dw.g(), grid,
                                                                  sde::StoppingSpec::fixed(), k_, row_seed(i));
            fill_estimate(row, batch, i);
            row.bound_values = {{"pde", pde::naive_relative_error(model, dw.g(), dw_grid(dw), dw.x0)}};
        });
        assert_monotone("naive_r_nondecreasing_pde", "pde");
        assert_monotone("naive_r_nondecreasing_sampled", "");
    }

    void doublewell_multiplicative() {
        record_dw_config();
        const models::DoubleWell dw = double_well(0);
        const sde::SdeModel model = dw.model();
        const pde::Grid1D pgrid = dw_grid(dw);
        const pde::PdeSolution psi = pde::solve_psi_backward(model, {}, dw.g(), pgrid);
        const sde::ControlField u_star = *psi.derived_control();
        for_each_row([&](std::size_t i, SweepRow& row) {
            const double zeta = sweep_.values[i];
            const sde::ControlField u = u_star.scaled(zeta);
            const sde::ControlField delta = u_star.scaled(1.0 - zeta);
            const sde::TimeGrid grid(dw.horizon, n_steps());
            const sde::PathBatch batch =
                sde::simulate_controlled(model, u, {}, dw.g(), grid, sde::StoppingSpec::fixed(), k_, row_seed(i));
            fill_estimate(row, batch, i);
            const pde::PdeSolution h = pde::solve_h_field(model, u, delta, pgrid);
            row.bound_values = {{"pde", std::sqrt(std::max(h.interpolate(dw.x0, 0.0) - 1.0, 0.0))}};
        });
        const auto argmin = [this](bool use_pde) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < res_.rows.size(); ++i) {
                const double a = use_pde ? res_.rows[i].bound("pde") : res_.rows[i].estimate;
                const double b = use_pde ? res_.rows[best].bound("pde") : res_.rows[best].estimate;
                if (a < b) best = i;
            }
            return res_.rows.empty() ? std::numeric_limits<double>::quiet_NaN() : res_.rows[best].swept_value;
        };
        const double zs = argmin(false), zp = argmin(true);
        res_.assertions.push_back({"sampled_minimum_at_zeta_1", zs == 1.0, "argmin zeta = " + fmt(zs)});
        res_.assertions.push_back({"pde_minimum_at_zeta_1", zp == 1.0, "argmin zeta = " + fmt(zp)});
        for (const auto& r : res_.rows) {
            if (r.swept_value == 1.0) {
                res_.assertions.push_back({"rel_err_at_zeta_1_below_0.05", r.estimate < 0.05, fmt(r.estimate)});
            }
        }
    }

    void doublewell_sine(bool time_dependent) {
        record_dw_config();
        const double alpha = cfg_.alpha.value_or(50.0);
        if (alpha == 0.0) throw InputError("alpha must be nonzero");
        res_.config.alpha = alpha;
        const models::DoubleWell dw = double_well(0);
        const sde::SdeModel model = dw.model();
        const pde::PdeSolution psi = pde::solve_psi_backward(model, {}, dw.g(), dw_grid(dw));
        const sde::ControlField u_star = *psi.derived_control();
        const sde::TimeGrid grid(dw.horizon, n_steps());
        for_each_row([&](std::size_t i, SweepRow& row) {
            const double eps = sweep_.values[i];
            const auto perturbation = [eps, alpha, time_dependent](std::span<const double> x, double t,
                                                                   std::span<double> out) {
                out[0] = eps * std::sin(alpha * (time_dependent ? t : x[0]));
            };
            const sde::ControlField u = u_star.with_perturbation(perturbation);
            const sde::PathBatch batch =
                sde::simulate_controlled(model, u, {}, dw.g(), grid, sde::StoppingSpec::fixed(), k_, row_seed(i));
            fill_estimate(row, batch, i);
            if (time_dependent) {
                const double T = dw.horizon;
                const double integral = eps * eps * (T / 2.0 - std::sin(2.0 * alpha * T) / (4.0 * alpha));
                row.bound_values = {{"exact", bounds::sine_perturbation_error(eps, alpha, T)},
                                    {"kl_lower", measures::kl_lower_bound(0.5 * integral)},
                                    {"holder_upper", bounds::holder_analytic(integral)}};
            } else {
                const sde::ControlField delta = sde::ControlField::analytic(
                    1, [eps, alpha](std::span<const double> x, double, std::span<double> out) {
                        out[0] = -eps * std::sin(alpha * x[0]);
                    });
                sde::SimulationOptions opts;
                opts.aux = delta;
                const sde::PathBatch under_star = sde::simulate_controlled(
                    model, u_star, {}, dw.g(), grid, sde::StoppingSpec::fixed(), k_,
                    derive_seed(row_seed(i), "kl"), opts);
                row.bound_values = {
                    {"kl_lower", measures::kl_lower_bound(estimators::path_kl_estimate(delta, under_star))}};
            }
        });
        if (time_dependent) assert_orderings();
        else {
            bool ok = true;
            for (const auto& r : res_.rows) ok = ok && r.bound("kl_lower") <= r.estimate + 4.0 * r.std_error;
            res_.assertions.push_back({"kl_lower_below_sampled_plus_4_stderr", ok, ""});
        }
    }

    void hitting() {
        const double a = positive(cfg_.a.value_or(1.0), "a");
        const double dt = positive(cfg_.dt.value_or(1e-4), "dt");
        constexpr double kTimeCap = 100.0;
        res_.config.a = a;
        res_.config.dt = dt;
        const sde::StoppingSpec stopping = sde::StoppingSpec::first_exit(-a, a, kTimeCap);
        const std::uint64_t plain_seed = derive_seed(cfg_.seed, "plain_exit_batch");
        res_.sub_seeds["plain_exit_batch"] = plain_seed;
        const sde::PathBatch plain =
            sde::brownian_exit_simulate(0.0, sde::HittingControl::naive, stopping, dt, k_, plain_seed);
        if (!plain.complete) throw NumericalError("hitting_sweep: uncontrolled paths reached the time cap");
        const estimators::IsEstimate naive = estimators::importance_estimate(plain);
        const double psi0 = pde::hitting_closedform(a).psi(0.0);
        res_.assertions.push_back({"naive_mc_within_3_stderr_of_closed_form",
                                   std::abs(naive.z_hat - psi0) <= 3.0 * naive.stderr_z,
                                   "z_hat = " + fmt(naive.z_hat) + ", stderr = " + fmt(naive.stderr_z) +
                                       ", closed form = " + fmt(psi0)});
        for_each_row([&](std::size_t i, SweepRow& row) {
            const double eps = sweep_.values[i];
            const sde::PathBatch direct =
                sde::brownian_exit_simulate(eps, sde::HittingControl::perturbed, stopping, dt, k_, row_seed(i));
            fill_estimate(row, direct, i);
            const sde::PathBatch mirrored = sde::brownian_exit_simulate(
                eps, sde::HittingControl::mirrored, stopping, dt, k_, derive_seed(row_seed(i), "mirrored"));
            if (!mirrored.complete) throw NumericalError("paths under 2u* - u reached the time cap");
            const bounds::HittingReport rep =
                bounds::hitting_error(eps, mirrored, plain, derive_seed(boot_seed(i), "hitting"), cfg_.bootstrap);
            row.bound_values = {{"exact", rep.exact.value},
                                {"exact_stderr", rep.exact.std_error.value_or(0.0)},
                                {"jensen_lower", rep.jensen_lower.value},
                                {"naive_wrong", rep.naive_wrong.value}};
        });
        bool ok = true;
        for (const auto& r : res_.rows) ok = ok && r.bound("jensen_lower") <= r.bound("exact");
        res_.assertions.push_back({"jensen_lower_below_exact", ok, ""});
    }

    struct SmallNoiseSetup {
        models::SmallNoise sn;
        pde::Grid1D grid;
    };

    SmallNoiseSetup smallnoise(std::size_t i, double default_eta) const {
        models::SmallNoise sn;
        sn.eta = positive(value(i, "eta", cfg_.eta, default_eta), "eta");
        sn.alpha = positive(cfg_.alpha.value_or(1.0), "alpha");
        sn.horizon = positive(value(i, "T", cfg_.T, 1.0), "T");
        const pde::Grid1D standard = sn.grid(cfg_.nx.value_or(4001));
        return {sn, pde::Grid1D(standard.x_min(), standard.x_max(), standard.nx(), cfg_.nt.value_or(standard.nt()),
                                sn.horizon)};
    }

    void smallnoise_eta() {
        res_.config.alpha = cfg_.alpha.value_or(1.0);
        res_.config.T = cfg_.T.value_or(1.0);
        res_.config.n_steps = n_steps();
        res_.config.nx = cfg_.nx.value_or(4001);
        for_each_row([&](std::size_t i, SweepRow& row) {
            const auto [sn, pgrid] = smallnoise(i, 0.1);
            const pde::PdeSolution hjb = pde::solve_hjb_smallnoise(sn.eta, sn.alpha, pgrid);
            const pde::SmallNoiseV0 v0 = pde::smallnoise_v0(sn.alpha, sn.horizon);
            const sde::ControlField u0 = v0.control(sn.eta);
            const sde::ControlField delta = hjb.derived_control()->minus(u0);
            sde::SimulationOptions opts;
            opts.aux = delta;
            const sde::PathBatch batch =
                sde::simulate_controlled(sn.model(), u0, {}, sn.scaled_g(), sde::TimeGrid(sn.horizon, n_steps()),
                                         sde::StoppingSpec::fixed(), k_, row_seed(i), opts);
            fill_estimate(row, batch, i);
            double gap = 0.0;
            for (int n = 0; n <= pgrid.nt(); ++n) {
                const std::vector<double> dv = pde::gradient(hjb, n);
                for (int j = 0; j < pgrid.nx(); ++j) {
                    const double x = pgrid.x(j);
                    if (x < 0.05 || x > 1.0) continue;
                    gap = std::max(gap, std::abs(dv[j] - v0.dVdx(x, pgrid.t(n))));
                }
            }
            row.bound_values = {{"l2_exp", std::exp(mean(batch.aux_sq_integral))}, {"control_gap", gap}};
        });
        bool ok = true;
        for (std::size_t i = 1; i < res_.rows.size(); ++i) {
            const auto& p = res_.rows[i - 1];
            const auto& c = res_.rows[i];
            const double gp = p.bound("control_gap"), gc = c.bound("control_gap");
            if (c.swept_value < p.swept_value ? !(gc < gp) : !(gc > gp)) ok = false;
        }
        res_.assertions.push_back({"control_gap_decreases_with_eta", ok, ""});
    }

    void smallnoise_T() {
        res_.config.alpha = cfg_.alpha.value_or(1.0);
        res_.config.eta = cfg_.eta.value_or(0.005);
        for_each_row([&](std::size_t i, SweepRow& row) {
            const models::SmallNoise sn = smallnoise(i, 0.005).sn;
            const pde::SmallNoiseV0 v0 = pde::smallnoise_v0(sn.alpha, sn.horizon);
            const sde::ControlField u0 = v0.control(sn.eta);
            const int steps = cfg_.n_steps.value_or(static_cast<int>(std::ceil(1000.0 * sn.horizon)));
            const sde::PathBatch batch =
                sde::simulate_controlled(sn.model(), u0, {}, sn.scaled_g(), sde::TimeGrid(sn.horizon, steps),
                                         sde::StoppingSpec::fixed(), k_, row_seed(i));
            fill_estimate(row, batch, i);
        });
        assert_monotone("rel_err_nondecreasing_in_T", "");
    }

    void gaussian() {
        const double sigma = positive(cfg_.sigma.value_or(1.0), "sigma");
        const double eps = cfg_.eps.value_or(0.2);
        res_.config.sigma = sigma;
        res_.config.eps = eps;
        for_each_row([&](std::size_t i, SweepRow& row) {
            const int d = as_int(sweep_.values[i], "d");
            const Eigen::MatrixXd cov = sigma * sigma * Eigen::MatrixXd::Identity(d, d);
            const Eigen::VectorXd e = Eigen::VectorXd::Constant(d, eps);
            const measures::GaussianMeasure target(Eigen::VectorXd::Zero(d), cov);
            const measures::GaussianMeasure proposal(cov * e, cov);
            // log p*(X) - log q(X) = -e.X + e.Sigma e / 2 for X ~ q.
            const double half_quad = 0.5 * e.dot(cov * e);
            const Eigen::VectorXd shift = cov * e;
            std::vector<double> lw(k_);
            const std::uint64_t seed = row_seed(i);
#pragma omp parallel for schedule(static)
            for (std::size_t s = 0; s < k_; ++s) {
                Substream rng(seed, s);
                double dot = 0.0;
                for (int j = 0; j < d; ++j) dot += e[j] * (shift[j] + sigma * rng.normal());
                lw[s] = -dot + half_quad;
            }
            row.estimate = estimators::estimate_from_log_weights(lw).rel_err_hat;
            row.std_error = estimators::bootstrap_rel_err_stderr(lw, boot_seed(i), cfg_.bootstrap);
            row.bound_values = {{"exact", measures::perturbed_gaussian_error(cov, e)},
                                {"kl_lower", measures::kl_lower_bound(measures::gaussian_kl(target, proposal))}};
        });
        bool ok = true;
        for (const auto& r : res_.rows) ok = ok && r.bound("kl_lower") <= r.bound("exact");
        res_.assertions.push_back({"kl_lower_below_exact", ok, ""});
    }

    const ExperimentConfig& cfg_;
    ExperimentResult& res_;
    const RowCallback& cb_;
    const ExperimentSpec& spec_;
    Sweep sweep_;
    std::size_t k_ = 0;
    std::uint64_t rows_root_ = 0;
};

}  // namespace

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& s : registry()) out.push_back(s.name);
        return out;
    }();
    return names;
}

bool is_experiment(const std::string& name) {
    const auto& names = experiment_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

std::vector<std::string> csv_columns(const std::string& experiment) {
    const ExperimentSpec& spec = spec_for(experiment);
    std::vector<std::string> cols = {"swept_value", "estimate", "stderr"};
    cols.insert(cols.end(), spec.bound_columns.begin(), spec.bound_columns.end());
    return cols;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RowCallback& on_row) {
    if (!is_experiment(config.experiment)) throw InputError("unknown experiment '" + config.experiment + "'");
    if (config.k < 1) throw InputError("k must be >= 1");
    const auto start = Clock::now();
    ExperimentResult result;
    result.config = config;
    Runner runner(config, result, on_row);
    result.config.k = result.k;
    result.config.k_explicit = true;
    runner.run();
    result.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
    return result;
}

std::string render_csv(const ExperimentResult& result) {
    std::ostringstream out;
    for (std::size_t i = 0; i < result.columns.size(); ++i) out << (i ? "," : "") << result.columns[i];
    out << "\n";
    for (const auto& row : result.rows) {
        out << fmt(row.swept_value) << "," << fmt(row.estimate) << "," << fmt(row.std_error);
        for (const auto& [name, v] : row.bound_values) out << "," << fmt(v);
        out << "\n";
    }
    return out.str();
}

std::string render_summary_json(const ExperimentResult& result) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json cfg;
    std::istringstream lines(render_config(result.config));
    std::string line;
    while (std::getline(lines, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) cfg[line.substr(0, eq)] = line.substr(eq + 3);
    }
    j["experiment"] = result.experiment;
    j["config"] = cfg;
    j["seed"] = result.config.seed;
    j["k"] = result.k;
    j["sub_seeds"] = result.sub_seeds;
    if (!result.ou_resamples.empty()) j["ou_resamples"] = result.ou_resamples;
    j["runtime_ms"] = result.runtime_ms;
    j["threads"] = omp_get_max_threads();
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : result.rows) {
        rows.push_back({{"swept_value", r.swept_value}, {"wall_time_ms", r.wall_time_ms}});
    }
    j["rows"] = rows;
    nlohmann::ordered_json asserts = nlohmann::ordered_json::array();
    for (const auto& a : result.assertions) {
        nlohmann::ordered_json item = {{"name", a.name}, {"passed", a.passed}};
        if (!a.detail.empty()) item["detail"] = a.detail;
        asserts.push_back(item);
    }
    j["assertions"] = asserts;
    return j.dump(2) + "\n";
}

std::string summary_path_for(const std::string& csv_path) {
    const std::string ext = ".csv";
    if (csv_path.size() > ext.size() && csv_path.compare(csv_path.size() - ext.size(), ext.size(), ext) == 0) {
        return csv_path.substr(0, csv_path.size() - ext.size()) + ".json";
    }
    return csv_path + ".json";
}

void write_outputs(const ExperimentResult& result, const std::string& csv_path) {
    const auto write = [](const std::string& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw InputError("cannot open '" + path + "' for writing");
        out << text;
        out.close();
        if (!out) throw InputError("error writing '" + path + "'");
    };
    write(csv_path, render_csv(result));
    write(summary_path_for(csv_path), render_summary_json(result));
}

}  // namespace pathweight::harness
