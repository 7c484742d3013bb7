#include <cmath>
#include <limits>
#include <sstream>

#include "pathweight/errors.hpp"
#include "pathweight/rng.hpp"
#include "pathweight/sde.hpp"

namespace pathweight::sde {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::span<double> view(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

PathBatch simulate_controlled_reference(const SdeModel& model, const ControlField& control, const ScalarField& f,
                                        const TerminalFunction& g, const TimeGrid& grid,
                                        const StoppingSpec& stopping, std::size_t k, std::uint64_t seed,
                                        const SimulationOptions& options) {
    validate_inputs(model, control, grid, stopping, k, options);
    const int d = model.dim();
    const bool exit_mode = stopping.mode == StoppingMode::first_exit;
    const int max_steps =
        exit_mode ? static_cast<int>(std::ceil(stopping.time_cap / grid.dt() - 1e-9)) : grid.n_steps();
    const double dt = grid.dt();

    PathBatch batch;
    batch.k = k;
    batch.dim = d;
    batch.running_cost.resize(k);
    batch.terminal_cost.resize(k);
    batch.log_girsanov.resize(k);
    if (exit_mode) batch.exit_time.resize(k);
    if (options.aux) {
        batch.aux_sq_integral.resize(k);
        batch.aux_dw_integral.resize(k);
    }
    const std::size_t stride = static_cast<std::size_t>(grid.n_steps() + 1) * d;
    if (options.store_paths) batch.stored_paths.resize(k * stride);

    for (std::size_t p = 0; p < k; ++p) {
        Substream rng(seed, p);
        Eigen::VectorXd x = model.x_init();
        Eigen::VectorXd b(d), u = Eigen::VectorXd::Zero(d), delta(d), dw(d);
        RowMajor sigma(d, d);
        if (options.store_paths) Eigen::Map<Eigen::VectorXd>(batch.stored_paths.data() + p * stride, d) = x;

        double log_w = 0.0, running = 0.0, aux_sq = 0.0, aux_dw = 0.0, tau = 0.0;
        bool exited = false;
        for (int n = 0; n < max_steps; ++n) {
            const double t = n * dt;
            model.eval_drift(view(x), t, view(b));
            model.eval_diffusion(view(x), t, std::span<double>(sigma.data(), static_cast<std::size_t>(d) * d));
            if (!control.is_zero()) control.evaluate(view(x), t, view(u));
            const double f_val = f ? f(view(x), t) : 0.0;
            if (options.aux) options.aux->evaluate(view(x), t, view(delta));
            for (int j = 0; j < d; ++j) dw[j] = std::sqrt(dt) * rng.normal();

            const Eigen::VectorXd x_new = x + (b + sigma * u) * dt + sigma * dw;
            if (!control.is_zero()) log_w += -u.dot(dw) - 0.5 * u.squaredNorm() * dt;
            if (options.aux) {
                aux_sq += delta.squaredNorm() * dt;
                aux_dw += delta.dot(dw);
            }
            if (!x_new.allFinite() || !std::isfinite(log_w)) {
                std::ostringstream msg;
                msg << "trajectory blow-up (non-finite state) in path " << p << " at step " << n << " (t = " << t
                    << ")";
                throw NumericalError(msg.str());
            }

            if (exit_mode) {
                const double a = stopping.lower, c = stopping.upper;
                if (x_new[0] <= a || x_new[0] >= c) {
                    const double barrier = x_new[0] >= c ? c : a;
                    const double theta = std::clamp((barrier - x[0]) / (x_new[0] - x[0]), 0.0, 1.0);
                    tau = t + theta * dt;
                    running += f_val * theta * dt;
                    x[0] = barrier;
                    exited = true;
                    break;
                }
                if (stopping.bridge_correction) {
                    const double var = sigma(0, 0) * sigma(0, 0);
                    const double p_up = std::exp(-2.0 * (c - x[0]) * (c - x_new[0]) / (var * dt));
                    const double p_lo = std::exp(-2.0 * (x[0] - a) * (x_new[0] - a) / (var * dt));
                    if (rng.uniform() < 1.0 - (1.0 - p_up) * (1.0 - p_lo)) {
                        tau = t + 0.5 * dt;
                        running += f_val * 0.5 * dt;
                        x[0] = p_up >= p_lo ? c : a;
                        exited = true;
                        break;
                    }
                }
            }
            running += f_val * dt;
            x = x_new;
            if (options.store_paths) {
                Eigen::Map<Eigen::VectorXd>(batch.stored_paths.data() + p * stride + static_cast<std::size_t>(n + 1) * d, d) = x;
            }
        }
        batch.running_cost[p] = running;
        batch.log_girsanov[p] = log_w;
        batch.terminal_cost[p] = g ? g(view(x)) : 0.0;
        if (options.aux) {
            batch.aux_sq_integral[p] = aux_sq;
            batch.aux_dw_integral[p] = aux_dw;
        }
        if (exit_mode) {
            batch.exit_time[p] = exited ? tau : max_steps * dt;
            if (!exited) batch.capped_paths.push_back(p);
        }
    }
    batch.complete = batch.capped_paths.empty();
    return batch;
}

}  // namespace pathweight::sde
