#include "pathweight/sde.hpp"

#include <omp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "pathweight/errors.hpp"
#include "pathweight/rng.hpp"

namespace pathweight::sde {

// ---------------------------------------------------------------------------
// SdeModel

SdeModel::SdeModel(int dim, VectorField drift, MatrixField diffusion, Eigen::VectorXd x_init, double horizon)
    : dim_(dim), drift_(std::move(drift)), diffusion_(std::move(diffusion)), x_init_(std::move(x_init)),
      horizon_(horizon) {
    if (dim_ < 1) throw InputError("SdeModel: dimension must be >= 1");
    if (!drift_) throw InputError("SdeModel: drift is required");
    if (!diffusion_) throw InputError("SdeModel: diffusion is required");
    if (x_init_.size() != dim_) throw InputError("SdeModel: x_init has the wrong dimension");
    if (!x_init_.allFinite()) throw InputError("SdeModel: x_init must be finite");
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw InputError("SdeModel: horizon must be > 0");
}

SdeModel SdeModel::with_constant_diffusion(int dim, VectorField drift, Eigen::MatrixXd sigma,
                                           Eigen::VectorXd x_init, double horizon) {
    if (sigma.rows() != dim || sigma.cols() != dim) throw InputError("SdeModel: diffusion must be d x d");
    if (!sigma.allFinite()) throw InputError("SdeModel: diffusion must be finite");
    std::vector<double> row_major(static_cast<std::size_t>(dim) * dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) row_major[i * dim + j] = sigma(i, j);
    MatrixField fn = [row_major](std::span<const double>, double, std::span<double> out) {
        std::copy(row_major.begin(), row_major.end(), out.begin());
    };
    SdeModel model(dim, std::move(drift), std::move(fn), std::move(x_init), horizon);
    model.constant_sigma_ = std::move(row_major);
    return model;
}

SdeModel SdeModel::with_initial_state(Eigen::VectorXd x) const {
    SdeModel copy = *this;
    if (x.size() != dim_) throw InputError("SdeModel: x_init has the wrong dimension");
    copy.x_init_ = std::move(x);
    return copy;
}

SdeModel SdeModel::with_horizon(double horizon) const {
    if (!(horizon > 0.0)) throw InputError("SdeModel: horizon must be > 0");
    SdeModel copy = *this;
    copy.horizon_ = horizon;
    return copy;
}

void SdeModel::eval_drift(std::span<const double> x, double t, std::span<double> out) const { drift_(x, t, out); }

void SdeModel::eval_diffusion(std::span<const double> x, double t, std::span<double> out) const {
    if (!constant_sigma_.empty()) {
        std::copy(constant_sigma_.begin(), constant_sigma_.end(), out.begin());
    } else {
        diffusion_(x, t, out);
    }
}

// ---------------------------------------------------------------------------
// ControlField

ControlField::ControlField(int dim, Provenance provenance, std::shared_ptr<const VectorField> base)
    : dim_(dim), provenance_(provenance), base_(std::move(base)) {
    if (dim_ < 1) throw InputError("ControlField: dimension must be >= 1");
}

ControlField ControlField::zero(int dim) { return {dim, Provenance::zero, nullptr}; }

ControlField ControlField::analytic(int dim, VectorField fn) {
    if (!fn) throw InputError("ControlField: empty function");
    return {dim, Provenance::analytic, std::make_shared<const VectorField>(std::move(fn))};
}

ControlField ControlField::pde_derived(int dim, VectorField fn) {
    if (!fn) throw InputError("ControlField: empty function");
    return {dim, Provenance::pde_derived, std::make_shared<const VectorField>(std::move(fn))};
}

void ControlField::evaluate(std::span<const double> x, double t, std::span<double> out) const {
    if (base_) {
        (*base_)(x, t, out);
        if (zeta_ != 1.0) {
            for (int i = 0; i < dim_; ++i) out[i] *= zeta_;
        }
    } else {
        std::fill(out.begin(), out.begin() + dim_, 0.0);
    }
    if (perturbation_) {
        constexpr int kInline = 16;
        if (dim_ <= kInline) {
            std::array<double, kInline> extra{};
            (*perturbation_)(x, t, std::span<double>(extra.data(), dim_));
            for (int i = 0; i < dim_; ++i) out[i] += extra[i];
        } else {
            std::vector<double> extra(dim_);
            (*perturbation_)(x, t, extra);
            for (int i = 0; i < dim_; ++i) out[i] += extra[i];
        }
    }
}

Eigen::VectorXd ControlField::operator()(const Eigen::VectorXd& x, double t) const {
    Eigen::VectorXd out(dim_);
    evaluate(std::span<const double>(x.data(), x.size()), t, std::span<double>(out.data(), dim_));
    return out;
}

ControlField ControlField::scaled(double zeta) const {
    if (!std::isfinite(zeta)) throw InputError("ControlField: multiplier must be finite");
    if (is_zero()) return *this;
    ControlField out = *this;
    if (perturbation_) {
        // zeta * (zeta0 base + p) cannot be kept in the two-slot form; wrap.
        out = ControlField(dim_, Provenance::composed, std::make_shared<const VectorField>(as_vector_field()));
    }
    out.zeta_ *= zeta;
    out.provenance_ = Provenance::composed;
    return out;
}

ControlField ControlField::with_perturbation(VectorField fn) const {
    if (!fn) throw InputError("ControlField: empty perturbation");
    ControlField out = *this;
    if (perturbation_) {
        out = ControlField(dim_, Provenance::composed, std::make_shared<const VectorField>(as_vector_field()));
    }
    out.perturbation_ = std::make_shared<const VectorField>(std::move(fn));
    out.provenance_ = Provenance::composed;
    return out;
}

ControlField ControlField::plus(const ControlField& other) const {
    if (other.dim_ != dim_) throw InputError("ControlField: dimension mismatch in plus()");
    if (other.is_zero()) return *this;
    return with_perturbation(other.as_vector_field());
}

ControlField ControlField::minus(const ControlField& other) const { return plus(other.scaled(-1.0)); }

VectorField ControlField::as_vector_field() const {
    ControlField self = *this;
    return [self](std::span<const double> x, double t, std::span<double> out) { self.evaluate(x, t, out); };
}

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::zero: return "zero";
        case Provenance::analytic: return "analytic";
        case Provenance::pde_derived: return "pde_derived";
        case Provenance::composed: return "composed";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// TimeGrid / StoppingSpec

TimeGrid::TimeGrid(double horizon, int n_steps) : n_steps_(n_steps), dt_(0.0) {
    if (n_steps < 1) throw InputError("TimeGrid: n_steps must be >= 1");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InputError("TimeGrid: horizon must be > 0");
    dt_ = horizon / n_steps;
}

TimeGrid TimeGrid::with_step(double dt, int n_steps) {
    if (n_steps < 1) throw InputError("TimeGrid: n_steps must be >= 1");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("TimeGrid: dt must be > 0");
    return {n_steps, dt};
}

StoppingSpec StoppingSpec::first_exit(double lower, double upper, double time_cap) {
    StoppingSpec s;
    s.mode = StoppingMode::first_exit;
    s.lower = lower;
    s.upper = upper;
    s.time_cap = time_cap;
    return s;
}

std::vector<double> PathBatch::log_weighted_payoff() const {
    std::vector<double> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = -running_cost[i] - terminal_cost[i] + log_girsanov[i];
    return out;
}

void validate_inputs(const SdeModel& model, const ControlField& control, const TimeGrid& grid,
                     const StoppingSpec& stopping, std::size_t k, const SimulationOptions& options) {
    const int d = model.dim();
    if (control.dim() != d) throw InputError("simulate: control and model dimensions differ");
    if (options.aux && options.aux->dim() != d) throw InputError("simulate: auxiliary field has the wrong dimension");
    if (k < 1) throw InputError("simulate: k must be >= 1");
    if (options.chunk_size < 1) throw InputError("simulate: chunk_size must be >= 1");
    (void)grid;
    if (stopping.mode == StoppingMode::first_exit) {
        if (d != 1) throw InputError("simulate: first_exit stopping requires d = 1");
        const double x0 = model.x_init()[0];
        if (!(stopping.lower < x0 && x0 < stopping.upper)) {
            throw InputError("simulate: first_exit requires lower < x_init < upper");
        }
        if (!(stopping.time_cap > 0.0) || !std::isfinite(stopping.time_cap)) {
            throw InputError("simulate: first_exit requires a finite time_cap");
        }
        if (options.store_paths) throw InputError("simulate: path storage is only available for fixed horizons");
    }
    // Diffusion must be finite and invertible where the weight is evaluated;
    // checked at the initial state (and everywhere when constant).
    std::vector<double> sigma(static_cast<std::size_t>(d) * d);
    model.eval_diffusion(std::span<const double>(model.x_init().data(), d), 0.0, sigma);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> s(sigma.data(), d, d);
    if (!s.allFinite()) throw InputError("simulate: diffusion is not finite at x_init");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(s);
    if (!lu.isInvertible() || !std::isfinite(lu.rcond()) || lu.rcond() < 1e-14) {
        throw InputError("simulate: diffusion matrix is singular at x_init");
    }
}

namespace {

int max_steps_for(const TimeGrid& grid, const StoppingSpec& stopping) {
    if (stopping.mode == StoppingMode::fixed_horizon) return grid.n_steps();
    const double steps = std::ceil(stopping.time_cap / grid.dt() - 1e-9);
    if (steps > std::numeric_limits<int>::max()) throw InputError("simulate: time_cap / dt is too large");
    return static_cast<int>(steps);
}

// Probability that a Brownian bridge with variance rate var over a step of
// length dt, between two points at distances d0, d1 > 0 from a barrier,
// touches the barrier.
double bridge_crossing(double d0, double d1, double var, double dt) {
    return std::exp(-2.0 * d0 * d1 / (var * dt));
}

struct Failure {
    std::size_t path = std::numeric_limits<std::size_t>::max();
    int step = 0;
};

// Per-chunk scratch buffers, reused across the paths of one chunk.
struct Workspace {
    explicit Workspace(int d)
        : x(d), x_new(d), drift(d), sigma(static_cast<std::size_t>(d) * d), u(d), delta(d), dw(d) {}
    std::vector<double> x, x_new, drift, sigma, u, delta, dw;
};

}  // namespace

PathBatch simulate_controlled(const SdeModel& model, const ControlField& control, const ScalarField& f,
                              const TerminalFunction& g, const TimeGrid& grid, const StoppingSpec& stopping,
                              std::size_t k, std::uint64_t seed, const SimulationOptions& options) {
    validate_inputs(model, control, grid, stopping, k, options);
    const int d = model.dim();
    const bool exit_mode = stopping.mode == StoppingMode::first_exit;
    const int max_steps = max_steps_for(grid, stopping);
    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);
    const bool controlled = !control.is_zero();
    const bool has_aux = options.aux.has_value();
    const bool const_sigma = !model.constant_diffusion().empty();
    const std::size_t path_stride = static_cast<std::size_t>(grid.n_steps() + 1) * d;

    PathBatch batch;
    batch.k = k;
    batch.dim = d;
    batch.running_cost.assign(k, 0.0);
    batch.terminal_cost.assign(k, 0.0);
    batch.log_girsanov.assign(k, 0.0);
    if (exit_mode) batch.exit_time.assign(k, 0.0);
    if (has_aux) {
        batch.aux_sq_integral.assign(k, 0.0);
        batch.aux_dw_integral.assign(k, 0.0);
    }
    if (options.store_paths) batch.stored_paths.assign(k * path_stride, 0.0);
    std::vector<unsigned char> capped(exit_mode ? k : 0, 0);

    const std::size_t chunk = static_cast<std::size_t>(options.chunk_size);
    const std::size_t n_chunks = (k + chunk - 1) / chunk;
    std::vector<Failure> failures(n_chunks);

#pragma omp parallel for schedule(dynamic)
    for (std::size_t c = 0; c < n_chunks; ++c) {
        Workspace ws(d);
        const std::size_t begin = c * chunk;
        const std::size_t end = std::min(k, begin + chunk);
        for (std::size_t p = begin; p < end; ++p) {
            Substream rng(seed, p);
            std::copy(model.x_init().data(), model.x_init().data() + d, ws.x.begin());
            if (const_sigma) std::copy(model.constant_diffusion().begin(), model.constant_diffusion().end(), ws.sigma.begin());
            if (!controlled) std::fill(ws.u.begin(), ws.u.end(), 0.0);
            double* stored = options.store_paths ? batch.stored_paths.data() + p * path_stride : nullptr;
            if (stored) std::copy(ws.x.begin(), ws.x.end(), stored);

            double log_w = 0.0, running = 0.0, aux_sq = 0.0, aux_dw = 0.0;
            double tau = 0.0;
            bool exited = false;
            bool failed = false;
            int n = 0;
            for (; n < max_steps; ++n) {
                const double t = n * dt;
                model.eval_drift(ws.x, t, ws.drift);
                if (!const_sigma) model.diffusion()(ws.x, t, ws.sigma);
                if (controlled) control.evaluate(ws.x, t, ws.u);
                const double f_val = f ? f(ws.x, t) : 0.0;
                if (has_aux) options.aux->evaluate(ws.x, t, ws.delta);
                for (int j = 0; j < d; ++j) ws.dw[j] = sqrt_dt * rng.normal();

                for (int i = 0; i < d; ++i) {
                    const double* row = ws.sigma.data() + static_cast<std::size_t>(i) * d;
                    double acc = ws.drift[i] * dt;
                    for (int j = 0; j < d; ++j) acc += row[j] * (ws.u[j] * dt + ws.dw[j]);
                    ws.x_new[i] = ws.x[i] + acc;
                }
                if (controlled) {
                    double u_dw = 0.0, u_sq = 0.0;
                    for (int j = 0; j < d; ++j) {
                        u_dw += ws.u[j] * ws.dw[j];
                        u_sq += ws.u[j] * ws.u[j];
                    }
                    log_w += -u_dw - 0.5 * u_sq * dt;
                }
                if (has_aux) {
                    double sq = 0.0, dot = 0.0;
                    for (int j = 0; j < d; ++j) {
                        sq += ws.delta[j] * ws.delta[j];
                        dot += ws.delta[j] * ws.dw[j];
                    }
                    aux_sq += sq * dt;
                    aux_dw += dot;
                }
                bool finite = std::isfinite(log_w);
                for (int i = 0; i < d; ++i) finite = finite && std::isfinite(ws.x_new[i]);
                if (!finite) {
                    failed = true;
                    break;
                }

                if (exit_mode) {
                    const double x0 = ws.x[0], x1 = ws.x_new[0];
                    if (x1 <= stopping.lower || x1 >= stopping.upper) {
                        const double barrier = x1 >= stopping.upper ? stopping.upper : stopping.lower;
                        const double theta = std::clamp((barrier - x0) / (x1 - x0), 0.0, 1.0);
                        tau = t + theta * dt;
                        running += f_val * theta * dt;
                        ws.x[0] = barrier;
                        exited = true;
                        break;
                    }
                    if (stopping.bridge_correction) {
                        const double var = ws.sigma[0] * ws.sigma[0];
                        const double p_up = bridge_crossing(stopping.upper - x0, stopping.upper - x1, var, dt);
                        const double p_lo = bridge_crossing(x0 - stopping.lower, x1 - stopping.lower, var, dt);
                        const double p_cross = 1.0 - (1.0 - p_up) * (1.0 - p_lo);
                        if (rng.uniform() < p_cross) {
                            tau = t + 0.5 * dt;
                            running += f_val * 0.5 * dt;
                            ws.x[0] = p_up >= p_lo ? stopping.upper : stopping.lower;
                            exited = true;
                            break;
                        }
                    }
                }
                running += f_val * dt;
                std::swap(ws.x, ws.x_new);
                if (stored) std::copy(ws.x.begin(), ws.x.end(), stored + static_cast<std::size_t>(n + 1) * d);
            }
            if (failed) {
                if (p < failures[c].path) failures[c] = {p, n};
                continue;
            }
            batch.running_cost[p] = running;
            batch.log_girsanov[p] = log_w;
            batch.terminal_cost[p] = g ? g(ws.x) : 0.0;
            if (has_aux) {
                batch.aux_sq_integral[p] = aux_sq;
                batch.aux_dw_integral[p] = aux_dw;
            }
            if (exit_mode) {
                batch.exit_time[p] = exited ? tau : max_steps * dt;
                if (!exited) capped[p] = 1;
            }
        }
    }

    const auto worst = std::min_element(failures.begin(), failures.end(),
                                         [](const Failure& a, const Failure& b) { return a.path < b.path; });
    if (worst != failures.end() && worst->path != std::numeric_limits<std::size_t>::max()) {
        std::ostringstream msg;
        msg << "trajectory blow-up (non-finite state) in path " << worst->path << " at step " << worst->step
            << " (t = " << worst->step * dt << ")";
        throw NumericalError(msg.str());
    }
    for (std::size_t p = 0; p < capped.size(); ++p) {
        if (capped[p]) batch.capped_paths.push_back(p);
    }
    batch.complete = batch.capped_paths.empty();
    return batch;
}

// ---------------------------------------------------------------------------
// Scaled Brownian exit problem

PathBatch brownian_exit_simulate(double eps, HittingControl which, const StoppingSpec& stopping, double dt,
                                 std::size_t k, std::uint64_t seed, double x0) {
    if (stopping.mode != StoppingMode::first_exit) throw InputError("brownian_exit_simulate: needs first_exit stopping");
    if (!std::isfinite(eps)) throw InputError("brownian_exit_simulate: eps must be finite");
    const double s2 = std::sqrt(2.0);
    SdeModel model = SdeModel::with_constant_diffusion(
        1, [](std::span<const double>, double, std::span<double> out) { out[0] = 0.0; },
        Eigen::MatrixXd::Constant(1, 1, s2), Eigen::VectorXd::Constant(1, x0), stopping.time_cap);
    ControlField optimal = ControlField::analytic(
        1, [s2](std::span<const double> x, double, std::span<double> out) { out[0] = s2 * std::tanh(x[0]); });
    ControlField control = ControlField::zero(1);
    switch (which) {
        case HittingControl::naive: break;
        case HittingControl::optimal: control = optimal; break;
        case HittingControl::perturbed:
            control = optimal.with_perturbation([eps](std::span<const double>, double, std::span<double> out) { out[0] = eps; });
            break;
        case HittingControl::mirrored:
            control = optimal.with_perturbation([eps](std::span<const double>, double, std::span<double> out) { out[0] = -eps; });
            break;
    }
    const int max_steps = static_cast<int>(std::ceil(stopping.time_cap / dt - 1e-9));
    const ScalarField running = [](std::span<const double>, double) { return 1.0; };
    return simulate_controlled(model, control, running, {}, TimeGrid::with_step(dt, max_steps), stopping, k, seed);
}

}  // namespace pathweight::sde
