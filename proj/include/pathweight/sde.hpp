#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Controlled SDE sampling with Euler-Maruyama stepping and accumulation of the
// discretized Girsanov log-weight log dP/dP^u along each path.
namespace pathweight::sde {

// f(x, t, out): writes a d-vector into out.
using VectorField = std::function<void(std::span<const double> x, double t, std::span<double> out)>;
// f(x, t, out): writes a row-major d x d matrix into out.
using MatrixField = std::function<void(std::span<const double> x, double t, std::span<double> out)>;
using ScalarField = std::function<double(std::span<const double> x, double t)>;
using TerminalFunction = std::function<double(std::span<const double> x)>;

// dX = b(X, t) dt + sigma(X, t) dW on [0, T], X_0 = x_init.
class SdeModel {
public:
    SdeModel(int dim, VectorField drift, MatrixField diffusion, Eigen::VectorXd x_init, double horizon);

    // Diffusion independent of (x, t); the simulator then skips the callback.
    static SdeModel with_constant_diffusion(int dim, VectorField drift, Eigen::MatrixXd sigma,
                                            Eigen::VectorXd x_init, double horizon);

    int dim() const { return dim_; }
    double horizon() const { return horizon_; }
    const Eigen::VectorXd& x_init() const { return x_init_; }
    const VectorField& drift() const { return drift_; }
    const MatrixField& diffusion() const { return diffusion_; }
    // Row-major constant diffusion, empty when state dependent.
    const std::vector<double>& constant_diffusion() const { return constant_sigma_; }

    SdeModel with_initial_state(Eigen::VectorXd x) const;
    SdeModel with_horizon(double horizon) const;

    void eval_drift(std::span<const double> x, double t, std::span<double> out) const;
    void eval_diffusion(std::span<const double> x, double t, std::span<double> out) const;

private:
    int dim_;
    VectorField drift_;
    MatrixField diffusion_;
    Eigen::VectorXd x_init_;
    double horizon_;
    std::vector<double> constant_sigma_;
};

enum class Provenance { zero, analytic, pde_derived, composed };

// A control u(x, t). Evaluates as zeta * base(x, t) + perturbation(x, t).
// Immutable; copies share their callables.
class ControlField {
public:
    static ControlField zero(int dim);
    static ControlField analytic(int dim, VectorField fn);
    static ControlField pde_derived(int dim, VectorField fn);

    int dim() const { return dim_; }
    Provenance provenance() const { return provenance_; }
    double multiplier() const { return zeta_; }
    bool is_zero() const { return provenance_ == Provenance::zero; }

    void evaluate(std::span<const double> x, double t, std::span<double> out) const;
    Eigen::VectorXd operator()(const Eigen::VectorXd& x, double t) const;

    // zeta * (*this)
    ControlField scaled(double zeta) const;
    // (*this) + fn
    ControlField with_perturbation(VectorField fn) const;
    // (*this) + other
    ControlField plus(const ControlField& other) const;
    // (*this) - other
    ControlField minus(const ControlField& other) const;

    // Adapter for use where a plain VectorField is expected.
    VectorField as_vector_field() const;

private:
    ControlField(int dim, Provenance provenance, std::shared_ptr<const VectorField> base);

    int dim_;
    Provenance provenance_;
    std::shared_ptr<const VectorField> base_;
    double zeta_ = 1.0;
    std::shared_ptr<const VectorField> perturbation_;
};

// Uniform discretization of [0, n_steps * dt].
class TimeGrid {
public:
    TimeGrid(double horizon, int n_steps);
    // Grid with a prescribed step and no natural horizon (first-exit runs).
    static TimeGrid with_step(double dt, int n_steps);

    int n_steps() const { return n_steps_; }
    double dt() const { return dt_; }
    double horizon() const { return dt_ * n_steps_; }
    double time(int n) const { return dt_ * n; }

private:
    TimeGrid(int n_steps, double dt) : n_steps_(n_steps), dt_(dt) {}
    int n_steps_;
    double dt_;
};

enum class StoppingMode { fixed_horizon, first_exit };

struct StoppingSpec {
    StoppingMode mode = StoppingMode::fixed_horizon;
    double lower = 0.0;  // exit domain (lower, upper), first_exit only, d = 1
    double upper = 0.0;
    double time_cap = 0.0;
    // Also stop when the Brownian bridge between two inside states crosses the
    // boundary (per-step crossing probability test). Removes the O(sqrt(dt))
    // bias of discrete monitoring.
    bool bridge_correction = true;

    static StoppingSpec fixed() { return {}; }
    static StoppingSpec first_exit(double lower, double upper, double time_cap);
};

struct SimulationOptions {
    // Auxiliary field delta: per path, accumulate int |delta|^2 ds and
    // int delta . dW along the simulated trajectory.
    std::optional<ControlField> aux;
    bool store_paths = false;
    int chunk_size = 256;
};

struct PathBatch {
    std::size_t k = 0;
    int dim = 0;
    std::vector<double> running_cost;    // int f(X_s, s) ds
    std::vector<double> terminal_cost;   // g(X_end)
    std::vector<double> log_girsanov;    // log dP/dP^u
    std::vector<double> exit_time;       // first_exit only
    std::vector<double> aux_sq_integral; // int |delta|^2 ds, when aux requested
    std::vector<double> aux_dw_integral; // int delta . dW, when aux requested
    std::vector<double> stored_paths;    // k x (n_steps+1) x d, when requested
    std::vector<std::size_t> capped_paths;  // first_exit paths that hit time_cap
    bool complete = true;

    bool has_exit_times() const { return !exit_time.empty(); }
    bool has_aux() const { return !aux_sq_integral.empty(); }
    // log of the weighted payoff exp(-W) dP/dP^u per path.
    std::vector<double> log_weighted_payoff() const;
};

// Optimized kernel: paths are split into chunks processed by an OpenMP team.
// Path i always uses Substream(seed, i), so the output is bit-identical for any
// thread count.
PathBatch simulate_controlled(const SdeModel& model, const ControlField& control, const ScalarField& f,
                              const TerminalFunction& g, const TimeGrid& grid, const StoppingSpec& stopping,
                              std::size_t k, std::uint64_t seed, const SimulationOptions& options = {});

// Straightforward single-threaded implementation of the same contract, kept as
// a reference for testing the optimized kernel.
PathBatch simulate_controlled_reference(const SdeModel& model, const ControlField& control, const ScalarField& f,
                                        const TerminalFunction& g, const TimeGrid& grid,
                                        const StoppingSpec& stopping, std::size_t k, std::uint64_t seed,
                                        const SimulationOptions& options = {});

// Scaled Brownian motion X = sqrt(2) W with f = 1, g = 0, stopped at the first
// exit of (stopping.lower, stopping.upper). The optimal control is
// sqrt(2) tanh(x) for the symmetric domain around 0.
enum class HittingControl {
    naive,      // u = 0
    optimal,    // u*
    perturbed,  // u* + eps
    mirrored,   // 2u* - (u* + eps) = u* - eps
};

PathBatch brownian_exit_simulate(double eps, HittingControl which, const StoppingSpec& stopping, double dt,
                                 std::size_t k, std::uint64_t seed, double x0 = 0.0);

void validate_inputs(const SdeModel& model, const ControlField& control, const TimeGrid& grid,
                     const StoppingSpec& stopping, std::size_t k, const SimulationOptions& options);

std::string to_string(Provenance p);

}  // namespace pathweight::sde
