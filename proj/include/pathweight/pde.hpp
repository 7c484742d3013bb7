#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pathweight/sde.hpp"

// One-dimensional backward parabolic solvers (implicit Euler in time, second
// order centered differences in space, homogeneous Neumann lateral
// boundaries) for the quantities that determine optimal controls and
// relative errors.
namespace pathweight::pde {

class Grid1D {
public:
    Grid1D(double x_min, double x_max, int nx, int nt, double horizon);

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    int nx() const { return nx_; }
    int nt() const { return nt_; }
    double horizon() const { return horizon_; }
    double dx() const { return (x_max_ - x_min_) / (nx_ - 1); }
    double dt() const { return horizon_ / nt_; }
    double x(int i) const { return x_min_ + i * dx(); }
    double t(int n) const { return n * dt(); }
    // Whether an explicit step would satisfy dt <= dx^2 / (2 max_diffusion).
    bool explicit_stable(double max_diffusion) const;
    // Same domain, twice the resolution in x and t.
    Grid1D refined() const;

private:
    double x_min_, x_max_;
    int nx_, nt_;
    double horizon_;
};

enum class FieldKind { psi, value_V, second_moment, h_field };

std::string to_string(FieldKind kind);

class PdeSolution {
public:
    PdeSolution(Grid1D grid, FieldKind kind, std::vector<double> field);

    const Grid1D& grid() const { return grid_; }
    FieldKind kind() const { return kind_; }
    // Row n is the time slice t_n; (nt + 1) x nx, row-major.
    const std::vector<double>& field() const { return field_; }
    double at(int n, int i) const { return field_[static_cast<std::size_t>(n) * grid_.nx() + i]; }
    std::vector<double> slice(int n) const;
    // Bilinear in (x, t), clamped to the grid.
    double interpolate(double x, double t) const;
    // Largest |a - b| over nodes with x in [lo, hi] on time slice n.
    double sup_diff(const PdeSolution& other, int n, double lo, double hi) const;

    const std::optional<sde::ControlField>& derived_control() const { return control_; }
    // Control values at the nodes ((nt + 1) x nx), if a control was derived.
    const std::vector<double>& control_table() const { return control_table_; }
    // Implicit scheme; explicit_stable records whether an explicit scheme
    // would also have been stable on this grid.
    bool explicit_stable = false;
    // Nodes where the advection term was upwinded (cell Peclet number > 1).
    std::size_t upwinded_nodes = 0;

    void attach_control(std::vector<double> table);

    // Columns t, x, value.
    void write_csv(const std::string& path) const;

private:
    Grid1D grid_;
    FieldKind kind_;
    std::vector<double> field_;
    std::vector<double> control_table_;
    std::optional<sde::ControlField> control_;
};

using Coefficient = std::function<double(double x, double t)>;

// d_t phi + a d_xx phi + b d_x phi + c phi = 0 on [0, T], phi(., T) given.
struct BackwardProblem {
    Coefficient a;  // >= 0
    Coefficient b;
    Coefficient c;  // may be empty (zero)
};

struct ScaledField {
    // Each slice divided by its maximum absolute value; log_scale[n] is the log
    // of that maximum. phi = values * exp(log_scale).
    std::vector<double> values;
    std::vector<double> log_scale;
    std::size_t upwinded_nodes = 0;
};

// Terminal data in log form, e.g. -g/eta for exp(-g/eta).
ScaledField solve_backward(const Grid1D& grid, const BackwardProblem& problem, const std::vector<double>& log_terminal);

// Tridiagonal solve (Thomas algorithm); lower[0] and upper[n-1] are unused.
std::vector<double> thomas(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper,
                           std::vector<double> rhs);

// psi(x, t) = E[exp(-int_t^T f - g(X_T)) | X_t = x]; derived control
// sigma d_x log psi.
PdeSolution solve_psi_backward(const sde::SdeModel& model, const sde::ScalarField& f, const sde::TerminalFunction& g,
                               const Grid1D& grid);

// Zero-viscosity value function alpha (1 - |x|/sqrt(alpha))^2 / (2 (T - t + 1))
// and its control, for the small-noise example.
class SmallNoiseV0 {
public:
    SmallNoiseV0(double alpha, double horizon);

    double alpha() const { return alpha_; }
    double V(double x, double t) const;
    // Right derivative at x = 0.
    double dVdx(double x, double t) const;
    // -d_x V0, the control in the scaling dX = u dt + sqrt(eta) dW.
    double u0(double x, double t) const { return -dVdx(x, t); }
    // The same control for the simulator convention dX = sigma u dt + sigma dW
    // with sigma = sqrt(eta): u0 / sqrt(eta).
    sde::ControlField control(double eta) const;
    // Terminal cost g(x) = (alpha/2) (1 - |x|/sqrt(alpha))^2.
    double g(double x) const;

private:
    double alpha_;
    double horizon_;
};

SmallNoiseV0 smallnoise_v0(double alpha, double horizon);

// V^eta = -eta log psi^eta for X = sqrt(eta) W with payoff exp(-g/eta). The
// derived control is -d_x V^eta / sqrt(eta), i.e. sqrt(eta) d_x log psi^eta,
// for the simulator convention.
PdeSolution solve_hjb_smallnoise(double eta, double alpha, const Grid1D& grid);

// d_x V on slice n by centered differences (one-sided at the edges).
std::vector<double> gradient(const PdeSolution& sol, int n);

// (d_t + L^{u + 2 delta} + |delta|^2) h = 0, h(., T) = 1.
PdeSolution solve_h_field(const sde::SdeModel& model, const sde::ControlField& u, const sde::ControlField& delta,
                          const Grid1D& grid);

// (d_t + L - sigma u d_x - 2 f + |u|^2) M = 0, M(., T) = exp(-2 g).
PdeSolution solve_second_moment(const sde::SdeModel& model, const sde::ControlField& u, const sde::ScalarField& f,
                                const sde::TerminalFunction& g, const Grid1D& grid);

// Relative error of the uncontrolled estimator at (x0, 0) from psi for the
// payoffs exp(-g) and exp(-2g): sqrt(psi_2g / psi_g^2 - 1).
double naive_relative_error(const sde::SdeModel& model, const sde::TerminalFunction& g, const Grid1D& grid,
                            double x0);

struct HittingClosedForm {
    double a;
    double psi(double x) const;     // cosh(x) / cosh(a)
    double u_star(double x) const;  // sqrt(2) tanh(x)
};

HittingClosedForm hitting_closedform(double a);

// sqrt(2) (1 - e^{-2x}) / (e^{-2x} + 1), the exponential form of sqrt(2) tanh(x).
double hitting_u_star_exponential_form(double x);

// Finite-difference solution of psi'' - psi = 0 on (-a, a), psi(+-a) = 1.
struct GriddedFunction {
    std::vector<double> x;
    std::vector<double> values;
};
GriddedFunction solve_hitting_elliptic(double a, int nx);

}  // namespace pathweight::pde
