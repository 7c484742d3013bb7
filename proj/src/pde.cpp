#include "pathweight/pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <sstream>

#include "pathweight/errors.hpp"

namespace pathweight::pde {

Grid1D::Grid1D(double x_min, double x_max, int nx, int nt, double horizon)
    : x_min_(x_min), x_max_(x_max), nx_(nx), nt_(nt), horizon_(horizon) {
    if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
        throw InputError("Grid1D: need finite x_min < x_max");
    }
    if (nx < 3) throw InputError("Grid1D: nx must be >= 3");
    if (nt < 1) throw InputError("Grid1D: nt must be >= 1");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InputError("Grid1D: horizon must be > 0");
}

bool Grid1D::explicit_stable(double max_diffusion) const {
    if (max_diffusion <= 0.0) return true;
    return dt() <= dx() * dx() / (2.0 * max_diffusion);
}

Grid1D Grid1D::refined() const { return {x_min_, x_max_, 2 * nx_ - 1, 2 * nt_, horizon_}; }

std::string to_string(FieldKind kind) {
    switch (kind) {
        case FieldKind::psi: return "psi";
        case FieldKind::value_V: return "value_V";
        case FieldKind::second_moment: return "second_moment";
        case FieldKind::h_field: return "h_field";
    }
    return "unknown";
}

namespace {

double bilinear(const Grid1D& grid, const std::vector<double>& table, double x, double t) {
    const int nx = grid.nx(), nt = grid.nt();
    const double sx = std::clamp((x - grid.x_min()) / grid.dx(), 0.0, static_cast<double>(nx - 1));
    const double st = std::clamp(t / grid.dt(), 0.0, static_cast<double>(nt));
    const int i = std::min(static_cast<int>(sx), nx - 2);
    const int n = std::min(static_cast<int>(st), nt - 1);
    const double wx = sx - i, wt = st - n;
    const auto v = [&](int nn, int ii) { return table[static_cast<std::size_t>(nn) * nx + ii]; };
    const double lo = (1.0 - wx) * v(n, i) + wx * v(n, i + 1);
    const double hi = (1.0 - wx) * v(n + 1, i) + wx * v(n + 1, i + 1);
    return (1.0 - wt) * lo + wt * hi;
}

}  // namespace

PdeSolution::PdeSolution(Grid1D grid, FieldKind kind, std::vector<double> field)
    : grid_(grid), kind_(kind), field_(std::move(field)) {
    if (field_.size() != static_cast<std::size_t>(grid_.nt() + 1) * grid_.nx()) {
        throw InputError("PdeSolution: field size does not match the grid");
    }
}

std::vector<double> PdeSolution::slice(int n) const {
    if (n < 0 || n > grid_.nt()) throw InputError("PdeSolution: time index out of range");
    const auto begin = field_.begin() + static_cast<std::ptrdiff_t>(n) * grid_.nx();
    return {begin, begin + grid_.nx()};
}

double PdeSolution::interpolate(double x, double t) const { return bilinear(grid_, field_, x, t); }

double PdeSolution::sup_diff(const PdeSolution& other, int n, double lo, double hi) const {
    double worst = 0.0;
    for (int i = 0; i < grid_.nx(); ++i) {
        const double x = grid_.x(i);
        if (x < lo || x > hi) continue;
        worst = std::max(worst, std::abs(at(n, i) - other.interpolate(x, grid_.t(n))));
    }
    return worst;
}

void PdeSolution::attach_control(std::vector<double> table) {
    if (table.size() != field_.size()) throw InputError("PdeSolution: control table size mismatch");
    control_table_ = std::move(table);
    auto shared = std::make_shared<const std::vector<double>>(control_table_);
    const Grid1D grid = grid_;
    control_ = sde::ControlField::pde_derived(
        1, [shared, grid](std::span<const double> x, double t, std::span<double> out) {
            out[0] = bilinear(grid, *shared, x[0], t);
        });
}

void PdeSolution::write_csv(const std::string& path) const {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw InputError("cannot open " + path + " for writing");
    std::fputs("t,x,value\n", fp);
    for (int n = 0; n <= grid_.nt(); ++n) {
        for (int i = 0; i < grid_.nx(); ++i) {
            std::fprintf(fp, "%.17g,%.17g,%.17g\n", grid_.t(n), grid_.x(i), at(n, i));
        }
    }
    if (std::fclose(fp) != 0) throw InputError("error writing " + path);
}

std::vector<double> thomas(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper,
                           std::vector<double> rhs) {
    const std::size_t n = diag.size();
    if (lower.size() != n || upper.size() != n || rhs.size() != n) throw InputError("thomas: size mismatch");
    for (std::size_t i = 1; i < n; ++i) {
        const double m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    return x;
}

ScaledField solve_backward(const Grid1D& grid, const BackwardProblem& problem, const std::vector<double>& log_terminal) {
    const int nx = grid.nx(), nt = grid.nt();
    if (static_cast<int>(log_terminal.size()) != nx) throw InputError("solve_backward: terminal data size mismatch");
    if (!problem.a || !problem.b) throw InputError("solve_backward: diffusion and advection coefficients required");
    const double dx = grid.dx(), dt = grid.dt();

    ScaledField out;
    out.values.assign(static_cast<std::size_t>(nt + 1) * nx, 0.0);
    out.log_scale.assign(nt + 1, 0.0);

    const double top = *std::max_element(log_terminal.begin(), log_terminal.end());
    if (!std::isfinite(top)) throw NumericalError("solve_backward: terminal data is not finite");
    for (int i = 0; i < nx; ++i) out.values[static_cast<std::size_t>(nt) * nx + i] = std::exp(log_terminal[i] - top);
    out.log_scale[nt] = top;

    std::vector<double> lower(nx), diag(nx), upper(nx), rhs(nx), growth(nx);
    for (int n = nt - 1; n >= 0; --n) {
        const double t = grid.t(n);
        for (int i = 0; i < nx; ++i) {
            const double x = grid.x(i);
            const double a = problem.a(x, t);
            const double b = problem.b(x, t);
            const double c = problem.c ? problem.c(x, t) : 0.0;
            if (!(a >= 0.0) || !std::isfinite(b) || !std::isfinite(c)) {
                std::ostringstream msg;
                msg << "solve_backward: invalid coefficients at x = " << x << ", t = " << t;
                throw NumericalError(msg.str());
            }
            double lo = a / (dx * dx), up = a / (dx * dx);
            if (i == 0 || i == nx - 1) {
                // Mirrored ghost node: the interior neighbour carries both couplings.
                lo = i == 0 ? 0.0 : 2.0 * a / (dx * dx);
                up = i == 0 ? 2.0 * a / (dx * dx) : 0.0;
            } else if (std::abs(b) * dx > 2.0 * a) {
                ++out.upwinded_nodes;
                if (b > 0.0) up += b / dx;
                else lo -= b / dx;
            } else {
                up += b / (2.0 * dx);
                lo -= b / (2.0 * dx);
            }
            lower[i] = -dt * lo;
            upper[i] = -dt * up;
            // Absorption implicit; growth as the exact factor exp(dt c) after the solve.
            diag[i] = 1.0 + dt * (lo + up) - dt * std::min(c, 0.0);
            growth[i] = std::exp(dt * std::max(c, 0.0));
            rhs[i] = out.values[static_cast<std::size_t>(n + 1) * nx + i];
        }
        std::vector<double> v = thomas(lower, diag, upper, rhs);
        for (int i = 0; i < nx; ++i) v[i] *= growth[i];
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        if (!(m > 0.0) || !std::isfinite(m)) {
            std::ostringstream msg;
            msg << "solve_backward: solution vanished or diverged at t = " << t;
            throw NumericalError(msg.str());
        }
        for (int i = 0; i < nx; ++i) out.values[static_cast<std::size_t>(n) * nx + i] = v[i] / m;
        out.log_scale[n] = out.log_scale[n + 1] + std::log(m);
    }
    return out;
}

namespace {

struct Scalar1D {
    const sde::SdeModel& model;

    double drift(double x, double t) const {
        double out = 0.0;
        model.eval_drift(std::span<const double>(&x, 1), t, std::span<double>(&out, 1));
        return out;
    }
    double sigma(double x, double t) const {
        double out = 0.0;
        model.eval_diffusion(std::span<const double>(&x, 1), t, std::span<double>(&out, 1));
        return out;
    }
};

double eval_control(const sde::ControlField& u, double x, double t) {
    double out = 0.0;
    u.evaluate(std::span<const double>(&x, 1), t, std::span<double>(&out, 1));
    return out;
}

void require_1d(const sde::SdeModel& model, const char* what) {
    if (model.dim() != 1) throw InputError(std::string(what) + ": only d = 1 is supported");
}

void check_positive(const ScaledField& s, const Grid1D& grid, const char* what, bool allow_zero = false) {
    for (int n = 0; n <= grid.nt(); ++n) {
        for (int i = 0; i < grid.nx(); ++i) {
            const double v = s.values[static_cast<std::size_t>(n) * grid.nx() + i];
            if (allow_zero ? !(v >= 0.0) : !(v > 0.0)) {
                std::ostringstream msg;
                msg << what << ": nonpositive value at x = " << grid.x(i) << ", t = " << grid.t(n)
                    << " (grid or boundary inadequate)";
                throw NumericalError(msg.str());
            }
        }
    }
}

std::vector<double> log_field(const ScaledField& s, const Grid1D& grid) {
    std::vector<double> out(s.values.size());
    for (int n = 0; n <= grid.nt(); ++n) {
        for (int i = 0; i < grid.nx(); ++i) {
            const std::size_t k = static_cast<std::size_t>(n) * grid.nx() + i;
            out[k] = std::log(s.values[k]) + s.log_scale[n];
        }
    }
    return out;
}

std::vector<double> unscaled(const ScaledField& s, const Grid1D& grid) {
    std::vector<double> out(s.values.size());
    for (int n = 0; n <= grid.nt(); ++n) {
        const double scale = std::exp(s.log_scale[n]);
        for (int i = 0; i < grid.nx(); ++i) {
            const std::size_t k = static_cast<std::size_t>(n) * grid.nx() + i;
            out[k] = s.values[k] * scale;
        }
    }
    return out;
}

// Centered differences of a slice, one-sided at the edges.
void differentiate(const std::vector<double>& table, const Grid1D& grid, int n, std::vector<double>& out) {
    const int nx = grid.nx();
    const double* row = table.data() + static_cast<std::size_t>(n) * nx;
    const double dx = grid.dx();
    out.resize(nx);
    out[0] = (row[1] - row[0]) / dx;
    out[nx - 1] = (row[nx - 1] - row[nx - 2]) / dx;
    for (int i = 1; i < nx - 1; ++i) out[i] = (row[i + 1] - row[i - 1]) / (2.0 * dx);
}

std::vector<double> grid_values(const Grid1D& grid, const std::function<double(double)>& fn) {
    std::vector<double> out(grid.nx());
    for (int i = 0; i < grid.nx(); ++i) out[i] = fn(grid.x(i));
    return out;
}

}  // namespace

PdeSolution solve_psi_backward(const sde::SdeModel& model, const sde::ScalarField& f, const sde::TerminalFunction& g,
                               const Grid1D& grid) {
    require_1d(model, "solve_psi_backward");
    const Scalar1D m{model};
    BackwardProblem prob;
    prob.a = [m](double x, double t) {
        const double s = m.sigma(x, t);
        return 0.5 * s * s;
    };
    prob.b = [m](double x, double t) { return m.drift(x, t); };
    if (f) prob.c = [f](double x, double t) { return -f(std::span<const double>(&x, 1), t); };
    const auto log_terminal = grid_values(grid, [&g](double x) { return g ? -g(std::span<const double>(&x, 1)) : 0.0; });

    const ScaledField s = solve_backward(grid, prob, log_terminal);
    check_positive(s, grid, "solve_psi_backward");
    const std::vector<double> log_psi = log_field(s, grid);

    PdeSolution sol(grid, FieldKind::psi, unscaled(s, grid));
    sol.upwinded_nodes = s.upwinded_nodes;
    double max_a = 0.0;
    for (int i = 0; i < grid.nx(); ++i) max_a = std::max(max_a, prob.a(grid.x(i), 0.0));
    sol.explicit_stable = grid.explicit_stable(max_a);

    std::vector<double> table(log_psi.size()), d;
    for (int n = 0; n <= grid.nt(); ++n) {
        differentiate(log_psi, grid, n, d);
        for (int i = 0; i < grid.nx(); ++i) {
            table[static_cast<std::size_t>(n) * grid.nx() + i] = m.sigma(grid.x(i), grid.t(n)) * d[i];
        }
    }
    sol.attach_control(std::move(table));
    return sol;
}

SmallNoiseV0::SmallNoiseV0(double alpha, double horizon) : alpha_(alpha), horizon_(horizon) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InputError("smallnoise: alpha must be > 0");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InputError("smallnoise: horizon must be > 0");
}

double SmallNoiseV0::g(double x) const {
    const double s = 1.0 - std::abs(x) / std::sqrt(alpha_);
    return 0.5 * alpha_ * s * s;
}

double SmallNoiseV0::V(double x, double t) const {
    const double s = 1.0 - std::abs(x) / std::sqrt(alpha_);
    return alpha_ * s * s / (2.0 * (horizon_ - t + 1.0));
}

double SmallNoiseV0::dVdx(double x, double t) const {
    const double sign = x >= 0.0 ? 1.0 : -1.0;
    const double s = 1.0 - std::abs(x) / std::sqrt(alpha_);
    return -std::sqrt(alpha_) * s * sign / (horizon_ - t + 1.0);
}

sde::ControlField SmallNoiseV0::control(double eta) const {
    if (!(eta > 0.0)) throw InputError("smallnoise: eta must be > 0");
    const SmallNoiseV0 self = *this;
    const double scale = 1.0 / std::sqrt(eta);
    return sde::ControlField::analytic(1, [self, scale](std::span<const double> x, double t, std::span<double> out) {
        out[0] = scale * self.u0(x[0], t);
    });
}

SmallNoiseV0 smallnoise_v0(double alpha, double horizon) { return {alpha, horizon}; }

PdeSolution solve_hjb_smallnoise(double eta, double alpha, const Grid1D& grid) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw InputError("solve_hjb_smallnoise: eta must be > 0");
    const SmallNoiseV0 v0(alpha, grid.horizon());
    BackwardProblem prob;
    prob.a = [eta](double, double) { return 0.5 * eta; };
    prob.b = [](double, double) { return 0.0; };
    const auto log_terminal = grid_values(grid, [&v0, eta](double x) { return -v0.g(x) / eta; });

    const ScaledField s = solve_backward(grid, prob, log_terminal);
    check_positive(s, grid, "solve_hjb_smallnoise (grid too coarse for this eta)");
    std::vector<double> value = log_field(s, grid);
    for (double& v : value) v *= -eta;

    PdeSolution sol(grid, FieldKind::value_V, value);
    sol.explicit_stable = grid.explicit_stable(0.5 * eta);
    std::vector<double> table(value.size()), d;
    const double scale = -1.0 / std::sqrt(eta);
    for (int n = 0; n <= grid.nt(); ++n) {
        differentiate(value, grid, n, d);
        for (int i = 0; i < grid.nx(); ++i) table[static_cast<std::size_t>(n) * grid.nx() + i] = scale * d[i];
    }
    sol.attach_control(std::move(table));
    return sol;
}

std::vector<double> gradient(const PdeSolution& sol, int n) {
    if (n < 0 || n > sol.grid().nt()) throw InputError("gradient: time index out of range");
    std::vector<double> d;
    differentiate(sol.field(), sol.grid(), n, d);
    return d;
}

PdeSolution solve_h_field(const sde::SdeModel& model, const sde::ControlField& u, const sde::ControlField& delta,
                          const Grid1D& grid) {
    require_1d(model, "solve_h_field");
    if (u.dim() != 1 || delta.dim() != 1) throw InputError("solve_h_field: controls must be one-dimensional");
    const Scalar1D m{model};
    BackwardProblem prob;
    prob.a = [m](double x, double t) {
        const double s = m.sigma(x, t);
        return 0.5 * s * s;
    };
    prob.b = [m, u, delta](double x, double t) {
        return m.drift(x, t) + m.sigma(x, t) * (eval_control(u, x, t) + 2.0 * eval_control(delta, x, t));
    };
    prob.c = [delta](double x, double t) {
        const double d = eval_control(delta, x, t);
        return d * d;
    };
    const ScaledField s = solve_backward(grid, prob, std::vector<double>(grid.nx(), 0.0));
    PdeSolution sol(grid, FieldKind::h_field, unscaled(s, grid));
    sol.upwinded_nodes = s.upwinded_nodes;
    for (int n = 0; n <= grid.nt(); ++n) {
        for (int i = 0; i < grid.nx(); ++i) {
            if (sol.at(n, i) < 1.0 - 1e-6) {
                std::ostringstream msg;
                msg << "solve_h_field: h = " << sol.at(n, i) << " < 1 at x = " << grid.x(i) << ", t = " << grid.t(n);
                throw NumericalError(msg.str());
            }
        }
    }
    return sol;
}

PdeSolution solve_second_moment(const sde::SdeModel& model, const sde::ControlField& u, const sde::ScalarField& f,
                                const sde::TerminalFunction& g, const Grid1D& grid) {
    require_1d(model, "solve_second_moment");
    if (u.dim() != 1) throw InputError("solve_second_moment: control must be one-dimensional");
    const Scalar1D m{model};
    BackwardProblem prob;
    prob.a = [m](double x, double t) {
        const double s = m.sigma(x, t);
        return 0.5 * s * s;
    };
    prob.b = [m, u](double x, double t) { return m.drift(x, t) - m.sigma(x, t) * eval_control(u, x, t); };
    prob.c = [u, f](double x, double t) {
        const double uu = eval_control(u, x, t);
        const double fv = f ? f(std::span<const double>(&x, 1), t) : 0.0;
        return -2.0 * fv + uu * uu;
    };
    const auto log_terminal =
        grid_values(grid, [&g](double x) { return g ? -2.0 * g(std::span<const double>(&x, 1)) : 0.0; });
    const ScaledField s = solve_backward(grid, prob, log_terminal);
    // Zeros allowed (far-field underflow of e^{-2g}), negatives are not.
    check_positive(s, grid, "solve_second_moment", true);
    PdeSolution sol(grid, FieldKind::second_moment, unscaled(s, grid));
    sol.upwinded_nodes = s.upwinded_nodes;
    return sol;
}

double naive_relative_error(const sde::SdeModel& model, const sde::TerminalFunction& g, const Grid1D& grid,
                            double x0) {
    const sde::TerminalFunction g2 = [g](std::span<const double> x) { return 2.0 * g(x); };
    const PdeSolution first = solve_psi_backward(model, {}, g, grid);
    const PdeSolution second = solve_psi_backward(model, {}, g2, grid);
    const double p1 = first.interpolate(x0, 0.0);
    const double p2 = second.interpolate(x0, 0.0);
    return std::sqrt(std::max(p2 / (p1 * p1) - 1.0, 0.0));
}

double HittingClosedForm::psi(double x) const { return std::cosh(x) / std::cosh(a); }

double HittingClosedForm::u_star(double x) const { return std::numbers::sqrt2 * std::tanh(x); }

HittingClosedForm hitting_closedform(double a) {
    if (!(a > 0.0) || !std::isfinite(a)) throw InputError("hitting_closedform: a must be > 0");
    return {a};
}

double hitting_u_star_exponential_form(double x) {
    const double e = std::exp(-2.0 * x);
    return std::numbers::sqrt2 * (1.0 - e) / (e + 1.0);
}

GriddedFunction solve_hitting_elliptic(double a, int nx) {
    if (!(a > 0.0)) throw InputError("solve_hitting_elliptic: a must be > 0");
    if (nx < 3) throw InputError("solve_hitting_elliptic: nx must be >= 3");
    const double dx = 2.0 * a / (nx - 1);
    const int m = nx - 2;
    std::vector<double> lower(m, 1.0 / (dx * dx)), upper(m, 1.0 / (dx * dx)), diag(m, -2.0 / (dx * dx) - 1.0),
        rhs(m, 0.0);
    rhs.front() -= 1.0 / (dx * dx);
    rhs.back() -= 1.0 / (dx * dx);
    const std::vector<double> inner = thomas(lower, diag, upper, rhs);
    GriddedFunction out;
    out.x.resize(nx);
    out.values.resize(nx);
    for (int i = 0; i < nx; ++i) out.x[i] = -a + i * dx;
    out.values.front() = 1.0;
    out.values.back() = 1.0;
    std::copy(inner.begin(), inner.end(), out.values.begin() + 1);
    return out;
}

}  // namespace pathweight::pde
