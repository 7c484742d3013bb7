#include "pathweight/models.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <memory>

#include "pathweight/errors.hpp"
#include "pathweight/rng.hpp"

namespace pathweight::models {

namespace {

bool hurwitz(const Eigen::MatrixXd& A) {
    const Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
    return es.eigenvalues().real().maxCoeff() < 0.0;
}

}  // namespace

OuProblem make_ou(int d, std::uint64_t sub_seed, double horizon, double alpha) {
    if (d < 1) throw InputError("make_ou: d must be >= 1");
    if (!(horizon > 0.0)) throw InputError("make_ou: horizon must be > 0");
    OuProblem ou;
    ou.d = d;
    ou.horizon = horizon;
    ou.sub_seed = sub_seed;
    ou.alpha = Eigen::VectorXd::Constant(d, alpha);
    for (std::uint64_t attempt = 0;; ++attempt) {
        if (attempt > 1000) throw NumericalError("make_ou: no admissible matrices after 1000 draws");
        Substream rng(sub_seed, attempt);
        Eigen::MatrixXd xi(d, d), xi2(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) xi(i, j) = rng.normal();
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) xi2(i, j) = rng.normal();
        Eigen::MatrixXd A = -3.0 * Eigen::MatrixXd::Identity(d, d) + xi;
        Eigen::MatrixXd B = Eigen::MatrixXd::Identity(d, d) + xi2;
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
        if (hurwitz(A) && lu.isInvertible() && lu.rcond() > 1e-8) {
            ou.A = std::move(A);
            ou.B = std::move(B);
            ou.resamples = static_cast<int>(attempt);
            return ou;
        }
    }
}

OuProblem make_ou_scalar(double a, double b, double alpha, double horizon) {
    OuProblem ou;
    ou.d = 1;
    ou.horizon = horizon;
    ou.A = Eigen::MatrixXd::Constant(1, 1, a);
    ou.B = Eigen::MatrixXd::Constant(1, 1, b);
    ou.alpha = Eigen::VectorXd::Constant(1, alpha);
    return ou;
}

sde::SdeModel OuProblem::model() const {
    auto a = std::make_shared<const Eigen::MatrixXd>(A);
    const int dim = d;
    sde::VectorField drift = [a, dim](std::span<const double> x, double, std::span<double> out) {
        Eigen::Map<Eigen::VectorXd>(out.data(), dim).noalias() = *a * Eigen::Map<const Eigen::VectorXd>(x.data(), dim);
    };
    return sde::SdeModel::with_constant_diffusion(d, std::move(drift), B, Eigen::VectorXd::Zero(d), horizon);
}

sde::TerminalFunction OuProblem::g() const {
    const Eigen::VectorXd a = alpha;
    return [a](std::span<const double> x) {
        return a.dot(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
    };
}

Eigen::VectorXd OuProblem::u_star(double t) const {
    const Eigen::MatrixXd E = (A.transpose() * (horizon - t)).exp();
    return -B.transpose() * E * alpha;
}

sde::ControlField OuProblem::optimal_control(const sde::TimeGrid& grid) const {
    const int n = grid.n_steps();
    auto table = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n + 1) * d);
    for (int s = 0; s <= n; ++s) {
        const Eigen::VectorXd u = u_star(grid.time(s));
        std::copy(u.data(), u.data() + d, table->data() + static_cast<std::size_t>(s) * d);
    }
    const double dt = grid.dt();
    const int dim = d;
    return sde::ControlField::analytic(
        d, [table, dt, n, dim](std::span<const double>, double t, std::span<double> out) {
            const double st = std::clamp(t / dt, 0.0, static_cast<double>(n));
            const int i = std::min(static_cast<int>(st), n - 1);
            const double w = st - i;
            const double* lo = table->data() + static_cast<std::size_t>(i) * dim;
            const double* hi = lo + dim;
            if (w == 0.0) {
                for (int j = 0; j < dim; ++j) out[j] = lo[j];
            } else {
                for (int j = 0; j < dim; ++j) out[j] = (1.0 - w) * lo[j] + w * hi[j];
            }
        });
}

sde::SdeModel DoubleWell::model() const {
    const double k = kappa;
    sde::VectorField drift = [k](std::span<const double> x, double, std::span<double> out) {
        out[0] = -4.0 * k * x[0] * (x[0] * x[0] - 1.0);
    };
    return sde::SdeModel::with_constant_diffusion(1, std::move(drift), Eigen::MatrixXd::Constant(1, 1, B),
                                                  Eigen::VectorXd::Constant(1, x0), horizon);
}

sde::TerminalFunction DoubleWell::g() const {
    const double r = rho;
    return [r](std::span<const double> x) { return r * (x[0] - 1.0) * (x[0] - 1.0); };
}

pde::Grid1D DoubleWell::grid(int nx, int nt) const { return {-3.0, 3.0, nx, nt, horizon}; }

sde::SdeModel SmallNoise::model() const {
    if (!(eta > 0.0)) throw InputError("SmallNoise: eta must be > 0");
    sde::VectorField drift = [](std::span<const double>, double, std::span<double> out) { out[0] = 0.0; };
    return sde::SdeModel::with_constant_diffusion(1, std::move(drift), Eigen::MatrixXd::Constant(1, 1, std::sqrt(eta)),
                                                  Eigen::VectorXd::Constant(1, x0), horizon);
}

sde::TerminalFunction SmallNoise::scaled_g() const {
    const double a = alpha, e = eta;
    return [a, e](std::span<const double> x) {
        const double s = 1.0 - std::abs(x[0]) / std::sqrt(a);
        return 0.5 * a * s * s / e;
    };
}

pde::Grid1D SmallNoise::grid(int nx, int nt_per_unit_time) const {
    const int nt = std::max(1, static_cast<int>(std::ceil(nt_per_unit_time * horizon)));
    return {-2.0, 2.0, nx, nt, horizon};
}

}  // namespace pathweight::models
