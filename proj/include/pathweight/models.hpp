#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "pathweight/pde.hpp"
#include "pathweight/sde.hpp"

namespace pathweight::models {

// dX = A X dt + B (u dt + dW), X_0 = 0, g(x) = alpha . x.
struct OuProblem {
    int d = 1;
    double horizon = 1.0;
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::VectorXd alpha;
    std::uint64_t sub_seed = 0;
    int resamples = 0;  // draws rejected (A not Hurwitz or B singular)

    sde::SdeModel model() const;
    sde::TerminalFunction g() const;
    // u*(t) = -B^T exp(A^T (T - t)) alpha.
    Eigen::VectorXd u_star(double t) const;
    // u* tabulated on the grid nodes, linear in t between them.
    sde::ControlField optimal_control(const sde::TimeGrid& grid) const;
};

// A = -3 I + Xi, B = I + Xi' with i.i.d. N(0, 1) entries drawn from sub_seed;
// redrawn until A is Hurwitz and B is well conditioned.
OuProblem make_ou(int d, std::uint64_t sub_seed, double horizon = 1.0, double alpha = 1.0);

// Scalar OU with given coefficients (no random draw).
OuProblem make_ou_scalar(double a, double b, double alpha, double horizon);

// dX = -4 kappa X (X^2 - 1) dt + B dW, X_0 = x0, g(x) = rho (x - 1)^2.
struct DoubleWell {
    double kappa = 1.0;
    double rho = 1.0;
    double B = 1.0;
    double x0 = -1.0;
    double horizon = 1.0;

    sde::SdeModel model() const;
    sde::TerminalFunction g() const;
    pde::Grid1D grid(int nx = 601, int nt = 1000) const;
};

// X = sqrt(eta) W, X_0 = x0, payoff exp(-g(X_T)/eta),
// g(x) = (alpha/2)(1 - |x|/sqrt(alpha))^2.
struct SmallNoise {
    double eta = 0.1;
    double alpha = 1.0;
    double x0 = 0.1;
    double horizon = 1.0;

    sde::SdeModel model() const;
    // g / eta.
    sde::TerminalFunction scaled_g() const;
    pde::Grid1D grid(int nx = 4001, int nt_per_unit_time = 2000) const;
};

}  // namespace pathweight::models
