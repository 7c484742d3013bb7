#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pathweight/sde.hpp"

// Path-space relative-error formulas: closed forms for x-independent
// suboptimality, Monte Carlo evaluation of the exact expressions, the Hoelder
// bound and the exit-time formulas.
namespace pathweight::bounds {

enum class BoundKind {
    exact_closed_form,
    exact_mc_form1,
    exact_mc_form2,
    lower_kl,
    lower_h1,
    upper_h2,
    upper_holder,
    hitting_exact,
    hitting_jensen,
    hitting_naive,
};

std::string to_string(BoundKind kind);

struct BoundReport {
    BoundKind kind = BoundKind::exact_closed_form;
    double value = 0.0;                // may be +inf
    std::optional<double> std_error;  // set for Monte Carlo kinds
    std::string inputs_digest;
    bool clamped = false;  // sample mean under the root fell below 1
    bool low_ess = false;  // effective sample size of the exponentials below 100
    double ess = 0.0;
};

// Time-only envelope h(t) >= 0 for |delta(x, t)|, with the points where h may
// jump.
struct TimeEnvelope {
    std::function<double(double)> h;
    std::vector<double> breakpoints;

    static TimeEnvelope constant(double c);
    // c on [0, s), 0 afterwards.
    static TimeEnvelope window(double c, double s);
    // |eps sin(alpha t)|
    static TimeEnvelope sine(double eps, double alpha);
};

struct ErrorInterval {
    double lower;
    double upper;
    bool exact;  // h1 and h2 are the same envelope
};

// sqrt(exp(int_0^T h^2 dt) - 1) for h1 (lower) and h2 (upper). Throws if
// h1 > h2 at any of 4001 check points or any quadrature node.
ErrorInterval constant_delta_error(const TimeEnvelope& h1, const TimeEnvelope& h2, double T);

// Exact error for an x-independent |delta(t)| = h(t).
double constant_delta_error(const TimeEnvelope& h, double T);

// delta = (eps, ..., eps) in d dimensions: sqrt(exp(d eps^2 T) - 1).
double constant_delta_exact(double eps, int d, double T);

// sqrt(exp(eps^2 (T/2 - sin(2 alpha T) / (4 alpha))) - 1).
double sine_perturbation_error(double eps, double alpha, double T);

// Exponent coefficient n q (n p - 1) / 2 of the Hoelder moment bound, q = p/(p-1).
double holder_exponent_coefficient(double n, double p);
// Minimizer of the coefficient in p: 1 + sqrt(1 - 1/n).
double holder_optimal_p(double n);
// Hoelder bound (n = 2) for deterministic int |delta|^2 ds = I:
// sqrt(exp((2p - 1) I) - 1); at p* this is sqrt(exp((1 + sqrt 2) I) - 1).
double holder_analytic(double integral, std::optional<double> p = std::nullopt);

enum class ExactForm {
    under_u,              // E[exp(-int|delta|^2 + 2 int delta.dW)] along X^u
    under_u_plus_2delta,  // E[exp(int|delta|^2)] along X^{u+2 delta}
};

struct McSettings {
    sde::TimeGrid grid;
    std::size_t k;
    std::uint64_t seed;
    int bootstrap_resamples = 200;
};

// delta = u* - u.
BoundReport exact_error_mc(const sde::SdeModel& model, const sde::ControlField& u, const sde::ControlField& delta,
                           ExactForm form, const McSettings& mc);

// Hoelder bound simulated under u. For n = 2 the value is the relative-error
// bound sqrt(E[exp(c int|delta|^2)]^(1/q) - 1), c = q (2p - 1); for other n it
// is the moment bound E[exp(c int|delta|^2)]^(1/q) on E[(dP^{u*}/dP^u)^n].
// p defaults to the minimizer for n.
BoundReport holder_bound_mc(const sde::SdeModel& model, const sde::ControlField& u, const sde::ControlField& delta,
                            const McSettings& mc, double n = 2.0, std::optional<double> p = std::nullopt);

struct HittingReport {
    BoundReport exact;
    BoundReport jensen_lower;
    BoundReport naive_wrong;
};

// batch_mirrored: exit times under 2u* - u; batch_plain: exit times under u = 0.
HittingReport hitting_error(double eps, const sde::PathBatch& batch_mirrored, const sde::PathBatch& batch_plain,
                            std::uint64_t bootstrap_seed, int resamples = 200);

}  // namespace pathweight::bounds
