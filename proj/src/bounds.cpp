#include "pathweight/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "pathweight/errors.hpp"
#include "pathweight/estimators.hpp"
#include "pathweight/numerics.hpp"
#include "pathweight/rng.hpp"

namespace pathweight::bounds {

std::string to_string(BoundKind kind) {
    switch (kind) {
        case BoundKind::exact_closed_form: return "exact_closed_form";
        case BoundKind::exact_mc_form1: return "exact_mc_form1";
        case BoundKind::exact_mc_form2: return "exact_mc_form2";
        case BoundKind::lower_kl: return "lower_kl";
        case BoundKind::lower_h1: return "lower_h1";
        case BoundKind::upper_h2: return "upper_h2";
        case BoundKind::upper_holder: return "upper_holder";
        case BoundKind::hitting_exact: return "hitting_exact";
        case BoundKind::hitting_jensen: return "hitting_jensen";
        case BoundKind::hitting_naive: return "hitting_naive";
    }
    return "unknown";
}

TimeEnvelope TimeEnvelope::constant(double c) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw InputError("envelope: value must be finite and >= 0");
    return {[c](double) { return c; }, {}};
}

TimeEnvelope TimeEnvelope::window(double c, double s) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw InputError("envelope: value must be finite and >= 0");
    if (!(s >= 0.0)) throw InputError("envelope: window length must be >= 0");
    return {[c, s](double t) { return t < s ? c : 0.0; }, {s}};
}

TimeEnvelope TimeEnvelope::sine(double eps, double alpha) {
    return {[eps, alpha](double t) { return std::abs(eps * std::sin(alpha * t)); }, {}};
}

namespace {

double squared_integral(const TimeEnvelope& env, double T) {
    if (!env.h) throw InputError("envelope: empty function");
    std::vector<double> inner;
    for (double b : env.breakpoints) {
        if (b > 0.0 && b < T) inner.push_back(b);
    }
    std::sort(inner.begin(), inner.end());
    const auto sq = [&env](double t) {
        const double v = env.h(t);
        return v * v;
    };
    return integrate_piecewise(sq, 0.0, T, inner);
}

double error_from_exponent(double e) { return std::sqrt(std::expm1(e)); }

void require_horizon(double T) {
    if (!(T > 0.0) || !std::isfinite(T)) throw InputError("horizon must be finite and > 0");
}

}  // namespace

ErrorInterval constant_delta_error(const TimeEnvelope& h1, const TimeEnvelope& h2, double T) {
    require_horizon(T);
    constexpr int kChecks = 4001;
    for (int i = 0; i < kChecks; ++i) {
        const double t = T * i / (kChecks - 1);
        const double a = h1.h(t), b = h2.h(t);
        if (a < 0.0 || b < 0.0) throw InputError("constant_delta_error: envelopes must be >= 0");
        if (a > b) {
            std::ostringstream msg;
            msg << "constant_delta_error: h1 > h2 at t = " << t;
            throw InputError(msg.str());
        }
    }
    const double lower = error_from_exponent(squared_integral(h1, T));
    const double upper = error_from_exponent(squared_integral(h2, T));
    return {lower, upper, &h1 == &h2};
}

double constant_delta_error(const TimeEnvelope& h, double T) {
    require_horizon(T);
    return error_from_exponent(squared_integral(h, T));
}

double constant_delta_exact(double eps, int d, double T) {
    if (d < 1) throw InputError("constant_delta_exact: d must be >= 1");
    require_horizon(T);
    return error_from_exponent(d * eps * eps * T);
}

double sine_perturbation_error(double eps, double alpha, double T) {
    if (alpha == 0.0) throw InputError("sine_perturbation_error: alpha = 0 (use constant_delta_error)");
    require_horizon(T);
    return error_from_exponent(eps * eps * (T / 2.0 - std::sin(2.0 * alpha * T) / (4.0 * alpha)));
}

double holder_exponent_coefficient(double n, double p) {
    if (!(n > 1.0)) throw InputError("holder: n must be > 1");
    if (!(p > 1.0)) throw InputError("holder: p must be > 1 (q = p/(p-1) must be > 1)");
    const double q = p / (p - 1.0);
    return n * q * (n * p - 1.0) / 2.0;
}

double holder_optimal_p(double n) {
    if (!(n > 1.0)) throw InputError("holder: n must be > 1");
    return 1.0 + std::sqrt(1.0 - 1.0 / n);
}

double holder_analytic(double integral, std::optional<double> p) {
    if (!(integral >= 0.0)) throw InputError("holder_analytic: integral must be >= 0");
    const double pp = p.value_or(holder_optimal_p(2.0));
    if (!(pp > 1.0)) throw InputError("holder: p must be > 1");
    return error_from_exponent((2.0 * pp - 1.0) * integral);
}

namespace {

std::string digest(const sde::SdeModel& model, const McSettings& mc, const std::string& what) {
    std::ostringstream s;
    s << what << "; d=" << model.dim() << "; T=" << mc.grid.horizon() << "; n_steps=" << mc.grid.n_steps()
      << "; k=" << mc.k << "; seed=" << mc.seed;
    return s.str();
}

struct ExpMean {
    double value;
    double std_error;
    double ess;
};

// sqrt(transform(mean exp(v)) - 1) with bootstrap error; transform acts on the
// log of the mean.
ExpMean root_of_exp_mean(std::span<const double> v, double inv_q, std::uint64_t seed, int resamples) {
    const std::size_t k = v.size();
    double top = -std::numeric_limits<double>::infinity();
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericalError("bound estimate: non-finite exponent");
        top = std::max(top, x);
    }
    std::vector<double> e(k), e2(k);
    for (std::size_t i = 0; i < k; ++i) {
        e[i] = std::exp(v[i] - top);
        e2[i] = e[i] * e[i];
    }
    const auto moment = [top, inv_q](double scaled_mean) {
        return std::expm1(inv_q * (top + std::log(scaled_mean)));
    };
    const double s = pairwise_sum(e);
    ExpMean out;
    out.value = moment(s / static_cast<double>(k));
    out.ess = s * s / pairwise_sum(e2);
    auto stat = [&e, k, &moment](std::span<const std::size_t> idx) {
        double acc = 0.0;
        for (std::size_t i : idx) acc += e[i];
        return std::sqrt(std::max(moment(acc / static_cast<double>(k)), 0.0));
    };
    out.std_error = k >= 2 ? estimators::bootstrap_stderr(k, stat, resamples, seed) : 0.0;
    return out;
}

BoundReport finish(BoundKind kind, const ExpMean& em, std::string digest_text) {
    BoundReport r;
    r.kind = kind;
    r.clamped = em.value < 0.0;
    r.value = std::sqrt(std::max(em.value, 0.0));
    r.std_error = em.std_error;
    r.ess = em.ess;
    r.low_ess = em.ess < 100.0;
    r.inputs_digest = std::move(digest_text);
    return r;
}

}  // namespace

BoundReport exact_error_mc(const sde::SdeModel& model, const sde::ControlField& u, const sde::ControlField& delta,
                           ExactForm form, const McSettings& mc) {
    sde::SimulationOptions opts;
    opts.aux = delta;
    const bool form1 = form == ExactForm::under_u;
    const sde::ControlField control = form1 ? u : u.plus(delta.scaled(2.0));
    const sde::PathBatch batch =
        sde::simulate_controlled(model, control, {}, {}, mc.grid, sde::StoppingSpec::fixed(), mc.k, mc.seed, opts);
    std::vector<double> v(mc.k);
    for (std::size_t i = 0; i < mc.k; ++i) {
        v[i] = form1 ? -batch.aux_sq_integral[i] + 2.0 * batch.aux_dw_integral[i] : batch.aux_sq_integral[i];
    }
    const ExpMean em = root_of_exp_mean(v, 1.0, derive_seed(mc.seed, "bootstrap"), mc.bootstrap_resamples);
    return finish(form1 ? BoundKind::exact_mc_form1 : BoundKind::exact_mc_form2, em,
                  digest(model, mc, std::string("delta=") + sde::to_string(delta.provenance()) +
                                        (form1 ? "; form=under_u" : "; form=under_u_plus_2delta")));
}

BoundReport holder_bound_mc(const sde::SdeModel& model, const sde::ControlField& u, const sde::ControlField& delta,
                            const McSettings& mc, double n, std::optional<double> p) {
    const double pp = p.value_or(holder_optimal_p(n));
    const double c = holder_exponent_coefficient(n, pp);
    const double q = pp / (pp - 1.0);
    sde::SimulationOptions opts;
    opts.aux = delta;
    const sde::PathBatch batch =
        sde::simulate_controlled(model, u, {}, {}, mc.grid, sde::StoppingSpec::fixed(), mc.k, mc.seed, opts);
    std::vector<double> v(mc.k);
    for (std::size_t i = 0; i < mc.k; ++i) v[i] = c * batch.aux_sq_integral[i];
    std::ostringstream what;
    what.precision(17);
    what << "delta=" << sde::to_string(delta.provenance()) << "; n=" << n << "; p=" << pp << "; q=" << q
         << "; p_is_minimizer=" << (pp == holder_optimal_p(n) ? "yes" : "no");
    const ExpMean em = root_of_exp_mean(v, 1.0 / q, derive_seed(mc.seed, "bootstrap"), mc.bootstrap_resamples);
    BoundReport r = finish(BoundKind::upper_holder, em, digest(model, mc, what.str()));
    if (n != 2.0) {
        // Moment bound B itself; error by the delta method from the root.
        r.value = 1.0 + std::max(em.value, 0.0);
        r.std_error = 2.0 * std::sqrt(std::max(em.value, 0.0)) * em.std_error;
    }
    return r;
}

HittingReport hitting_error(double eps, const sde::PathBatch& batch_mirrored, const sde::PathBatch& batch_plain,
                            std::uint64_t bootstrap_seed, int resamples) {
    for (const sde::PathBatch* b : {&batch_mirrored, &batch_plain}) {
        if (!b->has_exit_times()) throw InputError("hitting_error: batch has no exit times");
        if (!b->complete) throw InputError("hitting_error: batch is incomplete (paths reached the time cap)");
        if (b->k == 0) throw InputError("hitting_error: empty batch");
    }
    const double e2 = eps * eps;
    std::ostringstream dg;
    dg.precision(17);
    dg << "eps=" << eps << "; k_mirrored=" << batch_mirrored.k << "; k_plain=" << batch_plain.k;

    HittingReport out;
    std::vector<double> v(batch_mirrored.k);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = e2 * batch_mirrored.exit_time[i];
    out.exact = finish(BoundKind::hitting_exact, root_of_exp_mean(v, 1.0, bootstrap_seed, resamples), dg.str());

    const auto jensen_like = [&](const sde::PathBatch& b, BoundKind kind, std::uint64_t seed) {
        const std::vector<double>& tau = b.exit_time;
        const std::size_t k = tau.size();
        BoundReport r;
        r.kind = kind;
        r.value = error_from_exponent(e2 * mean(tau));
        auto stat = [&tau, k, e2](std::span<const std::size_t> idx) {
            double acc = 0.0;
            for (std::size_t i : idx) acc += tau[i];
            return error_from_exponent(e2 * acc / static_cast<double>(k));
        };
        r.std_error = k >= 2 ? estimators::bootstrap_stderr(k, stat, resamples, seed) : 0.0;
        r.ess = static_cast<double>(k);
        r.inputs_digest = dg.str();
        return r;
    };
    out.jensen_lower = jensen_like(batch_mirrored, BoundKind::hitting_jensen, derive_seed(bootstrap_seed, 1));
    out.naive_wrong = jensen_like(batch_plain, BoundKind::hitting_naive, derive_seed(bootstrap_seed, 2));
    return out;
}

}  // namespace pathweight::bounds
