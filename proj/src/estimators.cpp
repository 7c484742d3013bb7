#include "pathweight/estimators.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "pathweight/errors.hpp"
#include "pathweight/numerics.hpp"
#include "pathweight/rng.hpp"

namespace pathweight::estimators {

namespace {

void require_complete(const sde::PathBatch& batch) {
    if (batch.k == 0) throw InputError("estimator: empty batch");
    if (!batch.complete) throw InputError("estimator: batch is incomplete (paths reached the time cap)");
}

// Weights rescaled by exp(-max log weight).
struct ScaledWeights {
    std::vector<double> w;
    double log_scale;
};

ScaledWeights scaled_weights(std::span<const double> log_w) {
    if (log_w.empty()) throw InputError("estimator: empty batch");
    double top = -std::numeric_limits<double>::infinity();
    for (double v : log_w) {
        if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
            throw NumericalError("estimator: non-finite log weight");
        }
        top = std::max(top, v);
    }
    if (top == -std::numeric_limits<double>::infinity()) throw NumericalError("estimator: all weights are zero");
    ScaledWeights out{std::vector<double>(log_w.size()), top};
    for (std::size_t i = 0; i < log_w.size(); ++i) out.w[i] = std::exp(log_w[i] - top);
    return out;
}

}  // namespace

IsEstimate estimate_from_log_weights(std::span<const double> log_w) {
    const ScaledWeights sw = scaled_weights(log_w);
    const std::size_t k = sw.w.size();
    std::vector<double> sq(k);
    for (std::size_t i = 0; i < k; ++i) sq[i] = sw.w[i] * sw.w[i];
    const double sum = pairwise_sum(sw.w);
    const double sum_sq = pairwise_sum(sq);
    const double m = sum / static_cast<double>(k);
    const double v = sample_variance(sw.w);
    const double scale = std::exp(sw.log_scale);

    IsEstimate est;
    est.k = k;
    est.z_hat = m * scale;
    est.var_hat = v * scale * scale;
    est.rel_err_hat = std::sqrt(v) / m;
    est.ess = std::min(static_cast<double>(k), sum * sum / sum_sq);
    est.stderr_z = std::sqrt(v / static_cast<double>(k)) * scale;
    return est;
}

IsEstimate importance_estimate(const sde::PathBatch& batch) {
    require_complete(batch);
    const std::vector<double> lw = batch.log_weighted_payoff();
    return estimate_from_log_weights(lw);
}

double chi2_hat(const sde::PathBatch& batch, std::optional<double> z_reference) {
    require_complete(batch);
    const std::vector<double> lw = batch.log_weighted_payoff();
    if (!z_reference) {
        const IsEstimate est = estimate_from_log_weights(lw);
        return est.rel_err_hat * est.rel_err_hat;
    }
    if (!(*z_reference > 0.0) || !std::isfinite(*z_reference)) {
        throw InputError("chi2_hat: z_reference must be positive and finite");
    }
    const ScaledWeights sw = scaled_weights(lw);
    const double v = sample_variance(sw.w);
    const double z_scaled = *z_reference * std::exp(-sw.log_scale);
    return v / (z_scaled * z_scaled);
}

double path_kl_estimate(const sde::ControlField& delta, const sde::PathBatch& batch_under_ustar) {
    if (!batch_under_ustar.has_aux()) {
        throw InputError("path_kl_estimate: batch carries no auxiliary integral (simulate with options.aux = delta)");
    }
    if (delta.dim() != batch_under_ustar.dim) throw InputError("path_kl_estimate: dimension mismatch");
    require_complete(batch_under_ustar);
    return 0.5 * mean(batch_under_ustar.aux_sq_integral);
}

double bootstrap_stderr(std::size_t k, const ResampleStatistic& stat, int resamples, std::uint64_t seed) {
    if (k == 0) throw InputError("bootstrap: empty sample");
    if (resamples < 2) throw InputError("bootstrap: need at least two resamples");
    std::vector<double> stats(resamples, std::numeric_limits<double>::quiet_NaN());
#pragma omp parallel
    {
        std::vector<std::size_t> idx(k);
#pragma omp for schedule(static)
        for (int b = 0; b < resamples; ++b) {
            Substream rng(seed, static_cast<std::uint64_t>(b));
            for (auto& i : idx) i = rng.below(k);
            stats[b] = stat(idx);
        }
    }
    std::vector<double> finite;
    finite.reserve(stats.size());
    for (double s : stats) {
        if (std::isfinite(s)) finite.push_back(s);
    }
    if (finite.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(sample_variance(finite));
}

double bootstrap_rel_err_stderr(std::span<const double> log_w, std::uint64_t seed, int resamples) {
    const ScaledWeights sw = scaled_weights(log_w);
    const double m = mean(sw.w);
    // Centered values keep the resampled variance free of cancellation when r is small.
    std::vector<double> y(sw.w.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = sw.w[i] / m - 1.0;
    const std::size_t k = y.size();
    auto stat = [&y, k](std::span<const std::size_t> idx) {
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t i : idx) {
            s1 += y[i];
            s2 += y[i] * y[i];
        }
        const double mb = s1 / static_cast<double>(k);
        const double var = (s2 - static_cast<double>(k) * mb * mb) / static_cast<double>(k - 1);
        return std::sqrt(std::max(var, 0.0)) / (1.0 + mb);
    };
    if (k < 2) return 0.0;
    return bootstrap_stderr(k, stat, resamples, seed);
}

double log_mean_exp(std::span<const double> values) {
    if (values.empty()) throw InputError("log_mean_exp: empty sample");
    double top = -std::numeric_limits<double>::infinity();
    for (double v : values) top = std::max(top, v);
    if (!std::isfinite(top)) return top;
    std::vector<double> e(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) e[i] = std::exp(values[i] - top);
    return top + std::log(mean(e));
}

}  // namespace pathweight::estimators
