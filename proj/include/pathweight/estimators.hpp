#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pathweight/sde.hpp"

namespace pathweight::estimators {

struct IsEstimate {
    double z_hat = 0.0;
    double var_hat = 0.0;      // unbiased sample variance of the weighted payoff
    double rel_err_hat = 0.0;  // sqrt(var_hat) / z_hat
    double ess = 0.0;          // (sum w)^2 / sum w^2
    std::size_t k = 0;
    double stderr_z = 0.0;     // sqrt(var_hat / k)
};

// Estimate from per-sample log weights log w_i. Weights are exponentiated
// after subtracting the maximum, so z_hat and var_hat stay finite whenever
// the rescaled quantities do.
IsEstimate estimate_from_log_weights(std::span<const double> log_w);

// w_i = exp(-running_cost_i - terminal_cost_i + log_girsanov_i).
IsEstimate importance_estimate(const sde::PathBatch& batch);

// rel_err_hat^2 from the same weights. With z_reference, var_hat / z_ref^2.
double chi2_hat(const sde::PathBatch& batch, std::optional<double> z_reference = std::nullopt);

// 1/2 E[int |delta|^2 ds] along paths simulated under u* with delta as the
// auxiliary field.
double path_kl_estimate(const sde::ControlField& delta, const sde::PathBatch& batch_under_ustar);

// Statistic of a resample, given the resampled indices.
using ResampleStatistic = std::function<double(std::span<const std::size_t> indices)>;

// Nonparametric bootstrap standard error: `resamples` index resamples of size
// k, resample b drawn from Substream(seed, b). Non-finite statistics are
// dropped. Resamples run in parallel; the result does not depend on the
// thread count.
double bootstrap_stderr(std::size_t k, const ResampleStatistic& stat, int resamples, std::uint64_t seed);

// Bootstrap standard error of rel_err_hat for the given log weights.
double bootstrap_rel_err_stderr(std::span<const double> log_w, std::uint64_t seed, int resamples = 200);

// log(mean(exp(values))), evaluated with a max shift.
double log_mean_exp(std::span<const double> values);

}  // namespace pathweight::estimators
