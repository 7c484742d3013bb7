#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pathweight::harness {

struct Sweep {
    std::string parameter;
    std::vector<double> values;
};

// Keys of the configuration file are exactly the field names below.
struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 20240611;
    std::size_t k = 100000;
    std::optional<int> n_steps;
    std::optional<Sweep> sweep;

    // Model parameters; unset ones take the experiment's defaults.
    std::optional<int> d;
    std::optional<double> T;
    std::optional<double> kappa;
    std::optional<double> rho;
    std::optional<double> alpha;
    std::optional<double> eta;
    std::optional<double> eps;
    std::optional<double> zeta;
    std::optional<double> a;       // exit domain half-width
    std::optional<double> window;  // length s of the perturbation window
    std::optional<double> B;       // double-well diffusion coefficient
    std::optional<double> sigma;   // Gaussian standard deviation
    std::optional<double> dt;      // exit-time step
    std::optional<std::uint64_t> ou_seed;
    std::optional<int> nx;
    std::optional<int> nt;

    int bootstrap = 200;
    bool full = false;  // k = 10^6 unless k was set explicitly
    bool k_explicit = false;
    std::string output_path;

    // Throws InputError for unknown keys or malformed values.
    void set(const std::string& key, const std::string& value);
};

// Line-oriented `key = value` text with `#` comments.
void apply_config_text(ExperimentConfig& config, const std::string& text);
void apply_config_file(ExperimentConfig& config, const std::string& path);

// `name:v1,v2,...`
Sweep parse_sweep(const std::string& text);

// Canonical `key = value` rendering of every set field.
std::string render_config(const ExperimentConfig& config);

}  // namespace pathweight::harness
