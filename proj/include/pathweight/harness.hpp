#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pathweight/config.hpp"

namespace pathweight::harness {

struct SweepRow {
    double swept_value = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;
    std::vector<std::pair<std::string, double>> bound_values;  // in CSV column order
    long long wall_time_ms = 0;  // JSON summary only; never written to CSV

    double bound(const std::string& name) const;
};

struct Assertion {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ExperimentResult {
    std::string experiment;
    std::string swept_parameter;
    std::vector<std::string> columns;
    std::vector<SweepRow> rows;
    std::vector<Assertion> assertions;
    ExperimentConfig config;  // with defaults filled in
    std::map<std::string, std::uint64_t> sub_seeds;
    std::map<std::string, int> ou_resamples;  // keyed by dimension
    long long runtime_ms = 0;
    std::size_t k = 0;
};

const std::vector<std::string>& experiment_names();
bool is_experiment(const std::string& name);
// CSV header columns for an experiment.
std::vector<std::string> csv_columns(const std::string& experiment);

using RowCallback = std::function<void(const SweepRow&)>;

// Throws InputError for invalid configurations and NumericalError (with the
// experiment and swept value prepended) for failed simulations or solves.
ExperimentResult run_experiment(const ExperimentConfig& config, const RowCallback& on_row = {});

// 17 significant digits; byte-identical for identical configs.
std::string render_csv(const ExperimentResult& result);
std::string render_summary_json(const ExperimentResult& result);

// foo.csv -> foo.json; other names get ".json" appended.
std::string summary_path_for(const std::string& csv_path);
// Writes the CSV and the JSON summary next to it.
void write_outputs(const ExperimentResult& result, const std::string& csv_path);

}  // namespace pathweight::harness
