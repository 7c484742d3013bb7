#include "pathweight/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "pathweight/errors.hpp"
#include "pathweight/harness.hpp"

namespace pathweight {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Importance sampling of diffusion path functionals: experiments and error bounds"};
    app.name("pathweight");

    std::string experiment;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k;
    std::string out_path;
    std::vector<std::string> overrides;
    bool full = false;
    int threads = 0;
    bool list = false;

    app.add_option("experiment", experiment, "Experiment name");
    app.add_option("--config", config_path, "Configuration file of key = value lines");
    app.add_option("--seed", seed, "Root seed");
    app.add_option("--k", k, "Number of sample paths per sweep value");
    app.add_option("--out", out_path, "CSV output path (default results/<experiment>.csv)");
    app.add_option("--set", overrides, "Override a configuration key, key=value")->take_all();
    app.add_flag("--full", full, "Use k = 1000000 unless --k is given");
    app.add_option("--threads", threads, "OpenMP thread count (default: runtime setting)");
    app.add_flag("--list", list, "List experiments and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    if (list) {
        for (const auto& name : harness::experiment_names()) out << name << "\n";
        return 0;
    }

    try {
        if (experiment.empty()) throw InputError("missing experiment name (see --list)");
        if (!harness::is_experiment(experiment)) throw InputError("unknown experiment '" + experiment + "'");
        if (threads < 0) throw InputError("--threads must be >= 0");

        harness::ExperimentConfig config;
        if (!config_path.empty()) harness::apply_config_file(config, config_path);
        if (!config.experiment.empty() && config.experiment != experiment) {
            throw InputError("config file is for experiment '" + config.experiment + "'");
        }
        config.experiment = experiment;
        for (const auto& item : overrides) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + item + "'");
            config.set(item.substr(0, eq), item.substr(eq + 1));
        }
        if (seed) config.seed = *seed;
        if (k) {
            if (*k < 1) throw InputError("k must be >= 1");
            config.k = *k;
            config.k_explicit = true;
        }
        if (full) config.full = true;
        if (!out_path.empty()) config.output_path = out_path;
        if (config.output_path.empty()) config.output_path = "results/" + experiment + ".csv";
        if (threads > 0) omp_set_num_threads(threads);

        const std::filesystem::path target(config.output_path);
        if (target.has_parent_path()) {
            std::error_code ec;
            std::filesystem::create_directories(target.parent_path(), ec);
            if (ec) throw InputError("cannot create '" + target.parent_path().string() + "': " + ec.message());
        }

        const auto result = harness::run_experiment(config, [&](const harness::SweepRow& row) {
            out << experiment << " swept_value=" << num(row.swept_value) << " rel_err=" << num(row.estimate) << " stderr=" << num(row.std_error);
            for (const auto& [name, v] : row.bound_values) out << " " << name << "=" << num(v);
            out << " (" << row.wall_time_ms << " ms)\n";
            out.flush();
        });
        harness::write_outputs(result, config.output_path);
        int failed = 0;
        for (const auto& a : result.assertions) {
            if (!a.passed) ++failed;
            out << (a.passed ? "  ok   " : "  FAIL ") << a.name << (a.detail.empty() ? "" : ": " + a.detail) << "\n";
        }
        out << "wrote " << config.output_path << " and " << harness::summary_path_for(config.output_path) << " ("
            << result.rows.size() << " rows, " << failed << " failed assertions, " << result.runtime_ms << " ms)\n";
        return 0;
    } catch (const NumericalError& e) {
        err << "ERROR[numerical]: " << e.what() << "\n";
        return 2;
    } catch (const InputError& e) {
        err << "ERROR[config]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "ERROR[numerical]: " << e.what() << "\n";
        return 2;
    }
}

int cli_main(int argc, char** argv) { return cli_main(argc, argv, std::cout, std::cerr); }

}  // namespace pathweight
