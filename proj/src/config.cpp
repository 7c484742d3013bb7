#include "pathweight/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pathweight/errors.hpp"

namespace pathweight::harness {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw InputError("invalid number for '" + key + "': '" + text + "'");
    }
    return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw InputError("invalid integer for '" + key + "': '" + text + "'");
    return v;
}

int parse_int(const std::string& key, const std::string& text) {
    const std::uint64_t v = parse_u64(key, text);
    if (v > 1000000000ull) throw InputError("value too large for '" + key + "'");
    return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw InputError("invalid boolean for '" + key + "': '" + text + "'");
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Sweep parse_sweep(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw InputError("sweep must look like name:v1,v2,...");
    Sweep s;
    s.parameter = trim(text.substr(0, colon));
    if (s.parameter.empty()) throw InputError("sweep parameter name is empty");
    std::stringstream list(text.substr(colon + 1));
    std::string item;
    while (std::getline(list, item, ',')) s.values.push_back(parse_double("sweep", trim(item)));
    if (s.values.empty()) throw InputError("sweep has no values");
    return s;
}

void ExperimentConfig::set(const std::string& raw_key, const std::string& raw_value) {
    const std::string key = trim(raw_key);
    const std::string value = trim(raw_value);
    if (value.empty()) throw InputError("empty value for '" + key + "'");
    if (key == "experiment") experiment = value;
    else if (key == "seed") seed = parse_u64(key, value);
    else if (key == "k") {
        const std::uint64_t v = parse_u64(key, value);
        if (v < 1) throw InputError("k must be >= 1");
        k = static_cast<std::size_t>(v);
        k_explicit = true;
    } else if (key == "n_steps") {
        n_steps = parse_int(key, value);
        if (*n_steps < 1) throw InputError("n_steps must be >= 1");
    } else if (key == "sweep") sweep = parse_sweep(value);
    else if (key == "d") {
        d = parse_int(key, value);
        if (*d < 1) throw InputError("d must be >= 1");
    } else if (key == "T") T = parse_double(key, value);
    else if (key == "kappa") kappa = parse_double(key, value);
    else if (key == "rho") rho = parse_double(key, value);
    else if (key == "alpha") alpha = parse_double(key, value);
    else if (key == "eta") eta = parse_double(key, value);
    else if (key == "eps") eps = parse_double(key, value);
    else if (key == "zeta") zeta = parse_double(key, value);
    else if (key == "a") a = parse_double(key, value);
    else if (key == "window") window = parse_double(key, value);
    else if (key == "B") B = parse_double(key, value);
    else if (key == "sigma") sigma = parse_double(key, value);
    else if (key == "dt") dt = parse_double(key, value);
    else if (key == "ou_seed") ou_seed = parse_u64(key, value);
    else if (key == "nx") nx = parse_int(key, value);
    else if (key == "nt") nt = parse_int(key, value);
    else if (key == "bootstrap") {
        bootstrap = parse_int(key, value);
        if (bootstrap < 2) throw InputError("bootstrap must be >= 2");
    } else if (key == "full") full = parse_bool(key, value);
    else if (key == "output_path") output_path = value;
    else throw InputError("unknown configuration key '" + key + "'");
}

void apply_config_text(ExperimentConfig& config, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InputError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        try {
            config.set(line.substr(0, eq), line.substr(eq + 1));
        } catch (const InputError& e) {
            throw InputError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void apply_config_file(ExperimentConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    apply_config_text(config, buf.str());
}

std::string render_config(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "experiment = " << c.experiment << "\n";
    out << "seed = " << c.seed << "\n";
    out << "k = " << c.k << "\n";
    if (c.n_steps) out << "n_steps = " << *c.n_steps << "\n";
    if (c.sweep) {
        out << "sweep = " << c.sweep->parameter << ":";
        for (std::size_t i = 0; i < c.sweep->values.size(); ++i) out << (i ? "," : "") << fmt(c.sweep->values[i]);
        out << "\n";
    }
    if (c.d) out << "d = " << *c.d << "\n";
    const std::pair<const char*, const std::optional<double>*> reals[] = {
        {"T", &c.T},       {"kappa", &c.kappa}, {"rho", &c.rho},       {"alpha", &c.alpha}, {"eta", &c.eta},
        {"eps", &c.eps},   {"zeta", &c.zeta},   {"a", &c.a},           {"window", &c.window}, {"B", &c.B},
        {"sigma", &c.sigma}, {"dt", &c.dt}};
    for (const auto& [name, v] : reals) {
        if (*v) out << name << " = " << fmt(**v) << "\n";
    }
    if (c.ou_seed) out << "ou_seed = " << *c.ou_seed << "\n";
    if (c.nx) out << "nx = " << *c.nx << "\n";
    if (c.nt) out << "nt = " << *c.nt << "\n";
    out << "bootstrap = " << c.bootstrap << "\n";
    out << "full = " << (c.full ? "true" : "false") << "\n";
    if (!c.output_path.empty()) out << "output_path = " << c.output_path << "\n";
    return out.str();
}

}  // namespace pathweight::harness
