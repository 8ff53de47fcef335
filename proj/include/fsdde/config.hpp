#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "coeffs.hpp"
#include "errors.hpp"
#include "expr.hpp"
#include "khbound.hpp"
#include "model.hpp"

namespace fsdde {

/// Flat INI-style configuration: [section] headers, `key = value` lines,
/// comments starting with '#' or ';'. The full schema is documented in the
/// README.
struct RunConfig {
    // [model]
    double hurst = 0.75;
    double horizon = 2.0;
    double delay = 1.0;
    std::string eta_src = "0";
    double eta0 = 0.0;
    std::string sigma_src = "1";
    std::string b_src = "0";
    double scan_lo = -8.0;
    double scan_hi = 8.0;
    std::size_t scan_points = 100001;
    std::optional<double> lambda_declared;
    std::optional<double> lambda_cap_declared;

    // [simulation]
    std::size_t paths = 10000;
    std::size_t steps_per_block = 64;
    std::uint64_t seed = 12345;

    // [verification]
    double t_early = 0.5;
    double t_late = 1.5;
    double x_span_in_th = 3.0;
    std::size_t theta_nodes = 16;
    std::size_t bins = 41;
    std::size_t eval_points = 101;
    double band_se = 3.0;
    double gf_bandwidth = 0.0; // 0 selects the default rule
    std::optional<double> c1;
    std::optional<double> c2;

    // [verification] chain checks
    std::size_t kh_paths = 1000;

    // [output]
    std::string out_dir = "out";
    bool out_dir_from_config = false;
    bool write_svg = false;
    bool write_paths = false;

    std::string raw_text; // verbatim config text, hashed into the manifest

    static RunConfig from_text(const std::string& text);
    static RunConfig from_file(const std::string& path);

    void validate() const;
    ModelSpec build_model() const;

    /// Chain constants: configured values if present, otherwise the defaults
    /// derived from the model's ellipticity floor (0.9 of the maximal c1
    /// satisfying the half-exponential constraint, and the smallest c2
    /// compatible with the spacing constraint).
    double chain_c1(const ModelSpec& model) const {
        if (c1) return *c1;
        return 0.9 * khbound::max_feasible_c1(model.lambda());
    }
    double chain_c2(const ModelSpec& model) const {
        if (c2) return *c2;
        const double v = chain_c1(model);
        return std::ceil(1.0 / (v * v));
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

struct IniData {
    std::map<std::string, std::map<std::string, std::string>> sections;

    const std::string* find(const std::string& section, const std::string& key) const {
        auto s = sections.find(section);
        if (s == sections.end()) return nullptr;
        auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        return &k->second;
    }
};

inline IniData parse_ini(const std::string& text) {
    IniData ini;
    std::string section = "";
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        ini.sections[section][trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return ini;
}

inline double to_double(const std::string& s, const std::string& key) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ConfigError("config: bad numeric value for '" + key + "': " + s);
    return v;
}

inline std::uint64_t to_u64(const std::string& s, const std::string& key) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ConfigError("config: bad integer value for '" + key + "': " + s);
    return v;
}

inline bool to_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config: bad boolean value for '" + key + "': " + s);
}

} // namespace detail

inline RunConfig RunConfig::from_text(const std::string& text) {
    const detail::IniData ini = detail::parse_ini(text);
    RunConfig cfg;
    cfg.raw_text = text;

    const auto num = [&](const char* sec, const char* key, double& out) {
        if (const std::string* v = ini.find(sec, key)) out = detail::to_double(*v, key);
    };
    const auto integer = [&](const char* sec, const char* key, std::size_t& out) {
        if (const std::string* v = ini.find(sec, key))
            out = static_cast<std::size_t>(detail::to_u64(*v, key));
    };
    const auto text_field = [&](const char* sec, const char* key, std::string& out) {
        if (const std::string* v = ini.find(sec, key)) out = *v;
    };

    num("model", "H", cfg.hurst);
    num("model", "T", cfg.horizon);
    num("model", "r", cfg.delay);
    text_field("model", "eta", cfg.eta_src);
    num("model", "eta0", cfg.eta0);
    text_field("model", "sigma", cfg.sigma_src);
    text_field("model", "b", cfg.b_src);
    num("model", "scan_lo", cfg.scan_lo);
    num("model", "scan_hi", cfg.scan_hi);
    integer("model", "scan_points", cfg.scan_points);
    if (const std::string* v = ini.find("model", "lambda"))
        cfg.lambda_declared = detail::to_double(*v, "lambda");
    if (const std::string* v = ini.find("model", "Lambda"))
        cfg.lambda_cap_declared = detail::to_double(*v, "Lambda");

    integer("simulation", "paths", cfg.paths);
    integer("simulation", "steps_per_block", cfg.steps_per_block);
    if (const std::string* v = ini.find("simulation", "seed"))
        cfg.seed = detail::to_u64(*v, "seed");

    num("verification", "t_early", cfg.t_early);
    num("verification", "t_late", cfg.t_late);
    num("verification", "x_span", cfg.x_span_in_th);
    integer("verification", "theta_nodes", cfg.theta_nodes);
    integer("verification", "bins", cfg.bins);
    integer("verification", "eval_points", cfg.eval_points);
    num("verification", "band_se", cfg.band_se);
    num("verification", "gf_bandwidth", cfg.gf_bandwidth);
    if (const std::string* v = ini.find("verification", "c1"))
        cfg.c1 = detail::to_double(*v, "c1");
    if (const std::string* v = ini.find("verification", "c2"))
        cfg.c2 = detail::to_double(*v, "c2");
    integer("verification", "kh_paths", cfg.kh_paths);

    if (const std::string* v = ini.find("output", "directory")) {
        cfg.out_dir = *v;
        cfg.out_dir_from_config = true;
    }
    if (const std::string* v = ini.find("output", "svg")) cfg.write_svg = detail::to_bool(*v, "svg");
    if (const std::string* v = ini.find("output", "paths"))
        cfg.write_paths = detail::to_bool(*v, "paths");

    return cfg;
}

inline RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

inline void RunConfig::validate() const {
    if (!(hurst > 0.5 && hurst < 1.0))
        throw ConfigError("config: H = " + std::to_string(hurst) + " outside (0.5, 1)");
    if (!(delay > 0.0)) throw ConfigError("config: r must be positive");
    if (!(horizon > 0.0)) throw ConfigError("config: T must be positive");
    if (paths < 100) throw ConfigError("config: need at least 100 paths");
    if (steps_per_block < 1) throw ConfigError("config: steps_per_block must be >= 1");
    // keep the O(n^3) covariance factorisation interactive
    const double horizon_cells = static_cast<double>(steps_per_block) * horizon / delay;
    if (horizon_cells > 1024.0)
        throw ConfigError("config: grid would have " + std::to_string(horizon_cells) +
                          " cells on [0, T]; the cap is 1024");
    if (!(t_early > 0.0 && t_early <= delay))
        throw ConfigError("config: t_early must lie in (0, r]");
    if (!(band_se > 0.0)) throw ConfigError("config: band_se must be positive");
}

inline ModelSpec RunConfig::build_model() const {
    validate();
    ModelSpec model;
    model.hurst = hurst;
    model.horizon = horizon;
    model.delay = delay;
    model.eta = parse(eta_src);
    model.eta0 = eta0;
    model.sigma = profile(parse(sigma_src), scan_lo, scan_hi, scan_points);
    model.b = profile(parse(b_src), scan_lo, scan_hi, scan_points);
    model.steps_per_block = steps_per_block;
    model.validate();

    if (lambda_declared && *lambda_declared > model.sigma.lower)
        throw ConfigError("config: declared lambda = " + std::to_string(*lambda_declared) +
                          " exceeds the sigma scan minimum " + std::to_string(model.sigma.lower));
    if (lambda_cap_declared && *lambda_cap_declared < model.sigma.upper)
        throw ConfigError("config: declared Lambda = " + std::to_string(*lambda_cap_declared) +
                          " is below the sigma scan maximum " + std::to_string(model.sigma.upper));
    return model;
}

} // namespace fsdde
