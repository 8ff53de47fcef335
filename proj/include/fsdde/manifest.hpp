#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csvio.hpp"
#include "errors.hpp"
#include "report.hpp"

namespace fsdde {

inline constexpr const char* kVersion = "0.1.0";

/// FNV-1a of the raw config text; ties outputs to their exact configuration.
inline std::uint64_t config_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Per-run record: every requested check appears exactly once with its
/// verdict. Timings are wall-clock and therefore live in a sidecar file;
/// the manifest itself is byte-reproducible.
struct RunManifest {
    std::uint64_t cfg_hash = 0;
    std::uint64_t seed = 0;
    std::vector<BoundReport> checks;
    std::vector<double> timings_ms; // parallel to checks, written separately

    void add(const BoundReport& report, double elapsed_ms) {
        checks.push_back(report);
        timings_ms.push_back(elapsed_ms);
    }

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return !checks.empty();
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["config_hash"] = cfg_hash;
        j["seed"] = seed;
        j["version"] = kVersion;
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& c : checks) {
            nlohmann::json e;
            e["name"] = c.name;
            e["pass"] = c.pass;
            e["n_checked"] = c.n_checked;
            e["n_violations"] = c.n_violations;
            e["worst_margin"] = c.worst_margin;
            e["tolerance"] = c.tolerance;
            nlohmann::json consts;
            for (const auto& [k, v] : c.constants) consts[k] = v;
            e["constants"] = consts;
            if (!c.notes.empty()) e["notes"] = c.notes;
            arr.push_back(e);
        }
        j["checks"] = arr;
        return j;
    }

    void write(const std::string& dir) const {
        {
            std::ofstream out(dir + "/manifest.json", std::ios::binary);
            if (!out) throw ConfigError("cannot write manifest");
            out << to_json().dump(2) << '\n';
        }
        {
            std::ofstream out(dir + "/timings.txt", std::ios::binary);
            for (std::size_t i = 0; i < checks.size(); ++i)
                out << checks[i].name << ' ' << io::fmt(timings_ms[i]) << " ms\n";
        }
    }
};

} // namespace fsdde
