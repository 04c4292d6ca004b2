#pragma once
// Run configuration shared by the command line tool and its config files.
// Numeric fields travel as decimal strings until parsed so that a config
// file and the equivalent flags hash to the same canonical text.

#include <optional>
#include <string>
#include <vector>

#include "sfl/common.hpp"

namespace sfl {

enum class ExperimentKind {
    ctrw,
    eig,
    llt_int,
    llt_con,
    split,
    deviation,
    extended,
    rwm,
    rwm2,
    build_map,
};

inline const std::vector<std::pair<std::string, ExperimentKind>>&
kind_table() {
    static const std::vector<std::pair<std::string, ExperimentKind>> t = {
        {"ctrw", ExperimentKind::ctrw},
        {"eig", ExperimentKind::eig},
        {"llt-int", ExperimentKind::llt_int},
        {"llt-con", ExperimentKind::llt_con},
        {"split", ExperimentKind::split},
        {"deviation", ExperimentKind::deviation},
        {"extended", ExperimentKind::extended},
        {"rwm", ExperimentKind::rwm},
        {"rwm2", ExperimentKind::rwm2},
        {"build-map", ExperimentKind::build_map},
    };
    return t;
}

inline std::string kind_name(ExperimentKind k) {
    for (const auto& [n, v] : kind_table())
        if (v == k) return n;
    throw ConfigError("unnamed experiment kind");
}

inline ExperimentKind parse_kind(const std::string& s) {
    for (const auto& [n, v] : kind_table())
        if (n == s) return v;
    throw ConfigError("unknown experiment kind: '" + s + "'");
}

// "a,b,c" or "lo:hi:step" (inclusive, fuzz half a step at the top end)
inline std::vector<double> parse_grid(const std::string& spec) {
    if (spec.empty()) throw ConfigError("empty grid");
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        size_t p1 = spec.find(':');
        size_t p2 = spec.find(':', p1 + 1);
        if (p2 == std::string::npos || spec.find(':', p2 + 1) != std::string::npos)
            throw ConfigError("range grid needs lo:hi:step: '" + spec + "'");
        double lo = parse_double(spec.substr(0, p1));
        double hi = parse_double(spec.substr(p1 + 1, p2 - p1 - 1));
        double step = parse_double(spec.substr(p2 + 1));
        if (!(step > 0.0) || hi < lo)
            throw ConfigError("bad range grid: '" + spec + "'");
        for (double v = lo; v <= hi + 0.5 * step; v += step)
            out.push_back(v);
        return out;
    }
    size_t pos = 0;
    while (pos <= spec.size()) {
        size_t comma = spec.find(',', pos);
        if (comma == std::string::npos) comma = spec.size();
        out.push_back(parse_double(spec.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return out;
}

inline std::vector<size_t> parse_index_grid(const std::string& spec) {
    std::vector<size_t> out;
    for (double v : parse_grid(spec)) {
        if (!(v >= 0.0) || v != std::floor(v))
            throw ConfigError("grid entry is not a whole number: " +
                              format_double(v));
        out.push_back(static_cast<size_t>(v));
    }
    return out;
}

struct RunConfig {
    ExperimentKind kind = ExperimentKind::ctrw;
    std::string system;     // catalog name; ctrw runs detached from a map
    std::string t_grid;     // times (or twist angles for eig)
    std::string n_grid;     // step counts / horizon grid
    std::string m_grid;     // split window widths
    std::string window;     // half width of the lattice window, units
    std::string z;          // drift target in scaled coordinates
    std::string samples;    // Monte Carlo budget
    std::string tol;        // override of the default pass tolerance
    std::string tau;        // spacing of the Cesaro harvest times
    std::string radius;     // offset radius of the extended grid
    std::string heights;    // fiber heights hB,hC for the order-2 run
    std::string bins;       // Ulam resolution for eig
    bool use_mc = false;
    size_t workers = 1;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    bool emit_json = false;
};

// stable flag order, one per line; the report hash is over this text
inline std::string canonical_text(const RunConfig& c) {
    std::string s;
    s += "kind=" + kind_name(c.kind) + "\n";
    s += "system=" + c.system + "\n";
    s += "t=" + c.t_grid + "\n";
    s += "n=" + c.n_grid + "\n";
    s += "m=" + c.m_grid + "\n";
    s += "window=" + c.window + "\n";
    s += "z=" + c.z + "\n";
    s += "samples=" + c.samples + "\n";
    s += "tol=" + c.tol + "\n";
    s += "tau=" + c.tau + "\n";
    s += "radius=" + c.radius + "\n";
    s += "heights=" + c.heights + "\n";
    s += "bins=" + c.bins + "\n";
    s += std::string("mc=") + (c.use_mc ? "1" : "0") + "\n";
    s += "workers=" + std::to_string(c.workers) + "\n";
    s += "seed=" + (c.seed ? std::to_string(*c.seed) : "") + "\n";
    return s;
}

inline std::string config_hash(const RunConfig& c) {
    return hex64(fnv1a64(canonical_text(c)));
}

inline void validate_config(const RunConfig& c) {
    if (!c.seed)
        throw ConfigError("config.seed: required, runs take no wall-clock default");
    if (c.workers == 0) throw ConfigError("config.workers: must be positive");
    if (c.kind != ExperimentKind::ctrw && c.system.empty())
        throw ConfigError("config.system: required for this experiment");
    switch (c.kind) {
        case ExperimentKind::ctrw:
        case ExperimentKind::eig:
        case ExperimentKind::llt_int:
        case ExperimentKind::llt_con:
            if (c.t_grid.empty())
                throw ConfigError("config.t: time grid required");
            break;
        case ExperimentKind::rwm:
        case ExperimentKind::rwm2:
            if (c.n_grid.empty())
                throw ConfigError("config.n: horizon grid required");
            break;
        case ExperimentKind::split:
            if (c.t_grid.empty())
                throw ConfigError("config.t: train,test times required");
            break;
        case ExperimentKind::deviation:
        case ExperimentKind::extended:
        case ExperimentKind::build_map:
            break;
    }
}

}  // namespace sfl
