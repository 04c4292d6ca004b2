#pragma once
// Deterministic run artifacts: criterion rows with explicit pass flags, CSV
// tables with RFC-4180 quoting, and a fixed-schema JSON summary keyed by a
// content hash of the run configuration.

#include <fstream>
#include <string>
#include <vector>

#include "sfl/common.hpp"

namespace sfl {

struct CriterionRow {
    std::string name;
    double value = 0.0;
    double target = 0.0;
    double tol = 0.0;
    bool pass = false;
};

// |value - target| <= tol * |target|
inline CriterionRow criterion_rel(std::string name, double value,
                                  double target, double tol) {
    CriterionRow c{std::move(name), value, target, tol, false};
    c.pass = std::isfinite(value) &&
             std::fabs(value - target) <= tol * std::fabs(target);
    return c;
}

// value <= bound
inline CriterionRow criterion_max(std::string name, double value,
                                  double bound) {
    CriterionRow c{std::move(name), value, bound, bound, false};
    c.pass = std::isfinite(value) && value <= bound;
    return c;
}

inline CriterionRow criterion_flag(std::string name, bool ok) {
    return CriterionRow{std::move(name), ok ? 1.0 : 0.0, 1.0, 0.0, ok};
}

struct RunReport {
    std::string experiment;
    std::string system;
    std::uint64_t seed = 0;
    size_t workers = 1;
    std::string config_hash;  // 16 hex digits of the canonical config
    std::vector<CriterionRow> criteria;

    bool all_pass() const {
        for (const CriterionRow& c : criteria)
            if (!c.pass) return false;
        return !criteria.empty();
    }
};

inline std::string csv_field(const std::string& f) {
    if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
    std::string out = "\"";
    for (char ch : f) {
        out += ch;
        if (ch == '"') out += '"';
    }
    out += '"';
    return out;
}

class CsvTable {
  public:
    explicit CsvTable(std::vector<std::string> header)
        : width_(header.size()) {
        if (width_ == 0) throw ConfigError("empty csv header");
        append(header);
    }

    void add_row(const std::vector<std::string>& row) {
        if (row.size() != width_)
            throw ConfigError("csv row width " + std::to_string(row.size()) +
                              " against header width " +
                              std::to_string(width_));
        append(row);
    }

    const std::string& text() const { return text_; }

  private:
    void append(const std::vector<std::string>& row) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) text_ += ',';
            text_ += csv_field(row[i]);
        }
        text_ += '\n';
    }

    size_t width_;
    std::string text_;
};

inline std::string json_escape(const std::string& s) {
    std::string out;
    for (unsigned char ch : s) {
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (ch < 0x20) {
                    static const char* hx = "0123456789abcdef";
                    out += "\\u00";
                    out += hx[ch >> 4];
                    out += hx[ch & 0xf];
                } else {
                    out += static_cast<char>(ch);
                }
        }
    }
    return out;
}

inline std::string json_number(double v) {
    if (!std::isfinite(v)) return "null";
    return format_double(v);
}

// the summary schema is small and fixed, emitted here directly so the
// header tree stays free of third-party includes
inline std::string report_json(const RunReport& r) {
    std::string j = "{\n";
    j += "  \"experiment\": \"" + json_escape(r.experiment) + "\",\n";
    j += "  \"system\": \"" + json_escape(r.system) + "\",\n";
    j += "  \"config_hash\": \"" + json_escape(r.config_hash) + "\",\n";
    j += "  \"seed\": " + std::to_string(r.seed) + ",\n";
    j += "  \"workers\": " + std::to_string(r.workers) + ",\n";
    j += "  \"criteria\": [";
    for (size_t i = 0; i < r.criteria.size(); ++i) {
        const CriterionRow& c = r.criteria[i];
        j += i ? ",\n    " : "\n    ";
        j += "{\"name\": \"" + json_escape(c.name) + "\", \"value\": " +
             json_number(c.value) + ", \"target\": " + json_number(c.target) +
             ", \"tol\": " + json_number(c.tol) + ", \"pass\": " +
             (c.pass ? "true" : "false") + "}";
    }
    j += r.criteria.empty() ? "],\n" : "\n  ],\n";
    j += std::string("  \"all_pass\": ") + (r.all_pass() ? "true" : "false") +
         "\n}\n";
    return j;
}

inline std::string criteria_csv(const RunReport& r) {
    CsvTable t({"name", "value", "target", "tol", "pass"});
    for (const CriterionRow& c : r.criteria)
        t.add_row({c.name, format_double(c.value), format_double(c.target),
                   format_double(c.tol), c.pass ? "true" : "false"});
    return t.text();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw ConfigError("short write: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return text;
}

}  // namespace sfl
