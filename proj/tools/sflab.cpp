// sflab: experiment runner over the suspended-semiflow library.
// One experiment per invocation; deterministic given (config, seed, workers).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sfl/config.hpp"
#include "sfl/ctrw.hpp"
#include "sfl/experiments.hpp"
#include "sfl/report.hpp"
#include "sfl/systems.hpp"
#include "sfl/transfer.hpp"

namespace {

using namespace sfl;

size_t parse_count(const std::string& text, const std::string& field) {
    double v = parse_double(text);
    if (!(v >= 0.0) || v != std::floor(v) || v > 9e15)
        throw ConfigError(field + ": expected a whole number, got '" + text +
                          "'");
    return static_cast<size_t>(v);
}

long parse_int(const std::string& text, const std::string& field) {
    double v = parse_double(text);
    if (v != std::floor(v) || std::fabs(v) > 9e15)
        throw ConfigError(field + ": expected an integer, got '" + text + "'");
    return static_cast<long>(v);
}

// all u in spacing-units with |u_j| <= half on every axis
std::vector<std::vector<long>> expand_window(size_t kappa, long half) {
    if (half < 0) throw ConfigError("config.window: negative half width");
    std::vector<std::vector<long>> out;
    std::vector<long> cur(kappa, -half);
    while (true) {
        out.push_back(cur);
        size_t j = 0;
        while (j < kappa && cur[j] == half) {
            cur[j] = -half;
            ++j;
        }
        if (j == kappa) break;
        ++cur[j];
    }
    return out;
}

std::vector<double> parse_z(const RunConfig& rc, size_t kappa) {
    if (rc.z.empty()) return std::vector<double>(kappa, 0.0);
    std::vector<double> z = parse_grid(rc.z);
    if (z.size() != kappa)
        throw ConfigError("config.z: expected " + std::to_string(kappa) +
                          " components");
    return z;
}

// Config files carry every numeric as a decimal string so that values hash
// and round-trip exactly; only switches are native JSON booleans.
RunConfig load_config_file(const std::string& path, ExperimentKind kind) {
    RunConfig rc;
    rc.kind = kind;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    auto as_string = [](const std::string& key,
                        const nlohmann::json& v) -> std::string {
        if (!v.is_string())
            throw ConfigError("config." + key + ": expected a decimal string");
        return v.get<std::string>();
    };
    auto as_bool = [](const std::string& key, const nlohmann::json& v) -> bool {
        if (!v.is_boolean())
            throw ConfigError("config." + key + ": expected a boolean");
        return v.get<bool>();
    };
    for (const auto& [key, val] : j.items()) {
        if (key == "system")
            rc.system = as_string(key, val);
        else if (key == "t")
            rc.t_grid = as_string(key, val);
        else if (key == "n")
            rc.n_grid = as_string(key, val);
        else if (key == "m")
            rc.m_grid = as_string(key, val);
        else if (key == "window")
            rc.window = as_string(key, val);
        else if (key == "z")
            rc.z = as_string(key, val);
        else if (key == "samples")
            rc.samples = as_string(key, val);
        else if (key == "tol")
            rc.tol = as_string(key, val);
        else if (key == "tau")
            rc.tau = as_string(key, val);
        else if (key == "radius")
            rc.radius = as_string(key, val);
        else if (key == "heights")
            rc.heights = as_string(key, val);
        else if (key == "bins")
            rc.bins = as_string(key, val);
        else if (key == "mc")
            rc.use_mc = as_bool(key, val);
        else if (key == "workers")
            rc.workers = parse_count(as_string(key, val), "config.workers");
        else if (key == "seed")
            rc.seed = parse_count(as_string(key, val), "config.seed");
        else if (key == "out")
            rc.out_dir = as_string(key, val);
        else if (key == "json")
            rc.emit_json = as_bool(key, val);
        else
            throw ConfigError("config." + key + ": unknown field");
    }
    return rc;
}

struct RunOutput {
    RunReport report;
    std::vector<std::pair<std::string, std::string>> tables;  // name, csv text
};

LLTConfig base_llt_config(const RunConfig& rc, const CocycleSystem& s) {
    LLTConfig cfg;
    double rinf = *std::min_element(s.roof.begin(), s.roof.end());
    Interval h{0.0, std::min(1.0, rinf)};
    cfg.A = SuspensionRect{{}, h};
    cfg.B = SuspensionRect{{}, h};
    long half = rc.window.empty() ? 0 : parse_int(rc.window, "config.window");
    cfg.window = expand_window(s.group.kappa, half);
    cfg.z = parse_z(rc, s.group.kappa);
    if (!rc.t_grid.empty()) cfg.t_grid = parse_grid(rc.t_grid);
    if (!rc.samples.empty())
        cfg.samples = parse_count(rc.samples, "config.samples");
    cfg.seed = *rc.seed;
    cfg.workers = rc.workers;
    return cfg;
}

void run_ctrw(const RunConfig& rc, RunOutput& out) {
    CTRWModel m = simple_walk_ctrw(1.0);
    CsvTable tbl({"t", "value", "target", "rel_error"});
    for (double t : parse_grid(rc.t_grid)) {
        CTRWLLTReport rep = ctrw_llt_check(m, t, {0}, {{0}});
        double tol = !rc.tol.empty() ? parse_double(rc.tol)
                     : t <= 25.0     ? 0.20
                     : t <= 100.0    ? 0.08
                                     : 0.02;
        out.report.criteria.push_back(criterion_rel(
            "central-atom-t" + format_double(t), rep.value, rep.target, tol));
        tbl.add_row({format_double(t), format_double(rep.value),
                     format_double(rep.target), format_double(rep.rel_error)});
    }
    out.tables.emplace_back("ctrw.csv", tbl.text());
}

void run_eig(const RunConfig& rc, RunOutput& out) {
    SystemSpec sp = make_system(rc.system);
    const CocycleSystem& s = sp.system;
    size_t want = rc.bins.empty() ? 128 : parse_count(rc.bins, "config.bins");
    std::vector<double> edges;
    for (int depth = 1; depth <= 16; ++depth) {
        edges = aligned_bins(s.map, depth);
        if (edges.size() - 1 >= want) break;
    }
    UlamOperator u = ulam_discretize(s.map, edges, true);
    std::vector<double> dir(s.group.kappa, 0.0);
    dir[0] = 1.0;

    EigResult at0 = dominant_eig(twisted_ulam_matrix(u, s, std::vector<double>(
                                                               s.group.kappa)));
    out.report.criteria.push_back(
        criterion_max("unit-at-zero", std::abs(at0.lambda - 1.0), 1e-10));

    CsvTable tbl({"t", "lambda_re", "lambda_im", "lambda_abs", "residual"});
    bool all_conv = at0.converged;
    double cos_gap = 0.0;
    for (double t : parse_grid(rc.t_grid)) {
        std::vector<double> theta(s.group.kappa, 0.0);
        for (size_t j = 0; j < theta.size(); ++j) theta[j] = t * dir[j];
        EigResult e = dominant_eig(twisted_ulam_matrix(u, s, theta));
        all_conv &= e.converged;
        cos_gap = std::max(cos_gap, std::abs(e.lambda - std::cos(t / 2.0)));
        tbl.add_row({format_double(t), format_double(e.lambda.real()),
                     format_double(e.lambda.imag()),
                     format_double(std::abs(e.lambda)),
                     format_double(e.residual)});
    }
    out.report.criteria.push_back(criterion_flag("eig-converged", all_conv));

    NagaevFit fit = nagaev_curvature(s, dir);
    out.report.criteria.push_back(criterion_flag("curvature-positive", fit.a > 0.0));
    if (rc.system == "doubling-pm-half") {
        out.report.criteria.push_back(
            criterion_max("cosine-max-gap", cos_gap, 1e-3));
        out.report.criteria.push_back(
            criterion_rel("curvature", fit.a, 0.125, 0.016));
    }
    out.tables.emplace_back("eig.csv", tbl.text());
}

void run_llt_int(const RunConfig& rc, RunOutput& out) {
    SystemSpec sp = resolve_scaling(make_system(rc.system));
    const CocycleSystem& s = sp.system;
    LLTConfig cfg = base_llt_config(rc, s);
    bool exact = !rc.use_mc && s.group.kappa == 1 && s.group.lattice &&
                 s.integer_roof && s.symbolic_exact;
    double tol = rc.tol.empty() ? 0.15 : parse_double(rc.tol);

    std::vector<IntLLTRow> rows = exact ? estimate_int_llt_exact(sp, cfg)
                                        : estimate_int_llt_mc(sp, cfg);
    CsvTable tbl({"t", "value", "target", "rel_error", "ci_half"});
    for (const IntLLTRow& r : rows) {
        std::string tag = format_double(r.t);
        out.report.criteria.push_back(
            criterion_rel("window-t" + tag, r.value, r.target, tol));
        if (!exact)
            out.report.criteria.push_back(
                criterion_flag("budget-t" + tag, r.budget_ok));
        tbl.add_row({format_double(r.t), format_double(r.value),
                     format_double(r.target), format_double(r.rel_error),
                     format_double(r.ci_half)});
    }
    out.tables.emplace_back("llt-int.csv", tbl.text());
}

void run_llt_con(const RunConfig& rc, RunOutput& out) {
    SystemSpec sp = resolve_scaling(make_system(rc.system));
    const CocycleSystem& s = sp.system;
    LLTConfig cfg = base_llt_config(rc, s);
    double tol = rc.tol.empty() ? 0.10 : parse_double(rc.tol);
    std::vector<SuspensionPoint> evals = default_eval_points(s, 16, *rc.seed);
    std::vector<ConLLTRow> rows = estimate_con_llt(sp, cfg, evals);
    CsvTable tbl({"t", "value", "target", "rel_error", "spread"});
    for (const ConLLTRow& r : rows) {
        std::string tag = format_double(r.t);
        out.report.criteria.push_back(
            criterion_rel("density-t" + tag, r.value, r.target, tol));
        out.report.criteria.push_back(criterion_max(
            "spread-t" + tag, r.spread, tol * std::fabs(r.target)));
        tbl.add_row({format_double(r.t), format_double(r.value),
                     format_double(r.target), format_double(r.rel_error),
                     format_double(r.spread)});
    }
    out.tables.emplace_back("llt-con.csv", tbl.text());
}

void run_split(const RunConfig& rc, RunOutput& out) {
    SystemSpec sp = resolve_scaling(make_system(rc.system));
    LLTConfig cfg = base_llt_config(rc, sp.system);
    std::vector<double> ts = parse_grid(rc.t_grid);
    if (ts.size() < 2)
        throw ConfigError("config.t: split needs a train and a held-out time");
    std::vector<double> Ms = rc.m_grid.empty()
                                 ? std::vector<double>{1.0, 2.0, 3.0, 4.0}
                                 : parse_grid(rc.m_grid);
    SplitReport rep = split_I_II(sp, cfg, ts[0], ts[1], Ms);

    out.report.criteria.push_back(criterion_flag("fit-converged", rep.fit_ok));
    size_t widest = 0;
    for (size_t i = 1; i < rep.test.size(); ++i)
        if (rep.test[i].M > rep.test[widest].M) widest = i;
    for (const SplitRow& r : rep.test)
        out.report.criteria.push_back(criterion_max(
            "held-out-ratio-M" + format_double(r.M), r.ratio, 1.0 + 1e-9));
    out.report.criteria.push_back(criterion_rel(
        "central-window", rep.test[widest].bI, rep.target, 0.10));

    CsvTable tbl({"phase", "t", "M", "bI", "bII", "eps", "ratio"});
    auto emit = [&](const char* phase, double t, const std::vector<SplitRow>& v) {
        for (const SplitRow& r : v)
            tbl.add_row({phase, format_double(t), format_double(r.M),
                         format_double(r.bI), format_double(r.bII),
                         format_double(r.eps), format_double(r.ratio)});
    };
    emit("train", rep.t_train, rep.train);
    emit("test", rep.t_test, rep.test);
    out.tables.emplace_back("split.csv", tbl.text());
}

// alternating train/test split keeps both halves spread over the whole grid
template <typename T>
void alternate_split(const std::vector<T>& all, std::vector<T>& train,
                     std::vector<T>& test, const std::string& field) {
    if (all.size() < 2)
        throw ConfigError(field + ": need at least two grid points");
    for (size_t i = 0; i < all.size(); ++i)
        (i % 2 == 0 ? train : test).push_back(all[i]);
}

void run_deviation(const RunConfig& rc, RunOutput& out) {
    SystemSpec sp = resolve_scaling(make_system(rc.system));
    std::vector<double> ts = rc.t_grid.empty()
                                 ? std::vector<double>{40, 50, 60, 70, 80}
                                 : parse_grid(rc.t_grid);
    std::vector<double> train, test;
    alternate_split(ts, train, test, "config.t");
    std::vector<double> z;
    if (!rc.z.empty()) z = parse_grid(rc.z);
    DeviationReport rep = deviation_bound_check(sp, train, test, z);

    out.report.criteria.push_back(criterion_flag("fit-converged", rep.fit_ok));
    out.report.criteria.push_back(
        criterion_max("train-ratio", rep.max_train, 1.0));
    out.report.criteria.push_back(
        criterion_max("held-out-ratio", rep.max_test, 1.0 + 1e-9));

    CsvTable tbl({"Gamma", "gamma", "fit_r2", "max_train", "max_test",
                  "n_points"});
    tbl.add_row({format_double(rep.Gamma), format_double(rep.gamma),
                 format_double(rep.fit_r2), format_double(rep.max_train),
                 format_double(rep.max_test), std::to_string(rep.n_points)});
    out.tables.emplace_back("deviation.csv", tbl.text());
}

void run_extended(const RunConfig& rc, RunOutput& out) {
    SystemSpec sp = resolve_scaling(make_system(rc.system));
    const std::vector<long>& ru = sp.system.roof_units;
    if (!ru.empty() &&
        std::all_of(ru.begin(), ru.end(), [&](long r) { return r == ru[0]; }))
        throw ConfigError(
            "config.system: the joint roof coordinate is deterministic under "
            "a constant roof; pick a system with a mixed roof");
    std::vector<size_t> ns = rc.n_grid.empty()
                                 ? std::vector<size_t>{8, 12, 16, 24, 32, 48}
                                 : parse_index_grid(rc.n_grid);
    std::vector<size_t> train, test;
    alternate_split(ns, train, test, "config.n");
    long radius = rc.radius.empty() ? 3 : parse_int(rc.radius, "config.radius");
    ExtendedReport rep = extended_llt_ratio(sp, train, test, radius);

    out.report.criteria.push_back(criterion_flag("fit-converged", rep.fit_ok));
    out.report.criteria.push_back(
        criterion_max("held-out-ratio", rep.max_test, 1.0 + 1e-9));

    CsvTable tbl({"Gamma", "g11", "g22", "g12", "fit_r2", "max_train",
                  "max_test"});
    tbl.add_row({format_double(rep.Gamma), format_double(rep.g11),
                 format_double(rep.g22), format_double(rep.g12),
                 format_double(rep.fit_r2), format_double(rep.max_train),
                 format_double(rep.max_test)});
    out.tables.emplace_back("extended.csv", tbl.text());
}

void run_rwm(const RunConfig& rc, RunOutput& out) {
    SystemSpec sp = resolve_scaling(make_system(rc.system));
    std::vector<size_t> Ns = parse_index_grid(rc.n_grid);
    size_t tau = rc.tau.empty() ? 1 : parse_count(rc.tau, "config.tau");
    RWMReport rep = rwm_cesaro(sp, tau, Ns);

    bool decreasing = true;
    for (size_t i = 1; i < rep.D.size(); ++i)
        decreasing &= rep.D[i] < rep.D[i - 1];
    out.report.criteria.push_back(criterion_flag("d-decreasing", decreasing));
    out.report.criteria.push_back(
        criterion_max("mass-loss", rep.mass_loss, 1e-6));
    if (!Ns.empty() && Ns.back() >= 64 * Ns.front())
        out.report.criteria.push_back(criterion_max(
            "d-contraction", rep.D.back() / rep.D.front(), 0.15));

    CsvTable tbl({"N", "D"});
    for (size_t i = 0; i < rep.N_grid.size(); ++i)
        tbl.add_row({std::to_string(rep.N_grid[i]), format_double(rep.D[i])});
    out.tables.emplace_back("rwm.csv", tbl.text());
}

void run_rwm2(const RunConfig& rc, RunOutput& out) {
    SystemSpec sp = resolve_scaling(make_system(rc.system));
    std::vector<size_t> Ns = parse_index_grid(rc.n_grid);
    size_t tau = rc.tau.empty() ? 1 : parse_count(rc.tau, "config.tau");
    long hB = 0, hC = 0;
    if (!rc.heights.empty()) {
        std::vector<double> hs = parse_grid(rc.heights);
        if (hs.size() != 2)
            throw ConfigError("config.heights: expected two fiber heights");
        hB = std::lround(hs[0]);
        hC = std::lround(hs[1]);
    }
    size_t t1 = !rc.t_grid.empty()
                    ? static_cast<size_t>(parse_grid(rc.t_grid)[0])
                    : std::max<size_t>(8, Ns.empty() ? 8 : Ns.back() / 2);
    double tol = rc.tol.empty() ? 0.15 : parse_double(rc.tol);
    Order2Report rep = order2_rwm(sp, hB, hC, tau, Ns, t1);

    out.report.criteria.push_back(
        criterion_rel("order1-check", rep.t1_value, rep.t1_target, tol));
    out.report.criteria.push_back(
        criterion_flag("d2-shrinks", rep.D2.back() < rep.D2.front()));
    out.report.criteria.push_back(criterion_max(
        "mass-loss", rep.leg1_loss + rep.leg2_loss, 1e-6));

    CsvTable tbl({"N", "D2"});
    for (size_t i = 0; i < rep.N_grid.size(); ++i)
        tbl.add_row({std::to_string(rep.N_grid[i]), format_double(rep.D2[i])});
    out.tables.emplace_back("rwm2.csv", tbl.text());
}

void run_build_map(const RunConfig& rc, RunOutput& out) {
    SystemSpec sp = make_system(rc.system);
    const CocycleSystem& s = sp.system;
    RegularityReport reg = validate_regularity(s.map);
    out.report.criteria.push_back(
        criterion_flag("afu-or-gm", reg.afu_ok || reg.gm_ok));
    out.report.criteria.push_back(criterion_flag("markov-partition", reg.markov));

    CsvTable regt({"afu", "gm", "markov", "uniformly_expanding",
                   "inf_abs_deriv", "distortion_sup", "min_image_measure"});
    regt.add_row({reg.afu_ok ? "true" : "false", reg.gm_ok ? "true" : "false",
                  reg.markov ? "true" : "false",
                  reg.uniformly_expanding ? "true" : "false",
                  format_double(reg.inf_abs_deriv),
                  format_double(reg.distortion_sup),
                  format_double(reg.min_image_measure)});
    out.tables.emplace_back("build-map-regularity.csv", regt.text());

    CsvTable cells({"cell", "lo", "hi", "mass", "roof", "phi"});
    for (size_t c = 0; c < s.n_cells(); ++c) {
        Interval cell = s.map.cell(c);
        std::string phi;
        for (size_t j = 0; j < s.phi[c].size(); ++j) {
            if (j) phi += " ";
            phi += format_double(s.phi[c][j]);
        }
        cells.add_row({std::to_string(c), format_double(cell.lo),
                       format_double(cell.hi), format_double(s.cell_mass[c]),
                       format_double(s.roof[c]), phi});
    }
    out.tables.emplace_back("build-map.csv", cells.text());

    CsvTable trans({"from", "to", "p"});
    for (size_t c = 0; c < s.n_cells(); ++c)
        for (size_t d = 0; d < s.n_cells(); ++d)
            if (s.cell_trans[c][d] > 0.0)
                trans.add_row({std::to_string(c), std::to_string(d),
                               format_double(s.cell_trans[c][d])});
    out.tables.emplace_back("build-map-transitions.csv", trans.text());
}

int execute(const RunConfig& rc) {
    validate_config(rc);
    RunOutput out;
    out.report.experiment = kind_name(rc.kind);
    out.report.system = rc.system;
    out.report.seed = *rc.seed;
    out.report.workers = rc.workers;
    out.report.config_hash = config_hash(rc);

    switch (rc.kind) {
        case ExperimentKind::ctrw: run_ctrw(rc, out); break;
        case ExperimentKind::eig: run_eig(rc, out); break;
        case ExperimentKind::llt_int: run_llt_int(rc, out); break;
        case ExperimentKind::llt_con: run_llt_con(rc, out); break;
        case ExperimentKind::split: run_split(rc, out); break;
        case ExperimentKind::deviation: run_deviation(rc, out); break;
        case ExperimentKind::extended: run_extended(rc, out); break;
        case ExperimentKind::rwm: run_rwm(rc, out); break;
        case ExperimentKind::rwm2: run_rwm2(rc, out); break;
        case ExperimentKind::build_map: run_build_map(rc, out); break;
    }

    if (!rc.out_dir.empty()) {
        std::filesystem::create_directories(rc.out_dir);
        for (const auto& [name, text] : out.tables)
            write_text_file(rc.out_dir + "/" + name, text);
        write_text_file(rc.out_dir + "/" + kind_name(rc.kind) + ".json",
                        report_json(out.report));
    }

    if (rc.emit_json) {
        std::cout << report_json(out.report);
    } else {
        std::cout << out.report.experiment;
        if (!out.report.system.empty()) std::cout << " " << out.report.system;
        std::cout << " seed=" << out.report.seed
                  << " hash=" << out.report.config_hash << "\n";
        size_t passed = 0;
        for (const CriterionRow& c : out.report.criteria) {
            passed += c.pass ? 1 : 0;
            std::cout << "  " << (c.pass ? "PASS" : "FAIL") << " " << c.name
                      << " value=" << format_double(c.value)
                      << " target=" << format_double(c.target);
            if (c.tol > 0.0) std::cout << " tol=" << format_double(c.tol);
            std::cout << "\n";
        }
        std::cout << "result: " << (out.report.all_pass() ? "PASS" : "FAIL")
                  << " (" << passed << "/" << out.report.criteria.size()
                  << ")\n";
    }
    return out.report.all_pass() ? 0 : 1;
}

void list_systems(bool as_json) {
    nlohmann::json arr = nlohmann::json::array();
    for (const std::string& name : builtin_system_names()) {
        SystemSpec sp = make_system(name);
        RegularityReport reg = validate_regularity(sp.system.map);
        if (as_json) {
            nlohmann::json row;
            row["name"] = name;
            row["summary"] = sp.summary;
            row["cells"] = sp.system.n_cells();
            row["kappa"] = sp.system.group.kappa;
            row["spacing"] = sp.system.group.spacing;
            row["lattice"] = sp.system.group.lattice;
            row["mean_roof"] = sp.system.mean_roof;
            row["afu"] = reg.afu_ok;
            row["gm"] = reg.gm_ok;
            row["markov"] = reg.markov;
            arr.push_back(row);
        } else {
            std::printf("%-24s cells=%-3zu kappa=%zu afu=%s gm=%s  %s\n",
                        name.c_str(), sp.system.n_cells(),
                        sp.system.group.kappa, reg.afu_ok ? "yes" : "no",
                        reg.gm_ok ? "yes" : "no", sp.summary.c_str());
        }
    }
    if (as_json) std::cout << arr.dump(2) << "\n";
}

struct CliOpts {
    std::string config_path, system, t, n, m, window, z, samples, tol, tau,
        radius, heights, bins, out;
    std::uint64_t seed = 0;
    size_t workers = 1;
    bool mc = false, json = false;
};

void add_run_options(CLI::App* cmd, CliOpts& o) {
    cmd->add_option("--config", o.config_path, "JSON config file");
    cmd->add_option("--system", o.system, "catalog system name");
    cmd->add_option("--t,--t-grid", o.t, "time grid: a,b,c or lo:hi:step");
    cmd->add_option("--n,--n-grid", o.n, "step/horizon grid");
    cmd->add_option("--m,--m-grid", o.m, "split window widths");
    cmd->add_option("--window", o.window, "lattice window half width");
    cmd->add_option("--z", o.z, "scaled drift target, per axis");
    cmd->add_option("--samples", o.samples, "Monte Carlo budget");
    cmd->add_option("--tol", o.tol, "pass tolerance override");
    cmd->add_option("--tau", o.tau, "Cesaro harvest spacing");
    cmd->add_option("--radius", o.radius, "extended grid offset radius");
    cmd->add_option("--heights", o.heights, "fiber heights hB,hC");
    cmd->add_option("--bins", o.bins, "Ulam bin count");
    cmd->add_option("--seed", o.seed, "RNG seed (required)");
    cmd->add_option("--workers", o.workers, "worker thread count");
    cmd->add_option("--out", o.out, "directory for CSV and JSON reports");
    cmd->add_flag("--mc", o.mc, "force Monte Carlo mode");
    cmd->add_flag("--json", o.json, "print the JSON summary to stdout");
}

RunConfig merge_config(const CLI::App* cmd, const CliOpts& o,
                       ExperimentKind kind) {
    RunConfig rc;
    rc.kind = kind;
    if (cmd->count("--config")) rc = load_config_file(o.config_path, kind);
    if (cmd->count("--system")) rc.system = o.system;
    if (cmd->count("--t")) rc.t_grid = o.t;
    if (cmd->count("--n")) rc.n_grid = o.n;
    if (cmd->count("--m")) rc.m_grid = o.m;
    if (cmd->count("--window")) rc.window = o.window;
    if (cmd->count("--z")) rc.z = o.z;
    if (cmd->count("--samples")) rc.samples = o.samples;
    if (cmd->count("--tol")) rc.tol = o.tol;
    if (cmd->count("--tau")) rc.tau = o.tau;
    if (cmd->count("--radius")) rc.radius = o.radius;
    if (cmd->count("--heights")) rc.heights = o.heights;
    if (cmd->count("--bins")) rc.bins = o.bins;
    if (cmd->count("--seed")) rc.seed = o.seed;
    if (cmd->count("--workers")) rc.workers = o.workers;
    if (cmd->count("--out")) rc.out_dir = o.out;
    if (cmd->count("--mc")) rc.use_mc = o.mc;
    if (cmd->count("--json")) rc.emit_json = o.json;
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for suspended semiflows over fibered "
                 "interval maps"};
    app.require_subcommand(1);

    std::vector<CliOpts> opts(kind_table().size());
    int exit_code = 0;
    size_t idx = 0;
    for (const auto& [name, kind] : kind_table()) {
        CLI::App* cmd = app.add_subcommand(name, "run the " + name + " experiment");
        CliOpts& o = opts[idx++];
        add_run_options(cmd, o);
        ExperimentKind k = kind;
        cmd->callback([cmd, &o, k, &exit_code]() {
            exit_code = execute(merge_config(cmd, o, k));
        });
    }

    bool list_json = false;
    CLI::App* ls = app.add_subcommand("list-systems", "print the system catalog");
    ls->add_flag("--json", list_json, "machine-readable catalog");
    ls->callback([&list_json]() { list_systems(list_json); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return exit_code;
}
