#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sfl/experiments.hpp"

using namespace sfl;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double binom_p(double n, double k) {
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                    std::lgamma(n - k + 1.0) - n * std::log(2.0));
}

// slice of the transfer sum started from a one-symbol cylinder on the
// four-branch two-level system, by brute force over symbol words
std::vector<double> enumerate_word_slice(const CocycleSystem& s, int w0,
                                         size_t n, long rho, long k) {
    std::vector<double> out(4, 0.0);
    size_t total = 1;
    for (size_t i = 0; i < n; ++i) total *= 4;
    double mass = std::pow(0.25, static_cast<double>(n + 1));
    for (size_t code = 0; code < total; ++code) {
        size_t x = code;
        long S = s.phi_units[static_cast<size_t>(w0)][0];
        long R = s.roof_units[static_cast<size_t>(w0)];
        int last = 0;
        for (size_t i = 0; i < n; ++i) {
            int sym = static_cast<int>(x % 4);
            x /= 4;
            if (i + 1 < n) {
                S += s.phi_units[static_cast<size_t>(sym)][0];
                R += s.roof_units[static_cast<size_t>(sym)];
            } else {
                last = sym;
            }
        }
        if (S == k && R == rho)
            out[static_cast<size_t>(last)] += mass * 4.0;  // / pi(cell)
    }
    return out;
}

}  // namespace

TEST_CASE("word start states reproduce cylinder enumeration", "[experiments]") {
    SystemSpec sp = make_system("two-level-roof");
    const CocycleSystem& s = sp.system;
    SuspensionRect a{{2}, {0.0, 1.0}};
    validate_rect(s, a);
    CHECK_THAT(rect_measure(s, a), WithinAbs(0.25, 1e-15));

    CoverSweep sweep = detail::rect_sweep(s, a, CoverConfig{});
    REQUIRE(sweep.step_index() == 1);
    CHECK_THAT(sweep.live_mass(), WithinAbs(0.25, 1e-14));
    for (size_t i = 0; i < 3; ++i) sweep.advance();
    CHECK_THAT(sweep.live_mass(), WithinAbs(0.25, 1e-13));
    for (long rho = 4; rho <= 8; ++rho)
        for (long k = 0; k <= 4; ++k) {
            std::vector<double> ref = enumerate_word_slice(s, 2, 4, rho, k);
            const double* got = sweep.slice(rho, k);
            for (size_t c = 0; c < 4; ++c)
                CHECK_THAT(got ? got[c] : 0.0, WithinAbs(ref[c], 1e-13));
        }
}

TEST_CASE("conditional window estimate matches the binomial law",
          "[experiments]") {
    SystemSpec sp = make_system("doubling-digit");
    LLTConfig cfg;
    cfg.A = {{}, {0.0, 1.0}};
    cfg.window = {{0}};
    cfg.z = {0.0};
    cfg.t_grid = {64.5};
    std::vector<SuspensionPoint> evs = {{0.3, 0.1}, {0.8, 0.1}, {0.3, 0.7}};
    auto rows = estimate_con_llt(sp, cfg, evs);
    REQUIRE(rows.size() == 1);
    const ConLLTRow& row = rows[0];
    REQUIRE(row.k == std::vector<long>{32});

    double b = 0.5 * std::sqrt(64.5);
    // y = 0.1 returns after 65 steps, y = 0.7 after 64
    CHECK_THAT(row.values[0], WithinAbs(b * binom_p(65, 32), 1e-10));
    CHECK(row.values[0] == row.values[1]);  // full shift: cell independent
    CHECK_THAT(row.values[2], WithinAbs(b * binom_p(64, 32), 1e-10));
    CHECK(row.rel_error < 0.05);
    CHECK(row.spread < 0.05 * row.value);
}

TEST_CASE("conditional estimate tightens along the time grid",
          "[experiments]") {
    SystemSpec sp = make_system("doubling-digit");
    LLTConfig cfg;
    cfg.A = {{}, {0.0, 1.0}};
    cfg.window = {{0}};
    cfg.z = {0.0};
    cfg.t_grid = {16.3, 64.3, 256.3};
    std::vector<SuspensionPoint> evs = {{0.3, 0.1}, {0.6, 0.5}, {0.9, 0.9}};
    auto rows = estimate_con_llt(sp, cfg, evs);
    REQUIRE(rows.size() == 3);
    for (const ConLLTRow& row : rows) {
        CHECK(row.value > 0.0);
        CHECK(row.spread < 0.1 * row.value);
        CHECK_THAT(row.target,
                   WithinRel(stable_density(sp.law, row.z), 1e-12));
    }
    CHECK(rows[0].rel_error < 0.05);
    CHECK(rows[2].rel_error < 0.005);
    CHECK(rows[2].rel_error < rows[0].rel_error);
    CHECK(rows[2].spread / rows[2].value < rows[0].spread / rows[0].value);
}

TEST_CASE("planar conditional estimate matches the product binomial",
          "[experiments]") {
    SystemSpec sp = make_system("four-branch-k2");
    LLTConfig cfg;
    cfg.A = {{}, {0.0, 1.0}};
    cfg.window = {{0, 0}};
    cfg.z = {0.0, 0.0};
    cfg.t_grid = {19.5};
    // y = 0.2 returns after exactly 20 steps; both axes sum 20 signed halves
    auto rows = estimate_con_llt(sp, cfg, {{0.3, 0.2}});
    REQUIRE(rows.size() == 1);
    const ConLLTRow& row = rows[0];
    REQUIRE(row.k == std::vector<long>({0, 0}));
    double b2 = 0.25 * 19.5;
    double p_axis = binom_p(20, 10);
    CHECK_THAT(row.value, WithinAbs(b2 * p_axis * p_axis, 1e-9));
    CHECK_THAT(row.target, WithinRel(1.0 / (2.0 * kPi), 1e-10));
    CHECK(row.rel_error < 0.08);
}

TEST_CASE("integrated transfer sums agree with direct simulation",
          "[experiments]") {
    SystemSpec sp = make_system("doubling-digit");
    LLTConfig cfg;
    cfg.A = {{0}, {0.2, 0.9}};
    cfg.B = {{1, 0}, {0.1, 0.6}};
    cfg.window = {{0}, {1}};
    cfg.z = {0.0};
    cfg.t_grid = {40.0};
    cfg.samples = 200000;
    cfg.seed = 777;
    cfg.workers = 2;

    auto ex = estimate_int_llt_exact(sp, cfg);
    auto mc = estimate_int_llt_mc(sp, cfg);
    REQUIRE(ex.size() == 1);
    REQUIRE(mc.size() == 1);
    CHECK(ex[0].value > 0.0);
    CHECK(mc[0].budget_ok);
    CHECK(std::fabs(ex[0].value - mc[0].value) < 2.0 * mc[0].ci_half);
    CHECK_THAT(ex[0].target, WithinRel(mc[0].target, 1e-12));
    CHECK(ex[0].rel_error < 0.15);

    // repeat runs with the same seed are identical
    auto mc2 = estimate_int_llt_mc(sp, cfg);
    CHECK(mc2[0].value == mc[0].value);
}

TEST_CASE("integrated windows add and conserve", "[experiments][invariant]") {
    SystemSpec sp = make_system("doubling-digit");
    LLTConfig cfg;
    cfg.A = {{0}, {0.2, 0.9}};
    cfg.B = {{1, 0}, {0.1, 0.6}};
    cfg.z = {0.0};
    cfg.t_grid = {40.0};

    cfg.window = {{0}, {1}};
    double both = estimate_int_llt_exact(sp, cfg)[0].value;
    cfg.window = {{0}};
    auto first = estimate_int_llt_exact(sp, cfg)[0];
    cfg.window = {{1}};
    double second = estimate_int_llt_exact(sp, cfg)[0].value;
    CHECK_THAT(first.value + second, WithinRel(both, 1e-12));

    cfg.window = {};
    auto empty = estimate_int_llt_exact(sp, cfg)[0];
    CHECK(empty.value == 0.0);
    CHECK(empty.rel_error == 0.0);

    // per-step terms assemble the reported value
    double acc = 0.0;
    for (double v : first.terms) acc += v;
    double b = scale_b(sp, 40.0);
    CHECK_THAT(b * acc, WithinRel(first.value, 1e-12));
    for (double v : first.terms) CHECK(v >= 0.0);
}

TEST_CASE("integrated estimate recovers the renewal-corrected density",
          "[experiments]") {
    SystemSpec sp = make_system("two-level-roof");
    LLTConfig cfg;
    cfg.A = {{}, {0.0, 1.0}};
    cfg.B = {{}, {0.0, 1.0}};
    cfg.window = {{0}};
    cfg.z = {0.0};
    cfg.t_grid = {50.0};
    auto rows = estimate_int_llt_exact(sp, cfg);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].k == std::vector<long>{17});
    // renewal factor 2/3 against the mean return time 1.5
    CHECK_THAT(rows[0].target, WithinAbs(0.26419, 1e-4));
    CHECK(rows[0].rel_error < 0.08);
}

TEST_CASE("tail split honors the fitted envelope out of sample",
          "[experiments]") {
    SystemSpec sp = make_system("two-level-roof");
    LLTConfig cfg;
    cfg.A = {{}, {0.0, 1.0}};
    cfg.B = {{}, {0.0, 1.0}};
    cfg.window = {{0}};
    cfg.z = {0.0};
    std::vector<double> M_grid = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0};
    SplitReport rep = split_I_II(sp, cfg, 50.0, 80.0, M_grid);
    REQUIRE(rep.fit_ok);
    CHECK(rep.zeta > 0.0);
    CHECK(rep.c_eps > 0.0);
    REQUIRE(rep.train.size() == M_grid.size());
    REQUIRE(rep.test.size() == M_grid.size());
    for (size_t i = 1; i < rep.train.size(); ++i) {
        CHECK(rep.train[i].bI >= rep.train[i - 1].bI);  // central part grows
        CHECK(rep.train[i].bII <= rep.train[i - 1].bII);
    }
    for (const SplitRow& r : rep.train) CHECK(r.ratio <= 1.0 + 1e-9);
    for (const SplitRow& r : rep.test) CHECK(r.ratio <= 1.0 + 1e-9);
    // by M = 4 the central window carries nearly the whole sum
    CHECK_THAT(rep.train.back().bI, WithinRel(rep.target, 0.10));
    CHECK(rep.test.back().bII < 0.01 * rep.target);

    // a huge window leaves an exactly empty tail
    SplitReport all = split_I_II(sp, cfg, 50.0, 80.0, {1e3});
    CHECK(all.train[0].bII == 0.0);
    CHECK(all.test[0].bII == 0.0);
}

TEST_CASE("window deviations stay under the fitted bound held out",
          "[experiments]") {
    SystemSpec sp = make_system("two-level-roof");
    DeviationReport rep =
        deviation_bound_check(sp, {40.0, 60.0, 80.0}, {50.0, 70.0});
    CHECK(rep.fit_ok);
    CHECK(rep.gamma > 0.0);
    CHECK(rep.fit_r2 > 0.9);
    CHECK(rep.Gamma > 0.0);
    CHECK(rep.n_points > 50);
    CHECK(rep.max_train <= 1.0);
    CHECK(rep.max_test <= 1.0 + 1e-9);
}

TEST_CASE("extended joint window bound holds on held-out step counts",
          "[experiments]") {
    SystemSpec sp = make_system("two-level-roof");
    ExtendedReport rep = extended_llt_ratio(sp, {8, 16, 32}, {12, 24, 48}, 3);
    CHECK(rep.fit_ok);
    CHECK(rep.g11 > 0.0);
    CHECK(rep.g22 > 0.0);
    CHECK(rep.Gamma > 0.0);
    CHECK(rep.max_train <= 1.0);
    CHECK(rep.max_test <= 1.0 + 1e-9);
}

TEST_CASE("order-1 Cesaro deviations shrink on the fiber extension",
          "[experiments]") {
    SystemSpec sp = make_system("zcover-doubling-digit");
    RWMReport rep = rwm_cesaro(sp, 1, {16, 64, 256});
    REQUIRE(rep.D.size() == 3);
    CHECK(rep.D[1] < rep.D[0]);
    CHECK(rep.D[2] < rep.D[1]);
    CHECK(rep.D[2] < 0.3 * rep.D[0]);
    CHECK(rep.mass_loss < 1e-6);
    CHECK(rep.a_final > 0.0);
    // the scaled return sequence itself decays like 1/sqrt(k)
    CHECK_THAT(rep.u[255] / rep.u[63], WithinAbs(0.5, 1e-12));
}

TEST_CASE("fiber deck translation leaves the Cesaro profile unchanged",
          "[experiments][invariant]") {
    SystemSpec sp = make_system("zcover-doubling-digit");
    RWMReport base = rwm_cesaro(sp, 1, {4, 16});
    RWMReport deck = rwm_cesaro(sp, 1, {4, 16}, 10.0, 2);
    REQUIRE(base.D.size() == deck.D.size());
    for (size_t i = 0; i < base.D.size(); ++i) CHECK(base.D[i] == deck.D[i]);
    CHECK(base.mass_loss == 0.0);
    CHECK(deck.mass_loss == 0.0);
}

TEST_CASE("order-2 Cesaro deviations shrink with the horizon",
          "[experiments]") {
    SystemSpec sp = resolve_scaling(make_system("zcover-sft"));
    REQUIRE(sp.sigma_b > 0.0);
    Order2Report rep = order2_rwm(sp, 0, 0, 1, {16, 64}, 64);
    REQUIRE(rep.D2.size() == 2);
    CHECK(rep.t1_rel < 0.2);
    CHECK(rep.D2[1] < rep.D2[0]);
    CHECK(rep.leg1_loss + rep.leg2_loss < 1e-6);
    for (double v : rep.triple) CHECK(v > 0.0);
}

TEST_CASE("weak independence ratios collapse for full shifts",
          "[experiments]") {
    SystemSpec full = make_system("doubling-digit");
    IndependenceReport r1 = weak_independence_report(full.system);
    CHECK_THAT(r1.c_hat, WithinAbs(1.0, 1e-12));

    SystemSpec gm = make_system("golden-mean-parry");
    const CocycleSystem& g = gm.system;
    IndependenceReport r2 = weak_independence_report(g);
    // the worst ratio is one over the mass of the thinnest image block
    Interval img = g.map.branch_image(r2.worst_from);
    double block = 0.0;
    for (size_t c = 0; c < g.n_cells(); ++c)
        if (overlap_length(g.map.cell(c), img) > 0.5 * g.map.cell(c).length())
            block += g.cell_mass[c];
    CHECK_THAT(r2.c_hat * block, WithinAbs(1.0, 1e-12));
    CHECK(r2.c_hat > 1.3);
    CHECK(r2.worst_gap == 0);
}

TEST_CASE("scaling resolution fills the catalog gaps", "[experiments]") {
    SystemSpec a = resolve_scaling(make_system("doubling-digit"));
    CHECK(a.sigma_b == 0.5);  // already set, untouched

    SystemSpec b = resolve_scaling(make_system("zcover-sft"));
    CHECK_THAT(b.sigma_b,
               WithinRel(b.system.group.spacing *
                             green_kubo_sigma(b.system),
                         1e-12));

    SystemSpec c = resolve_scaling(make_system("heavy-tail-nns"));
    CHECK(c.sigma_b > 0.2);
    CHECK(c.sigma_b < 5.0);
    SystemSpec c2 = resolve_scaling(make_system("heavy-tail-nns"));
    CHECK(c.sigma_b == c2.sigma_b);  // deterministic calibration
}

TEST_CASE("heavy-tail walk matches its stable profile in simulation",
          "[experiments]") {
    SystemSpec sp = resolve_scaling(make_system("heavy-tail-nns"));
    LLTConfig cfg;
    cfg.A = {{}, {0.0, 1.0}};
    cfg.B = {{}, {0.0, 1.0}};
    cfg.window = {{0}};
    cfg.z = {0.0};
    cfg.t_grid = {60.0};
    cfg.samples = 300000;
    cfg.seed = 4242;
    cfg.workers = 2;
    auto rows = estimate_int_llt_mc(sp, cfg);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].budget_ok);
    CHECK(rows[0].rel_error < 0.3);
}

TEST_CASE("experiment inputs are validated", "[experiments]") {
    SystemSpec sp = make_system("two-level-roof");
    LLTConfig cfg;
    cfg.A = {{}, {0.0, 1.0}};
    cfg.B = {{}, {0.0, 1.0}};
    cfg.window = {{0}};
    cfg.z = {0.0};
    cfg.t_grid = {10.0};

    SuspensionRect bad{{0}, {0.5, 1.5}};  // pokes above the unit roof branch
    CHECK_THROWS_AS(validate_rect(sp.system, bad), DomainError);
    SuspensionRect rev{{}, {0.7, 0.2}};
    CHECK_THROWS_AS(validate_rect(sp.system, rev), DomainError);

    CHECK_THROWS_AS(estimate_con_llt(sp, cfg, {}), DomainError);
    CHECK_THROWS_AS(rwm_cesaro(sp, 1, {4, 16}), DomainError);  // mixed roof

    SystemSpec planar = make_system("four-branch-k2");
    LLTConfig pcfg;
    pcfg.A = {{}, {0.0, 1.0}};
    pcfg.B = {{}, {0.0, 1.0}};
    pcfg.window = {{0, 0}};
    pcfg.z = {0.0, 0.0};
    pcfg.t_grid = {10.0};
    CHECK_THROWS_AS(estimate_int_llt_exact(planar, pcfg), DomainError);

    SystemSpec unresolved = make_system("zcover-sft");
    CHECK_THROWS_AS(scale_b(unresolved, 10.0), ConfigError);

    cfg.samples = 0;
    CHECK_THROWS_AS(estimate_int_llt_mc(sp, cfg), DomainError);
}
