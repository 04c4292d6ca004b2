#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "sfl/cover.hpp"
#include "sfl/systems.hpp"

using namespace sfl;
using Catch::Matchers::WithinAbs;

TEST_CASE("cover sweep reproduces the exact step-sum law", "[cover]") {
    SystemSpec sp = make_system("doubling-digit");
    CoverSweep sweep(sp.system, CoverConfig{});
    std::vector<std::uint8_t> all = {1, 1};
    for (size_t n = 1; n <= 12; ++n) {
        sweep.advance();
        REQUIRE(sweep.rho_lo() == static_cast<long>(n));  // unit roof
        REQUIRE(sweep.rho_hi() == static_cast<long>(n));
        CHECK_THAT(sweep.live_mass(), WithinAbs(1.0, 1e-12));
    }
    for (long k = 0; k <= 12; ++k) {
        double exact = lattice_llt_oracle(sp.system, 12, {k});
        CHECK_THAT(sweep.pair_with(all, 12, k), WithinAbs(exact, 1e-13));
    }
    CHECK(sweep.slice(12, 13) == nullptr);
    CHECK(sweep.slice(11, 6) == nullptr);
}

TEST_CASE("cover sweep matches the joint window oracle", "[cover]") {
    SystemSpec sp = make_system("two-level-roof");
    const CocycleSystem& s = sp.system;
    std::vector<std::uint8_t> A = {1, 1, 0, 0};
    std::vector<std::uint8_t> All = {1, 1, 1, 1};
    std::vector<double> win = joint_lattice_window(s, A, All, 2, 7, 8, 4, 6);

    CoverConfig cfg;
    cfg.start_mask = A;
    CoverSweep sweep(s, cfg);
    for (size_t n = 1; n <= 6; ++n) {
        sweep.advance();
        if (n < 4) continue;
        double dp = 0.0;
        for (long rho = 7; rho <= 8; ++rho) dp += sweep.pair_with(All, rho, 2);
        CHECK_THAT(dp, WithinAbs(win[n - 4], 1e-12));
    }
}

namespace {

// per-cell slice values of the four-branch two-level system by brute force:
// words of length n+1, uniform mass 4^-(n+1), sums over the first n symbols
std::vector<double> enumerate_slice(const CocycleSystem& s, size_t n, long rho,
                                    long k) {
    std::vector<double> out(4, 0.0);
    size_t total = 1;
    for (size_t i = 0; i <= n; ++i) total *= 4;
    double mass = std::pow(0.25, static_cast<double>(n + 1));
    for (size_t code = 0; code < total; ++code) {
        size_t x = code;
        long S = 0, R = 0;
        int last = 0;
        for (size_t i = 0; i <= n; ++i) {
            int sym = static_cast<int>(x % 4);
            x /= 4;
            if (i < n) {
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

TEST_CASE("cover slices equal exhaustive enumeration", "[cover]") {
    SystemSpec sp = make_system("two-level-roof");
    CoverSweep sweep(sp.system, CoverConfig{});
    for (size_t n = 1; n <= 5; ++n) sweep.advance();
    for (long rho = 5; rho <= 10; ++rho)
        for (long k = 0; k <= 5; ++k) {
            std::vector<double> ref = enumerate_slice(sp.system, 5, rho, k);
            const double* got = sweep.slice(rho, k);
            REQUIRE(got != nullptr);
            for (size_t c = 0; c < 4; ++c)
                CHECK_THAT(got[c], WithinAbs(ref[c], 1e-12));
        }
}

TEST_CASE("cover sweep resumes from explicit slices", "[cover]") {
    SystemSpec sp = make_system("zcover-sft");
    const CocycleSystem& s = sp.system;
    CoverSweep plain(s, CoverConfig{});
    for (int i = 0; i < 3; ++i) plain.advance();

    std::map<std::pair<long, long>, std::vector<double>> snap;
    for (long rho = plain.rho_lo(); rho <= plain.rho_hi(); ++rho)
        for (long k = plain.k_lo(); k <= plain.k_hi(); ++k) {
            const double* v = plain.slice(rho, k);
            snap[{rho, k}] = std::vector<double>(v, v + s.n_cells());
        }
    CoverSweep resumed(s, CoverConfig{}, snap, 3);
    REQUIRE(resumed.rho_lo() == plain.rho_lo());
    REQUIRE(resumed.k_hi() == plain.k_hi());

    for (int i = 0; i < 2; ++i) {
        plain.advance();
        resumed.advance();
    }
    REQUIRE(resumed.step_index() == 5);
    for (long rho = plain.rho_lo(); rho <= plain.rho_hi(); ++rho)
        for (long k = plain.k_lo(); k <= plain.k_hi(); ++k) {
            const double* a = plain.slice(rho, k);
            const double* b = resumed.slice(rho, k);
            for (size_t c = 0; c < s.n_cells(); ++c)
                CHECK_THAT(b[c], WithinAbs(a[c], 1e-15));
        }
}

TEST_CASE("pruning tracks every unit of discarded mass", "[cover][invariant]") {
    SECTION("step cap") {
        SystemSpec sp = make_system("zcover-doubling-digit");
        CoverConfig cfg;
        cfg.k_cap = 3;
        CoverSweep sweep(sp.system, cfg);
        for (int i = 0; i < 10; ++i) {
            sweep.advance();
            CHECK_THAT(sweep.live_mass() + sweep.pruned_k_mass() +
                           sweep.pruned_rho_mass(),
                       WithinAbs(1.0, 1e-12));
        }
        CHECK(sweep.pruned_k_mass() > 0.0);
        CHECK(sweep.pruned_rho_mass() == 0.0);
        CHECK(sweep.k_lo() == -3);
        CHECK(sweep.k_hi() == 3);
    }
    SECTION("roof cap") {
        SystemSpec sp = make_system("two-level-roof");
        CoverConfig cfg;
        cfg.rho_cap = 6;
        CoverSweep sweep(sp.system, cfg);
        for (int i = 0; i < 8; ++i) {
            sweep.advance();
            CHECK_THAT(sweep.live_mass() + sweep.pruned_k_mass() +
                           sweep.pruned_rho_mass(),
                       WithinAbs(1.0, 1e-12));
        }
        // min roof 1: after 8 steps nothing can still sit at or below 6
        CHECK_THAT(sweep.pruned_rho_mass(), WithinAbs(1.0, 1e-12));
        CHECK(sweep.live_mass() == 0.0);
        CHECK(sweep.slice(6, 0) == nullptr);
    }
    SECTION("no caps, no loss") {
        SystemSpec sp = make_system("two-level-roof");
        CoverSweep sweep(sp.system, CoverConfig{});
        for (int i = 0; i < 8; ++i) sweep.advance();
        CHECK(sweep.pruned_k_mass() == 0.0);
        CHECK(sweep.pruned_rho_mass() == 0.0);
        CHECK_THAT(sweep.live_mass(), WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("cover sweep rejects unsupported groups and roofs", "[cover]") {
    CHECK_THROWS_AS(CoverSweep(make_system("four-branch-k2").system, CoverConfig{}),
                    DomainError);

    // non-integer roof on the doubling map
    GroupSpec g;
    g.kappa = 1;
    g.lattice = true;
    g.spacing = 1.0;
    CocycleSystem s = make_cocycle_system(full_shift_map({0.5, 0.5}), g,
                                          {{0.0}, {1.0}}, {1.3, 1.3});
    CHECK_THROWS_AS(CoverSweep(s, CoverConfig{}), DomainError);

    std::map<std::pair<long, long>, std::vector<double>> empty;
    CHECK_THROWS_AS(
        CoverSweep(make_system("doubling-digit").system, CoverConfig{}, empty, 0),
        DomainError);
}

TEST_CASE("forward sweep conserves mass per start cell", "[cover][invariant]") {
    SystemSpec sp = make_system("two-level-roof");
    ForwardSweep sweep(sp.system, CoverConfig{});
    for (size_t n = 1; n <= 6; ++n) sweep.advance();
    std::vector<double> total(4, 0.0);
    for (long rho = sweep.rho_lo(); rho <= sweep.rho_hi(); ++rho)
        for (long k = sweep.k_lo(); k <= sweep.k_hi(); ++k) {
            const double* v = sweep.slice(rho, k);
            if (!v) continue;
            for (size_t c = 0; c < 4; ++c) total[c] += v[c];
        }
    for (size_t c = 0; c < 4; ++c)
        CHECK_THAT(total[c] + sweep.k_loss(c) + sweep.rho_loss(c),
                   WithinAbs(1.0, 1e-12));
    CHECK(sweep.pruned_worst() == 0.0);  // no caps were set
}

TEST_CASE("forward sweep is dual to the transfer sweep", "[cover]") {
    SystemSpec sp = make_system("zcover-sft");
    const CocycleSystem& s = sp.system;
    CoverSweep back(s, CoverConfig{});
    ForwardSweep fwd(s, CoverConfig{});
    for (size_t n = 1; n <= 5; ++n) {
        back.advance();
        fwd.advance();
    }
    for (long rho = 5; rho <= 10; ++rho)
        for (long k = -5; k <= 5; ++k) {
            const double* f = fwd.slice(rho, k);
            double mixed = 0.0;
            if (f)
                for (size_t c = 0; c < s.n_cells(); ++c)
                    mixed += s.cell_mass[c] * f[c];
            CHECK_THAT(mixed, WithinAbs(back.integral(rho, k), 1e-13));
        }
}

TEST_CASE("forward sweep splits roof overflow from window drops", "[cover]") {
    SystemSpec sp = make_system("two-level-roof");
    CoverConfig cfg;
    cfg.rho_cap = 6;
    ForwardSweep sweep(sp.system, cfg);
    for (size_t n = 1; n <= 8; ++n) sweep.advance();
    // everything ends past the roof cap, none of it at the k window
    CHECK(sweep.pruned_worst() == 0.0);
    for (size_t c = 0; c < 4; ++c)
        CHECK_THAT(sweep.rho_loss(c), WithinAbs(1.0, 1e-12));
}
