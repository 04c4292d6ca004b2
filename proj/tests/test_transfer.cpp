#include <catch2/catch_amalgamated.hpp>

#include "sfl/systems.hpp"
#include "sfl/transfer.hpp"

using namespace sfl;
using Catch::Matchers::WithinAbs;

TEST_CASE("ulam matrix of the doubling map on three bins", "[transfer]") {
    IntervalMap m = full_shift_map({0.5, 0.5});
    UlamOperator u = ulam_discretize(m, {0.0, 1.0 / 3, 2.0 / 3, 1.0});
    REQUIRE(u.size() == 3);
    CHECK_FALSE(u.aligned);
    double want[3][3] = {{0.5, 0.5, 0.0}, {0.5, 0.0, 0.5}, {0.0, 0.5, 0.5}};
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 3; ++j)
            CHECK_THAT(u.entry(i, j), WithinAbs(want[i][j], 1e-12));

    SpectralGap g = spectral_gap(u);
    CHECK(g.exact);
    CHECK_THAT(g.lambda2, WithinAbs(0.5, 1e-10));
    CHECK(g.mixing);

    CHECK_THROWS_AS(ulam_discretize(m, {0.0, 1.0 / 3, 2.0 / 3, 1.0}, true),
                    AlignmentError);
}

TEST_CASE("aligned dyadic bins are exact and collapse the spectrum",
          "[transfer]") {
    IntervalMap m = full_shift_map({0.5, 0.5});
    std::vector<double> edges = aligned_bins(m, 6);
    REQUIRE(edges.size() == 65);
    UlamOperator u = ulam_discretize(m, edges, true);
    CHECK(u.aligned);
    // the aligned discretization of the doubling map is nilpotent off the
    // constant function: every eigenvalue except 1 vanishes
    SpectralGap g = spectral_gap(u);
    CHECK(g.exact);
    CHECK(g.lambda2 < 1e-8);

    // identity map: no mixing at all
    IntervalMap id = make_interval_map({0.0, 1.0}, {affine_branch(1.0, 0.0)});
    SpectralGap gid = spectral_gap(ulam_discretize(id, uniform_bins(8)));
    CHECK_THAT(gid.lambda2, WithinAbs(1.0, 1e-10));
    CHECK_FALSE(gid.mixing);
}

TEST_CASE("cell transfer matrix conserves mass and constants",
          "[transfer][invariant]") {
    for (const char* name : {"doubling-digit", "golden-mean-parry", "zcover-sft",
                             "two-level-roof"}) {
        SystemSpec sp = make_system(name);
        Eigen::MatrixXd A = cell_transfer_matrix(sp.system);
        long n = A.rows();
        Eigen::VectorXd ones = Eigen::VectorXd::Constant(n, 1.0);
        Eigen::VectorXd mass(n);
        for (long c = 0; c < n; ++c)
            mass[c] = sp.system.cell_mass[static_cast<size_t>(c)];
        CHECK((A * ones - ones).lpNorm<Eigen::Infinity>() < 1e-12);
        CHECK((A.transpose() * mass - mass).lpNorm<Eigen::Infinity>() < 1e-12);

        // untwisted dominant eigenvalue is exactly 1
        EigResult e = dominant_eig(twisted_cell_matrix(sp.system,
            std::vector<double>(sp.system.group.kappa, 0.0)));
        CHECK(e.converged);
        CHECK_THAT(std::abs(e.lambda), WithinAbs(1.0, 1e-11));
    }
}

TEST_CASE("twisted eigenvalue of the digit observable is explicit",
          "[transfer]") {
    SystemSpec sp = make_system("doubling-digit");
    UlamOperator u = ulam_discretize(sp.system.map, aligned_bins(sp.system.map, 6),
                                     true);
    for (double t : {0.1, 0.5, 1.0, 2.0}) {
        // transfer of e^{i t phi} against Lebesgue: (1 + e^{it})/2
        std::complex<double> want = 0.5 * (1.0 + std::polar(1.0, t));
        EigResult cell = dominant_eig(twisted_cell_matrix(sp.system, {t}));
        REQUIRE(cell.converged);
        CHECK_THAT(cell.lambda.real(), WithinAbs(want.real(), 1e-12));
        CHECK_THAT(cell.lambda.imag(), WithinAbs(want.imag(), 1e-12));
        CHECK_THAT(std::abs(cell.lambda), WithinAbs(std::cos(0.5 * t), 1e-12));

        // aligned bins reproduce the cell computation exactly
        EigResult bins = dominant_eig(twisted_ulam_matrix(u, sp.system, {t}));
        REQUIRE(bins.converged);
        CHECK_THAT(std::abs(bins.lambda - cell.lambda), WithinAbs(0.0, 1e-11));

        // conjugate symmetry under t -> -t
        EigResult neg = dominant_eig(twisted_cell_matrix(sp.system, {-t}));
        CHECK_THAT(std::abs(neg.lambda - std::conj(cell.lambda)),
                   WithinAbs(0.0, 1e-11));
    }
}

TEST_CASE("power iteration reports honest failure and annihilation",
          "[transfer]") {
    Eigen::MatrixXcd nil = Eigen::MatrixXcd::Zero(3, 3);
    nil(1, 0) = 1.0;
    nil(2, 1) = 1.0;
    EigResult zero = dominant_eig(nil);
    CHECK(zero.converged);
    CHECK(std::abs(zero.lambda) == 0.0);

    Eigen::MatrixXcd rot = Eigen::MatrixXcd::Zero(2, 2);
    rot(0, 1) = -1.0;
    rot(1, 0) = 1.0;
    EigResult spin = dominant_eig(rot, 1e-12, 2000);
    CHECK_FALSE(spin.converged);
}

TEST_CASE("curvature fit recovers the quadratic and quartic terms",
          "[transfer]") {
    SystemSpec sp = make_system("doubling-digit");
    NagaevFit fit = nagaev_curvature(sp.system, {1.0});
    // -log cos(t/2) = t^2/8 + t^4/192 + t^6/2880 + O(t^8)
    CHECK_THAT(fit.a, WithinAbs(0.125, 1e-7));
    CHECK_THAT(fit.quartic, WithinAbs(1.0 / 192.0, 1e-4));
    CHECK_THAT(fit.sextic, WithinAbs(1.0 / 2880.0, 5e-2));
    CHECK(fit.max_residual < 1e-9);

    double sig = green_kubo_sigma(sp.system);
    CHECK_THAT(sig, WithinAbs(0.5, 1e-6));
}

TEST_CASE("planar curvature matrix of independent digit pair", "[transfer]") {
    SystemSpec sp = make_system("four-branch-k2");
    Eigen::Matrix2d g = nagaev_gamma2(sp.system);
    CHECK_THAT(g(0, 0), WithinAbs(0.125, 1e-5));
    CHECK_THAT(g(1, 1), WithinAbs(0.125, 1e-5));
    CHECK_THAT(g(0, 1), WithinAbs(0.0, 1e-7));
}

TEST_CASE("correlation-summed variance matches the curvature", "[transfer]") {
    SystemSpec sp = make_system("zcover-sft");
    const CocycleSystem& s = sp.system;
    size_t n = s.n_cells();
    // Var_inf = Var(phi) + 2 sum_j Cov(phi, phi o T^j) through the exact
    // chain on cells
    std::vector<double> phi(n);
    for (size_t c = 0; c < n; ++c) phi[c] = s.phi[c][0];
    double mean = 0.0;
    for (size_t c = 0; c < n; ++c) mean += s.cell_mass[c] * phi[c];
    double var = 0.0;
    for (size_t c = 0; c < n; ++c)
        var += s.cell_mass[c] * (phi[c] - mean) * (phi[c] - mean);
    double total = var;
    std::vector<double> pf = phi;
    for (int j = 1; j <= 60; ++j) {
        // pf_c = E[phi(T^j x) | x in c]
        std::vector<double> next(n, 0.0);
        for (size_t c = 0; c < n; ++c)
            for (size_t d = 0; d < n; ++d) next[c] += s.cell_trans[c][d] * pf[d];
        pf = next;
        double cov = 0.0;
        for (size_t c = 0; c < n; ++c)
            cov += s.cell_mass[c] * (phi[c] - mean) * (pf[c] - mean);
        total += 2.0 * cov;
    }
    double sig = green_kubo_sigma(s);
    CHECK_THAT(sig * sig, WithinAbs(total, 1e-6));
}

TEST_CASE("lattice oracle equals closed-form binomials", "[transfer]") {
    SystemSpec sp = make_system("doubling-digit");
    CHECK_THAT(lattice_llt_oracle(sp.system, 4, {2}), WithinAbs(0.375, 1e-12));
    CHECK_THAT(lattice_llt_oracle(sp.system, 4, {0}), WithinAbs(0.0625, 1e-12));
    CHECK_THAT(lattice_llt_oracle(sp.system, 4, {5}), WithinAbs(0.0, 1e-12));

    auto binom = [](int n, int k) {
        return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                        std::lgamma(n - k + 1.0) - n * std::log(2.0));
    };
    CHECK_THAT(lattice_llt_oracle(sp.system, 400, {200}),
               WithinAbs(binom(400, 200), 1e-12));
    CHECK_THAT(lattice_llt_oracle(sp.system, 400, {188}),
               WithinAbs(binom(400, 188), 1e-12));

    // sparse centered step: trinomial hand count at n = 3
    SystemSpec z = make_system("zcover-doubling-digit");
    CHECK_THAT(lattice_llt_oracle(z.system, 3, {1}),
               WithinAbs(111.0 / 512.0, 1e-12));
    CHECK_THAT(lattice_llt_oracle(z.system, 3, {3}),
               WithinAbs(1.0 / 512.0, 1e-12));

    // planar product of two independent fair digits
    SystemSpec f = make_system("four-branch-k2");
    // S_4 per axis lives on {-2,...,2} in units of 1/2 steps times 4; with
    // units +-1 the sum of 4 takes value 0 with mass C(4,2)/16
    double p0 = 0.375 * 0.375;
    CHECK_THAT(lattice_llt_oracle(f.system, 4, {0, 0}), WithinAbs(p0, 1e-12));
}

TEST_CASE("conditional profile is flat for independent digits", "[transfer]") {
    SystemSpec sp = make_system("doubling-digit");
    std::vector<double> prof = conditional_lattice_profile(sp.system, 8, 4);
    double want = 70.0 / 256.0;
    CHECK_THAT(prof[0], WithinAbs(want, 1e-12));
    CHECK_THAT(prof[1], WithinAbs(want, 1e-12));

    // totals over k recover probability one per arrival cell
    SystemSpec g = make_system("golden-mean-parry");
    double tot0 = 0.0, tot2 = 0.0;
    for (long k = 0; k <= 6; ++k) {
        std::vector<double> p = conditional_lattice_profile(g.system, 6, k);
        tot0 += p[0];
        tot2 += p[2];
    }
    CHECK_THAT(tot0, WithinAbs(1.0, 1e-10));
    CHECK_THAT(tot2, WithinAbs(1.0, 1e-10));
}

namespace {

// brute force over all words of the four-branch two-level system
struct Enumerated {
    double joint = 0.0;                 // P(A, S=k, R in window, arrival in B)
    std::vector<double> conditional;    // per arrival cell, S=k and R=rho mass
};

Enumerated enumerate_two_level(const CocycleSystem& s, long k, long rho_lo,
                               long rho_hi, size_t n,
                               const std::vector<std::uint8_t>& maskA,
                               const std::vector<std::uint8_t>& maskB) {
    Enumerated out;
    out.conditional.assign(4, 0.0);
    size_t total = 1;
    for (size_t i = 0; i <= n; ++i) total *= 4;
    for (size_t code = 0; code < total; ++code) {
        size_t x = code;
        long S = 0, R = 0;
        std::vector<int> w(n + 1);
        for (size_t i = 0; i <= n; ++i) {
            w[i] = static_cast<int>(x % 4);
            x /= 4;
        }
        for (size_t i = 0; i < n; ++i) {
            S += s.phi_units[static_cast<size_t>(w[i])][0];
            R += s.roof_units[static_cast<size_t>(w[i])];
        }
        double mass = std::pow(0.25, static_cast<double>(n + 1));
        if (S == k && R >= rho_lo && R <= rho_hi && maskA[static_cast<size_t>(w[0])] &&
            maskB[static_cast<size_t>(w[n])])
            out.joint += mass;
        if (S == k && R == rho_lo)
            out.conditional[static_cast<size_t>(w[n])] += mass * 4.0;  // / pi(c)
    }
    return out;
}

}  // namespace

TEST_CASE("joint window oracle equals exhaustive enumeration", "[transfer]") {
    SystemSpec sp = make_system("two-level-roof");
    const CocycleSystem& s = sp.system;
    std::vector<std::uint8_t> A = {1, 1, 0, 0};  // first digit zero
    std::vector<std::uint8_t> All = {1, 1, 1, 1};
    std::vector<double> win = joint_lattice_window(s, A, All, 2, 7, 8, 4, 6);
    REQUIRE(win.size() == 3);
    for (size_t n = 4; n <= 6; ++n) {
        Enumerated e = enumerate_two_level(s, 2, 7, 8, n, A, All);
        CHECK_THAT(win[n - 4], WithinAbs(e.joint, 1e-10));
    }

    // restrict the arrival set too
    std::vector<std::uint8_t> B = {0, 1, 0, 1};  // second digit one
    std::vector<double> winb = joint_lattice_window(s, All, B, 3, 8, 8, 5, 5);
    Enumerated eb = enumerate_two_level(s, 3, 8, 8, 5, All, B);
    CHECK_THAT(winb[0], WithinAbs(eb.joint, 1e-10));
}

TEST_CASE("conditional joint profile equals exhaustive enumeration",
          "[transfer]") {
    SystemSpec sp = make_system("two-level-roof");
    const CocycleSystem& s = sp.system;
    std::vector<std::uint8_t> All = {1, 1, 1, 1};
    auto prof = conditional_joint_profile(s, 5, 6, 2, 8);
    for (size_t n = 5; n <= 6; ++n) {
        Enumerated e = enumerate_two_level(s, 2, 8, 8, n, All, All);
        for (size_t c = 0; c < 4; ++c)
            CHECK_THAT(prof[n - 5][c], WithinAbs(e.conditional[c], 1e-10));
    }
}

TEST_CASE("aperiodicity scan separates arithmetic from aperiodic steps",
          "[transfer][invariant]") {
    AperiodicityReport good = aperiodicity_check(make_system("doubling-digit").system);
    CHECK(good.max_offzero < 1.0 - 1e-4);

    // centered half-integer digit: the unit character at tau = pi has
    // modulus-one eigenvalue |cos(tau)| = 1
    AperiodicityReport bad = aperiodicity_check(make_system("doubling-pm-half").system);
    CHECK(bad.max_offzero > 1.0 - 1e-9);
    CHECK_THAT(std::fabs(bad.worst_tau[0]), WithinAbs(kPi, 1e-9));

    // joint characters of step and roof stay away from modulus one
    AperiodicityReport joint =
        aperiodicity_check(make_system("zcover-sft").system, 33, true);
    CHECK(joint.max_offzero < 1.0 - 1e-4);

    AperiodicityReport tl =
        aperiodicity_check(make_system("two-level-roof").system, 33, true);
    CHECK(tl.max_offzero < 1.0 - 1e-4);
}
