#pragma once
// Built-in example systems: interval maps with cell-wise constant group data
// and the standardized limit law of their normalized orbit sums. Full shifts
// are realized directly (one branch per symbol, each onto [0,1)); shifts
// with forbidden transitions go through the order-preserving interval
// realization of the Parry measure.

#include <string>

#include "sfl/cocycle.hpp"
#include "sfl/dynamics.hpp"
#include "sfl/stable.hpp"

namespace sfl {

// Map whose branch s sends the block of mass pi[s] affinely onto [0,1);
// symbol sequences are independent draws from pi.
inline IntervalMap full_shift_map(const std::vector<double>& pi) {
    std::vector<double> edges{0.0};
    std::vector<Branch> branches;
    double pos = 0.0;
    for (double p : pi) {
        if (!(p > 0.0)) throw ConfigError("block masses must be positive");
        Interval cell{pos, pos + p};
        pos += p;
        edges.push_back(pos);
        branches.push_back(affine_onto(cell, Interval{0.0, 1.0}));
    }
    edges.back() = 1.0;
    return make_interval_map(std::move(edges), std::move(branches));
}

struct SystemSpec {
    std::string name;
    std::string summary;
    CocycleSystem system;
    StableLaw law;        // law of S_n / b(n) for large n
    double sigma_b = 0.0; // scale of b(n) = sigma_b n^(1/p); 0 = fit at runtime
};

inline std::vector<std::string> builtin_system_names() {
    return {"doubling-digit",  "doubling-pm-half", "golden-mean-parry",
            "four-branch-k2",  "heavy-tail-nns",   "two-level-roof",
            "zcover-doubling-digit", "zcover-sft"};
}

namespace detail {

// Group data per symbol, pushed down to realization cells by current symbol.
inline CocycleSystem lemma_system(const MarkovShift& shift, GroupSpec g,
                                  const std::vector<std::vector<double>>& phi_sym,
                                  const std::vector<double>& roof_sym) {
    IntervalRealization real = build_interval_map_from_markov(shift);
    std::vector<std::vector<double>> phi;
    std::vector<double> roof;
    for (size_t c = 0; c < real.map.n_cells(); ++c) {
        int orig = real.symbol_order[static_cast<size_t>(real.cell_symbol[c])];
        phi.push_back(phi_sym[static_cast<size_t>(orig)]);
        roof.push_back(roof_sym[static_cast<size_t>(orig)]);
    }
    return make_cocycle_system(real.map, g, std::move(phi), std::move(roof));
}

}  // namespace detail

inline SystemSpec make_system(const std::string& name) {
    SystemSpec sp;
    sp.name = name;

    if (name == "doubling-digit") {
        sp.summary = "doubling map, binary digit observable, unit roof";
        sp.system = make_cocycle_system(full_shift_map({0.5, 0.5}),
                                        GroupSpec{1, true, 1.0},
                                        {{0.0}, {1.0}}, {1.0, 1.0});
        sp.law = gaussian_law_1d(0.5);
        sp.sigma_b = 0.5;
    } else if (name == "doubling-pm-half") {
        sp.summary = "doubling map, centered half-integer digit, unit roof";
        sp.system = make_cocycle_system(full_shift_map({0.5, 0.5}),
                                        GroupSpec{1, true, 0.5},
                                        {{0.5}, {-0.5}}, {1.0, 1.0});
        sp.law = gaussian_law_1d(0.5);
        sp.sigma_b = 0.5;
    } else if (name == "golden-mean-parry") {
        sp.summary = "golden mean shift with maximal-entropy measure, two-level roof";
        MarkovShift s = parry_markov_shift(2, {1, 1, 1, 0});
        sp.system = detail::lemma_system(s, GroupSpec{1, true, 1.0},
                                         {{0.0}, {1.0}}, {1.0, 2.0});
        sp.law = gaussian_law_1d(0.5);
        sp.sigma_b = 0.0;
    } else if (name == "four-branch-k2") {
        sp.summary = "four-branch expanding map, planar centered digit pair";
        std::vector<std::vector<double>> phi;
        for (int s = 0; s < 4; ++s)
            phi.push_back({(s >> 1) ? -0.5 : 0.5, (s & 1) ? -0.5 : 0.5});
        sp.system = make_cocycle_system(full_shift_map({0.25, 0.25, 0.25, 0.25}),
                                        GroupSpec{2, true, 0.5}, std::move(phi),
                                        {1.0, 1.0, 1.0, 1.0});
        sp.law = product_gaussian_law(2, 0.5);
        sp.sigma_b = 0.5;
    } else if (name == "heavy-tail-nns") {
        sp.summary = "hundred-branch map, signed step with power-law block masses";
        const int K = 50;
        std::vector<double> pi;
        std::vector<std::vector<double>> phi;
        double z = 0.0;
        for (int k = 1; k <= K; ++k) z += 2.0 * std::pow(k, -2.5);
        for (int k = 1; k <= K; ++k) {
            double p = std::pow(k, -2.5) / z;
            pi.push_back(p);
            phi.push_back({static_cast<double>(k)});
            pi.push_back(p);
            phi.push_back({static_cast<double>(-k)});
        }
        std::vector<double> roof(pi.size(), 1.0);
        sp.system = make_cocycle_system(full_shift_map(pi), GroupSpec{1, true, 1.0},
                                        std::move(phi), std::move(roof));
        sp.law = symmetric_law_1d(1.5, 1.0);
        sp.sigma_b = 0.0;
    } else if (name == "two-level-roof") {
        sp.summary = "four-branch map, digit observable, independent two-level roof";
        std::vector<std::vector<double>> phi;
        std::vector<double> roof;
        for (int s = 0; s < 4; ++s) {
            phi.push_back({static_cast<double>(s >> 1)});
            roof.push_back(1.0 + static_cast<double>(s & 1));
        }
        sp.system = make_cocycle_system(full_shift_map({0.25, 0.25, 0.25, 0.25}),
                                        GroupSpec{1, true, 1.0}, std::move(phi),
                                        std::move(roof));
        sp.law = gaussian_law_1d(0.5);
        sp.sigma_b = 0.5;
    } else if (name == "zcover-doubling-digit") {
        sp.summary = "eight-branch map, sparse centered integer step, unit roof";
        std::vector<double> pi(8, 0.125);
        std::vector<std::vector<double>> phi(8, std::vector<double>{0.0});
        phi[0] = {1.0};
        phi[1] = {-1.0};
        std::vector<double> roof(8, 1.0);
        sp.system = make_cocycle_system(full_shift_map(pi), GroupSpec{1, true, 1.0},
                                        std::move(phi), std::move(roof));
        sp.law = gaussian_law_1d(0.5);
        sp.sigma_b = 0.5;
    } else if (name == "zcover-sft") {
        sp.summary = "four-symbol shift, one forbidden symbol swap, mixed roof";
        std::vector<std::uint8_t> adj = {1, 0, 1, 1, 0, 1, 1, 1,
                                         1, 1, 1, 1, 1, 1, 1, 1};
        MarkovShift s = parry_markov_shift(4, adj);
        sp.system = detail::lemma_system(
            s, GroupSpec{1, true, 1.0},
            {{1.0}, {-1.0}, {0.0}, {0.0}}, {1.0, 1.0, 2.0, 1.0});
        sp.law = gaussian_law_1d(0.5);
        sp.sigma_b = 0.0;
    } else {
        throw ConfigError("unknown system: " + name);
    }
    return sp;
}

}  // namespace sfl
