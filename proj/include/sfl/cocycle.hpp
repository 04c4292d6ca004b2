#pragma once
// Suspension semiflows over fibered interval maps, with group-valued data
// attached to partition cells: a cell-wise constant roof r > 0 and a
// cell-wise constant observable phi taking values in R^kappa (optionally on
// a lattice). Provides the renewal count, the semiflow, jump and smooth
// cocycles, the skew extension, and exact symbolic sampling for Markov maps
// with affine branches and cell-wise constant invariant density.

#include <random>
#include <vector>

#include "sfl/common.hpp"
#include "sfl/dynamics.hpp"

namespace sfl {

struct GroupSpec {
    size_t kappa = 1;
    bool lattice = true;   // values in spacing * Z^kappa
    double spacing = 1.0;
};

struct SuspensionPoint {
    double x = 0.0;
    double y = 0.0;  // 0 <= y < r(x)
};

struct SkewPoint {
    SuspensionPoint base;
    std::vector<double> z;  // fiber position in R^kappa
};

struct CocycleSystem {
    IntervalMap map;
    GroupSpec group;
    std::vector<std::vector<double>> phi;  // per cell, kappa components
    std::vector<double> roof;              // per cell, positive

    // derived
    std::vector<std::vector<long>> phi_units;  // lattice coordinates
    std::vector<long> roof_units;              // set when the roof is integer
    bool integer_roof = false;
    std::vector<double> cell_mass;             // invariant mass per cell
    std::vector<std::vector<double>> cell_trans;  // chain on cells
    bool symbolic_exact = false;
    double mean_roof = 0.0;   // = measure of the suspension space
    double sup_roof = 0.0;
    std::vector<double> mean_phi;

    size_t n_cells() const { return map.n_cells(); }
    double roof_at(double x) const { return roof[cell_index(map, x)]; }
};

inline CocycleSystem make_cocycle_system(IntervalMap map, GroupSpec group,
                                         std::vector<std::vector<double>> phi,
                                         std::vector<double> roof) {
    CocycleSystem s;
    s.map = std::move(map);
    s.group = group;
    s.phi = std::move(phi);
    s.roof = std::move(roof);
    size_t n = s.map.n_cells();
    if (s.phi.size() != n || s.roof.size() != n)
        throw ConfigError("phi and roof need one entry per cell");
    if (group.kappa == 0) throw ConfigError("group dimension must be positive");

    s.mean_phi.assign(group.kappa, 0.0);
    for (size_t c = 0; c < n; ++c) {
        if (s.phi[c].size() != group.kappa)
            throw ConfigError("phi entry has wrong dimension");
        if (!(s.roof[c] > 0.0)) throw ConfigError("roof must be positive");
        double mass = s.map.cell_measure(c);
        s.cell_mass.push_back(mass);
        s.mean_roof += mass * s.roof[c];
        s.sup_roof = std::max(s.sup_roof, s.roof[c]);
        for (size_t k = 0; k < group.kappa; ++k)
            s.mean_phi[k] += mass * s.phi[c][k];
    }

    if (group.lattice) {
        if (!(group.spacing > 0.0)) throw ConfigError("lattice spacing must be positive");
        for (size_t c = 0; c < n; ++c) {
            std::vector<long> u;
            for (double v : s.phi[c]) {
                double q = v / group.spacing;
                long l = std::lround(q);
                if (std::fabs(q - static_cast<double>(l)) > 1e-9)
                    throw ConfigError("phi value off the declared lattice");
                u.push_back(l);
            }
            s.phi_units.push_back(std::move(u));
        }
    }
    s.integer_roof = true;
    for (double r : s.roof) {
        long l = std::lround(r);
        if (l <= 0 || std::fabs(r - static_cast<double>(l)) > 1e-9)
            s.integer_roof = false;
    }
    if (s.integer_roof)
        for (double r : s.roof) s.roof_units.push_back(std::lround(r));

    // exact chain on cells: Markov map, affine branches, and the cell mass
    // vector stationary under the induced transition probabilities
    bool eligible = s.map.markov;
    for (const Branch& b : s.map.branches)
        if (b.kind != BranchKind::affine) eligible = false;
    if (eligible) {
        s.cell_trans.assign(n, std::vector<double>(n, 0.0));
        for (size_t c = 0; c < n; ++c) {
            Interval img = s.map.branch_image(c);
            for (size_t d = 0; d < n; ++d) {
                double hit = overlap_length(img, s.map.cell(d));
                if (hit > 0.0) s.cell_trans[c][d] = hit / img.length();
            }
        }
        bool stationary = true;
        for (size_t d = 0; d < n; ++d) {
            double v = 0.0;
            for (size_t c = 0; c < n; ++c) v += s.cell_mass[c] * s.cell_trans[c][d];
            if (!close(v, s.cell_mass[d], 1e-10)) stationary = false;
        }
        s.symbolic_exact = stationary;
        if (!stationary) s.cell_trans.clear();
    }
    return s;
}

// ------------------------------------------------------------ orbit sums

// phi and roof sums along the length-n forward orbit of x.
struct BirkhoffSums {
    std::vector<double> phi;
    double roof = 0.0;
};

inline BirkhoffSums birkhoff_sum(const CocycleSystem& s, double x, size_t n) {
    BirkhoffSums out;
    out.phi.assign(s.group.kappa, 0.0);
    for (size_t i = 0; i < n; ++i) {
        size_t c = cell_index(s.map, x);
        for (size_t k = 0; k < s.group.kappa; ++k) out.phi[k] += s.phi[c][k];
        out.roof += s.roof[c];
        x = s.map.branches[c].eval(x);
    }
    return out;
}

inline BirkhoffSums birkhoff_of_word(const CocycleSystem& s, const Word& w) {
    BirkhoffSums out;
    out.phi.assign(s.group.kappa, 0.0);
    for (int c : w) {
        size_t i = static_cast<size_t>(c);
        for (size_t k = 0; k < s.group.kappa; ++k) out.phi[k] += s.phi[i][k];
        out.roof += s.roof[i];
    }
    return out;
}

// --------------------------------------------------------------- semiflow

struct FlowResult {
    SuspensionPoint point;
    size_t steps = 0;             // renewal count N(t)
    std::vector<double> jump;     // phi sum over the steps taken
};

inline void check_in_fiber(const CocycleSystem& s, const SuspensionPoint& p) {
    double r = s.roof_at(p.x);
    if (p.y < 0.0 || p.y >= r)
        throw DomainError("fiber coordinate outside [0, roof)");
}

// Flow for time t >= 0: climb the fiber, crossing the roof as often as the
// accumulated height requires. The number of crossings is the unique n with
// r_n(x) <= y + t < r_(n+1)(x).
inline FlowResult flow(const CocycleSystem& s, SuspensionPoint p, double t) {
    if (t < 0.0) throw DomainError("semiflow time must be nonnegative");
    check_in_fiber(s, p);
    FlowResult out;
    out.jump.assign(s.group.kappa, 0.0);
    double remaining = p.y + t;
    double x = p.x;
    size_t c = cell_index(s.map, x);
    while (s.roof[c] <= remaining) {
        remaining -= s.roof[c];
        for (size_t k = 0; k < s.group.kappa; ++k) out.jump[k] += s.phi[c][k];
        x = s.map.branches[c].eval(x);
        c = cell_index(s.map, x);
        ++out.steps;
    }
    out.point = SuspensionPoint{x, remaining};
    return out;
}

inline size_t renewal_count(const CocycleSystem& s, const SuspensionPoint& p,
                            double t) {
    return flow(s, p, t).steps;
}

// Group increment accumulated along the flow up to time t.
inline std::vector<double> jump_cocycle(const CocycleSystem& s,
                                        const SuspensionPoint& p, double t) {
    return flow(s, p, t).jump;
}

// ------------------------------------------------------- smooth observable

// Fiber observable f(x, u) = a_c + b_c * u on cell c, integrated over whole
// fibers (phi_f) or partial fibers (potential E).
struct FiberAffine {
    std::vector<double> a;
    std::vector<double> b;
};

inline double fiber_cell_integral(const CocycleSystem& s, const FiberAffine& f,
                                  size_t c) {
    double r = s.roof[c];
    return f.a[c] * r + 0.5 * f.b[c] * r * r;
}

inline double fiber_potential(const CocycleSystem& s, const FiberAffine& f,
                              const SuspensionPoint& p) {
    size_t c = cell_index(s.map, p.x);
    return f.a[c] * p.y + 0.5 * f.b[c] * p.y * p.y;
}

struct SmoothCocycleValue {
    double value = 0.0;   // time integral of f along the orbit
    double jump = 0.0;    // sum of whole-fiber integrals over crossings
    double e_start = 0.0;
    double e_end = 0.0;
};

// Integral of f along the orbit segment from p to the time-t image,
// assembled as jump part minus starting potential plus ending potential.
inline SmoothCocycleValue smooth_cocycle(const CocycleSystem& s,
                                         const FiberAffine& f,
                                         const SuspensionPoint& p, double t) {
    if (f.a.size() != s.n_cells() || f.b.size() != s.n_cells())
        throw ConfigError("fiber observable needs one pair per cell");
    SmoothCocycleValue out;
    out.e_start = fiber_potential(s, f, p);
    double remaining = p.y + t;
    double x = p.x;
    if (t < 0.0) throw DomainError("semiflow time must be nonnegative");
    check_in_fiber(s, p);
    size_t c = cell_index(s.map, x);
    while (s.roof[c] <= remaining) {
        remaining -= s.roof[c];
        out.jump += fiber_cell_integral(s, f, c);
        x = s.map.branches[c].eval(x);
        c = cell_index(s.map, x);
    }
    out.e_end = f.a[c] * remaining + 0.5 * f.b[c] * remaining * remaining;
    out.value = out.jump - out.e_start + out.e_end;
    return out;
}

// ------------------------------------------------------------ skew product

inline SkewPoint skew_flow(const CocycleSystem& s, SkewPoint w, double t) {
    if (w.z.size() != s.group.kappa) throw DomainError("fiber dimension mismatch");
    FlowResult f = flow(s, w.base, t);
    w.base = f.point;
    for (size_t k = 0; k < s.group.kappa; ++k) w.z[k] += f.jump[k];
    return w;
}

inline SkewPoint deck(SkewPoint w, const std::vector<double>& h) {
    if (h.size() != w.z.size()) throw DomainError("deck shift dimension mismatch");
    for (size_t k = 0; k < h.size(); ++k) w.z[k] += h[k];
    return w;
}

// Representative in [0,1)^kappa of z modulo the unit lattice.
inline std::vector<double> torus_reduce(std::vector<double> z) {
    for (double& v : z) {
        v -= std::floor(v);
        if (v >= 1.0) v = 0.0;
    }
    return z;
}

// ---------------------------------------------------------------- sampling

inline size_t sample_cell(const std::vector<double>& weights,
                          std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    double acc = 0.0;
    for (size_t c = 0; c + 1 < weights.size(); ++c) {
        acc += weights[c];
        if (u < acc) return c;
    }
    return weights.size() - 1;
}

// x distributed like the invariant measure: cell by mass, then uniform.
inline double sample_base_point(const CocycleSystem& s, std::mt19937_64& rng) {
    size_t c = sample_cell(s.cell_mass, rng);
    Interval cell = s.map.cell(c);
    std::uniform_real_distribution<double> unif(cell.lo, cell.hi);
    double x = unif(rng);
    while (s.map.partition.locate(x) != static_cast<int>(c)) x = unif(rng);
    return x;
}

// Point of the suspension space distributed like the (normalized) product
// of the invariant measure with fiber length, by rejection under sup roof.
inline SuspensionPoint nu_sample(const CocycleSystem& s, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    while (true) {
        double x = sample_base_point(s, rng);
        double y = unif(rng) * s.sup_roof;
        if (y < s.roof_at(x)) return SuspensionPoint{x, y};
    }
}

// Cell sequence of length n from the exact chain; valid when symbolic_exact.
inline Word sample_symbol_chain(const CocycleSystem& s, std::mt19937_64& rng,
                                size_t n) {
    if (!s.symbolic_exact)
        throw DomainError("system has no exact symbolic chain");
    Word w;
    if (n == 0) return w;
    size_t c = sample_cell(s.cell_mass, rng);
    w.push_back(static_cast<int>(c));
    for (size_t i = 1; i < n; ++i) {
        c = sample_cell(s.cell_trans[c], rng);
        w.push_back(static_cast<int>(c));
    }
    return w;
}

}  // namespace sfl
