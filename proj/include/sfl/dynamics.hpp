#pragma once
// Fibered interval maps: finite partitions of [0,1] with monotone branch
// maps, topological Markov shifts with stationary Markov measures, the
// order-isomorphic interval realization of a shift, cylinder intervals,
// and expansion/distortion regularity checks.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "sfl/common.hpp"

namespace sfl {

// ---------------------------------------------------------------- partition

// Strictly increasing edges 0 = e[0] < ... < e[n] = 1; cell i is (e[i], e[i+1]).
struct Partition {
    std::vector<double> edges;

    size_t size() const { return edges.empty() ? 0 : edges.size() - 1; }
    Interval cell(size_t i) const { return Interval{edges[i], edges[i + 1]}; }

    // Index of the open cell containing x, or -1 when x lies on an edge or
    // outside [0,1].
    int locate(double x) const {
        if (x <= edges.front() || x >= edges.back()) return -1;
        auto it = std::upper_bound(edges.begin(), edges.end(), x);
        size_t i = static_cast<size_t>(it - edges.begin()) - 1;
        if (x == edges[i]) return -1;
        return static_cast<int>(i);
    }
};

inline Partition make_partition(std::vector<double> edges) {
    if (edges.size() < 2 || edges.front() != 0.0 || edges.back() != 1.0)
        throw MeasureError("partition must run from 0 to 1");
    for (size_t i = 0; i + 1 < edges.size(); ++i)
        if (!(edges[i] < edges[i + 1]))
            throw MeasureError("partition edges must be strictly increasing");
    return Partition{std::move(edges)};
}

// ------------------------------------------------------------------ branches

enum class BranchKind { affine, quadratic, sqrtk };

// affine:    T(x) = c0 + c1 x
// quadratic: T(x) = c0 + c1 x + c2 x^2
// sqrtk:     T(x) = c0 + c1 sqrt(x - x0)   (x0 = left cell endpoint)
struct Branch {
    BranchKind kind = BranchKind::affine;
    double c0 = 0.0, c1 = 1.0, c2 = 0.0, x0 = 0.0;

    double eval(double x) const {
        switch (kind) {
            case BranchKind::affine: return c0 + c1 * x;
            case BranchKind::quadratic: return c0 + (c1 + c2 * x) * x;
            case BranchKind::sqrtk: return c0 + c1 * std::sqrt(x - x0);
        }
        return 0.0;
    }
    double deriv(double x) const {
        switch (kind) {
            case BranchKind::affine: return c1;
            case BranchKind::quadratic: return c1 + 2.0 * c2 * x;
            case BranchKind::sqrtk: {
                double u = x - x0;
                return u > 0.0 ? 0.5 * c1 / std::sqrt(u)
                               : std::numeric_limits<double>::infinity() *
                                     (c1 >= 0 ? 1.0 : -1.0);
            }
        }
        return 0.0;
    }
    double second_deriv(double x) const {
        switch (kind) {
            case BranchKind::affine: return 0.0;
            case BranchKind::quadratic: return 2.0 * c2;
            case BranchKind::sqrtk: {
                double u = x - x0;
                return u > 0.0 ? -0.25 * c1 / (u * std::sqrt(u)) : 0.0;
            }
        }
        return 0.0;
    }

    // Inverse of the branch restricted to the cell; y assumed in the image.
    double inverse(double y, const Interval& cell) const {
        switch (kind) {
            case BranchKind::affine:
                return (y - c0) / c1;
            case BranchKind::quadratic: {
                if (c2 == 0.0) return (y - c0) / c1;
                double disc = c1 * c1 - 4.0 * c2 * (c0 - y);
                disc = disc < 0.0 ? 0.0 : std::sqrt(disc);
                double r1 = (-c1 + disc) / (2.0 * c2);
                double r2 = (-c1 - disc) / (2.0 * c2);
                double mid = 0.5 * (cell.lo + cell.hi);
                return std::fabs(r1 - mid) <= std::fabs(r2 - mid) ? r1 : r2;
            }
            case BranchKind::sqrtk: {
                double u = (y - c0) / c1;
                return x0 + u * u;
            }
        }
        return 0.0;
    }
};

inline Branch affine_branch(double slope, double offset) {
    Branch b;
    b.kind = BranchKind::affine;
    b.c1 = slope;
    b.c0 = offset;
    return b;
}

// Affine increasing surjection cell -> image.
inline Branch affine_onto(const Interval& cell, const Interval& image) {
    double slope = image.length() / cell.length();
    return affine_branch(slope, image.lo - slope * cell.lo);
}

// ------------------------------------------------------------- interval map

struct IntervalMap {
    Partition partition;
    std::vector<Branch> branches;           // one per cell
    std::vector<double> invariant_density;  // cell-wise constant, integrates to 1
    bool markov = false;                    // branch images are unions of cells

    size_t n_cells() const { return partition.size(); }
    Interval cell(size_t i) const { return partition.cell(i); }
    double cell_measure(size_t i) const {
        return partition.cell(i).length() * invariant_density[i];
    }
    Interval branch_image(size_t i) const {
        Interval c = partition.cell(i);
        double a = branches[i].eval(c.lo);
        double b = branches[i].eval(c.hi);
        return a <= b ? Interval{a, b} : Interval{b, a};
    }
    bool branch_increasing(size_t i) const {
        Interval c = partition.cell(i);
        return branches[i].eval(c.hi) >= branches[i].eval(c.lo);
    }
};

namespace detail {
inline bool is_edge(const std::vector<double>& edges, double v, double tol) {
    auto it = std::lower_bound(edges.begin(), edges.end(), v - tol);
    return it != edges.end() && std::fabs(*it - v) <= tol;
}
}  // namespace detail

inline IntervalMap make_interval_map(std::vector<double> edges,
                                     std::vector<Branch> branches,
                                     std::vector<double> density = {}) {
    IntervalMap m;
    m.partition = make_partition(std::move(edges));
    if (branches.size() != m.partition.size())
        throw MeasureError("one branch per partition cell required");
    m.branches = std::move(branches);
    if (density.empty()) density.assign(m.partition.size(), 1.0);
    if (density.size() != m.partition.size())
        throw MeasureError("one density value per cell required");
    m.invariant_density = std::move(density);

    double total = 0.0;
    for (size_t i = 0; i < m.n_cells(); ++i) total += m.cell_measure(i);
    if (!close(total, 1.0, 1e-10))
        throw MeasureError("invariant density must integrate to 1");

    const double tol = 1e-12;
    m.markov = true;
    for (size_t i = 0; i < m.n_cells(); ++i) {
        Interval c = m.cell(i);
        double dlo = m.branches[i].deriv(c.lo + 1e-15 * (1.0 + std::fabs(c.lo)));
        double dhi = m.branches[i].deriv(c.hi);
        if (dlo * dhi <= 0.0 && m.branches[i].kind == BranchKind::quadratic)
            throw MeasureError("branch derivative changes sign inside a cell");
        Interval img = m.branch_image(i);
        if (img.lo < -tol || img.hi > 1.0 + tol)
            throw MeasureError("branch image leaves [0,1]");
        if (!detail::is_edge(m.partition.edges, img.lo, tol) ||
            !detail::is_edge(m.partition.edges, img.hi, tol))
            m.markov = false;
    }
    return m;
}

// One application of the map. Points on a partition edge (or outside the
// open cells) have no defined branch.
inline double apply_map(const IntervalMap& m, double x) {
    int c = m.partition.locate(x);
    if (c < 0)
        throw BoundaryError("point " + format_double(x) +
                            " is on a partition boundary or outside (0,1)");
    return m.branches[static_cast<size_t>(c)].eval(x);
}

// Cell index of x, throwing like apply_map.
inline size_t cell_index(const IntervalMap& m, double x) {
    int c = m.partition.locate(x);
    if (c < 0)
        throw BoundaryError("point " + format_double(x) +
                            " is on a partition boundary or outside (0,1)");
    return static_cast<size_t>(c);
}

using Word = std::vector<int>;

// Interval of points whose first |word| cells are the given word:
// { x : T^k x in cell(word[k]) for all k }.
inline Interval cylinder_interval(const IntervalMap& m, const Word& word) {
    if (word.empty()) throw EmptyCylinderError("empty word");
    for (int s : word)
        if (s < 0 || static_cast<size_t>(s) >= m.n_cells())
            throw EmptyCylinderError("symbol out of range");
    Interval target = m.cell(static_cast<size_t>(word.back()));
    for (size_t k = word.size() - 1; k-- > 0;) {
        size_t c = static_cast<size_t>(word[k]);
        Interval cell = m.cell(c);
        Interval img = m.branch_image(c);
        Interval hit = target.intersect(img);
        if (hit.length() <= 1e-15)
            throw EmptyCylinderError("cylinder is empty");
        double a = m.branches[c].inverse(hit.lo, cell);
        double b = m.branches[c].inverse(hit.hi, cell);
        if (a > b) std::swap(a, b);
        target = Interval{a, b}.intersect(cell);
        if (target.length() <= 1e-15)
            throw EmptyCylinderError("cylinder is empty");
    }
    return target;
}

// ------------------------------------------------------------- markov shift

struct MarkovShift {
    size_t n_symbols = 0;
    std::vector<std::uint8_t> adjacency;  // row-major
    std::vector<double> initial;          // stationary distribution
    std::vector<double> transition;       // row-stochastic, respects adjacency

    bool edge(size_t i, size_t j) const { return adjacency[i * n_symbols + j] != 0; }
    double p(size_t i, size_t j) const { return transition[i * n_symbols + j]; }
};

inline void validate_markov_shift(const MarkovShift& s) {
    const double tol = 1e-10;
    size_t n = s.n_symbols;
    if (s.adjacency.size() != n * n || s.transition.size() != n * n ||
        s.initial.size() != n)
        throw MeasureError("markov shift dimensions inconsistent");
    double isum = 0.0;
    for (double v : s.initial) {
        if (v < 0.0) throw MeasureError("negative initial mass");
        isum += v;
    }
    if (!close(isum, 1.0, tol)) throw MeasureError("initial measure must sum to 1");
    for (size_t i = 0; i < n; ++i) {
        double rsum = 0.0;
        for (size_t j = 0; j < n; ++j) {
            double p = s.p(i, j);
            if (p < 0.0) throw MeasureError("negative transition weight");
            if (p > 0.0 && !s.edge(i, j))
                throw MeasureError("transition weight on a forbidden edge");
            rsum += p;
        }
        if (!close(rsum, 1.0, tol))
            throw MeasureError("transition rows must sum to 1");
    }
    for (size_t j = 0; j < n; ++j) {
        double v = 0.0;
        for (size_t i = 0; i < n; ++i) v += s.initial[i] * s.p(i, j);
        if (!close(v, s.initial[j], tol))
            throw MeasureError("initial measure is not stationary");
    }
}

inline double word_measure(const MarkovShift& s, const Word& w) {
    if (w.empty()) return 1.0;
    double m = s.initial[static_cast<size_t>(w[0])];
    for (size_t k = 0; k + 1 < w.size(); ++k) {
        if (!s.edge(static_cast<size_t>(w[k]), static_cast<size_t>(w[k + 1])))
            return 0.0;
        m *= s.p(static_cast<size_t>(w[k]), static_cast<size_t>(w[k + 1]));
    }
    return m;
}

// Maximal-entropy (Parry) measure of a primitive 0/1 adjacency matrix.
inline MarkovShift parry_markov_shift(size_t n,
                                      const std::vector<std::uint8_t>& adjacency) {
    if (adjacency.size() != n * n) throw MeasureError("bad adjacency size");
    auto mult = [&](const std::vector<double>& v, bool transpose) {
        std::vector<double> w(n, 0.0);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j)
                if (adjacency[i * n + j])
                    (transpose ? w[j] : w[i]) += (transpose ? v[i] : v[j]);
        return w;
    };
    auto perron = [&](bool transpose) {
        std::vector<double> v(n, 1.0);
        double rho = 0.0;
        for (int it = 0; it < 200000; ++it) {
            std::vector<double> w = mult(v, transpose);
            double norm = 0.0;
            for (double x : w) norm = std::max(norm, std::fabs(x));
            if (norm == 0.0) throw MeasureError("adjacency matrix is nilpotent");
            for (double& x : w) x /= norm;
            double delta = 0.0;
            for (size_t i = 0; i < n; ++i) delta = std::max(delta, std::fabs(w[i] - v[i]));
            v = w;
            rho = norm;
            if (delta < 1e-15 && it > 32) break;
        }
        return std::pair<std::vector<double>, double>(v, rho);
    };
    auto [u, rho] = perron(false);
    auto [w, rho2] = perron(true);
    if (!close(rho, rho2, 1e-9 * (1.0 + rho)))
        throw MeasureError("left/right spectral radii disagree");

    MarkovShift s;
    s.n_symbols = n;
    s.adjacency = adjacency;
    s.transition.assign(n * n, 0.0);
    s.initial.assign(n, 0.0);
    double z = 0.0;
    for (size_t i = 0; i < n; ++i) z += u[i] * w[i];
    for (size_t i = 0; i < n; ++i) {
        s.initial[i] = u[i] * w[i] / z;
        for (size_t j = 0; j < n; ++j)
            if (adjacency[i * n + j]) s.transition[i * n + j] = u[j] / (rho * u[i]);
    }
    validate_markov_shift(s);
    return s;
}

// --------------------------------------------- interval realization (lemma)

// Interval realization of a Markov shift: symbols reordered by nonincreasing
// measure, depth-1 blocks B_s of length m([s]) laid left to right, and the
// map defined on the depth-2 refinement, sending B_{s,t} affinely onto B_t.
// Word order then matches interval order and |B_w| = m([w]).
struct IntervalRealization {
    IntervalMap map;
    MarkovShift shift;                 // with symbols in the new order
    std::vector<int> symbol_order;     // new index -> original symbol
    std::vector<Interval> symbol_block;  // depth-1 block per (new) symbol
    std::vector<int> cell_symbol;      // depth-2 cell -> current symbol
    std::vector<int> cell_next;        // depth-2 cell -> next symbol
};

inline IntervalRealization build_interval_map_from_markov(const MarkovShift& in) {
    validate_markov_shift(in);
    size_t n = in.n_symbols;

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return in.initial[static_cast<size_t>(a)] > in.initial[static_cast<size_t>(b)];
    });

    MarkovShift s;
    s.n_symbols = n;
    s.adjacency.assign(n * n, 0);
    s.transition.assign(n * n, 0.0);
    s.initial.assign(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        s.initial[i] = in.initial[static_cast<size_t>(order[i])];
        for (size_t j = 0; j < n; ++j) {
            size_t oi = static_cast<size_t>(order[i]);
            size_t oj = static_cast<size_t>(order[j]);
            s.adjacency[i * n + j] = in.adjacency[oi * n + oj];
            s.transition[i * n + j] = in.transition[oi * n + oj];
        }
    }

    IntervalRealization out;
    out.shift = s;
    out.symbol_order = order;

    std::vector<double> block_edge(n + 1, 0.0);
    for (size_t i = 0; i < n; ++i) block_edge[i + 1] = block_edge[i] + s.initial[i];
    block_edge[n] = 1.0;
    out.symbol_block.resize(n);
    for (size_t i = 0; i < n; ++i)
        out.symbol_block[i] = Interval{block_edge[i], block_edge[i + 1]};

    std::vector<double> edges{0.0};
    std::vector<Branch> branches;
    for (size_t i = 0; i < n; ++i) {
        double pos = block_edge[i];
        for (size_t j = 0; j < n; ++j) {
            double len = s.initial[i] * s.p(i, j);
            if (len <= 0.0) continue;
            Interval cell{pos, pos + len};
            pos += len;
            branches.push_back(affine_onto(cell, out.symbol_block[j]));
            edges.push_back(pos);
            out.cell_symbol.push_back(static_cast<int>(i));
            out.cell_next.push_back(static_cast<int>(j));
        }
        edges.back() = block_edge[i + 1];  // absorb rounding at block ends
    }
    edges.back() = 1.0;

    out.map = make_interval_map(std::move(edges), std::move(branches));
    return out;
}

// ---------------------------------------------------------------- regularity

// Expansion / distortion report: second-derivative ratio sup |T''|/(T')^2,
// number of distinct branch images, inf |T'|, Markov structure, minimal
// image measure, distortion of log|T'| along branches, and the Lipschitz
// constant of the (cell-wise constant) weight.
struct RegularityReport {
    double sup_dd_ratio = 0.0;
    bool bounded_dd_ratio = false;  // (A)
    size_t n_branch_images = 0;     // (F) witness, always finite here
    double inf_abs_deriv = 0.0;
    bool uniformly_expanding = false;  // (U)
    bool markov = false;               // (a)
    double min_image_measure = 0.0;    // (b) witness
    bool images_bounded_below = false;
    double distortion_sup = 0.0;  // sup over cells of |log|T'|| variation
    double phi_lipschitz = 0.0;   // 0 for cell-wise constant data
    bool afu_ok = false;
    bool gm_ok = false;
};

inline RegularityReport validate_regularity(const IntervalMap& m) {
    RegularityReport r;
    const double eps = 1e-9;

    double sup_ratio = 0.0;
    double inf_deriv = std::numeric_limits<double>::infinity();
    double sup_dist = 0.0;
    for (size_t i = 0; i < m.n_cells(); ++i) {
        Interval c = m.cell(i);
        const Branch& b = m.branches[i];
        // |T'| is monotone on a cell for all three kinds, so endpoint values
        // bound it; sqrtk blows up at the left endpoint.
        double xs[3] = {c.lo + eps * c.length(), 0.5 * (c.lo + c.hi),
                        c.hi - eps * c.length()};
        double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
        for (double x : xs) {
            double d = std::fabs(b.deriv(x));
            dmin = std::min(dmin, d);
            dmax = std::max(dmax, d);
            double dd = std::fabs(b.second_deriv(x));
            if (d > 0.0) sup_ratio = std::max(sup_ratio, dd / (d * d));
        }
        if (b.kind == BranchKind::sqrtk) {
            // ratio = 1/(c1 sqrt(x - x0)) is unbounded at the cell edge
            sup_ratio = std::numeric_limits<double>::infinity();
            dmax = std::fabs(b.deriv(c.lo + 1e-300));
        }
        if (b.kind == BranchKind::quadratic) {
            double dlo = std::fabs(b.deriv(c.lo)), dhi = std::fabs(b.deriv(c.hi));
            dmin = std::min(dlo, dhi);
            dmax = std::max(dlo, dhi);
            double dd = std::fabs(b.second_deriv(c.lo));
            if (dmin == 0.0)
                sup_ratio = std::numeric_limits<double>::infinity();
            else
                sup_ratio = std::max(sup_ratio, dd / (dmin * dmin));
        }
        inf_deriv = std::min(inf_deriv, dmin);
        if (dmin > 0.0 && std::isfinite(dmax))
            sup_dist = std::max(sup_dist, std::log(dmax) - std::log(dmin));
        else
            sup_dist = std::numeric_limits<double>::infinity();
    }
    r.sup_dd_ratio = sup_ratio;
    r.bounded_dd_ratio = std::isfinite(sup_ratio);
    r.inf_abs_deriv = inf_deriv;
    r.uniformly_expanding = inf_deriv > 1.0;
    r.distortion_sup = sup_dist;

    std::vector<Interval> images;
    double min_img = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < m.n_cells(); ++i) {
        Interval img = m.branch_image(i);
        min_img = std::min(min_img, img.length());
        bool seen = false;
        for (const Interval& o : images)
            if (close(o.lo, img.lo, 1e-12) && close(o.hi, img.hi, 1e-12)) seen = true;
        if (!seen) images.push_back(img);
    }
    r.n_branch_images = images.size();
    r.min_image_measure = min_img;
    r.images_bounded_below = min_img > 0.0;
    r.markov = m.markov;

    r.afu_ok = r.bounded_dd_ratio && r.uniformly_expanding;  // (F) always holds
    r.gm_ok = r.markov && r.images_bounded_below && std::isfinite(r.distortion_sup);
    return r;
}

}  // namespace sfl
