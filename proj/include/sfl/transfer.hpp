#pragma once
// Transfer-operator numerics. Two levels of discretization:
//  - the exact cell basis: for a Markov map with cell-wise constant density,
//    the transfer operator preserves functions constant on partition cells,
//    so cell-level matrices are exact, not approximations;
//  - Ulam bins: a finite partition into bins, row-stochastic transition
//    matrix M[i][j] = m(B_i intersect T^-1 B_j) / m(B_i). Bins aligned with
//    the cylinder structure reproduce the cell-basis exactness.
// On top of these: twisted operators with lattice characters, dominant
// eigenvalues by pivot-normalized power iteration, curvature fits of
// -log|lambda| near the trivial character, exact lattice distribution
// oracles by character-sum inversion, and aperiodicity scans over the dual
// torus.

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "sfl/cocycle.hpp"
#include "sfl/common.hpp"
#include "sfl/dynamics.hpp"

namespace sfl {

// ------------------------------------------------------------- ulam matrix

struct UlamOperator {
    std::vector<double> edges;   // bin boundaries
    std::vector<double> mass;    // invariant mass per bin
    std::vector<double> matrix;  // row-major, row-stochastic
    std::vector<int> bin_cell;   // containing map cell, -1 if a bin spans cells
    bool aligned = false;

    size_t size() const { return mass.size(); }
    double entry(size_t i, size_t j) const { return matrix[i * size() + j]; }
};

inline std::vector<double> uniform_bins(size_t n) {
    std::vector<double> edges(n + 1);
    for (size_t i = 0; i <= n; ++i)
        edges[i] = static_cast<double>(i) / static_cast<double>(n);
    return edges;
}

// Boundary points of all nonempty depth-d cylinders.
inline std::vector<double> aligned_bins(const IntervalMap& m, int depth) {
    std::vector<double> edges{0.0, 1.0};
    std::vector<Word> words;
    for (size_t c = 0; c < m.n_cells(); ++c) words.push_back({static_cast<int>(c)});
    for (int d = 1; d < depth; ++d) {
        std::vector<Word> next;
        for (const Word& w : words)
            for (size_t c = 0; c < m.n_cells(); ++c) {
                Word e = w;
                e.push_back(static_cast<int>(c));
                try {
                    cylinder_interval(m, e);
                    next.push_back(std::move(e));
                } catch (const EmptyCylinderError&) {
                }
            }
        words = std::move(next);
    }
    for (const Word& w : words) {
        Interval iv = cylinder_interval(m, w);
        edges.push_back(iv.lo);
        edges.push_back(iv.hi);
    }
    std::sort(edges.begin(), edges.end());
    std::vector<double> out;
    for (double e : edges)
        if (out.empty() || e - out.back() > 1e-13) out.push_back(e);
    out.front() = 0.0;
    out.back() = 1.0;
    return out;
}

inline UlamOperator ulam_discretize(const IntervalMap& m,
                                    std::vector<double> edges,
                                    bool require_aligned = false) {
    Partition bins = make_partition(std::move(edges));
    size_t n = bins.size();
    UlamOperator u;
    u.edges = bins.edges;
    u.mass.assign(n, 0.0);
    u.matrix.assign(n * n, 0.0);

    const double tol = 1e-12;
    bool aligned = true;
    for (double ce : m.partition.edges)
        if (!detail::is_edge(u.edges, ce, tol)) aligned = false;

    for (size_t i = 0; i < n; ++i) {
        Interval bin = bins.cell(i);
        u.bin_cell.push_back(m.partition.locate(0.5 * (bin.lo + bin.hi)));
        for (size_t c = 0; c < m.n_cells(); ++c) {
            Interval piece = bin.intersect(m.cell(c));
            if (piece.length() <= 1e-15) continue;
            if (piece.length() < bin.length() - 1e-13) u.bin_cell[i] = -1;
            u.mass[i] += piece.length() * m.invariant_density[c];

            const Branch& br = m.branches[c];
            double a = br.eval(piece.lo), b = br.eval(piece.hi);
            bool increasing = a <= b;
            Interval img = increasing ? Interval{a, b} : Interval{b, a};
            if (aligned && (!detail::is_edge(u.edges, img.lo, 1e-11) ||
                            !detail::is_edge(u.edges, img.hi, 1e-11)))
                aligned = false;
            for (size_t j = 0; j < n; ++j) {
                Interval hit = img.intersect(bins.cell(j));
                if (hit.length() <= 1e-15) continue;
                double xa = br.inverse(hit.lo, m.cell(c));
                double xb = br.inverse(hit.hi, m.cell(c));
                if (xa > xb) std::swap(xa, xb);
                u.matrix[i * n + j] += (xb - xa) * m.invariant_density[c];
            }
        }
    }
    for (size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (size_t j = 0; j < n; ++j) row += u.matrix[i * n + j];
        if (!close(row, u.mass[i], 1e-9))
            throw MeasureError("ulam row mass mismatch");
        for (size_t j = 0; j < n; ++j) u.matrix[i * n + j] /= u.mass[i];
    }
    u.aligned = aligned;
    if (require_aligned && !aligned)
        throw AlignmentError("bins are not aligned with the cylinder structure");
    return u;
}

inline Eigen::MatrixXd ulam_markov_matrix(const UlamOperator& u) {
    size_t n = u.size();
    Eigen::MatrixXd M(static_cast<long>(n), static_cast<long>(n));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
            M(static_cast<long>(i), static_cast<long>(j)) = u.entry(i, j);
    return M;
}

// ------------------------------------------------- transfer operator bases

// Exact cell-basis transfer matrix A with (Tf)_(c') = sum_c A(c',c) f_c.
inline Eigen::MatrixXd cell_transfer_matrix(const CocycleSystem& s) {
    size_t n = s.n_cells();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<long>(n),
                                              static_cast<long>(n));
    if (!s.map.markov) throw AlignmentError("cell basis needs a Markov map");
    for (size_t c = 0; c < n; ++c) {
        const Branch& br = s.map.branches[c];
        if (br.kind != BranchKind::affine)
            throw AlignmentError("cell basis needs affine branches");
        Interval img = s.map.branch_image(c);
        for (size_t d = 0; d < n; ++d) {
            if (overlap_length(img, s.map.cell(d)) <= 1e-15) continue;
            A(static_cast<long>(d), static_cast<long>(c)) =
                s.map.invariant_density[c] /
                (std::fabs(br.c1) * s.map.invariant_density[d]);
        }
    }
    return A;
}

// Twisted by the character exp(i<theta, phi> + i s r), theta in physical
// coordinates.
inline Eigen::MatrixXcd twisted_cell_matrix(const CocycleSystem& s,
                                            const std::vector<double>& theta,
                                            double roof_twist = 0.0) {
    if (theta.size() != s.group.kappa)
        throw DomainError("twist dimension mismatch");
    Eigen::MatrixXd A = cell_transfer_matrix(s);
    size_t n = s.n_cells();
    Eigen::MatrixXcd T(static_cast<long>(n), static_cast<long>(n));
    for (size_t c = 0; c < n; ++c) {
        double ph = roof_twist * s.roof[c];
        for (size_t k = 0; k < s.group.kappa; ++k) ph += theta[k] * s.phi[c][k];
        std::complex<double> w = std::polar(1.0, ph);
        for (size_t d = 0; d < n; ++d)
            T(static_cast<long>(d), static_cast<long>(c)) =
                A(static_cast<long>(d), static_cast<long>(c)) * w;
    }
    return T;
}

// Same twist on the Ulam basis; every bin must sit inside one map cell.
inline Eigen::MatrixXcd twisted_ulam_matrix(const UlamOperator& u,
                                            const CocycleSystem& s,
                                            const std::vector<double>& theta,
                                            double roof_twist = 0.0) {
    if (theta.size() != s.group.kappa)
        throw DomainError("twist dimension mismatch");
    size_t n = u.size();
    Eigen::MatrixXcd T(static_cast<long>(n), static_cast<long>(n));
    for (size_t i = 0; i < n; ++i) {
        if (u.bin_cell[i] < 0)
            throw AlignmentError("a bin spans several map cells");
        size_t c = static_cast<size_t>(u.bin_cell[i]);
        double ph = roof_twist * s.roof[c];
        for (size_t k = 0; k < s.group.kappa; ++k) ph += theta[k] * s.phi[c][k];
        std::complex<double> w = std::polar(1.0, ph);
        for (size_t j = 0; j < n; ++j)
            T(static_cast<long>(j), static_cast<long>(i)) =
                u.entry(i, j) * u.mass[i] / u.mass[j] * w;
    }
    return T;
}

// --------------------------------------------------------------- dominant

struct EigResult {
    std::complex<double> lambda{0.0, 0.0};
    Eigen::VectorXcd vec;
    bool converged = false;
    size_t iters = 0;
    double residual = 0.0;
};

// Power iteration normalized at the largest component. Stops when both the
// vector and the eigenvalue settle to tol; reports honest failure otherwise
// (equal-modulus pairs, rotation at the boundary of aperiodicity).
inline EigResult dominant_eig(const Eigen::MatrixXcd& A, double tol = 1e-12,
                              size_t max_iter = 100000) {
    long n = A.rows();
    EigResult out;
    Eigen::VectorXcd v = Eigen::VectorXcd::Constant(n, 1.0);
    std::complex<double> lam_prev{0.0, 0.0};
    for (size_t it = 1; it <= max_iter; ++it) {
        Eigen::VectorXcd w = A * v;
        long piv = 0;
        double best = 0.0;
        for (long i = 0; i < n; ++i)
            if (std::abs(w[i]) > best) {
                best = std::abs(w[i]);
                piv = i;
            }
        if (best < 1e-280) {  // annihilated: dominant eigenvalue is zero
            out.lambda = {0.0, 0.0};
            out.vec = Eigen::VectorXcd::Zero(n);
            out.converged = true;
            out.iters = it;
            return out;
        }
        std::complex<double> lam = w[piv] / v[piv];
        Eigen::VectorXcd vn = w / w[piv];
        double dv = (vn - v).lpNorm<Eigen::Infinity>();
        v = vn;
        out.iters = it;
        if (dv < tol && std::abs(lam - lam_prev) < tol * (1.0 + std::abs(lam))) {
            out.lambda = lam;
            out.vec = v;
            out.converged = true;
            out.residual = (A * v - lam * v).lpNorm<Eigen::Infinity>();
            return out;
        }
        lam_prev = lam;
    }
    out.lambda = lam_prev;
    out.vec = v;
    out.converged = false;
    out.residual = (A * v - lam_prev * v).lpNorm<Eigen::Infinity>();
    return out;
}

inline double spectral_radius_exact(const Eigen::MatrixXcd& A) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A, false);
    double r = 0.0;
    for (long i = 0; i < A.rows(); ++i)
        r = std::max(r, std::abs(es.eigenvalues()[i]));
    return r;
}

// ------------------------------------------------------------ spectral gap

struct SpectralGap {
    double lambda2 = 0.0;  // second eigenvalue modulus
    double gap = 0.0;      // 1 - lambda2
    bool mixing = false;
    bool exact = false;    // full spectrum vs iterative estimate
};

inline SpectralGap spectral_gap(const UlamOperator& u) {
    size_t n = u.size();
    SpectralGap out;
    {
        // annihilation fast path: aligned discretizations of full branch
        // stacks are nilpotent off the constants, which a dense eigensolver
        // cannot certify (defective zeros are conditioned like eps^(1/k))
        Eigen::MatrixXd M = ulam_markov_matrix(u);
        Eigen::VectorXd w(static_cast<long>(n));
        for (size_t i = 0; i < n; ++i)
            w[static_cast<long>(i)] = std::cos(0.7 + 2.3 * static_cast<double>(i));
        w.array() -= w.mean();
        w /= w.norm();
        for (size_t k = 0; k < std::min<size_t>(n + 4, 80); ++k) {
            Eigen::VectorXd wn = M.transpose() * w;
            wn.array() -= wn.mean();
            double nn = wn.norm();
            if (nn < 1e-12) {
                out.lambda2 = 0.0;
                out.gap = 1.0;
                out.mixing = true;
                out.exact = true;
                return out;
            }
            w = wn / nn;
        }
    }
    if (n <= 600) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(ulam_markov_matrix(u), false);
        std::vector<double> mods;
        for (long i = 0; i < static_cast<long>(n); ++i)
            mods.push_back(std::abs(es.eigenvalues()[i]));
        std::sort(mods.rbegin(), mods.rend());
        out.lambda2 = n > 1 ? mods[1] : 0.0;
        out.exact = true;
    } else {
        // mass vectors evolve by the transpose; total mass is conserved, so
        // deflate it and measure the growth rate of the remainder over an
        // even window (a real matrix can carry a complex pair on the second
        // circle, which makes single-step ratios oscillate)
        Eigen::MatrixXd M = ulam_markov_matrix(u);
        Eigen::VectorXd w(static_cast<long>(n));
        for (size_t i = 0; i < n; ++i)
            w[static_cast<long>(i)] =
                std::sin(1.0 + 3.7 * static_cast<double>(i));
        w.array() -= w.mean();
        w /= w.norm();
        double rate = 0.0;
        for (int burn = 0; burn < 3; ++burn) {
            double log_acc = 0.0;
            const int window = 64;
            for (int k = 0; k < window; ++k) {
                Eigen::VectorXd wn = M.transpose() * w;
                wn.array() -= wn.mean();
                double nn = wn.norm();
                if (nn < 1e-280) {
                    out.lambda2 = 0.0;
                    out.gap = 1.0;
                    out.mixing = true;
                    return out;
                }
                log_acc += std::log(nn);
                w = wn / nn;
            }
            rate = std::exp(log_acc / window);
        }
        out.lambda2 = rate;
    }
    out.gap = 1.0 - out.lambda2;
    out.mixing = out.lambda2 < 1.0 - 1e-9;
    return out;
}

// --------------------------------------------------------- curvature fits

struct NagaevFit {
    double a = 0.0;  // -log|lambda(t e)| ~ a t^2 + quartic t^4 + sextic t^6
    double quartic = 0.0;
    double sextic = 0.0;
    double max_residual = 0.0;
};

inline NagaevFit nagaev_curvature(const CocycleSystem& s,
                                  const std::vector<double>& dir,
                                  double radius = 0.2, int npts = 12) {
    std::vector<double> ts, ys;
    for (int i = 1; i <= npts; ++i) {
        double t = radius * static_cast<double>(i) / npts;
        std::vector<double> theta(dir.size());
        for (size_t k = 0; k < dir.size(); ++k) theta[k] = t * dir[k];
        EigResult e = dominant_eig(twisted_cell_matrix(s, theta));
        if (!e.converged || std::abs(e.lambda) <= 0.0)
            throw MeasureError("curvature fit: eigenvalue did not converge");
        ts.push_back(t);
        ys.push_back(-std::log(std::abs(e.lambda)));
    }
    // least squares in powers t^2, t^4, t^6; the sextic term absorbs enough
    // of the tail that the curvature is clean to ~radius^6
    Eigen::Matrix3d G = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    for (size_t i = 0; i < ts.size(); ++i) {
        double t2 = ts[i] * ts[i];
        Eigen::Vector3d row(t2, t2 * t2, t2 * t2 * t2);
        G += row * row.transpose();
        rhs += row * ys[i];
    }
    Eigen::Vector3d sol = G.ldlt().solve(rhs);
    NagaevFit fit;
    fit.a = sol[0];
    fit.quartic = sol[1];
    fit.sextic = sol[2];
    for (size_t i = 0; i < ts.size(); ++i) {
        double t2 = ts[i] * ts[i];
        fit.max_residual = std::max(
            fit.max_residual, std::fabs(ys[i] - fit.a * t2 - fit.quartic * t2 * t2 -
                                        fit.sextic * t2 * t2 * t2));
    }
    return fit;
}

// Quadratic form gamma with -log|lambda(t)| ~ t^T gamma t for kappa = 2.
// Along the unit diagonal e = (1,1)/sqrt(2) the fitted curvature equals
// (g11 + g22 + 2 g12) / 2, which pins the off-diagonal entry.
inline Eigen::Matrix2d nagaev_gamma2(const CocycleSystem& s,
                                     double radius = 0.2, int npts = 12) {
    if (s.group.kappa != 2) throw DomainError("planar curvature needs kappa 2");
    double a11 = nagaev_curvature(s, {1.0, 0.0}, radius, npts).a;
    double a22 = nagaev_curvature(s, {0.0, 1.0}, radius, npts).a;
    double amix = nagaev_curvature(s, {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)},
                                   radius, npts)
                      .a;
    Eigen::Matrix2d g;
    g(0, 0) = a11;
    g(1, 1) = a22;
    g(0, 1) = g(1, 0) = amix - 0.5 * (a11 + a22);
    return g;
}

// Asymptotic scale of orbit sums along the first axis: b(n) = sigma sqrt(n)
// with sigma^2 twice the curvature.
inline double green_kubo_sigma(const CocycleSystem& s) {
    std::vector<double> e1(s.group.kappa, 0.0);
    e1[0] = 1.0;
    return std::sqrt(2.0 * nagaev_curvature(s, e1).a);
}

// --------------------------------------------------- exact lattice oracles

namespace detail {

inline size_t odd_at_least(double x) {
    size_t q = static_cast<size_t>(std::ceil(x));
    return q % 2 == 0 ? q + 1 : q;
}

inline long max_abs_unit(const CocycleSystem& s, size_t axis) {
    long b = 0;
    for (const std::vector<long>& u : s.phi_units)
        b = std::max(b, std::labs(u[axis]));
    return b;
}

}  // namespace detail

// P(sum of phi over n steps = k), in lattice units, exact: the character
// sum over Q equally spaced angles inverts a trigonometric polynomial whose
// degree is below Q.
inline double lattice_llt_oracle(const CocycleSystem& s, size_t n,
                                 const std::vector<long>& k) {
    if (!s.group.lattice) throw DomainError("lattice oracle needs a lattice group");
    if (k.size() != s.group.kappa) throw DomainError("oracle index dimension");
    size_t kappa = s.group.kappa;
    if (kappa > 2) throw DomainError("oracle implemented for kappa <= 2");

    std::vector<size_t> Q(kappa);
    for (size_t ax = 0; ax < kappa; ++ax) {
        long B = detail::max_abs_unit(s, ax);
        Q[ax] = detail::odd_at_least(
            std::max(2.0 * static_cast<double>(n) * static_cast<double>(B) + 1.0,
                     4.0 * static_cast<double>(n) + 1.0));
    }

    size_t cells = s.n_cells();
    Eigen::VectorXd mass(static_cast<long>(cells));
    for (size_t c = 0; c < cells; ++c) mass[static_cast<long>(c)] = s.cell_mass[c];

    std::complex<double> acc{0.0, 0.0};
    auto eval_char = [&](const std::vector<double>& tau) {
        // tau in unit angles; physical twist theta = tau / spacing
        std::vector<double> theta(kappa);
        for (size_t ax = 0; ax < kappa; ++ax) theta[ax] = tau[ax] / s.group.spacing;
        Eigen::MatrixXcd P = twisted_cell_matrix(s, theta);
        Eigen::VectorXcd v = Eigen::VectorXcd::Constant(static_cast<long>(cells), 1.0);
        for (size_t i = 0; i < n; ++i) v = P * v;
        std::complex<double> e{0.0, 0.0};
        for (size_t c = 0; c < cells; ++c) e += mass[static_cast<long>(c)] * v[static_cast<long>(c)];
        return e;
    };

    if (kappa == 1) {
        size_t Q0 = Q[0];
        for (size_t j = 0; j < Q0; ++j) {
            double tau = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(Q0);
            acc += eval_char({tau}) * std::polar(1.0, -tau * static_cast<double>(k[0]));
        }
        acc /= static_cast<double>(Q0);
    } else {
        for (size_t j0 = 0; j0 < Q[0]; ++j0)
            for (size_t j1 = 0; j1 < Q[1]; ++j1) {
                double t0 = 2.0 * kPi * static_cast<double>(j0) / static_cast<double>(Q[0]);
                double t1 = 2.0 * kPi * static_cast<double>(j1) / static_cast<double>(Q[1]);
                acc += eval_char({t0, t1}) *
                       std::polar(1.0, -t0 * static_cast<double>(k[0]) -
                                           t1 * static_cast<double>(k[1]));
            }
        acc /= static_cast<double>(Q[0] * Q[1]);
    }
    if (std::fabs(acc.imag()) > 1e-11)
        throw QuadratureError("oracle inversion left an imaginary residue");
    return std::max(0.0, acc.real());
}

// Per arrival cell: conditional mass of {n-step phi sum = k} given that the
// orbit arrives in that cell (kappa = 1).
inline std::vector<double> conditional_lattice_profile(const CocycleSystem& s,
                                                       size_t n, long k) {
    if (!s.group.lattice || s.group.kappa != 1)
        throw DomainError("conditional profile needs a one-dimensional lattice");
    long B = detail::max_abs_unit(s, 0);
    size_t Q = detail::odd_at_least(
        std::max(2.0 * static_cast<double>(n) * static_cast<double>(B) + 1.0,
                 4.0 * static_cast<double>(n) + 1.0));
    size_t cells = s.n_cells();
    std::vector<std::complex<double>> acc(cells, {0.0, 0.0});
    for (size_t j = 0; j < Q; ++j) {
        double tau = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(Q);
        Eigen::MatrixXcd P = twisted_cell_matrix(s, {tau / s.group.spacing});
        Eigen::VectorXcd v = Eigen::VectorXcd::Constant(static_cast<long>(cells), 1.0);
        for (size_t i = 0; i < n; ++i) v = P * v;
        std::complex<double> ph = std::polar(1.0, -tau * static_cast<double>(k));
        for (size_t c = 0; c < cells; ++c) acc[c] += ph * v[static_cast<long>(c)];
    }
    std::vector<double> out(cells);
    for (size_t c = 0; c < cells; ++c) {
        std::complex<double> v = acc[c] / static_cast<double>(Q);
        if (std::fabs(v.imag()) > 1e-11)
            throw QuadratureError("profile inversion left an imaginary residue");
        out[c] = std::max(0.0, v.real());
    }
    return out;
}

// Joint exact values over an n range: for each n in [n_lo, n_hi],
// P(start cell in A, n-step phi sum = k, n-step roof sum in the rho window,
// arrival cell in B). Units throughout; needs an integer roof.
inline std::vector<double> joint_lattice_window(
    const CocycleSystem& s, const std::vector<std::uint8_t>& maskA,
    const std::vector<std::uint8_t>& maskB, long k, long rho_lo, long rho_hi,
    size_t n_lo, size_t n_hi) {
    if (!s.group.lattice || s.group.kappa != 1)
        throw DomainError("joint window needs a one-dimensional lattice");
    if (!s.integer_roof) throw DomainError("joint window needs an integer roof");
    if (rho_hi < rho_lo || n_hi < n_lo || n_lo == 0)
        throw DomainError("bad joint window");
    size_t cells = s.n_cells();
    if (maskA.size() != cells || maskB.size() != cells)
        throw DomainError("mask size mismatch");

    long Bphi = detail::max_abs_unit(s, 0);
    size_t Qt = detail::odd_at_least(std::max(
        2.0 * static_cast<double>(n_hi) * static_cast<double>(Bphi) + 1.0,
        4.0 * static_cast<double>(n_hi) + 1.0));
    long rmin = *std::min_element(s.roof_units.begin(), s.roof_units.end());
    long rmax = *std::max_element(s.roof_units.begin(), s.roof_units.end());
    size_t Qs = detail::odd_at_least(
        static_cast<double>(n_hi * static_cast<size_t>(rmax - rmin) +
                            static_cast<size_t>(rho_hi - rho_lo) + 3));

    std::vector<std::complex<double>> acc(n_hi - n_lo + 1, {0.0, 0.0});
    Eigen::VectorXcd start(static_cast<long>(cells));
    for (size_t c = 0; c < cells; ++c) start[static_cast<long>(c)] = maskA[c] ? 1.0 : 0.0;

    for (size_t jt = 0; jt < Qt; ++jt) {
        double tau = 2.0 * kPi * static_cast<double>(jt) / static_cast<double>(Qt);
        for (size_t js = 0; js < Qs; ++js) {
            double sig = 2.0 * kPi * static_cast<double>(js) / static_cast<double>(Qs);
            // window factor: sum over rho in [rho_lo, rho_hi] of e^{-i sig rho};
            // Qs exceeds the spread of (roof sum - rho), so no aliasing
            Eigen::MatrixXcd P = twisted_cell_matrix(s, {tau / s.group.spacing}, sig);
            Eigen::VectorXcd v = start;
            std::complex<double> win{0.0, 0.0};
            for (long rho = rho_lo; rho <= rho_hi; ++rho)
                win += std::polar(1.0, -sig * static_cast<double>(rho));
            std::complex<double> pht = std::polar(1.0, -tau * static_cast<double>(k));
            for (size_t i = 1; i <= n_hi; ++i) {
                v = P * v;
                if (i < n_lo) continue;
                std::complex<double> pair{0.0, 0.0};
                for (size_t c = 0; c < cells; ++c)
                    if (maskB[c]) pair += s.cell_mass[c] * v[static_cast<long>(c)];
                acc[i - n_lo] += pair * win * pht;
            }
        }
    }
    std::vector<double> out(acc.size());
    double norm = static_cast<double>(Qt) * static_cast<double>(Qs);
    for (size_t i = 0; i < acc.size(); ++i) {
        std::complex<double> v = acc[i] / norm;
        if (std::fabs(v.imag()) > 1e-10)
            throw QuadratureError("joint inversion left an imaginary residue");
        out[i] = std::max(0.0, v.real());
    }
    return out;
}

// Conditional version of the joint oracle: entry [n - n_lo][c] is the mass
// of {phi sum = k, roof sum = rho} among n-step histories arriving in cell c,
// relative to all n-step histories arriving there.
inline std::vector<std::vector<double>> conditional_joint_profile(
    const CocycleSystem& s, size_t n_lo, size_t n_hi, long k, long rho) {
    if (!s.group.lattice || s.group.kappa != 1)
        throw DomainError("joint profile needs a one-dimensional lattice");
    if (!s.integer_roof) throw DomainError("joint profile needs an integer roof");
    size_t cells = s.n_cells();
    long Bphi = detail::max_abs_unit(s, 0);
    size_t Qt = detail::odd_at_least(std::max(
        2.0 * static_cast<double>(n_hi) * static_cast<double>(Bphi) + 1.0,
        4.0 * static_cast<double>(n_hi) + 1.0));
    long rmin = *std::min_element(s.roof_units.begin(), s.roof_units.end());
    long rmax = *std::max_element(s.roof_units.begin(), s.roof_units.end());
    size_t Qs = detail::odd_at_least(
        static_cast<double>(n_hi * static_cast<size_t>(rmax - rmin) + 3));

    std::vector<std::vector<std::complex<double>>> acc(
        n_hi - n_lo + 1, std::vector<std::complex<double>>(cells, {0.0, 0.0}));
    for (size_t jt = 0; jt < Qt; ++jt) {
        double tau = 2.0 * kPi * static_cast<double>(jt) / static_cast<double>(Qt);
        for (size_t js = 0; js < Qs; ++js) {
            double sig = 2.0 * kPi * static_cast<double>(js) / static_cast<double>(Qs);
            Eigen::MatrixXcd P = twisted_cell_matrix(s, {tau / s.group.spacing}, sig);
            Eigen::VectorXcd v =
                Eigen::VectorXcd::Constant(static_cast<long>(cells), 1.0);
            std::complex<double> ph = std::polar(
                1.0, -tau * static_cast<double>(k) - sig * static_cast<double>(rho));
            for (size_t i = 1; i <= n_hi; ++i) {
                v = P * v;
                if (i < n_lo) continue;
                for (size_t c = 0; c < cells; ++c)
                    acc[i - n_lo][c] += ph * v[static_cast<long>(c)];
            }
        }
    }
    std::vector<std::vector<double>> out(acc.size(),
                                         std::vector<double>(cells, 0.0));
    double norm = static_cast<double>(Qt) * static_cast<double>(Qs);
    for (size_t i = 0; i < acc.size(); ++i)
        for (size_t c = 0; c < cells; ++c) {
            std::complex<double> v = acc[i][c] / norm;
            if (std::fabs(v.imag()) > 1e-10)
                throw QuadratureError("profile inversion left an imaginary residue");
            out[i][c] = std::max(0.0, v.real());
        }
    return out;
}

// ------------------------------------------------------------- aperiodicity

struct AperiodicityReport {
    double max_offzero = 0.0;     // largest spectral radius away from 0
    std::vector<double> worst_tau;  // unit angles achieving it
    bool include_roof = false;
};

// Scan the dual torus of the unit lattice (and optionally a roof character)
// for twisted operators whose spectral radius returns to 1; those are the
// obstructions to joint aperiodicity.
inline AperiodicityReport aperiodicity_check(const CocycleSystem& s,
                                             int grid = 33,
                                             bool include_roof = false) {
    if (!s.group.lattice) throw DomainError("aperiodicity scan needs a lattice");
    if (include_roof && !s.integer_roof)
        throw DomainError("roof characters need an integer roof");
    if (grid < 3 || grid % 2 == 0) throw DomainError("grid must be odd and >= 3");
    size_t kappa = s.group.kappa;
    size_t dims = kappa + (include_roof ? 1 : 0);
    if (dims > 3) throw DomainError("aperiodicity scan supports <= 3 characters");

    AperiodicityReport rep;
    rep.include_roof = include_roof;
    rep.worst_tau.assign(dims, 0.0);
    std::vector<int> idx(dims, 0);
    while (true) {
        bool all_zero = true;
        std::vector<double> tau(dims);
        for (size_t d = 0; d < dims; ++d) {
            tau[d] = -kPi + 2.0 * kPi * idx[d] / (grid - 1);
            if (idx[d] != (grid - 1) / 2) all_zero = false;
        }
        if (!all_zero) {
            std::vector<double> theta(kappa);
            for (size_t k = 0; k < kappa; ++k) theta[k] = tau[k] / s.group.spacing;
            double roof_twist = include_roof ? tau[kappa] : 0.0;
            double r = spectral_radius_exact(
                twisted_cell_matrix(s, theta, roof_twist));
            if (r > rep.max_offzero) {
                rep.max_offzero = r;
                rep.worst_tau = tau;
            }
        }
        size_t d = 0;
        while (d < dims && ++idx[d] == grid) idx[d++] = 0;
        if (d == dims) break;
    }
    return rep;
}

}  // namespace sfl
