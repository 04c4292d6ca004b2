#pragma once
// Symmetric multivariate stable laws given by a finite spectral measure:
// E exp(i<y,X>) = exp(-c(y)) with c(y) = sum_i w_i |<y,s_i>|^p.
// Densities come from direct Fourier inversion on a box whose boundary
// carries negligible characteristic mass, with step halving until two
// successive trapezoid values agree.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "sfl/common.hpp"

namespace sfl {

struct SpectralAtom {
    std::vector<double> direction;  // unit vector
    double weight = 0.0;
};

struct StableLaw {
    double p = 2.0;  // index in (0, 2]
    size_t kappa = 1;
    std::vector<SpectralAtom> atoms;  // full list, symmetric under negation
};

inline void validate_stable_law(const StableLaw& law) {
    if (!(law.p > 0.0) || law.p > 2.0)
        throw DomainError("stable index must lie in (0, 2]");
    if (law.kappa == 0 || law.atoms.empty())
        throw DomainError("stable law needs a dimension and atoms");
    const double tol = 1e-12;
    for (const SpectralAtom& a : law.atoms) {
        if (a.direction.size() != law.kappa)
            throw DomainError("atom direction has wrong dimension");
        if (!(a.weight > 0.0)) throw DomainError("atom weights must be positive");
        double n2 = 0.0;
        for (double d : a.direction) n2 += d * d;
        if (!close(n2, 1.0, 1e-10)) throw DomainError("atom directions must be unit");
        bool mirrored = false;
        for (const SpectralAtom& b : law.atoms) {
            bool neg = true;
            for (size_t k = 0; k < law.kappa; ++k)
                if (std::fabs(a.direction[k] + b.direction[k]) > tol) neg = false;
            if (neg && std::fabs(a.weight - b.weight) <= tol * (1.0 + a.weight))
                mirrored = true;
        }
        if (!mirrored)
            throw DomainError("spectral measure must be symmetric under negation");
    }
}

inline double c_exponent(const StableLaw& law, const double* y) {
    double c = 0.0;
    for (const SpectralAtom& a : law.atoms) {
        double s = 0.0;
        for (size_t k = 0; k < law.kappa; ++k) s += y[k] * a.direction[k];
        c += a.weight * std::pow(std::fabs(s), law.p);
    }
    return c;
}

inline double c_exponent(const StableLaw& law, const std::vector<double>& y) {
    if (y.size() != law.kappa) throw DomainError("argument dimension mismatch");
    return c_exponent(law, y.data());
}

namespace detail {

// Smallest box half-width L with c >= 27.63 everywhere on the boundary,
// so exp(-c) < 1e-12 outside the box. c is p-homogeneous, so the minimum
// over unit directions controls the whole boundary.
inline double inversion_cutoff(const StableLaw& law) {
    const double target = 27.63;
    double cmin = std::numeric_limits<double>::infinity();
    double cmax = 0.0;
    auto visit = [&](const double* y) {
        double c = c_exponent(law, y);
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
    };
    size_t kappa = law.kappa;
    if (kappa == 1) {
        double y[1] = {1.0};
        visit(y);
    } else if (kappa == 2) {
        for (int k = 0; k < 1024; ++k) {
            double th = kPi * k / 512.0;
            double y[2] = {std::cos(th), std::sin(th)};
            visit(y);
        }
    } else {
        for (int a = 1; a < 64; ++a)
            for (int b = 0; b < 128; ++b) {
                double th = kPi * a / 64.0, ph = 2.0 * kPi * b / 128.0;
                double y[3] = {std::sin(th) * std::cos(ph),
                               std::sin(th) * std::sin(ph), std::cos(th)};
                visit(y);
            }
    }
    if (!(cmin > 1e-9 * cmax))
        throw DomainError("spectral measure is not full-dimensional");
    return std::pow(target / cmin, 1.0 / law.p);
}

// Trapezoid value of (2pi)^-kappa * integral of cos(<y,z>) exp(-c(y))
// over [-L,L]^kappa with 2M+1 nodes per axis.
inline double inversion_trapezoid(const StableLaw& law,
                                  const std::vector<double>& z, double L,
                                  size_t M) {
    size_t kappa = law.kappa;
    size_t n = 2 * M + 1;
    double h = L / static_cast<double>(M);
    std::vector<double> nodes(n);
    for (size_t j = 0; j < n; ++j)
        nodes[j] = -L + h * static_cast<double>(j);

    double sum = 0.0;
    std::vector<size_t> idx(kappa, 0);
    std::vector<double> y(kappa);
    while (true) {
        double wt = 1.0;
        for (size_t k = 0; k < kappa; ++k) {
            y[k] = nodes[idx[k]];
            if (idx[k] == 0 || idx[k] == n - 1) wt *= 0.5;
        }
        double phase = 0.0;
        for (size_t k = 0; k < kappa; ++k) phase += y[k] * z[k];
        double c = c_exponent(law, y.data());
        if (c < 700.0) sum += wt * std::cos(phase) * std::exp(-c);

        size_t k = 0;
        while (k < kappa && ++idx[k] == n) idx[k++] = 0;
        if (k == kappa) break;
    }
    double scale = std::pow(h / (2.0 * kPi), static_cast<double>(kappa));
    return sum * scale;
}

}  // namespace detail

// Density of the law at z, accurate to roughly tol.
inline double stable_density(const StableLaw& law, const std::vector<double>& z,
                             double tol = 1e-10) {
    validate_stable_law(law);
    if (z.size() != law.kappa) throw DomainError("argument dimension mismatch");
    double L = detail::inversion_cutoff(law);
    const std::uint64_t node_cap = std::uint64_t{1} << 27;
    size_t M = 32;
    double prev = detail::inversion_trapezoid(law, z, L, M);
    while (true) {
        std::uint64_t nodes = 1;
        for (size_t k = 0; k < law.kappa; ++k) nodes *= 2 * (2 * M) + 1;
        if (nodes > node_cap)
            throw QuadratureError("density quadrature did not converge to " +
                                  format_double(tol));
        M *= 2;
        double cur = detail::inversion_trapezoid(law, z, L, M);
        if (std::fabs(cur - prev) < tol) return cur;
        prev = cur;
    }
}

// q > 0 with P(0 <= X <= q) = 1/4 for a one-dimensional law, from
// G(q) = (1/pi) * integral_0^inf exp(-c(y)) sin(qy)/y dy.
inline double stable_quartile(const StableLaw& law, double tol = 1e-10) {
    validate_stable_law(law);
    if (law.kappa != 1) throw DomainError("quartile is one-dimensional");
    double L = detail::inversion_cutoff(law);

    auto G = [&](double q, size_t M) {
        double h = L / static_cast<double>(M);
        double sum = 0.5 * q;  // y = 0 node, integrand -> q, weight 1/2
        for (size_t j = 1; j <= M; ++j) {
            double y = h * static_cast<double>(j);
            double c = c_exponent(law, &y);
            double wt = (j == M) ? 0.5 : 1.0;
            if (c < 700.0) sum += wt * std::exp(-c) * std::sin(q * y) / y;
        }
        return sum * h / kPi;
    };
    auto G_adaptive = [&](double q) {
        size_t M = 64;
        double prev = G(q, M);
        while (true) {
            if (M > (size_t{1} << 26))
                throw QuadratureError("quartile quadrature did not converge");
            M *= 2;
            double cur = G(q, M);
            if (std::fabs(cur - prev) < 0.1 * tol) return cur;
            prev = cur;
        }
    };

    double lo = 0.0, hi = 1.0;
    while (G_adaptive(hi) < 0.25) {
        hi *= 2.0;
        if (hi > 1e9) throw QuadratureError("quartile bracket failed");
    }
    for (int it = 0; it < 200 && hi - lo > tol * (1.0 + hi); ++it) {
        double mid = 0.5 * (lo + hi);
        (G_adaptive(mid) < 0.25 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// --------------------------------------------------------------- b(n) scale

struct ScalingSequence {
    double sigma = 1.0;
    double p = 2.0;
    double operator()(double n) const { return sigma * std::pow(n, 1.0 / p); }
};

// Fit sigma so that S_n / b(n) matches the target law, using the sample
// median of |S_n|: median(|S_n|) = sigma * n^(1/p) * quartile(law).
inline ScalingSequence calibrate_b(const StableLaw& law,
                                   std::vector<double> abs_sums, double n) {
    if (abs_sums.empty()) throw DomainError("no samples to calibrate from");
    size_t mid = abs_sums.size() / 2;
    std::nth_element(abs_sums.begin(), abs_sums.begin() + static_cast<long>(mid),
                     abs_sums.end());
    double med = abs_sums[mid];
    double q = stable_quartile(law);
    ScalingSequence b;
    b.p = law.p;
    b.sigma = med / (q * std::pow(n, 1.0 / law.p));
    return b;
}

// ------------------------------------------------------------ common laws

// One-dimensional with E exp(ixG) = exp(-a x^2); this is N(0, 2a).
inline StableLaw gaussian_law_1d(double a) {
    StableLaw law;
    law.p = 2.0;
    law.kappa = 1;
    law.atoms = {{{1.0}, 0.5 * a}, {{-1.0}, 0.5 * a}};
    return law;
}

// One-dimensional symmetric p-stable with c(y) = c1 |y|^p.
inline StableLaw symmetric_law_1d(double p, double c1) {
    StableLaw law;
    law.p = p;
    law.kappa = 1;
    law.atoms = {{{1.0}, 0.5 * c1}, {{-1.0}, 0.5 * c1}};
    return law;
}

// Independent coordinates, each with E exp(ix G) = exp(-a x^2).
inline StableLaw product_gaussian_law(size_t kappa, double a) {
    StableLaw law;
    law.p = 2.0;
    law.kappa = kappa;
    for (size_t k = 0; k < kappa; ++k) {
        std::vector<double> e(kappa, 0.0);
        e[k] = 1.0;
        law.atoms.push_back({e, 0.5 * a});
        for (double& v : e) v = -v;
        law.atoms.push_back({e, 0.5 * a});
    }
    return law;
}

}  // namespace sfl
