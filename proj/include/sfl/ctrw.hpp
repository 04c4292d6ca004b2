#pragma once
// Continuous-time random walk on an integer lattice: Poisson(lambda t) many
// iid jumps. Carries an exact finite oracle for P(S(t)=k), a plain sampler,
// a renewal-flow sampler started from the stationary measure (size-biased
// first gap, uniform phase), and the scaled local-limit comparison.

#include <array>
#include <cmath>
#include <map>
#include <random>
#include <thread>

#include "sfl/common.hpp"
#include "sfl/stable.hpp"

namespace sfl {

struct JumpAtom {
    std::vector<long> step;
    double p = 0.0;
};

struct CTRWModel {
    double intensity = 1.0;  // jump rate; waiting times are Exp(intensity)
    size_t kappa = 1;
    std::vector<JumpAtom> jumps;
    bool has_target = false;  // declared scaling limit
    StableLaw law;
    double sigma_b = 1.0;  // b(t) = sigma_b * t^(1/p)
};

inline CTRWModel make_ctrw(double intensity, size_t kappa,
                           std::vector<JumpAtom> jumps) {
    if (!(intensity > 0.0)) throw ConfigError("jump rate must be positive");
    if (kappa == 0) throw ConfigError("lattice dimension must be positive");
    if (jumps.empty()) throw ConfigError("empty jump law");
    double mass = 0.0;
    for (const JumpAtom& a : jumps) {
        if (a.step.size() != kappa) throw ConfigError("jump dimension mismatch");
        if (!(a.p > 0.0)) throw ConfigError("jump weights must be positive");
        mass += a.p;
    }
    if (std::fabs(mass - 1.0) > 1e-12)
        throw ConfigError("jump law must be normalized");
    CTRWModel m;
    m.intensity = intensity;
    m.kappa = kappa;
    m.jumps = std::move(jumps);
    return m;
}

// +-1 with equal weight; scaling limit is standard normal with b(t) = sqrt(t)
inline CTRWModel simple_walk_ctrw(double intensity = 1.0) {
    CTRWModel m = make_ctrw(intensity, 1, {{{+1}, 0.5}, {{-1}, 0.5}});
    m.has_target = true;
    m.law = gaussian_law_1d(0.5);
    m.sigma_b = 1.0;
    return m;
}

namespace detail {

using LatticeMeasure = std::map<std::vector<long>, double>;

inline LatticeMeasure jump_measure(const CTRWModel& m) {
    LatticeMeasure f;
    for (const JumpAtom& a : m.jumps) f[a.step] += a.p;
    return f;
}

inline LatticeMeasure convolve(const LatticeMeasure& a, const LatticeMeasure& b) {
    LatticeMeasure out;
    std::vector<long> k;
    for (const auto& [ka, va] : a)
        for (const auto& [kb, vb] : b) {
            k = ka;
            for (size_t j = 0; j < k.size(); ++j) k[j] += kb[j];
            out[k] += va * vb;
        }
    return out;
}

inline LatticeMeasure conv_power(const LatticeMeasure& f, size_t n,
                                 size_t kappa) {
    LatticeMeasure out;
    out[std::vector<long>(kappa, 0)] = 1.0;
    for (size_t i = 0; i < n; ++i) out = convolve(out, f);
    return out;
}

inline double poisson_weight(double mu, size_t n) {
    if (n == 0) return std::exp(-mu);
    return std::exp(static_cast<double>(n) * std::log(mu) - mu -
                    std::lgamma(static_cast<double>(n) + 1.0));
}

}  // namespace detail

struct CTRWDist {
    size_t kappa = 1;
    std::map<std::vector<long>, double> prob;
    double tail_bound = 0.0;  // Poisson mass beyond the truncation
    size_t n_terms = 0;
    double at(const std::vector<long>& k) const {
        auto it = prob.find(k);
        return it == prob.end() ? 0.0 : it->second;
    }
    double total() const {
        double acc = 0.0;
        for (const auto& kv : prob) acc += kv.second;
        return acc;
    }
};

inline CTRWDist exact_distribution(const CTRWModel& m, double t,
                                   double truncation_sigmas = 12.0) {
    if (t < 0.0) throw DomainError("negative time");
    if (!(truncation_sigmas > 0.0)) throw DomainError("bad truncation width");
    CTRWDist d;
    d.kappa = m.kappa;
    std::vector<long> zero(m.kappa, 0);
    double mu = m.intensity * t;
    if (mu == 0.0) {
        d.prob[zero] = 1.0;
        d.n_terms = 1;
        return d;
    }
    size_t nmax = static_cast<size_t>(
        std::ceil(mu + truncation_sigmas * std::sqrt(mu)));
    nmax = std::max<size_t>(nmax, 15);
    detail::LatticeMeasure f = detail::jump_measure(m);
    detail::LatticeMeasure cur;
    cur[zero] = 1.0;
    d.prob[zero] = detail::poisson_weight(mu, 0);
    for (size_t n = 1; n <= nmax; ++n) {
        cur = detail::convolve(cur, f);
        double w = detail::poisson_weight(mu, n);
        if (w > 0.0)
            for (const auto& kv : cur) d.prob[kv.first] += w * kv.second;
    }
    // the weight ratio past nmax is at most q, so the tail is geometric
    double q = mu / static_cast<double>(nmax + 1);
    d.tail_bound = detail::poisson_weight(mu, nmax) * q / (1.0 - q);
    d.n_terms = nmax + 1;
    return d;
}

inline double exact_dist(const CTRWModel& m, double t,
                         const std::vector<long>& k,
                         double truncation_sigmas = 12.0) {
    if (k.size() != m.kappa) throw DomainError("lattice point dimension mismatch");
    CTRWDist d = exact_distribution(m, t, truncation_sigmas);
    double v = d.at(k);
    if (d.tail_bound > 0.0 && v < d.tail_bound)
        throw QuadratureError("truncation bound dominates the requested value");
    return v;
}

inline std::vector<long> sample_ctrw(const CTRWModel& m, double t,
                                     std::mt19937_64& rng) {
    if (t < 0.0) throw DomainError("negative time");
    std::vector<long> s(m.kappa, 0);
    double mu = m.intensity * t;
    if (mu == 0.0) return s;
    std::poisson_distribution<long> pois(mu);
    std::vector<double> w(m.jumps.size());
    for (size_t i = 0; i < w.size(); ++i) w[i] = m.jumps[i].p;
    std::discrete_distribution<size_t> pick(w.begin(), w.end());
    long n = pois(rng);
    for (long i = 0; i < n; ++i) {
        const JumpAtom& a = m.jumps[pick(rng)];
        for (size_t j = 0; j < m.kappa; ++j) s[j] += a.step[j];
    }
    return s;
}

struct CTRWLLTReport {
    double t = 0.0;
    double scale = 0.0;  // b(lambda t)
    std::vector<double> z;
    double value = 0.0;   // b^kappa * P(S(t) in drift + window)
    double target = 0.0;  // |window| * limiting density at z
    double rel_error = 0.0;
    double tail_bound = 0.0;
};

inline CTRWLLTReport ctrw_llt_check(
    const CTRWModel& m, double t, const std::vector<long>& drift,
    const std::vector<std::vector<long>>& window,
    double truncation_sigmas = 12.0) {
    if (!m.has_target) throw ConfigError("no scaling limit declared");
    if (drift.size() != m.kappa) throw DomainError("drift dimension mismatch");
    if (window.empty()) throw DomainError("empty window");
    CTRWDist d = exact_distribution(m, t, truncation_sigmas);
    double b = m.sigma_b * std::pow(m.intensity * t, 1.0 / m.law.p);

    double mass = 0.0;
    std::vector<long> k(m.kappa);
    for (const auto& u : window) {
        if (u.size() != m.kappa) throw DomainError("window dimension mismatch");
        for (size_t j = 0; j < m.kappa; ++j) k[j] = drift[j] + u[j];
        mass += d.at(k);
    }
    CTRWLLTReport rep;
    rep.t = t;
    rep.scale = b;
    rep.z.assign(m.kappa, 0.0);
    for (size_t j = 0; j < m.kappa; ++j)
        rep.z[j] = static_cast<double>(drift[j]) / b;
    rep.value = std::pow(b, static_cast<double>(m.kappa)) * mass;
    rep.target = static_cast<double>(window.size()) * stable_density(m.law, rep.z);
    rep.rel_error = std::fabs(rep.value - rep.target) / std::fabs(rep.target);
    rep.tail_bound = d.tail_bound;
    return rep;
}

// One walk started from the stationary renewal state: the gap straddling
// time zero is size biased (sum of two exponentials) and the phase inside
// it is uniform; by memorylessness the law at time t matches the model.
inline std::vector<long> sample_realized_walk(const CTRWModel& m, double t,
                                              std::mt19937_64& rng,
                                              size_t* jumps_out = nullptr) {
    if (t < 0.0) throw DomainError("negative time");
    std::exponential_distribution<double> gap(m.intensity);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> w(m.jumps.size());
    for (size_t i = 0; i < w.size(); ++i) w[i] = m.jumps[i].p;
    std::discrete_distribution<size_t> pick(w.begin(), w.end());

    double first = gap(rng) + gap(rng);
    double clock = first - uni(rng) * first;  // residual until the next jump
    std::vector<long> s(m.kappa, 0);
    size_t njumps = 0;
    while (clock <= t) {
        const JumpAtom& a = m.jumps[pick(rng)];
        for (size_t j = 0; j < m.kappa; ++j) s[j] += a.step[j];
        ++njumps;
        clock += gap(rng);
    }
    if (jumps_out) *jumps_out = njumps;
    return s;
}

struct RealizationReport {
    double t = 0.0;
    size_t nsamples = 0;
    double tv = 0.0;                // empirical law vs exact oracle
    double one_jump_worst_z = 0.0;  // standardized error of P(S=k, one jump)
    double exact_tail = 0.0;
};

inline RealizationReport build_suspension_realization(const CTRWModel& m,
                                                      double t,
                                                      size_t nsamples,
                                                      std::uint64_t seed,
                                                      size_t workers = 1) {
    if (nsamples == 0 || workers == 0) throw DomainError("empty sample plan");
    CTRWDist d = exact_distribution(m, t);

    using Hist = std::map<std::vector<long>, std::array<double, 2>>;
    std::vector<Hist> hists(workers);
    std::vector<size_t> quota(workers, nsamples / workers);
    for (size_t w = 0; w < nsamples % workers; ++w) ++quota[w];

    auto run = [&](size_t w) {
        std::mt19937_64 rng = worker_rng(seed, static_cast<std::uint64_t>(w));
        size_t nj = 0;
        for (size_t i = 0; i < quota[w]; ++i) {
            std::vector<long> s = sample_realized_walk(m, t, rng, &nj);
            auto& cell = hists[w][s];
            cell[0] += 1.0;
            if (nj == 1) cell[1] += 1.0;
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& th : pool) th.join();
    }
    Hist emp;
    for (const Hist& h : hists)
        for (const auto& [k, v] : h) {
            auto& cell = emp[k];
            cell[0] += v[0];
            cell[1] += v[1];
        }

    RealizationReport rep;
    rep.t = t;
    rep.nsamples = nsamples;
    rep.exact_tail = d.tail_bound;
    double n = static_cast<double>(nsamples);
    double tv = 0.0;
    for (const auto& [k, v] : emp) tv += std::fabs(v[0] / n - d.at(k));
    for (const auto& [k, p] : d.prob)
        if (emp.find(k) == emp.end()) tv += p;
    rep.tv = 0.5 * (tv + d.tail_bound);

    // exactly one jump lands on k with probability e^(-mu) mu f(k)
    double mu = m.intensity * t;
    for (const auto& [k, p] : detail::jump_measure(m)) {
        double exact1 = std::exp(-mu) * mu * p;
        auto it = emp.find(k);
        double emp1 = (it == emp.end() ? 0.0 : it->second[1]) / n;
        double se = std::sqrt(std::max(exact1 * (1.0 - exact1) / n, 1e-300));
        double z = exact1 == 0.0 ? (emp1 > 0.0 ? 1e9 : 0.0)
                                 : std::fabs(emp1 - exact1) / se;
        rep.one_jump_worst_z = std::max(rep.one_jump_worst_z, z);
    }
    return rep;
}

}  // namespace sfl
