#pragma once
// Exact joint sweep of (roof sum, step sum) under the transfer operator,
// for one-dimensional integer lattices and integer roofs. The state after n
// steps holds, for every reachable pair (rho, k), the cell-wise constant
// function T^n(1_start * [roof sum = rho, step sum = k]); one step masks by
// the current cell, shifts both indices, and applies the transfer matrix.
// Roof sums only grow, so slices above a harvest horizon can be discarded;
// slices beyond a |k| cap can be pruned with the discarded mass tracked.

#include <limits>
#include <map>

#include "sfl/transfer.hpp"

namespace sfl {

struct CoverConfig {
    std::vector<std::uint8_t> start_mask;  // empty = whole space
    long k_cap = std::numeric_limits<long>::max();    // keep |k| <= k_cap
    long rho_cap = std::numeric_limits<long>::max();  // keep rho <= rho_cap
};

class CoverSweep {
  public:
    CoverSweep(const CocycleSystem& s, CoverConfig cfg) : sys_(&s), cfg_(cfg) {
        init_common();
        rlo_ = rhi_ = 0;
        klo_ = khi_ = 0;
        data_.assign(cells_, 0.0);
        if (cfg_.start_mask.empty()) {
            std::fill(data_.begin(), data_.end(), 1.0);
        } else {
            if (cfg_.start_mask.size() != cells_)
                throw DomainError("start mask size mismatch");
            for (size_t c = 0; c < cells_; ++c)
                data_[c] = cfg_.start_mask[c] ? 1.0 : 0.0;
        }
    }

    // resume from explicit slices (per-cell function for each (rho, k))
    CoverSweep(const CocycleSystem& s, CoverConfig cfg,
               const std::map<std::pair<long, long>, std::vector<double>>& init,
               size_t start_step)
        : sys_(&s), cfg_(cfg), n_(start_step) {
        init_common();
        if (init.empty()) throw DomainError("empty initial state");
        rlo_ = rhi_ = init.begin()->first.first;
        klo_ = khi_ = init.begin()->first.second;
        for (const auto& kv : init) {
            rlo_ = std::min(rlo_, kv.first.first);
            rhi_ = std::max(rhi_, kv.first.first);
            klo_ = std::min(klo_, kv.first.second);
            khi_ = std::max(khi_, kv.first.second);
        }
        data_.assign(slots() * cells_, 0.0);
        for (const auto& kv : init) {
            if (kv.second.size() != cells_)
                throw DomainError("initial slice size mismatch");
            double* dst = at(kv.first.first, kv.first.second);
            for (size_t c = 0; c < cells_; ++c) dst[c] = kv.second[c];
        }
    }

    size_t step_index() const { return n_; }
    long rho_lo() const { return rlo_; }
    long rho_hi() const { return rhi_; }
    long k_lo() const { return klo_; }
    long k_hi() const { return khi_; }
    double pruned_k_mass() const { return k_loss_; }
    double pruned_rho_mass() const { return rho_loss_; }

    const double* slice(long rho, long k) const {
        if (rho < rlo_ || rho > rhi_ || k < klo_ || k > khi_) return nullptr;
        return data_.data() +
               (static_cast<size_t>(rho - rlo_) * kw() +
                static_cast<size_t>(k - klo_)) *
                   cells_;
    }

    double integral(long rho, long k) const {
        const double* v = slice(rho, k);
        if (!v) return 0.0;
        double acc = 0.0;
        for (size_t c = 0; c < cells_; ++c) acc += sys_->cell_mass[c] * v[c];
        return acc;
    }

    double pair_with(const std::vector<std::uint8_t>& maskB, long rho,
                     long k) const {
        const double* v = slice(rho, k);
        if (!v) return 0.0;
        double acc = 0.0;
        for (size_t c = 0; c < cells_; ++c)
            if (maskB[c]) acc += sys_->cell_mass[c] * v[c];
        return acc;
    }

    // total mass still tracked (integral over all live slices)
    double live_mass() const {
        double acc = 0.0;
        for (long rho = rlo_; rho <= rhi_; ++rho)
            for (long k = klo_; k <= khi_; ++k) acc += integral(rho, k);
        return acc;
    }

    void advance() {
        long nrlo = rlo_ + rmin_, nrhi = rhi_ + rmax_;
        nrhi = std::min(nrhi, cfg_.rho_cap);
        long nklo = klo_ + std::min(umin_, 0L), nkhi = khi_ + std::max(umax_, 0L);
        nklo = std::max(nklo, -cfg_.k_cap);
        nkhi = std::min(nkhi, cfg_.k_cap);
        if (nrlo > nrhi) {
            // every surviving roof sum now exceeds the cap
            for (long rho = rlo_; rho <= rhi_; ++rho)
                for (long k = klo_; k <= khi_; ++k) rho_loss_ += integral(rho, k);
            data_.clear();
            rlo_ = nrlo;
            rhi_ = nrlo - 1;
            klo_ = nklo;
            khi_ = nkhi;
            ++n_;
            return;
        }
        size_t nkw = static_cast<size_t>(nkhi - nklo + 1);
        size_t nslots = static_cast<size_t>(nrhi - nrlo + 1) * nkw;
        std::vector<double> next(nslots * cells_, 0.0);

        for (long rho = rlo_; rho <= rhi_; ++rho)
            for (long k = klo_; k <= khi_; ++k) {
                const double* src = slice(rho, k);
                for (size_t c = 0; c < cells_; ++c) {
                    double v = src[c];
                    if (v == 0.0) continue;
                    long tr = rho + sys_->roof_units[c];
                    long tk = k + sys_->phi_units[c][0];
                    if (tr > nrhi) {
                        rho_loss_ += sys_->cell_mass[c] * v;
                        continue;
                    }
                    if (tk < nklo || tk > nkhi) {
                        k_loss_ += sys_->cell_mass[c] * v;
                        continue;
                    }
                    double* dst = next.data() +
                                  (static_cast<size_t>(tr - nrlo) * nkw +
                                   static_cast<size_t>(tk - nklo)) *
                                      cells_;
                    for (const auto& [d, w] : cols_[c]) dst[d] += w * v;
                }
            }
        data_ = std::move(next);
        rlo_ = nrlo;
        rhi_ = nrhi;
        klo_ = nklo;
        khi_ = nkhi;
        ++n_;
    }

  private:
    void init_common() {
        const CocycleSystem& s = *sys_;
        if (!s.group.lattice || s.group.kappa != 1)
            throw DomainError("cover sweep needs a one-dimensional lattice");
        if (!s.integer_roof) throw DomainError("cover sweep needs an integer roof");
        cells_ = s.n_cells();
        Eigen::MatrixXd A = cell_transfer_matrix(s);
        cols_.assign(cells_, {});
        for (size_t c = 0; c < cells_; ++c)
            for (size_t d = 0; d < cells_; ++d) {
                double w = A(static_cast<long>(d), static_cast<long>(c));
                if (w != 0.0) cols_[c].push_back({static_cast<int>(d), w});
            }
        rmin_ = rmax_ = s.roof_units[0];
        umin_ = umax_ = s.phi_units[0][0];
        for (size_t c = 0; c < cells_; ++c) {
            rmin_ = std::min(rmin_, s.roof_units[c]);
            rmax_ = std::max(rmax_, s.roof_units[c]);
            umin_ = std::min(umin_, s.phi_units[c][0]);
            umax_ = std::max(umax_, s.phi_units[c][0]);
        }
        if (cfg_.k_cap < 0) throw DomainError("negative k cap");
    }

    size_t kw() const { return static_cast<size_t>(khi_ - klo_ + 1); }
    size_t slots() const {
        return static_cast<size_t>(rhi_ - rlo_ + 1) * kw();
    }
    double* at(long rho, long k) {
        return data_.data() +
               (static_cast<size_t>(rho - rlo_) * kw() +
                static_cast<size_t>(k - klo_)) *
                   cells_;
    }

    const CocycleSystem* sys_;
    CoverConfig cfg_;
    size_t n_ = 0;
    size_t cells_ = 0;
    long rlo_ = 0, rhi_ = 0, klo_ = 0, khi_ = 0;
    long rmin_ = 0, rmax_ = 0, umin_ = 0, umax_ = 0;
    std::vector<double> data_;
    double k_loss_ = 0.0, rho_loss_ = 0.0;
    std::vector<std::vector<std::pair<int, double>>> cols_;
};

// Forward counterpart: tracks, for each start cell c, the probability
// P(step sum = k, roof sum = rho, arrival in the end mask | start in c)
// under the cell chain. One step prepends a symbol: the start cell's own
// (phi, roof) shifts the indices and the chain row mixes the tail.
class ForwardSweep {
  public:
    ForwardSweep(const CocycleSystem& s, CoverConfig cfg) : sys_(&s), cfg_(cfg) {
        if (!s.group.lattice || s.group.kappa != 1)
            throw DomainError("forward sweep needs a one-dimensional lattice");
        if (!s.integer_roof)
            throw DomainError("forward sweep needs an integer roof");
        if (!s.symbolic_exact)
            throw DomainError("forward sweep needs the exact cell chain");
        if (cfg_.k_cap < 0) throw DomainError("negative k cap");
        cells_ = s.n_cells();
        rmin_ = rmax_ = s.roof_units[0];
        umin_ = umax_ = s.phi_units[0][0];
        for (size_t c = 0; c < cells_; ++c) {
            rmin_ = std::min(rmin_, s.roof_units[c]);
            rmax_ = std::max(rmax_, s.roof_units[c]);
            umin_ = std::min(umin_, s.phi_units[c][0]);
            umax_ = std::max(umax_, s.phi_units[c][0]);
        }
        data_.assign(cells_, 0.0);
        if (cfg_.start_mask.empty()) {
            std::fill(data_.begin(), data_.end(), 1.0);
        } else {
            if (cfg_.start_mask.size() != cells_)
                throw DomainError("end mask size mismatch");
            for (size_t c = 0; c < cells_; ++c)
                data_[c] = cfg_.start_mask[c] ? 1.0 : 0.0;
        }
        k_loss_.assign(cells_, 0.0);
        rho_loss_.assign(cells_, 0.0);
    }

    size_t step_index() const { return n_; }
    long rho_lo() const { return rlo_; }
    long rho_hi() const { return rhi_; }
    long k_lo() const { return klo_; }
    long k_hi() const { return khi_; }

    const double* slice(long rho, long k) const {
        if (rho < rlo_ || rho > rhi_ || k < klo_ || k > khi_) return nullptr;
        return data_.data() +
               (static_cast<size_t>(rho - rlo_) * kw() +
                static_cast<size_t>(k - klo_)) *
                   cells_;
    }

    // largest per-start-cell probability dropped at the k window; roof-cap
    // overflow is benign for harvests below the cap and tracked separately
    double pruned_worst() const {
        double w = 0.0;
        for (double v : k_loss_) w = std::max(w, v);
        return w;
    }
    double overflow_worst() const {
        double w = 0.0;
        for (double v : rho_loss_) w = std::max(w, v);
        return w;
    }
    double k_loss(size_t c) const { return k_loss_[c]; }
    double rho_loss(size_t c) const { return rho_loss_[c]; }

    void advance() {
        long nrlo = rlo_ + rmin_, nrhi = std::min(rhi_ + rmax_, cfg_.rho_cap);
        long nklo = std::max(klo_ + std::min(umin_, 0L), -cfg_.k_cap);
        long nkhi = std::min(khi_ + std::max(umax_, 0L), cfg_.k_cap);
        // losses are path masses per start cell, so they mix like live mass
        std::vector<double> nkloss(cells_, 0.0), nrloss(cells_, 0.0);
        for (size_t c = 0; c < cells_; ++c) {
            const auto& row = sys_->cell_trans[c];
            for (size_t d = 0; d < cells_; ++d) {
                nkloss[c] += row[d] * k_loss_[d];
                nrloss[c] += row[d] * rho_loss_[d];
            }
        }
        if (nrlo > nrhi) {
            std::vector<double> live(cells_, 0.0);
            for (long rho = rlo_; rho <= rhi_; ++rho)
                for (long k = klo_; k <= khi_; ++k) {
                    const double* v = slice(rho, k);
                    for (size_t c = 0; c < cells_; ++c) live[c] += v[c];
                }
            for (size_t c = 0; c < cells_; ++c) {
                const auto& row = sys_->cell_trans[c];
                for (size_t d = 0; d < cells_; ++d)
                    nrloss[c] += row[d] * live[d];
            }
            k_loss_ = std::move(nkloss);
            rho_loss_ = std::move(nrloss);
            data_.clear();
            rlo_ = nrlo;
            rhi_ = nrlo - 1;
            klo_ = nklo;
            khi_ = nkhi;
            ++n_;
            return;
        }
        size_t nkw = static_cast<size_t>(nkhi - nklo + 1);
        size_t nslots = static_cast<size_t>(nrhi - nrlo + 1) * nkw;
        std::vector<double> next(nslots * cells_, 0.0);
        std::vector<double> mixed(cells_);

        for (long rho = rlo_; rho <= rhi_; ++rho)
            for (long k = klo_; k <= khi_; ++k) {
                const double* src = slice(rho, k);
                bool live = false;
                for (size_t d = 0; d < cells_; ++d)
                    if (src[d] != 0.0) {
                        live = true;
                        break;
                    }
                if (!live) continue;
                for (size_t c = 0; c < cells_; ++c) {
                    double acc = 0.0;
                    const auto& row = sys_->cell_trans[c];
                    for (size_t d = 0; d < cells_; ++d) acc += row[d] * src[d];
                    mixed[c] = acc;
                }
                for (size_t c = 0; c < cells_; ++c) {
                    if (mixed[c] == 0.0) continue;
                    long tr = rho + sys_->roof_units[c];
                    long tk = k + sys_->phi_units[c][0];
                    if (tr > nrhi) {
                        nrloss[c] += mixed[c];
                        continue;
                    }
                    if (tk < nklo || tk > nkhi) {
                        nkloss[c] += mixed[c];
                        continue;
                    }
                    next[(static_cast<size_t>(tr - nrlo) * nkw +
                          static_cast<size_t>(tk - nklo)) *
                             cells_ +
                         c] += mixed[c];
                }
            }
        data_ = std::move(next);
        k_loss_ = std::move(nkloss);
        rho_loss_ = std::move(nrloss);
        rlo_ = nrlo;
        rhi_ = nrhi;
        klo_ = nklo;
        khi_ = nkhi;
        ++n_;
    }

  private:
    size_t kw() const { return static_cast<size_t>(khi_ - klo_ + 1); }

    const CocycleSystem* sys_;
    CoverConfig cfg_;
    size_t n_ = 0;
    size_t cells_ = 0;
    long rlo_ = 0, rhi_ = 0, klo_ = 0, khi_ = 0;
    long rmin_ = 0, rmax_ = 0, umin_ = 0, umax_ = 0;
    std::vector<double> data_;
    std::vector<double> k_loss_;
    std::vector<double> rho_loss_;
};

}  // namespace sfl
