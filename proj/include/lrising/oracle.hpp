#pragma once

#include "lrising/hamiltonian.hpp"
#include "lrising/parallel.hpp"

#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

namespace lrising {

inline constexpr int kOracleGuardDefault = 26;
inline constexpr int kOracleGuardCeiling = 28;

struct OracleOptions {
    int guard = kOracleGuardDefault;  // max |Λ|; raised up to kOracleGuardCeiling
    int threads = 1;
    int chunk_bits = 16;  // fixed chunking, independent of the thread count
};

// Local observable on the sites of Λ. custom_local reads spins on `sites` in order.
struct ObservableSpec {
    enum Kind { spin_at, product_of_spins, occupation_product, custom_local };
    Kind kind = spin_at;
    std::vector<Site> sites;
    std::function<double(const std::vector<int>&)> fn;

    static ObservableSpec spin(const Site& x) { return {spin_at, {x}, {}}; }
    static ObservableSpec spins(std::vector<Site> s) { return {product_of_spins, std::move(s), {}}; }
    static ObservableSpec occupation(std::vector<Site> s) { return {occupation_product, std::move(s), {}}; }
    static ObservableSpec custom(std::vector<Site> s, std::function<double(const std::vector<int>&)> f) {
        return {custom_local, std::move(s), std::move(f)};
    }

    double value(const std::vector<int>& spins) const {
        switch (kind) {
            case spin_at:
                return spins.at(0);
            case product_of_spins: {
                int v = 1;
                for (int s : spins) v *= s;
                return v;
            }
            case occupation_product: {
                for (int s : spins)
                    if (s < 0) return 0.0;
                return 1.0;
            }
            case custom_local:
                return fn(spins);
        }
        return 0.0;
    }
};

namespace detail {

inline uint64_t site_mask(const Region& lambda, const Site& x) {
    require(lambda.contains(x), "observable site " + to_string(x) + " outside the window");
    return uint64_t{1} << lambda.index_of(x);
}

inline void check_oracle_guard(const Region& lambda, const OracleOptions& opt) {
    if (opt.guard < 1 || opt.guard > kOracleGuardCeiling)
        throw ConfigError("oracle guard must lie in [1, " + std::to_string(kOracleGuardCeiling) + "]");
    guard(static_cast<int>(lambda.size()) <= opt.guard,
          "exact enumeration over " + std::to_string(lambda.size()) + " sites exceeds the guard of " +
              std::to_string(opt.guard));
}

}  // namespace detail

// Expansion f = Σ_B c_B m_B in minus indicators m_B = 1{B ⊆ D}.
struct MinusExpansion {
    std::map<uint64_t, double> coeff;
};

inline MinusExpansion expand_observable(const ObservableSpec& f, const Region& lambda) {
    std::vector<uint64_t> bits;
    for (const Site& x : f.sites) bits.push_back(detail::site_mask(lambda, x));
    const std::size_t k = bits.size();
    require(k <= 16, "observable support too large");
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) require(bits[i] != bits[j], "observable sites must be distinct");
    // table over minus patterns S ⊆ support, then Möbius inversion
    std::vector<double> c(std::size_t{1} << k);
    std::vector<int> spins(k);
    for (std::size_t s = 0; s < c.size(); ++s) {
        for (std::size_t i = 0; i < k; ++i) spins[i] = (s >> i & 1) ? -1 : 1;
        c[s] = f.value(spins);
    }
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t s = 0; s < c.size(); ++s)
            if (s >> i & 1) c[s] -= c[s ^ (std::size_t{1} << i)];
    MinusExpansion out;
    for (std::size_t s = 0; s < c.size(); ++s) {
        if (c[s] == 0.0) continue;
        uint64_t m = 0;
        for (std::size_t i = 0; i < k; ++i)
            if (s >> i & 1) m |= bits[i];
        out.coeff[m] += c[s];
    }
    return out;
}

// One exhaustive sweep over D ⊆ Λ with weights e^{-β H⁺_h(D)}, H⁺_h = 2F_D + 2Σ_{x∈D} h_x.
// Accumulates Z̃ - 1 and P̂_A = Σ_{D ⊇ A} w(D) for each requested event mask A.
template <class Real>
class OracleSweep {
public:
    OracleSweep(Region lambda, const FieldAssignment& h, const ModelParams& p, std::vector<uint64_t> events,
                const OracleOptions& opt = {})
        : lambda_(std::move(lambda)), p_(p), events_(std::move(events)) {
        p_.validate();
        detail::check_oracle_guard(lambda_, opt);
        std::sort(events_.begin(), events_.end());
        events_.erase(std::unique(events_.begin(), events_.end()), events_.end());
        events_.erase(std::remove(events_.begin(), events_.end(), uint64_t{0}), events_.end());
        run(h, opt);
    }

    const Region& window() const { return lambda_; }
    const ModelParams& params() const { return p_; }
    Real z_tilde() const { return Real(1) + z_excess_; }
    Real z_tilde_excess() const { return z_excess_; }
    Real log_z_tilde() const { return rlog1p(z_excess_); }
    // H_Λ,h(σ_+): reference energy of the all-plus configuration
    Real plus_energy() const { return plus_energy_; }
    Real log_z() const { return log_z_tilde() - Real(p_.beta) * plus_energy_; }

    Real event_weight(uint64_t a) const {
        if (a == 0) return z_tilde();
        auto it = std::lower_bound(events_.begin(), events_.end(), a);
        require(it != events_.end() && *it == a, "event was not requested from the sweep");
        return event_sums_[static_cast<std::size_t>(it - events_.begin())];
    }
    uint64_t mask(const Site& x) const { return detail::site_mask(lambda_, x); }

    Real mean(const MinusExpansion& f) const {
        CompensatedSum<Real> s;
        for (auto [b, c] : f.coeff) s.add(Real(c) * event_weight(b));
        return s.value() / z_tilde();
    }

    // ⟨f;g⟩ = Σ c_B d_C (P̂_{B∪C} Z̃ - P̂_B P̂_C)/Z̃², with Z̃ = 1 + (Z̃-1) kept split.
    Real covariance(const MinusExpansion& f, const MinusExpansion& g) const {
        CompensatedSum<Real> s;
        for (auto [b, cb] : f.coeff) {
            if (b == 0) continue;
            for (auto [c, dc] : g.coeff) {
                if (c == 0) continue;
                Real pbc = event_weight(b | c);
                Real term = pbc + pbc * z_excess_ - event_weight(b) * event_weight(c);
                s.add(Real(cb) * Real(dc) * term);
            }
        }
        Real z = z_tilde();
        return s.value() / (z * z);
    }

    // Events needed to evaluate mean/covariance of the given expansions.
    static std::vector<uint64_t> events_for(const std::vector<MinusExpansion>& fs, bool pairwise) {
        std::vector<uint64_t> out;
        for (const auto& f : fs)
            for (auto [b, c] : f.coeff) out.push_back(b);
        if (pairwise)
            for (const auto& f : fs)
                for (const auto& g : fs)
                    for (auto [b, c] : f.coeff)
                        for (auto [e, d] : g.coeff) out.push_back(b | e);
        return out;
    }

private:
    struct Partial {
        Real excess{0};
        std::vector<Real> events;
    };

    void run(const FieldAssignment& h, const OracleOptions& opt) {
        const LatticeSums<Real> sums(p_);
        const std::size_t n = lambda_.size();
        std::vector<Real> jm(n * n, Real(0)), hx(n);
        for (std::size_t i = 0; i < n; ++i) {
            hx[i] = Real(h.at(lambda_[i]));
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) jm[i * n + j] = sums.coupling(lambda_[i], lambda_[j]);
        }
        {
            SpinConfig plus(lambda_);
            plus_energy_ = direct_hamiltonian(plus, h, sums);
        }
        const Real jz = sums.J() * sums.zeta();
        const Real beta(p_.beta);
        const int bits = std::min<int>(static_cast<int>(n), std::max(0, opt.chunk_bits));
        const uint64_t chunk_len = uint64_t{1} << bits;
        const std::size_t chunks = std::size_t{1} << (n - static_cast<std::size_t>(bits));

        auto work = [&](std::size_t c) {
            Partial part;
            part.events.assign(events_.size(), Real(0));
            const uint64_t begin = static_cast<uint64_t>(c) * chunk_len;
            uint64_t d = begin ^ (begin >> 1);
            // exact state at the chunk start
            std::vector<Real> local(n, Real(0));
            Real energy(0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j)
                    if (d >> j & 1) local[i] += jm[i * n + j];
            }
            for (std::size_t i = 0; i < n; ++i)
                if (d >> i & 1) energy += Real(2) * (jz - local[i] + hx[i]);
            for (uint64_t k = 0; k < chunk_len; ++k) {
                if (k > 0) {
                    const uint64_t idx = begin + k;
                    const int s = std::countr_zero(idx);
                    const uint64_t bit = uint64_t{1} << s;
                    const Real delta = Real(2) * jz - Real(4) * local[s] + Real(2) * hx[s];
                    const Real* row = &jm[static_cast<std::size_t>(s) * n];
                    if (d & bit) {
                        energy -= delta;
                        for (std::size_t i = 0; i < n; ++i) local[i] -= row[i];
                    } else {
                        energy += delta;
                        for (std::size_t i = 0; i < n; ++i) local[i] += row[i];
                    }
                    d ^= bit;
                }
                if (d == 0) continue;
                const Real w = rexp(-beta * energy);
                part.excess += w;
                for (std::size_t e = 0; e < events_.size(); ++e)
                    if ((d & events_[e]) == events_[e]) part.events[e] += w;
            }
            return part;
        };
        auto parts = parallel_map<Partial>(chunks, opt.threads, work);
        CompensatedSum<Real> ex;
        std::vector<CompensatedSum<Real>> ev(events_.size());
        for (const Partial& part : parts) {
            ex.add(part.excess);
            for (std::size_t e = 0; e < events_.size(); ++e) ev[e].add(part.events[e]);
        }
        z_excess_ = ex.value();
        event_sums_.resize(events_.size());
        for (std::size_t e = 0; e < events_.size(); ++e) event_sums_[e] = ev[e].value();
    }

    Region lambda_;
    ModelParams p_;
    std::vector<uint64_t> events_;
    std::vector<Real> event_sums_;
    Real z_excess_{0};
    Real plus_energy_{0};
};

template <class Real>
struct PartitionResult {
    Real z;  // may overflow in double for large windows; log_z is always finite
    Real z_tilde;
    Real log_z_tilde;
    Real log_z;
    Real plus_energy;
};

template <class Real = double>
PartitionResult<Real> exact_partition(const Region& lambda, const FieldAssignment& h, const ModelParams& p,
                                      const OracleOptions& opt = {}) {
    OracleSweep<Real> s(lambda, h, p, {}, opt);
    return {rexp(s.log_z()), s.z_tilde(), s.log_z_tilde(), s.log_z(), s.plus_energy()};
}

template <class Real = double>
Real exact_expectation(const ObservableSpec& obs, const Region& lambda, const FieldAssignment& h,
                       const ModelParams& p, const OracleOptions& opt = {}) {
    MinusExpansion f = expand_observable(obs, lambda);
    OracleSweep<Real> s(lambda, h, p, OracleSweep<Real>::events_for({f}, false), opt);
    return s.mean(f);
}

template <class Real = double>
Real exact_covariance(const ObservableSpec& f, const ObservableSpec& g, const Region& lambda,
                      const FieldAssignment& h, const ModelParams& p, const OracleOptions& opt = {}) {
    MinusExpansion ef = expand_observable(f, lambda), eg = expand_observable(g, lambda);
    OracleSweep<Real> s(lambda, h, p, OracleSweep<Real>::events_for({ef, eg}, true), opt);
    return s.covariance(ef, eg);
}

// ⟨σ_x1 σ_x2⟩ - ⟨σ_x1⟩⟨σ_x2⟩ = 4(P̂_12 Z̃ - P̂_1 P̂_2)/Z̃²
template <class Real = double>
Real truncated_two_point(const Site& x1, const Site& x2, const Region& lambda, const ModelParams& p,
                         const OracleOptions& opt = {}) {
    require(x1 != x2, "truncated two-point function needs distinct sites");
    return exact_covariance<Real>(ObservableSpec::spin(x1), ObservableSpec::spin(x2), lambda, FieldAssignment{}, p,
                                  opt);
}

// β^{-n} ∂^n log Z / ∂h_{x_1}...∂h_{x_n} at h = 0 by mixed centered differences,
// step fd_step/β, Richardson-extrapolated once. The part of log Z linear in h is
// added analytically so differences act on O(1) quantities. Sweeps run in Real
// (quad by default) since the stencil divides rounding error by (2δ)^n.
template <class Real = quad>
double n_point_truncated(const std::vector<Site>& sites, const Region& lambda, const ModelParams& p,
                                double fd_step = 1e-3, const OracleOptions& opt = {}) {
    const std::size_t n = sites.size();
    guard(n >= 1 && n <= 3, "finite-difference stencil supports 1 to 3 sites");
    for (std::size_t i = 0; i < n; ++i) {
        require(lambda.contains(sites[i]), "field site outside the window");
        for (std::size_t j = i + 1; j < n; ++j) require(sites[i] != sites[j], "field sites must be distinct");
    }
    require(p.beta > 0, "finite differences in h need beta > 0");
    require(fd_step > 0, "fd_step must be positive");
    auto stencil = [&](double delta) {
        CompensatedSum<Real> acc;
        for (uint32_t signs = 0; signs < (1u << n); ++signs) {
            FieldAssignment h;
            double sign = 1, lin = 0;
            for (std::size_t i = 0; i < n; ++i) {
                double v = (signs >> i & 1) ? -delta : delta;
                if (signs >> i & 1) sign = -sign;
                h.values[sites[i]] = v;
                lin += v;
            }
            OracleSweep<Real> s(lambda, h, p, {}, opt);
            // log Z = log Z̃_h - β H_h(σ_+), and H_h(σ_+) = H_0(σ_+) - Σ h_x
            acc.add(Real(sign) * (s.log_z_tilde() + Real(p.beta) * Real(lin)));
        }
        Real scale = Real(1);
        for (std::size_t i = 0; i < n; ++i) scale *= Real(2 * delta) * Real(p.beta);
        return acc.value() / scale;
    };
    const double delta = fd_step / p.beta;
    const Real coarse = stencil(delta), fine = stencil(delta / 2);
    return static_cast<double>((Real(4) * fine - coarse) / Real(3));
}

}  // namespace lrising
