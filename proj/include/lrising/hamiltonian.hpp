#pragma once

#include "lrising/contours.hpp"

#include <cmath>
#include <map>
#include <vector>

namespace lrising {

struct FieldAssignment {
    std::map<Site, double> values;

    double at(const Site& x) const {
        auto it = values.find(x);
        return it == values.end() ? 0.0 : it->second;
    }
    bool empty() const { return values.empty(); }
    static FieldAssignment uniform(const Region& where, double h) {
        FieldAssignment f;
        for (const Site& x : where) f.values[x] = h;
        return f;
    }
};

// H_Λ^+(σ) on the window of sigma, every pair counted once.
template <class Real>
Real direct_hamiltonian(const SpinConfig& sigma, const FieldAssignment& h, const LatticeSums<Real>& sums) {
    const Region& win = sigma.window();
    CompensatedSum<Real> e;
    for (std::size_t i = 0; i < win.size(); ++i) {
        const int si = sigma.at_index(i);
        for (std::size_t j = i + 1; j < win.size(); ++j)
            e.add(-sums.coupling(win[i], win[j]) * Real(si * sigma.at_index(j)));
        e.add(-sums.exterior(win[i], win) * Real(si));
        e.add(-Real(h.at(win[i])) * Real(si));
    }
    return e.value();
}

inline double direct_hamiltonian(const SpinConfig& sigma, const FieldAssignment& h, const ModelParams& p) {
    return direct_hamiltonian(sigma, h, LatticeSums<double>(p));
}

// H^+(Γ(σ)) = H(σ) - H(σ_+) = 2 F_D (+ 2 Σ_{x∈D} h_x with fields).
template <class Real>
Real normalized_hamiltonian(const SpinConfig& sigma, const LatticeSums<Real>& sums) {
    return Real(2) * sums.surface(sigma.minus_set());
}

template <class Real>
Real normalized_hamiltonian(const SpinConfig& sigma, const FieldAssignment& h, const LatticeSums<Real>& sums) {
    Region minus = sigma.minus_set();
    CompensatedSum<Real> f;
    for (const Site& x : minus) f.add(Real(h.at(x)));
    return Real(2) * (sums.surface(minus) + f.value());
}

inline double normalized_hamiltonian(const SpinConfig& sigma, const ModelParams& p) {
    return normalized_hamiltonian(sigma, LatticeSums<double>(p));
}

// Minus sites of sigma inside a region.
inline Region minus_in(const SpinConfig& sigma, const Region& where) {
    std::vector<Site> out;
    for (const Site& x : where)
        if (sigma.at(x) < 0) out.push_back(x);
    return Region::from_sorted(std::move(out));
}

// Φ_1 of an external contour with its internal contours, read off sigma on Ṽ(γ).
template <class Real>
Real phi1(const Contour& g, const SpinConfig& sigma, const LatticeSums<Real>& sums) {
    const Region& vt = g.V_tilde;
    Region dv = minus_in(sigma, vt);
    if (dv.empty()) return Real(0);
    Region rest = subtract(vt, dv);
    Real inside = sums.cross(dv, rest);
    Real outside = sums.J() * Real(static_cast<double>(dv.size())) * sums.zeta() - sums.cross(dv, vt);
    return Real(2) * (inside + outside);
}

// Φ_2 between two external contours; always <= 0.
template <class Real>
Real phi2(const Contour& a, const Contour& b, const SpinConfig& sigma, const LatticeSums<Real>& sums) {
    return Real(-4) * sums.cross(minus_in(sigma, a.V_tilde), minus_in(sigma, b.V_tilde));
}

template <class Real>
struct Decomposition {
    Real sum_phi1{0};
    Real sum_phi2{0};  // over unordered pairs of external contours
    Real normalized{0};
    std::size_t external = 0;
};

template <class Real>
Decomposition<Real> decompose(const SpinConfig& sigma, const LatticeSums<Real>& sums) {
    Decomposition<Real> out;
    auto gs = extract_contours(sigma, sums.params());
    auto ext = external_of(gs).external;
    out.external = ext.size();
    CompensatedSum<Real> s1, s2;
    for (std::size_t i = 0; i < ext.size(); ++i) {
        s1.add(phi1(gs[ext[i]], sigma, sums));
        for (std::size_t j = i + 1; j < ext.size(); ++j) s2.add(phi2(gs[ext[i]], gs[ext[j]], sigma, sums));
    }
    out.sum_phi1 = s1.value();
    out.sum_phi2 = s2.value();
    out.normalized = normalized_hamiltonian(sigma, sums);
    return out;
}

inline bool is_external_contour_of(const Contour& g, const SpinConfig& sigma, const ModelParams& p) {
    auto gs = extract_contours(sigma, p);
    auto it = std::find(gs.begin(), gs.end(), g);
    if (it == gs.end()) return false;
    for (const Contour& o : gs)
        if (!(o == g) && !is_external_to(g, o)) return false;
    return true;
}

// τ_γ(σ): +1 on sp(γ), flipped on I_-(γ), unchanged elsewhere.
inline SpinConfig erase(const Contour& g, const SpinConfig& sigma, const ModelParams& p) {
    require(is_external_contour_of(g, sigma, p), "erase needs an external contour of the configuration");
    Region win = unite(sigma.window(), g.V);
    SpinConfig out(win);
    for (std::size_t i = 0; i < win.size(); ++i) {
        const Site& x = win[i];
        int s = sigma.at(x);
        if (g.support.contains(x))
            s = 1;
        else if (g.I_minus.contains(x))
            s = -s;
        out.set_index(i, s);
    }
    return out;
}

// c_2 = min{1, J} (2d+1)^{-1} 2^{-α-2}
inline double peierls_c2(const ModelParams& p) {
    return std::min(1.0, p.J) / (2.0 * p.d + 1.0) * std::pow(2.0, -p.alpha - 2.0);
}

template <class Real>
struct ErasureCost {
    Real delta_h{0};
    Real norm{0};
    Real c2_norm{0};
    bool holds() const { return delta_h >= c2_norm; }
};

template <class Real>
ErasureCost<Real> erasure_cost(const Contour& g, const SpinConfig& sigma, const LatticeSums<Real>& sums) {
    ErasureCost<Real> c;
    SpinConfig erased = erase(g, sigma, sums.params());
    c.delta_h = normalized_hamiltonian(sigma, sums) - normalized_hamiltonian(erased, sums);
    c.norm = contour_norm(g, sums);
    c.c2_norm = Real(peierls_c2(sums.params())) * c.norm;
    return c;
}

}  // namespace lrising
