#pragma once

#include "lrising/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace lrising {

// Spins on a finite window; every site outside the window carries +1.
class SpinConfig {
public:
    SpinConfig() = default;
    explicit SpinConfig(Region window) : window_(std::move(window)), spin_(window_.size(), 1) {}

    static SpinConfig with_minus(Region window, const Region& minus) {
        SpinConfig s(std::move(window));
        for (const Site& x : minus) s.set(x, -1);
        return s;
    }

    const Region& window() const { return window_; }
    const std::vector<int8_t>& spins() const { return spin_; }
    int at(const Site& x) const {
        long i = window_.index_of(x);
        return i < 0 ? 1 : spin_[i];
    }
    int at_index(std::size_t i) const { return spin_[i]; }
    void set(const Site& x, int v) {
        long i = window_.index_of(x);
        require(i >= 0, "site " + to_string(x) + " lies outside the window");
        require(v == 1 || v == -1, "spins are +1 or -1");
        spin_[i] = static_cast<int8_t>(v);
    }
    void set_index(std::size_t i, int v) { spin_[i] = static_cast<int8_t>(v); }

    Region minus_set() const {
        std::vector<Site> out;
        for (std::size_t i = 0; i < spin_.size(); ++i)
            if (spin_[i] < 0) out.push_back(window_[i]);
        return Region::from_sorted(std::move(out));
    }
    bool is_plus() const {
        return std::all_of(spin_.begin(), spin_.end(), [](int8_t s) { return s > 0; });
    }
    // Equal as configurations on Z^d.
    bool same_as(const SpinConfig& o) const { return minus_set() == o.minus_set(); }

private:
    Region window_;
    std::vector<int8_t> spin_;
};

// Incorrect points: B_1(x) carries both signs.
inline Region boundary(const SpinConfig& sigma) {
    Region minus = sigma.minus_set();
    if (minus.empty()) return {};
    std::vector<Site> cand(minus.begin(), minus.end());
    for (const Site& m : minus)
        for (const Site& n : neighbours(m)) cand.push_back(n);
    Region candidates(std::move(cand));
    std::vector<Site> out;
    for (const Site& x : candidates) {
        int s0 = sigma.at(x);
        bool mixed = false;
        for (const Site& n : neighbours(x))
            if (sigma.at(n) != s0) {
                mixed = true;
                break;
            }
        if (mixed) out.push_back(x);
    }
    return Region::from_sorted(std::move(out));
}

using Partition = std::vector<Region>;

inline bool dist_at_most(const Region& a, const Region& b, double threshold) {
    if (box_distance(a, b) > threshold) return false;
    for (const Site& x : a)
        for (const Site& y : b)
            if (l1(x, y) <= threshold) return true;
    return false;
}

// Condition (B) between two parts, given their volume sizes.
inline bool separated(const Region& a, std::size_t va, const Region& b, std::size_t vb, const ModelParams& p) {
    double threshold = p.M * std::pow(static_cast<double>(std::min(va, vb)), p.partition_exponent());
    return !dist_at_most(a, b, threshold);
}

inline bool separated(const Region& a, const Region& b, const ModelParams& p) {
    return separated(a, volume(a).size(), b, volume(b).size(), p);
}

namespace detail {

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (b < a) std::swap(a, b);
        parent[b] = a;
        return true;
    }
};

inline Partition collect(const Region& a, UnionFind& uf) {
    std::vector<std::vector<Site>> groups(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) groups[uf.find(i)].push_back(a[i]);
    Partition out;
    for (auto& g : groups)
        if (!g.empty()) out.push_back(Region::from_sorted(std::move(g)));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

// Finest (M,a)-partition. Any pair violating (B) lies in one part of every valid
// partition, so merging violators until none remain yields the finest one.
// With order_seed set, pairs are merged one at a time in a shuffled order.
inline Partition finest_partition(const Region& a, const ModelParams& p,
                                  std::optional<uint64_t> order_seed = std::nullopt) {
    if (a.empty()) return {};
    detail::UnionFind uf(a.size());
    std::mt19937_64 rng(order_seed.value_or(0));
    for (;;) {
        std::vector<std::size_t> root_of_part;
        std::vector<std::vector<std::size_t>> members;
        {
            std::vector<long> slot(a.size(), -1);
            for (std::size_t i = 0; i < a.size(); ++i) {
                std::size_t r = uf.find(i);
                if (slot[r] < 0) {
                    slot[r] = static_cast<long>(members.size());
                    members.emplace_back();
                    root_of_part.push_back(r);
                }
                members[slot[r]].push_back(i);
            }
        }
        std::size_t n = members.size();
        std::vector<Region> parts(n);
        std::vector<std::size_t> vol(n);
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<Site> s;
            for (std::size_t i : members[k]) s.push_back(a[i]);
            parts[k] = Region::from_sorted(std::move(s));
            vol[k] = parts[k].size() == 1 ? 1 : volume(parts[k]).size();
        }
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) pairs.push_back({i, j});
        if (order_seed) std::shuffle(pairs.begin(), pairs.end(), rng);
        bool merged = false;
        for (auto [i, j] : pairs) {
            if (uf.find(root_of_part[i]) == uf.find(root_of_part[j])) continue;
            if (!separated(parts[i], vol[i], parts[j], vol[j], p)) {
                uf.unite(root_of_part[i], root_of_part[j]);
                merged = true;
                if (order_seed) break;  // recompute volumes after each merge
            }
        }
        if (!merged) break;
    }
    return detail::collect(a, uf);
}

// Partition whose parts pairwise satisfy (B).
inline bool is_ma_partition(const Partition& parts, const ModelParams& p) {
    std::vector<std::size_t> vol;
    for (const Region& r : parts) vol.push_back(volume(r).size());
    for (std::size_t i = 0; i < parts.size(); ++i)
        for (std::size_t j = i + 1; j < parts.size(); ++j) {
            if (!disjoint(parts[i], parts[j])) return false;
            if (!separated(parts[i], vol[i], parts[j], vol[j], p)) return false;
        }
    return true;
}

// (support, spin restriction) with the derived geometry used throughout.
struct Contour {
    Region support;
    std::vector<int8_t> omega;  // aligned with support

    Region V;
    std::vector<Region> interior_parts;
    std::vector<int> labels;  // one per interior part
    int outer_label = 1;
    Region I_plus, I_minus, V_tilde;

    std::size_t size() const { return support.size(); }
    int spin_at(const Site& x) const { return omega[support.index_of(x)]; }
    bool operator==(const Contour& o) const { return support == o.support && omega == o.omega; }
    bool operator<(const Contour& o) const {
        if (support == o.support) return omega < o.omega;
        return support < o.support;
    }
};

inline std::ostream& operator<<(std::ostream& os, const Contour& g) {
    os << "contour{";
    for (std::size_t i = 0; i < g.size(); ++i) os << (i ? " " : "") << to_string(g.support[i]) << (g.omega[i] > 0 ? '+' : '-');
    return os << '}';
}

inline Contour make_contour(Region support, std::vector<int8_t> omega) {
    require(support.size() == omega.size(), "spin restriction must cover the support");
    Contour g;
    g.support = std::move(support);
    g.omega = std::move(omega);
    g.V = volume(g.support);
    auto constant_sign = [&](const Region& where, const std::string& what) {
        int sign = 0;
        for (const Site& x : where) {
            long i = g.support.index_of(x);
            if (i < 0) throw InvariantViolation(what + ": boundary site " + to_string(x) + " outside the support");
            if (sign == 0)
                sign = g.omega[i];
            else if (sign != g.omega[i])
                throw InvariantViolation(what + ": sign not constant");
        }
        return sign == 0 ? 1 : sign;
    };
    g.outer_label = constant_sign(inner_boundary(g.V), "outer label");
    Region I = subtract(g.V, g.support);
    g.interior_parts = components(I);
    std::vector<Site> plus, minus;
    for (const Region& part : g.interior_parts) {
        int lab = constant_sign(outer_boundary(volume(part)), "interior label");
        g.labels.push_back(lab);
        auto& dst = lab > 0 ? plus : minus;
        dst.insert(dst.end(), part.begin(), part.end());
    }
    g.I_plus = Region(std::move(plus));
    g.I_minus = Region(std::move(minus));
    g.V_tilde = unite(g.support, g.I_minus);
    return g;
}

inline Contour make_contour(const Region& support, const SpinConfig& sigma) {
    std::vector<int8_t> omega;
    omega.reserve(support.size());
    for (const Site& x : support) omega.push_back(static_cast<int8_t>(sigma.at(x)));
    return make_contour(support, std::move(omega));
}

// ||gamma|| = |gamma| + F_{I_-} + F_{sp}.
template <class Real>
Real contour_norm(const Contour& g, const LatticeSums<Real>& sums) {
    return Real(static_cast<double>(g.size())) + sums.surface(g.I_minus) + sums.surface(g.support);
}

inline double contour_norm(const Contour& g, const ModelParams& p) {
    return contour_norm(g, LatticeSums<double>(p));
}

inline std::vector<Contour> extract_contours(const SpinConfig& sigma, const ModelParams& p) {
    std::vector<Contour> out;
    for (Region& part : finest_partition(boundary(sigma), p)) out.push_back(make_contour(part, sigma));
    std::sort(out.begin(), out.end());
    return out;
}

inline bool is_external_to(const Contour& g, const Contour& other) { return disjoint(g.support, other.V_tilde); }

inline bool is_mutually_external(const Contour& a, const Contour& b) {
    return is_external_to(a, b) && is_external_to(b, a);
}

struct ExternalStructure {
    std::vector<std::size_t> external;               // indices into the family
    std::vector<std::vector<std::size_t>> internals;  // per external contour
};

inline ExternalStructure external_of(const std::vector<Contour>& family) {
    ExternalStructure out;
    std::vector<char> is_ext(family.size(), 1);
    for (std::size_t i = 0; i < family.size(); ++i)
        for (std::size_t j = 0; j < family.size(); ++j)
            if (i != j && !is_external_to(family[i], family[j])) {
                is_ext[i] = 0;
                break;
            }
    for (std::size_t i = 0; i < family.size(); ++i)
        if (is_ext[i]) out.external.push_back(i);
    out.internals.resize(out.external.size());
    for (std::size_t i = 0; i < family.size(); ++i) {
        if (is_ext[i]) continue;
        long owner = -1;
        for (std::size_t k = 0; k < out.external.size(); ++k)
            if (is_subset(family[i].V, family[out.external[k]].I_minus)) {
                if (owner >= 0) throw InvariantViolation("internal contour enclosed by two external contours");
                owner = static_cast<long>(k);
            }
        if (owner < 0) throw InvariantViolation("internal contour without an enclosing external contour");
        out.internals[owner].push_back(i);
    }
    return out;
}

// Rebuilds sigma from its contours: supports carry their spins, every other site
// takes the label of the smallest interior part containing it, and +1 elsewhere.
inline SpinConfig reconstruct(const std::vector<Contour>& family, const Region& window) {
    SpinConfig s(window);
    for (std::size_t i = 0; i < window.size(); ++i) {
        const Site& x = window[i];
        int spin = 1;
        std::size_t best = SIZE_MAX;
        bool on_support = false;
        for (const Contour& g : family) {
            long k = g.support.index_of(x);
            if (k >= 0) {
                spin = g.omega[k];
                on_support = true;
                break;
            }
        }
        if (!on_support)
            for (const Contour& g : family)
                for (std::size_t c = 0; c < g.interior_parts.size(); ++c)
                    if (g.interior_parts[c].size() < best && g.interior_parts[c].contains(x)) {
                        best = g.interior_parts[c].size();
                        spin = g.labels[c];
                    }
        s.set_index(i, spin);
    }
    return s;
}

// Configuration defined by a single contour: its spins on the support, labels on
// the interior parts and +1 outside V.
inline SpinConfig canonical_configuration(const Contour& g) {
    require(g.outer_label == 1, "canonical configuration needs a + outer label");
    return reconstruct({g}, g.V);
}

// Condition (I) of compatibility for a pair of contours.
inline bool supports_compatible(const Contour& a, const Contour& b, const ModelParams& p) {
    if (a.support == b.support) return false;
    if (!disjoint(a.support, b.support)) return false;
    return separated(a.support, a.support.size() == 1 ? 1 : volume(a.support).size(), b.support,
                     b.support.size() == 1 ? 1 : volume(b.support).size(), p);
}

inline bool contours_compatible(const Contour& a, const Contour& b, const ModelParams& p) {
    return supports_compatible(a, b, p);
}

// Contour families viewed as polymers.
using ContourFamily = std::vector<Contour>;

inline Region family_volume(const ContourFamily& f) {
    Region out;
    for (const Contour& g : f) out = unite(out, g.V);
    return out;
}

inline Region family_vtilde(const ContourFamily& f) {
    Region out;
    for (const Contour& g : f) out = unite(out, g.V_tilde);
    return out;
}

inline bool polymers_compatible(const ContourFamily& A, const ContourFamily& B, const ModelParams& p) {
    if (A == B) return false;
    for (const Contour& a : A)
        for (const Contour& b : B)
            if (!supports_compatible(a, b, p)) return false;
    bool c1 = disjoint(family_vtilde(A), family_vtilde(B));
    Region vb = family_volume(B), va = family_volume(A);
    bool c2 = std::any_of(A.begin(), A.end(), [&](const Contour& a) { return is_subset(vb, a.I_minus); });
    bool c3 = std::any_of(B.begin(), B.end(), [&](const Contour& b) { return is_subset(va, b.I_minus); });
    return int(c1) + int(c2) + int(c3) == 1;
}

}  // namespace lrising
