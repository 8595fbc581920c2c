#pragma once

#include "lrising/contour_enum.hpp"
#include "lrising/hamiltonian.hpp"
#include "lrising/parallel.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <vector>

namespace lrising {

// ---------------------------------------------------------------- graphs on small vertex sets

inline constexpr int kMaxGraphVertices = 8;

// Edges of K_n as (i, j), i < j, in lexicographic order; edge sets are bitmasks over it.
inline const std::vector<std::pair<int, int>>& edge_list(int n) {
    static const auto lists = [] {
        std::array<std::vector<std::pair<int, int>>, kMaxGraphVertices + 1> out;
        for (int m = 0; m <= kMaxGraphVertices; ++m)
            for (int i = 0; i < m; ++i)
                for (int j = i + 1; j < m; ++j) out[m].emplace_back(i, j);
        return out;
    }();
    require(n >= 0 && n <= kMaxGraphVertices, "graph size outside [0, 8]");
    return lists[n];
}

inline int edge_index(int i, int j, int n) {
    if (i > j) std::swap(i, j);
    return i * (2 * n - i - 1) / 2 + (j - i - 1);
}

inline bool graph_connected(int n, uint64_t edges) {
    if (n <= 1) return true;
    const auto& el = edge_list(n);
    uint32_t reached = 1, prev = 0;
    while (reached != prev) {
        prev = reached;
        for (std::size_t e = 0; e < el.size(); ++e)
            if (edges >> e & 1) {
                auto [i, j] = el[e];
                if ((reached >> i & 1) || (reached >> j & 1)) reached |= (1u << i) | (1u << j);
            }
    }
    return reached == (1u << n) - 1;
}

inline uint64_t complete_edges(int n) {
    std::size_t m = edge_list(n).size();
    return m == 64 ? ~uint64_t{0} : (uint64_t{1} << m) - 1;
}

namespace detail {

inline int64_t ursell_direct(int n, uint64_t allowed) {
    int64_t total = 0;
    for (uint64_t s = allowed;; s = (s - 1) & allowed) {
        if (graph_connected(n, s)) total += (std::popcount(s) % 2) ? -1 : 1;
        if (s == 0) break;
    }
    return total;
}

inline const std::vector<int64_t>& ursell_table(int n) {
    static std::array<std::vector<int64_t>, 6> tables;
    static std::array<std::once_flag, 6> once;
    std::call_once(once[n], [n] {
        uint64_t m = complete_edges(n);
        tables[n].resize(m + 1);
        for (uint64_t a = 0; a <= m; ++a) tables[n][a] = ursell_direct(n, a);
    });
    return tables[n];
}

}  // namespace detail

// φ^T = Σ over connected spanning subgraphs of the incompatibility graph of (-1)^{|E|}.
inline int64_t ursell_graph(int n, uint64_t incompatible, int guard_size = 6) {
    require(n >= 1, "ursell needs a nonempty set");
    guard(n <= guard_size && n <= 6, "ursell limited to sets of at most " + std::to_string(std::min(guard_size, 6)));
    incompatible &= complete_edges(n);
    if (n <= 5) return detail::ursell_table(n)[incompatible];
    return detail::ursell_direct(n, incompatible);
}

// Calls f(edge mask) for every labelled tree on n vertices, decoded from Prüfer sequences.
template <class F>
void for_each_labelled_tree(int n, F&& f) {
    require(n >= 1 && n <= kMaxGraphVertices, "tree enumeration needs 1 to 8 vertices");
    if (n == 1) {
        f(uint64_t{0});
        return;
    }
    const int len = n - 2;
    std::vector<int> seq(static_cast<std::size_t>(std::max(len, 0)), 0);
    for (;;) {
        std::vector<int> degree(n, 1);
        for (int v : seq) ++degree[v];
        uint64_t edges = 0;
        for (int v : seq) {
            int leaf = 0;
            while (degree[leaf] != 1) ++leaf;
            edges |= uint64_t{1} << edge_index(leaf, v, n);
            --degree[leaf];
            --degree[v];
        }
        int u = -1, w = -1;
        for (int i = 0; i < n; ++i)
            if (degree[i] == 1) (u < 0 ? u : w) = i;
        edges |= uint64_t{1} << edge_index(u, w, n);
        f(edges);
        int k = len - 1;
        while (k >= 0 && seq[k] == n - 1) seq[k--] = 0;
        if (k < 0) break;
        ++seq[k];
    }
}

struct TreeGraphBound {
    int64_t phi = 0;
    uint64_t tree_bound = 0;
    bool holds() const { return static_cast<uint64_t>(phi < 0 ? -phi : phi) <= tree_bound; }
};

inline TreeGraphBound tree_graph_bound_check(int n, uint64_t incompatible, int guard_size = 6) {
    TreeGraphBound out;
    out.phi = ursell_graph(n, incompatible, guard_size);
    for_each_labelled_tree(n, [&](uint64_t t) {
        if ((t & ~incompatible) == 0) ++out.tree_bound;
    });
    return out;
}

// Labelled trees on n+1 vertices with degrees d_0..d_n: (n-1)!/Π(d_k-1)!.
inline uint64_t cayley_count(const std::vector<int>& degrees) {
    const int m = static_cast<int>(degrees.size());
    require(m >= 2 && m <= 20, "degree sequence needs 2 to 20 vertices");
    int sum = 0;
    for (int d : degrees) {
        require(d >= 1, "tree degrees are at least 1");
        sum += d;
    }
    require(sum == 2 * (m - 1), "tree degrees must sum to twice the edge count");
    auto fact = [](int k) {
        uint64_t f = 1;
        for (int i = 2; i <= k; ++i) f *= static_cast<uint64_t>(i);
        return f;
    };
    uint64_t out = fact(m - 2);
    for (int d : degrees) out /= fact(d - 1);
    return out;
}

// ---------------------------------------------------------------- polymers

struct Polymer {
    ContourFamily contours;  // sorted
    double norm = 0;         // Σ ||γ||
    Region V, V_tilde;

    std::size_t size() const { return contours.size(); }
    bool operator==(const Polymer& o) const { return contours == o.contours; }
    bool operator<(const Polymer& o) const { return contours < o.contours; }
};

inline bool family_is_polymer(const ContourFamily& f, const ModelParams& p) {
    if (f.empty()) return false;
    for (std::size_t i = 0; i < f.size(); ++i)
        for (std::size_t j = i + 1; j < f.size(); ++j)
            if (!is_mutually_external(f[i], f[j]) || !supports_compatible(f[i], f[j], p)) return false;
    return true;
}

inline Polymer make_polymer(ContourFamily f, const LatticeSums<double>& sums) {
    std::sort(f.begin(), f.end());
    require(family_is_polymer(f, sums.params()),
            "contours do not form a compatible family of mutually external contours");
    Polymer out;
    for (const Contour& g : f) out.norm += contour_norm(g, sums);
    out.V = family_volume(f);
    out.V_tilde = family_vtilde(f);
    out.contours = std::move(f);
    return out;
}

inline Polymer make_polymer(ContourFamily f, const ModelParams& p) {
    return make_polymer(std::move(f), LatticeSums<double>(p));
}

inline bool compatible(const Polymer& a, const Polymer& b, const ModelParams& p) {
    return polymers_compatible(a.contours, b.contours, p);
}

struct PolymerOptions {
    int interior_guard = 16;                  // |I_-(γ)| for W
    int k_guard = 5;                          // |Γ| for K and z̃
    std::size_t ensemble_guard = 1u << 20;    // product of internal-family counts in K
    std::size_t enumeration_guard = 20;       // sites of the cell for the polymer gas
    std::size_t compatibility_guard = 4096;   // polymers for the pairwise compatibility table
    int threads = 1;
};

// One element of 𝓘(γ): the minus set of γ ∪ Γ and of τ_γ(γ ∪ Γ).
struct InternalFamily {
    Region minus;
    Region erased_minus;
};

// Spin assignments on I_-(γ) whose extraction, together with γ, has γ as the only
// external contour.
inline std::vector<InternalFamily> internal_families(const Contour& g, const ModelParams& p, int interior_guard = 16) {
    const std::vector<Site> inner(g.I_minus.begin(), g.I_minus.end());
    guard(static_cast<int>(inner.size()) <= interior_guard,
          "I_-(gamma) has " + std::to_string(inner.size()) + " sites, above the guard of " +
              std::to_string(interior_guard));
    SpinConfig base = canonical_configuration(g);
    std::vector<InternalFamily> out;
    if (inner.empty()) {
        out.push_back({base.minus_set(), Region{}});
        return out;
    }
    for (uint64_t mask = 0; mask < (uint64_t{1} << inner.size()); ++mask) {
        SpinConfig s = base;
        std::vector<Site> flipped;
        for (std::size_t i = 0; i < inner.size(); ++i)
            if (mask >> i & 1) {
                s.set(inner[i], 1);
                flipped.push_back(inner[i]);
            }
        auto gs = extract_contours(s, p);
        auto it = std::find(gs.begin(), gs.end(), g);
        if (it == gs.end()) continue;
        auto ext = external_of(gs).external;
        if (ext.size() != 1 || ext[0] != static_cast<std::size_t>(it - gs.begin())) continue;
        out.push_back({s.minus_set(), Region::from_sorted(std::move(flipped))});
    }
    return out;
}

template <class Real>
struct ContourWeight {
    Real z_gamma{0};  // Z̃⁺(γ)
    Real z_check{0};  // Z̃⁺(γ̌)
    Real W{0};
    std::size_t families = 0;
};

// W, K, z and z̃ at fixed (β, h). Thread-safe; W and the internal ensembles are cached per contour.
template <class Real>
class ActivityModel {
public:
    ActivityModel(const ModelParams& p, FieldAssignment h = {}, PolymerOptions opt = {})
        : p_(p), sums_(p), h_(std::move(h)), opt_(opt) {
        p_.validate();
    }

    const ModelParams& params() const { return p_; }
    const LatticeSums<Real>& sums() const { return sums_; }
    const PolymerOptions& options() const { return opt_; }

    // H⁺_h of a configuration given by its minus set.
    Real energy(const Region& minus) const {
        CompensatedSum<Real> f;
        for (const Site& x : minus) f.add(Real(h_.at(x)));
        return Real(2) * (sums_.surface(minus) + f.value());
    }

    ContourWeight<Real> weight(const Contour& g) const {
        return cached(g).weight;
    }

    // K(Γ): connected-graph sum of Π(e^{-βΦ₂} - 1) averaged over the Φ₁-weighted internal ensembles.
    Real graph_sum_K(const Polymer& poly) const {
        const int k = static_cast<int>(poly.size());
        require(k >= 1, "empty polymer");
        guard(k <= opt_.k_guard, "K limited to polymers of at most " + std::to_string(opt_.k_guard) + " contours");
        if (k == 1) return Real(1);
        std::vector<const Entry*> ent;
        std::size_t combos = 1;
        for (const Contour& g : poly.contours) {
            ent.push_back(&cached(g));
            combos *= ent.back()->families.size();
            guard(combos <= opt_.ensemble_guard, "internal ensemble product above the guard");
        }
        const auto& connected = connected_edge_sets(k);
        const auto& el = edge_list(k);
        const Real beta(p_.beta);
        CompensatedSum<Real> num, den;
        std::vector<std::size_t> pick(k, 0);
        std::vector<Real> f(el.size());
        for (std::size_t c = 0; c < combos; ++c) {
            std::size_t r = c;
            Real w(1);
            for (int i = 0; i < k; ++i) {
                pick[i] = r % ent[i]->families.size();
                r /= ent[i]->families.size();
                w *= ent[i]->phi1_weight[pick[i]];
            }
            for (std::size_t e = 0; e < el.size(); ++e) {
                auto [i, j] = el[e];
                Real cross = sums_.cross(ent[i]->families[pick[i]].minus, ent[j]->families[pick[j]].minus);
                f[e] = rexpm1(Real(4) * beta * cross);  // e^{-βΦ₂} - 1
            }
            CompensatedSum<Real> s;
            for (uint64_t g : connected) {
                Real t(1);
                for (std::size_t e = 0; e < el.size(); ++e)
                    if (g >> e & 1) t *= f[e];
                s.add(t);
            }
            num.add(w * s.value());
            den.add(w);
        }
        return num.value() / den.value();
    }

    Real activity(const Polymer& poly) const {
        Real z = graph_sum_K(poly);
        for (const Contour& g : poly.contours) z *= weight(g).W;
        return z;
    }

    // F_{γ,γ'} = Σ_{x∈Ṽ(γ), y∈Ṽ(γ')} J_xy
    Real pair_F(const Contour& a, const Contour& b) const { return sums_.cross(a.V_tilde, b.V_tilde); }

    // z̃(Γ) = Σ_T Π_γ e^{-βc₂||γ||/2} Π_{edges of T} F_{γ,γ'}
    Real simplified_activity(const Polymer& poly) const {
        const int k = static_cast<int>(poly.size());
        require(k >= 1, "empty polymer");
        guard(k <= opt_.k_guard, "z-tilde limited to polymers of at most " + std::to_string(opt_.k_guard) + " contours");
        const Real half(peierls_c2(p_) * p_.beta / 2);
        Real pref(1);
        for (const Contour& g : poly.contours) pref *= rexp(-half * contour_norm(g, sums_));
        const auto& el = edge_list(k);
        std::vector<Real> F(el.size());
        for (std::size_t e = 0; e < el.size(); ++e) F[e] = pair_F(poly.contours[el[e].first], poly.contours[el[e].second]);
        CompensatedSum<Real> s;
        for_each_labelled_tree(k, [&](uint64_t t) {
            Real prod(1);
            for (std::size_t e = 0; e < el.size(); ++e)
                if (t >> e & 1) prod *= F[e];
            s.add(prod);
        });
        return pref * s.value();
    }

private:
    struct Entry {
        std::vector<InternalFamily> families;
        std::vector<Real> phi1_weight;  // e^{-βH⁺_h(γ ∪ Γ)}
        ContourWeight<Real> weight;
    };

    static const std::vector<uint64_t>& connected_edge_sets(int k) {
        static std::array<std::vector<uint64_t>, 7> sets;
        static std::array<std::once_flag, 7> once;
        require(k >= 1 && k <= 6, "connected graph enumeration limited to 6 vertices");
        std::call_once(once[k], [k] {
            for (uint64_t g = 0; g <= complete_edges(k); ++g)
                if (graph_connected(k, g)) sets[k].push_back(g);
        });
        return sets[k];
    }

    const Entry& cached(const Contour& g) const {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(g);
            if (it != cache_.end()) return it->second;
        }
        Entry e;
        e.families = internal_families(g, p_, opt_.interior_guard);
        const Real beta(p_.beta);
        CompensatedSum<Real> zg, zc;
        for (const InternalFamily& f : e.families) {
            Real w = rexp(-beta * energy(f.minus));
            e.phi1_weight.push_back(w);
            zg.add(w);
            zc.add(rexp(-beta * energy(f.erased_minus)));
        }
        e.weight.z_gamma = zg.value();
        e.weight.z_check = zc.value();
        e.weight.W = e.weight.z_gamma / e.weight.z_check;
        e.weight.families = e.families.size();
        std::lock_guard<std::mutex> lock(mutex_);
        return cache_.emplace(g, std::move(e)).first->second;
    }

    ModelParams p_;
    LatticeSums<Real> sums_;
    FieldAssignment h_;
    PolymerOptions opt_;
    mutable std::mutex mutex_;
    mutable std::map<Contour, Entry> cache_;
};

template <class Real = double>
ContourWeight<Real> weight_W(const Contour& g, const ModelParams& p, const PolymerOptions& opt = {}) {
    return ActivityModel<Real>(p, {}, opt).weight(g);
}

template <class Real = double>
Real graph_sum_K(const Polymer& poly, const ModelParams& p, const PolymerOptions& opt = {}) {
    return ActivityModel<Real>(p, {}, opt).graph_sum_K(poly);
}

template <class Real = double>
Real activity(const Polymer& poly, const ModelParams& p, const PolymerOptions& opt = {}) {
    return ActivityModel<Real>(p, {}, opt).activity(poly);
}

template <class Real = double>
Real simplified_activity(const Polymer& poly, const ModelParams& p, const PolymerOptions& opt = {}) {
    return ActivityModel<Real>(p, {}, opt).simplified_activity(poly);
}

// ---------------------------------------------------------------- the gas on a cell

// Every nonempty external family Γᵉ(σ) over configurations with minus set inside the cell.
inline std::vector<Polymer> enumerate_polymers(const Region& cell, const ModelParams& p, const PolymerOptions& opt = {}) {
    p.validate();
    guard(cell.size() <= opt.enumeration_guard, "polymer enumeration over " + std::to_string(cell.size()) +
                                                    " sites exceeds the guard of " +
                                                    std::to_string(opt.enumeration_guard));
    const std::size_t n = cell.size();
    const uint64_t total = uint64_t{1} << n;
    const uint64_t chunk = std::min<uint64_t>(total, 1024);
    auto parts = parallel_map<std::vector<ContourFamily>>(total / chunk, opt.threads, [&](std::size_t c) {
        std::vector<ContourFamily> out;
        for (uint64_t m = c * chunk; m < (c + 1) * chunk; ++m) {
            if (m == 0) continue;
            SpinConfig s(cell);
            for (std::size_t i = 0; i < n; ++i)
                if (m >> i & 1) s.set_index(i, -1);
            auto gs = extract_contours(s, p);
            ContourFamily fam;
            for (std::size_t i : external_of(gs).external) fam.push_back(gs[i]);
            out.push_back(std::move(fam));
        }
        return out;
    });
    std::set<ContourFamily> fams;
    for (auto& part : parts)
        for (auto& f : part) fams.insert(std::move(f));
    std::vector<Polymer> out;
    LatticeSums<double> sums(p);
    for (const ContourFamily& f : fams) out.push_back(make_polymer(f, sums));
    return out;
}

// True when no two polymers with supports near the cell can be compatible: every
// pair of support sites is within l1 distance M, below every (B) threshold.
inline bool cell_forces_incompatibility(const Region& cell, const ModelParams& p) {
    return diameter(closed_neighbourhood(cell)) <= p.M;
}

template <class Real>
struct PolymerGas {
    std::vector<Polymer> polymers;
    std::vector<Real> z;
    bool all_incompatible = false;
    std::vector<std::vector<uint32_t>> compatible_after;  // j > i compatible with i, when needed
};

template <class Real>
PolymerGas<Real> build_gas(const Region& cell, const ActivityModel<Real>& model) {
    const ModelParams& p = model.params();
    const PolymerOptions& opt = model.options();
    PolymerGas<Real> gas;
    gas.polymers = enumerate_polymers(cell, p, opt);
    gas.z = parallel_map<Real>(gas.polymers.size(), opt.threads,
                               [&](std::size_t i) { return model.activity(gas.polymers[i]); });
    gas.all_incompatible = cell_forces_incompatibility(cell, p);
    if (!gas.all_incompatible) {
        const std::size_t np = gas.polymers.size();
        guard(np <= opt.compatibility_guard, "compatibility table over " + std::to_string(np) +
                                                 " polymers exceeds the guard of " +
                                                 std::to_string(opt.compatibility_guard));
        gas.compatible_after = parallel_map<std::vector<uint32_t>>(np, opt.threads, [&](std::size_t i) {
            std::vector<uint32_t> out;
            for (std::size_t j = i + 1; j < np; ++j)
                if (compatible(gas.polymers[i], gas.polymers[j], p)) out.push_back(static_cast<uint32_t>(j));
            return out;
        });
    }
    return gas;
}

// 1 + Σ_{X ≠ ∅ pairwise compatible} Π z(Γ)
template <class Real>
Real polymer_partition_function(const PolymerGas<Real>& gas) {
    CompensatedSum<Real> total;
    total.add(Real(1));
    if (gas.all_incompatible) {
        for (const Real& z : gas.z) total.add(z);
        return total.value();
    }
    std::function<Real(const std::vector<uint32_t>&)> rec = [&](const std::vector<uint32_t>& cand) {
        CompensatedSum<Real> s;
        for (std::size_t a = 0; a < cand.size(); ++a) {
            const uint32_t i = cand[a];
            std::vector<uint32_t> next;
            const auto& ci = gas.compatible_after[i];
            std::set_intersection(cand.begin() + static_cast<long>(a) + 1, cand.end(), ci.begin(), ci.end(),
                                  std::back_inserter(next));
            s.add(gas.z[i] * (Real(1) + (next.empty() ? Real(0) : rec(next))));
        }
        return s.value();
    };
    std::vector<uint32_t> all(gas.z.size());
    std::iota(all.begin(), all.end(), 0u);
    total.add(rec(all));
    return total.value();
}

template <class Real = double>
Real polymer_partition_function(const Region& cell, const ModelParams& p, const PolymerOptions& opt = {}) {
    ActivityModel<Real> model(p, {}, opt);
    return polymer_partition_function(build_gas(cell, model));
}

// ---------------------------------------------------------------- truncated cluster series

template <class Real>
struct SeriesReport {
    std::vector<Real> partial_sums;      // S_1..S_k
    std::vector<uint64_t> term_counts;   // sets X with φ^T(X) ≠ 0, per order
    double norm_cutoff = 0;
    std::size_t pool_size = 0;
    std::size_t excluded = 0;
    Real excluded_activity{0};           // Σ |z| over polymers above the cutoff
};

// S_k = Σ_{X ⊆ pool, |X| ≤ k} φ^T(X) Π z(Γ), X a set. The pool is every polymer of the
// gas with ||Γ|| ≤ norm_cutoff.
template <class Real>
SeriesReport<Real> cluster_series(const PolymerGas<Real>& gas, int max_order, double norm_cutoff, const ModelParams& p,
                                  int threads = 1) {
    guard(max_order >= 1 && max_order <= 6, "cluster series order limited to 1..6");
    SeriesReport<Real> rep;
    rep.norm_cutoff = norm_cutoff;
    std::vector<std::size_t> pool;
    CompensatedSum<Real> excl;
    for (std::size_t i = 0; i < gas.polymers.size(); ++i) {
        if (gas.polymers[i].norm <= norm_cutoff)
            pool.push_back(i);
        else
            excl.add(rabs(gas.z[i]));
    }
    rep.pool_size = pool.size();
    rep.excluded = gas.polymers.size() - pool.size();
    rep.excluded_activity = excl.value();
    const std::size_t np = pool.size();
    std::vector<std::vector<char>> incompat(np, std::vector<char>(np, 1));
    if (!gas.all_incompatible) {
        for (std::size_t a = 0; a < np; ++a)
            for (std::size_t b = a + 1; b < np; ++b) {
                bool c = compatible(gas.polymers[pool[a]], gas.polymers[pool[b]], p);
                incompat[a][b] = incompat[b][a] = !c;
            }
    }
    struct Partial {
        std::vector<CompensatedSum<Real>> sums;
        std::vector<uint64_t> counts;
    };
    auto parts = parallel_map<Partial>(np, threads, [&](std::size_t first) {
        Partial part;
        part.sums.resize(max_order);
        part.counts.assign(max_order, 0);
        std::vector<std::size_t> chosen{first};
        std::function<void(Real)> rec = [&](Real prod) {
            const int k = static_cast<int>(chosen.size());
            uint64_t edges = 0;
            for (int i = 0; i < k; ++i)
                for (int j = i + 1; j < k; ++j)
                    if (incompat[chosen[i]][chosen[j]]) edges |= uint64_t{1} << edge_index(i, j, k);
            int64_t phi = ursell_graph(k, edges);
            if (phi != 0) {
                part.sums[k - 1].add(Real(static_cast<double>(phi)) * prod);
                ++part.counts[k - 1];
            }
            if (k == max_order) return;
            for (std::size_t nx = chosen.back() + 1; nx < np; ++nx) {
                // a set whose last element touches nothing chosen can still be connected
                // later, so no pruning beyond the order cap
                chosen.push_back(nx);
                rec(prod * gas.z[pool[nx]]);
                chosen.pop_back();
            }
        };
        rec(gas.z[pool[first]]);
        return part;
    });
    std::vector<CompensatedSum<Real>> order(max_order);
    rep.term_counts.assign(max_order, 0);
    for (const Partial& part : parts)
        for (int k = 0; k < max_order; ++k) {
            order[k].add(part.sums[k]);
            rep.term_counts[k] += part.counts[k];
        }
    CompensatedSum<Real> run;
    for (int k = 0; k < max_order; ++k) {
        run.add(order[k]);
        rep.partial_sums.push_back(run.value());
    }
    return rep;
}

// ---------------------------------------------------------------- Pfister's exp/partition lemma

struct PfisterReport {
    double lhs_literal = 0;   // exp(Σ_X ψ(X)) as a real number
    double rhs = 0;           // 1 + Σ_X Ψ(X), Ψ by its set-partition formula
    double literal_gap = 0;   // |lhs_literal - rhs|
    double nilpotent_lhs = 0; // exp(Σψ) in the algebra where overlapping products vanish
    double nilpotent_gap = 0; // |nilpotent_lhs - rhs|
    double mayer_gap = 0;     // max_X |Ψ(X) - Π z Π 1{compat}|
};

// Y = {0..n-1} with activities z and an incompatibility graph (edge mask over K_n).
inline PfisterReport pfister_exp_check(const std::vector<double>& z, uint64_t incompatible) {
    const int n = static_cast<int>(z.size());
    guard(n >= 0 && n <= 6, "Pfister check limited to |Y| <= 6");
    const uint32_t full = (1u << n) - 1;
    auto local_edges = [&](uint32_t set, std::vector<int>& members) {
        members.clear();
        for (int i = 0; i < n; ++i)
            if (set >> i & 1) members.push_back(i);
        const int k = static_cast<int>(members.size());
        uint64_t e = 0;
        for (int a = 0; a < k; ++a)
            for (int b = a + 1; b < k; ++b)
                if (incompatible >> edge_index(members[a], members[b], n) & 1) e |= uint64_t{1} << edge_index(a, b, k);
        return e;
    };
    std::vector<double> psi(full + 1, 0.0), compat_prod(full + 1, 0.0);
    std::vector<int> members;
    for (uint32_t x = 1; x <= full; ++x) {
        uint64_t e = local_edges(x, members);
        double prod = 1;
        for (int i : members) prod *= z[i];
        psi[x] = static_cast<double>(ursell_graph(static_cast<int>(members.size()), e)) * prod;
        compat_prod[x] = e == 0 ? prod : 0.0;
    }
    // Ψ(X) = Σ over set partitions of X of Π ψ(P_j): fix the block holding min(X)
    std::vector<double> Psi(full + 1, 0.0);
    Psi[0] = 1;
    for (uint32_t x = 1; x <= full; ++x) {
        const uint32_t low = x & (~x + 1);
        const uint32_t rest = x ^ low;
        double s = 0;
        for (uint32_t sub = rest;; sub = (sub - 1) & rest) {
            s += psi[sub | low] * Psi[rest ^ sub];
            if (sub == 0) break;
        }
        Psi[x] = s;
    }
    PfisterReport r;
    CompensatedSum<double> sum_psi, sum_Psi;
    for (uint32_t x = 1; x <= full; ++x) {
        sum_psi.add(psi[x]);
        sum_Psi.add(Psi[x]);
        r.mayer_gap = std::max(r.mayer_gap, std::abs(Psi[x] - compat_prod[x]));
    }
    r.lhs_literal = std::exp(sum_psi.value());
    r.rhs = 1 + sum_Psi.value();
    r.literal_gap = std::abs(r.lhs_literal - r.rhs);
    // exp as a power series of the polynomial Σ ψ(X) e_X with e_A e_B = 0 unless A ∩ B = ∅
    std::vector<double> power(full + 1, 0.0), expo(full + 1, 0.0);
    power[0] = 1;
    expo[0] = 1;
    for (int k = 1; k <= n; ++k) {
        std::vector<double> next(full + 1, 0.0);
        for (uint32_t a = 0; a <= full; ++a) {
            if (power[a] == 0) continue;
            const uint32_t free = full & ~a;
            for (uint32_t b = free; b; b = (b - 1) & free) next[a | b] += power[a] * psi[b] / k;
        }
        power = std::move(next);
        for (uint32_t a = 0; a <= full; ++a) expo[a] += power[a];
    }
    CompensatedSum<double> nil;
    for (uint32_t a = 0; a <= full; ++a) nil.add(expo[a]);
    r.nilpotent_lhs = nil.value();
    r.nilpotent_gap = std::abs(r.nilpotent_lhs - r.rhs);
    return r;
}

// ---------------------------------------------------------------- lemma constants and checks

struct LemmaConstants {
    double c2 = 0;
    double b_star = 0;
    double c3 = 0;
    double c_beta = 0;       // e^{-βc₂/4}/(1 - e^{-βc₂/4})
    double c_beta_half = 0;  // the same at β/2
    bool beta_above_peierls = false;   // β > 32/c₂²
    bool beta_above_decay = false; // β > 8 log(14)/c₂
    bool m_small_c3 = false;           // 4c₃ ≤ c₂
};

inline double c_beta_of(double beta, double c2) {
    double q = std::exp(-beta * c2 / 4);
    return q / (1 - q);
}

inline LemmaConstants lemma_constants(const ModelParams& p) {
    LemmaConstants c;
    const double d = p.d, a = p.alpha;
    c.c2 = peierls_c2(p);
    const double zeta2 = M_PI * M_PI / 6;
    c.b_star = std::max(std::pow(2.0, d + 2 + a) * std::exp(d - 1) / (a - d), 24 * zeta2);
    c.c3 = c.b_star / std::pow(p.M, std::min(a - d, 1.0));
    c.c_beta = c_beta_of(p.beta, c.c2);
    c.c_beta_half = c_beta_of(p.beta / 2, c.c2);
    c.beta_above_peierls = p.beta > 32 / (c.c2 * c.c2);
    c.beta_above_decay = p.beta > 8 * std::log(14.0) / c.c2;
    c.m_small_c3 = 4 * c.c3 <= c.c2;
    return c;
}

// Connected contour shapes with |γ| ≤ n_max, one per translation class (flip pairs excluded).
inline std::vector<Contour> small_contour_shapes(int n_max, const ModelParams& p) {
    n_max = std::min(n_max, contour_size_limit(p.d));
    std::vector<Contour> out;
    std::set<Contour> seen;
    for (const Region& minus : detail::anchored_clusters(p.d, n_max)) {
        Contour g = detail::contour_of_minus_set(minus, p);
        if (g.support.empty() || g.size() > static_cast<std::size_t>(n_max) || !round_trips(g, p)) continue;
        if (seen.insert(g).second) out.push_back(g);
    }
    std::sort(out.begin(), out.end(), [](const Contour& a, const Contour& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    return out;
}

inline Contour translated(const Contour& g, const Site& t) { return make_contour(translate(g.support, t), g.omega); }

// Smallest axial shift making g and h + shift compatible.
inline int compatible_shift(const Contour& g, const Contour& h, const ModelParams& p) {
    double threshold = p.M * std::pow(static_cast<double>(std::min(g.V.size(), h.V.size())), p.partition_exponent());
    int lo = static_cast<int>(std::floor(threshold));
    int span = (g.support.hi().x[0] - g.support.lo().x[0]) + (h.support.hi().x[0] - h.support.lo().x[0]) + 2;
    for (int s = std::max(1, lo - span);; ++s) {
        Site t = origin(p.d);
        t.x[0] = s;
        Contour hh = translated(h, t);
        if (supports_compatible(g, hh, p) && is_mutually_external(g, hh)) return s;
    }
}

struct LemmaKRow {
    double lhs = 0;  // 4 Σ_{γ'∈Γ} F_{γ,γ'}
    double rhs = 0;  // c₃ F_{Ṽ(γ)}
    bool holds() const { return lhs <= rhs; }
};

inline LemmaKRow lemma_K_check(const Contour& g, const Polymer& rest, const ModelParams& p) {
    LatticeSums<double> sums(p);
    LemmaKRow r;
    for (const Contour& o : rest.contours) r.lhs += 4 * sums.cross(g.V_tilde, o.V_tilde);
    r.rhs = lemma_constants(p).c3 * sums.surface(g.V_tilde);
    return r;
}

struct FVolRow {
    double partial_sum = 0;  // Σ e^{-βc₂||γ||/2} F_{γ,γ₀} over the enumerated placements
    double bound = 0;        // c_β F_{sp(γ₀)}
    double tree_partial = 0; // Σ z̃({γ,γ₀}) over the same placements
    double tree_bound = 0;   // 6 c_{β/2} e^{-βc₂||γ₀||/4}
    std::size_t placements = 0;
    bool holds() const { return partial_sum <= bound && tree_partial <= tree_bound; }
};

// One-sided check: γ runs over the given shapes translated to every offset on
// `shells` consecutive l1 shells, starting where compatibility with γ₀ is automatic.
inline FVolRow fvol_check(const Contour& g0, const std::vector<Contour>& shapes, int shells, const ModelParams& p) {
    LatticeSums<double> sums(p);
    const LemmaConstants c = lemma_constants(p);
    const double n0 = contour_norm(g0, sums);
    FVolRow r;
    CompensatedSum<double> s, t;
    for (const Contour& g : shapes) {
        const double ng = contour_norm(g, sums);
        const double wg = std::exp(-p.beta * c.c2 * ng / 2);
        const double threshold =
            p.M * std::pow(static_cast<double>(std::max(g.V.size(), g0.V.size())), p.partition_exponent());
        // |sp(γ₀) - sp(γ+t)| ≥ |t| - diam(V(γ₀)) - diam(V(γ)) - |anchor offsets|
        const int r0 = static_cast<int>(std::ceil(threshold)) + diameter(g.V) + diameter(g0.V) +
                       l1(g.V[0], g0.V[0]) + 1;
        for (int rr = r0; rr < r0 + shells; ++rr)
            for (const Site& off : l1_shell(origin(p.d), rr)) {
                Contour h = translated(g, off);
                const double F = sums.cross(g0.V_tilde, h.V_tilde);
                s.add(wg * F);
                t.add(std::exp(-p.beta * c.c2 * (ng + n0) / 2) * F);
                ++r.placements;
            }
    }
    r.partial_sum = s.value();
    r.bound = c.c_beta * sums.surface(g0.support);
    r.tree_partial = t.value();
    r.tree_bound = 6 * c.c_beta_half * std::exp(-p.beta * c.c2 * n0 / 4);
    return r;
}

}  // namespace lrising
