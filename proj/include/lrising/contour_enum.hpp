#pragma once

#include "lrising/contours.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <vector>

namespace lrising {

// Below this size no realizable boundary contains a minus-correct point, so every
// contour is D ∪ N(D) for its minus set D; beyond two single flips, clusters of
// several pieces would also appear. Both facts make the enumeration exhaustive.
inline int contour_size_limit(int d) { return std::min(2 * d * (d + 1) - 1, 2 * (2 * d + 1)); }

struct EnumerationOptions {
    int max_n = 0;                        // 0 selects contour_size_limit(d)
    std::size_t max_results = 1'000'000;  // materialization cap
};

// Round-trip test: the canonical configuration of g re-extracts to {g}.
inline bool round_trips(const Contour& g, const ModelParams& p) {
    if (g.outer_label != 1) return false;
    auto back = extract_contours(canonical_configuration(g), p);
    return back.size() == 1 && back.front() == g;
}

// D ∪ N(D)
inline Region closed_neighbourhood(const Region& d) {
    std::vector<Site> out(d.begin(), d.end());
    for (const Site& s : d)
        for (const Site& n : neighbours(s)) out.push_back(n);
    return Region(std::move(out));
}

namespace detail {

inline void check_enum_guard(int n, const ModelParams& p, const EnumerationOptions& opt) {
    int limit = contour_size_limit(p.d);
    if (opt.max_n > 0) limit = std::min(limit, opt.max_n);
    guard(n <= limit, "contour enumeration limited to n <= " + std::to_string(limit));
    require(n >= 1, "contour size must be positive");
}

// Minus sets anchored with their smallest site at the origin whose closed
// neighbourhoods form one nearest-neighbour connected set of at most n sites.
inline std::vector<Region> anchored_clusters(int d, int n) {
    std::set<Region> seen;
    std::vector<Region> out;
    Site o = origin(d);
    std::vector<Site> reach;
    for (const Site& s : l1_ball(o, 3))
        if (s != o) reach.push_back(s);
    std::function<void(const Region&)> grow = [&](const Region& cur) {
        if (!seen.insert(cur).second) return;
        out.push_back(cur);
        for (const Site& s : cur)
            for (const Site& r : reach) {
                Site c = s + r;
                if (c <= o || cur.contains(c)) continue;
                Region next = unite(cur, Region{c});
                if (closed_neighbourhood(next).size() <= static_cast<std::size_t>(n)) grow(next);
            }
    };
    if (2 * d + 1 <= n) grow(Region{o});
    return out;
}

inline Contour contour_of_minus_set(const Region& minus, const ModelParams& p) {
    Region win = closed_neighbourhood(minus);
    SpinConfig s = SpinConfig::with_minus(win, minus);
    auto parts = finest_partition(boundary(s), p);
    if (parts.size() != 1) return Contour{};
    return make_contour(parts.front(), s);
}

// Half of the offsets with |t|_1 = r: the first nonzero coordinate is positive.
inline std::vector<Site> half_shell(int d, int r) {
    std::vector<Site> out;
    for (const Site& t : l1_ball(origin(d), r)) {
        if (l1(t, origin(d)) != r) continue;
        int i = 0;
        while (t.x[i] == 0) ++i;
        if (t.x[i] > 0) out.push_back(t);
    }
    return out;
}

inline uint64_t half_shell_count(int d, int r) { return static_cast<uint64_t>(shell_count(d, r) / 2); }

// Calls f(prototype, number of translation classes it represents).
template <class F>
void for_each_prototype(int n, const ModelParams& p, F&& f) {
    for (const Region& minus : anchored_clusters(p.d, n)) {
        if (closed_neighbourhood(minus).size() != static_cast<std::size_t>(n)) continue;
        Contour g = contour_of_minus_set(minus, p);
        if (g.support.size() == static_cast<std::size_t>(n) && round_trips(g, p)) f(g, uint64_t{1});
    }
    if (n != 2 * (2 * p.d + 1)) return;
    // Two single flips at offset t with disjoint, non-adjacent neighbourhoods. Once
    // |t|_1 > d + 2 the two neighbourhoods are not even l-infinity adjacent, so the
    // volume splits and extraction sees t only through |t|_1: one offset per shell
    // stands for the whole shell. Closer offsets are visited one by one.
    Site o = origin(p.d);
    double threshold = p.M * std::pow(2.0 * p.d + 1, p.partition_exponent());
    int r_max = static_cast<int>(std::floor(threshold)) + 2;
    for (int r = 4; r <= r_max; ++r) {
        if (r <= p.d + 2) {
            for (const Site& t : half_shell(p.d, r)) {
                Contour g = contour_of_minus_set(Region{o, t}, p);
                if (g.support.size() == static_cast<std::size_t>(n) && round_trips(g, p)) f(g, uint64_t{1});
            }
            continue;
        }
        Site t = o;
        t.x[0] = r;
        Contour g = contour_of_minus_set(Region{o, t}, p);
        if (g.support.size() == static_cast<std::size_t>(n) && round_trips(g, p)) f(g, half_shell_count(p.d, r));
    }
}

}  // namespace detail

// |C_x(n)|: contours with |gamma| = n and x in V(gamma), counted in Z^d without
// materializing them. Independent of x.
inline uint64_t count_contours(int n, const ModelParams& p, const EnumerationOptions& opt = {}) {
    p.validate();
    detail::check_enum_guard(n, p, opt);
    uint64_t total = 0;
    detail::for_each_prototype(n, p, [&](const Contour& g, uint64_t classes) { total += classes * g.V.size(); });
    return total;
}

// C_x(n) itself, sorted.
inline std::vector<Contour> enumerate_contours(const Site& x, int n, const ModelParams& p,
                                               const EnumerationOptions& opt = {}) {
    p.validate();
    require(x.dim == p.d, "site dimension differs from the model dimension");
    detail::check_enum_guard(n, p, opt);
    uint64_t expected = count_contours(n, p, opt);
    guard(expected <= opt.max_results,
          "C_x(" + std::to_string(n) + ") has " + std::to_string(expected) + " contours, above the cap");
    std::vector<Contour> out;
    auto emit = [&](const Contour& g) {
        for (const Site& v : g.V) {
            Site shift = x - v;
            Contour h = make_contour(translate(g.support, shift), g.omega);
            out.push_back(std::move(h));
        }
    };
    Site o = origin(p.d);
    for (const Region& minus : detail::anchored_clusters(p.d, n)) {
        if (closed_neighbourhood(minus).size() != static_cast<std::size_t>(n)) continue;
        Contour g = detail::contour_of_minus_set(minus, p);
        if (g.support.size() == static_cast<std::size_t>(n) && round_trips(g, p)) emit(g);
    }
    if (n == 2 * (2 * p.d + 1)) {
        double threshold = p.M * std::pow(2.0 * p.d + 1, p.partition_exponent());
        int r_max = static_cast<int>(std::floor(threshold)) + 2;
        for (int r = 4; r <= r_max; ++r)
            for (const Site& t : detail::half_shell(p.d, r)) {
                Contour g = detail::contour_of_minus_set(Region{o, t}, p);
                if (g.support.size() == static_cast<std::size_t>(n) && round_trips(g, p)) emit(g);
            }
    }
    std::sort(out.begin(), out.end());
    if (out.size() != expected)
        throw InvariantViolation("contour enumeration found " + std::to_string(out.size()) + " contours, count gives " +
                                 std::to_string(expected));
    return out;
}

struct EntropyRow {
    int n = 0;
    uint64_t count = 0;
    double log_count_over_n = 0;  // NaN when the class is empty
};

inline std::vector<EntropyRow> entropy_profile(int n_max, const ModelParams& p, const EnumerationOptions& opt = {}) {
    std::vector<EntropyRow> rows;
    for (int n = 1; n <= n_max; ++n) {
        EntropyRow r;
        r.n = n;
        r.count = count_contours(n, p, opt);
        r.log_count_over_n = r.count ? std::log(static_cast<double>(r.count)) / n : std::nan("");
        rows.push_back(r);
    }
    return rows;
}

}  // namespace lrising
