#pragma once

#include "lrising/errors.hpp"
#include "lrising/numeric.hpp"

#include <algorithm>
#include <array>
#include <climits>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace lrising {

inline constexpr int kMaxDim = 4;

struct Site {
    int dim = 0;
    std::array<int, kMaxDim> x{};

    int operator[](int i) const { return x[i]; }
    int& operator[](int i) { return x[i]; }
    auto operator<=>(const Site&) const = default;
};

inline Site make_site(std::initializer_list<int> coords) {
    require(coords.size() >= 1 && coords.size() <= kMaxDim, "site dimension out of range");
    Site s;
    s.dim = static_cast<int>(coords.size());
    int i = 0;
    for (int c : coords) s.x[i++] = c;
    return s;
}

inline Site origin(int d) {
    require(d >= 1 && d <= kMaxDim, "site dimension out of range");
    Site s;
    s.dim = d;
    return s;
}

inline Site unit(int d, int axis, int sign = 1) {
    Site s = origin(d);
    s.x[axis] = sign;
    return s;
}

inline Site operator+(Site a, const Site& b) {
    for (int i = 0; i < a.dim; ++i) a.x[i] += b.x[i];
    return a;
}

inline Site operator-(Site a, const Site& b) {
    for (int i = 0; i < a.dim; ++i) a.x[i] -= b.x[i];
    return a;
}

inline int l1(const Site& a, const Site& b) {
    int s = 0;
    for (int i = 0; i < a.dim; ++i) s += std::abs(a.x[i] - b.x[i]);
    return s;
}

inline std::string to_string(const Site& s) {
    std::string out = "(";
    for (int i = 0; i < s.dim; ++i) {
        if (i) out += ",";
        out += std::to_string(s.x[i]);
    }
    return out + ")";
}

// The 2d nearest neighbours of x.
inline std::vector<Site> neighbours(const Site& x) {
    std::vector<Site> out;
    out.reserve(2 * x.dim);
    for (int i = 0; i < x.dim; ++i)
        for (int s : {-1, 1}) {
            Site y = x;
            y.x[i] += s;
            out.push_back(y);
        }
    return out;
}

struct ModelParams {
    int d = 2;
    double alpha = 3.0;
    double J = 1.0;
    double beta = 1.0;
    double M = 8.0;
    std::optional<double> a;
    double tail_tol = 1e-8;
    double diam_const = 1.0;

    static double default_a(int d, double alpha) {
        return 3.0 * (d + 1) / std::min(alpha - d, 1.0);
    }
    double a_value() const { return a ? *a : default_a(d, alpha); }
    // Exponent in condition (B): M * min|V|^{a/(d+1)}.
    double partition_exponent() const { return a_value() / (d + 1); }

    void validate() const {
        if (d < 2 || d > kMaxDim) throw ConfigError("d must lie in [2, " + std::to_string(kMaxDim) + "]");
        if (!(alpha > d)) throw ConfigError("alpha must exceed d");
        if (!(J >= 0)) throw ConfigError("J must be non-negative");
        if (!(beta >= 0)) throw ConfigError("beta must be non-negative");
        if (!(M > 1)) throw ConfigError("M must exceed 1");
        if (a && !(*a >= default_a(d, alpha) - 1e-12)) throw ConfigError("a below its default value");
        if (!(tail_tol > 0 && tail_tol < 1)) throw ConfigError("tail_tol must lie in (0,1)");
        if (!(diam_const > 0)) throw ConfigError("diam_const must be positive");
    }
};

inline double coupling(const Site& x, const Site& y, const ModelParams& p) {
    require(x.dim == p.d && y.dim == p.d, "site dimension does not match model dimension");
    int r = l1(x, y);
    if (r == 0) return 0.0;
    return p.J / std::pow(static_cast<double>(r), p.alpha);
}

// Finite set of sites kept sorted and deduplicated, with a cached bounding box.
class Region {
public:
    Region() = default;
    explicit Region(std::vector<Site> sites) : sites_(std::move(sites)) {
        std::sort(sites_.begin(), sites_.end());
        sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
        finish();
    }
    Region(std::initializer_list<Site> sites) : Region(std::vector<Site>(sites)) {}

    static Region from_sorted(std::vector<Site> sites) {
        Region r;
        r.sites_ = std::move(sites);
        r.finish();
        return r;
    }

    std::size_t size() const { return sites_.size(); }
    bool empty() const { return sites_.empty(); }
    int dim() const { return sites_.empty() ? 0 : sites_.front().dim; }
    const std::vector<Site>& sites() const { return sites_; }
    auto begin() const { return sites_.begin(); }
    auto end() const { return sites_.end(); }
    const Site& operator[](std::size_t i) const { return sites_[i]; }
    const Site& lo() const { return lo_; }
    const Site& hi() const { return hi_; }

    bool contains(const Site& s) const { return std::binary_search(sites_.begin(), sites_.end(), s); }
    // Position of s in the sorted list, or -1.
    long index_of(const Site& s) const {
        auto it = std::lower_bound(sites_.begin(), sites_.end(), s);
        if (it == sites_.end() || *it != s) return -1;
        return static_cast<long>(it - sites_.begin());
    }

    bool operator==(const Region& o) const { return sites_ == o.sites_; }
    bool operator<(const Region& o) const { return sites_ < o.sites_; }

private:
    void finish() {
        if (sites_.empty()) return;
        int d = sites_.front().dim;
        lo_ = hi_ = sites_.front();
        for (const Site& s : sites_) {
            require(s.dim == d, "mixed dimensions in region");
            for (int i = 0; i < d; ++i) {
                lo_.x[i] = std::min(lo_.x[i], s.x[i]);
                hi_.x[i] = std::max(hi_.x[i], s.x[i]);
            }
        }
    }

    std::vector<Site> sites_;
    Site lo_{}, hi_{};
};

inline std::ostream& operator<<(std::ostream& os, const Region& r) {
    os << '{';
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? " " : "") << to_string(r[i]);
    return os << '}';
}

inline Region unite(const Region& a, const Region& b) {
    std::vector<Site> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return Region::from_sorted(std::move(out));
}

inline Region subtract(const Region& a, const Region& b) {
    std::vector<Site> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return Region::from_sorted(std::move(out));
}

inline Region intersect(const Region& a, const Region& b) {
    std::vector<Site> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return Region::from_sorted(std::move(out));
}

inline bool is_subset(const Region& a, const Region& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline bool disjoint(const Region& a, const Region& b) {
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i < *j)
            ++i;
        else if (*j < *i)
            ++j;
        else
            return false;
    }
    return true;
}

inline Region translate(const Region& a, const Site& t) {
    std::vector<Site> out;
    out.reserve(a.size());
    for (const Site& s : a) out.push_back(s + t);
    return Region::from_sorted(std::move(out));
}

// Lower bound on the l1 distance between two regions from their boxes.
inline int box_distance(const Region& a, const Region& b) {
    int s = 0;
    for (int i = 0; i < a.dim(); ++i) {
        if (b.lo()[i] > a.hi()[i])
            s += b.lo()[i] - a.hi()[i];
        else if (a.lo()[i] > b.hi()[i])
            s += a.lo()[i] - b.hi()[i];
    }
    return s;
}

inline int region_distance(const Region& a, const Region& b) {
    if (a.empty() || b.empty()) return INT_MAX;
    int floor = box_distance(a, b);
    int best = INT_MAX;
    for (const Site& x : a)
        for (const Site& y : b) {
            best = std::min(best, l1(x, y));
            if (best == floor) return best;
        }
    return best;
}

inline int diameter(const Region& a) {
    int best = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) best = std::max(best, l1(a[i], a[j]));
    return best;
}

inline Region l1_ball(const Site& c, int R) {
    std::vector<Site> out;
    int d = c.dim;
    Site s = c;
    std::function<void(int, int)> rec = [&](int axis, int budget) {
        if (axis == d) {
            out.push_back(s);
            return;
        }
        for (int v = -budget; v <= budget; ++v) {
            s.x[axis] = c.x[axis] + v;
            rec(axis + 1, budget - std::abs(v));
        }
    };
    rec(0, R);
    return Region(std::move(out));
}

// Sites at l1 distance exactly R from c.
inline std::vector<Site> l1_shell(const Site& c, int R) {
    std::vector<Site> out;
    int d = c.dim;
    Site s = c;
    std::function<void(int, int)> rec = [&](int axis, int budget) {
        if (axis == d - 1) {
            s.x[axis] = c.x[axis] + budget;
            out.push_back(s);
            if (budget != 0) {
                s.x[axis] = c.x[axis] - budget;
                out.push_back(s);
            }
            return;
        }
        for (int v = -budget; v <= budget; ++v) {
            s.x[axis] = c.x[axis] + v;
            rec(axis + 1, budget - std::abs(v));
        }
    };
    rec(0, R);
    return out;
}

inline Region box_region(const Site& lo, const Site& hi) {
    std::vector<Site> out;
    Site s = lo;
    int d = lo.dim;
    std::function<void(int)> rec = [&](int axis) {
        if (axis == d) {
            out.push_back(s);
            return;
        }
        for (int v = lo.x[axis]; v <= hi.x[axis]; ++v) {
            s.x[axis] = v;
            rec(axis + 1);
        }
    };
    rec(0);
    return Region::from_sorted(std::move(out));
}

// Dense grid over a box; index order matches Site ordering.
class BoxGrid {
public:
    BoxGrid(const Site& lo, const Site& hi) : lo_(lo), d_(lo.dim) {
        total_ = 1;
        for (int i = d_ - 1; i >= 0; --i) {
            ext_[i] = hi.x[i] - lo.x[i] + 1;
            stride_[i] = total_;
            total_ *= ext_[i];
        }
    }
    std::size_t size() const { return total_; }
    bool inside(const Site& s) const {
        for (int i = 0; i < d_; ++i)
            if (s.x[i] < lo_.x[i] || s.x[i] >= lo_.x[i] + static_cast<long>(ext_[i])) return false;
        return true;
    }
    std::size_t index(const Site& s) const {
        std::size_t k = 0;
        for (int i = 0; i < d_; ++i) k += static_cast<std::size_t>(s.x[i] - lo_.x[i]) * stride_[i];
        return k;
    }
    Site site(std::size_t k) const {
        Site s = origin(d_);
        for (int i = 0; i < d_; ++i) {
            s.x[i] = lo_.x[i] + static_cast<int>(k / stride_[i]);
            k %= stride_[i];
        }
        return s;
    }
    // Calls f(neighbour index) for in-box neighbours of cell k.
    template <class F>
    void for_neighbours(std::size_t k, F&& f) const {
        for (int i = 0; i < d_; ++i) {
            std::size_t c = (k / stride_[i]) % ext_[i];
            if (c > 0) f(k - stride_[i]);
            if (c + 1 < ext_[i]) f(k + stride_[i]);
        }
    }

private:
    Site lo_;
    int d_;
    std::array<std::size_t, kMaxDim> ext_{}, stride_{};
    std::size_t total_ = 0;
};

inline std::pair<Site, Site> padded_box(const Region& a, int pad) {
    Site lo = a.lo(), hi = a.hi();
    for (int i = 0; i < a.dim(); ++i) {
        lo.x[i] -= pad;
        hi.x[i] += pad;
    }
    return {lo, hi};
}

namespace detail {

// Connected components over the sorted site list; star = true uses the
// l-infinity neighbourhood instead of nearest neighbours.
inline std::vector<Region> site_components(const Region& a, bool star) {
    std::vector<Region> out;
    if (a.empty()) return out;
    const int d = a.dim();
    std::vector<Site> offsets;
    if (star) {
        int total = 1;
        for (int i = 0; i < d; ++i) total *= 3;
        for (int code = 0; code < total; ++code) {
            Site o = origin(d);
            int c = code;
            for (int i = 0; i < d; ++i) {
                o.x[i] = c % 3 - 1;
                c /= 3;
            }
            if (o != origin(d)) offsets.push_back(o);
        }
    } else {
        for (int i = 0; i < d; ++i) {
            offsets.push_back(unit(d, i, 1));
            offsets.push_back(unit(d, i, -1));
        }
    }
    std::vector<int> comp(a.size(), -1);
    std::vector<std::vector<Site>> parts;
    for (std::size_t i0 = 0; i0 < a.size(); ++i0) {
        if (comp[i0] >= 0) continue;
        int id = static_cast<int>(parts.size());
        parts.emplace_back();
        std::vector<std::size_t> stack{i0};
        comp[i0] = id;
        while (!stack.empty()) {
            std::size_t k = stack.back();
            stack.pop_back();
            parts[id].push_back(a[k]);
            for (const Site& o : offsets) {
                long n = a.index_of(a[k] + o);
                if (n >= 0 && comp[n] < 0) {
                    comp[n] = id;
                    stack.push_back(static_cast<std::size_t>(n));
                }
            }
        }
    }
    for (auto& p : parts) out.emplace_back(std::move(p));
    return out;
}

inline Region volume_dense(const Region& a) {
    auto [lo, hi] = padded_box(a, 1);
    BoxGrid g(lo, hi);
    std::vector<uint8_t> mark(g.size(), 0);  // 1 = in A, 2 = reached from outside
    for (const Site& s : a) mark[g.index(s)] = 1;
    std::vector<std::size_t> stack{0};
    mark[0] = 2;
    while (!stack.empty()) {
        std::size_t k = stack.back();
        stack.pop_back();
        g.for_neighbours(k, [&](std::size_t n) {
            if (mark[n] == 0) {
                mark[n] = 2;
                stack.push_back(n);
            }
        });
    }
    std::vector<Site> out;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (mark[k] != 2) out.push_back(g.site(k));
    return Region::from_sorted(std::move(out));
}

inline std::size_t box_cells(const Region& a) {
    std::size_t n = 1;
    for (int i = 0; i < a.dim(); ++i) n *= static_cast<std::size_t>(a.hi().x[i] - a.lo().x[i] + 3);
    return n;
}

}  // namespace detail

// l-infinity connected components, ordered by their smallest site.
inline std::vector<Region> star_components(const Region& a) { return detail::site_components(a, true); }

// V(A): complement of the unbounded nearest-neighbour component of A^c.
// A bounded hole of A^c is enclosed by a single l-infinity component of A, so
// sparse sets are handled one component at a time.
inline Region volume(const Region& a) {
    if (a.empty()) return {};
    if (detail::box_cells(a) > 64 * a.size() + 4096) {
        auto parts = star_components(a);
        if (parts.size() > 1) {
            Region out;
            for (const Region& part : parts) out = unite(out, volume(part));
            return out;
        }
    }
    return detail::volume_dense(a);
}

inline Region interior(const Region& a) { return subtract(volume(a), a); }

// Nearest-neighbour connected components, ordered by their smallest site.
inline std::vector<Region> components(const Region& a) { return detail::site_components(a, false); }

// Sites of a with a nearest neighbour outside a.
inline Region inner_boundary(const Region& a) {
    std::vector<Site> out;
    for (const Site& s : a)
        for (const Site& n : neighbours(s))
            if (!a.contains(n)) {
                out.push_back(s);
                break;
            }
    return Region::from_sorted(std::move(out));
}

// Sites outside a with a nearest neighbour in a.
inline Region outer_boundary(const Region& a) {
    std::vector<Site> out;
    for (const Site& s : a)
        for (const Site& n : neighbours(s))
            if (!a.contains(n)) out.push_back(n);
    return Region(std::move(out));
}

// Number of sites at l1 distance exactly n from the origin in Z^d.
inline int64_t shell_count(int d, int64_t n) {
    if (n == 0) return 1;
    auto binom = [](int64_t m, int64_t k) -> int64_t {
        if (k < 0 || k > m) return 0;
        int64_t r = 1;
        for (int64_t i = 1; i <= k; ++i) r = r * (m - k + i) / i;
        return r;
    };
    int64_t s = 0;
    for (int k = 1; k <= d && k <= n; ++k) s += (int64_t{1} << k) * binom(d, k) * binom(n - 1, k - 1);
    return s;
}

namespace detail {

// Integer coefficients c_j with shell_count(d, n) = sum_j c_j n^j / (d-1)!.
inline std::vector<int64_t> shell_polynomial(int d) {
    std::vector<int64_t> total(d, 0);
    int64_t dfact = 1;
    for (int i = 2; i <= d - 1; ++i) dfact *= i;
    for (int k = 1; k <= d; ++k) {
        // (k-1)! C(n-1, k-1) = prod_{i=1}^{k-1} (n - i)
        std::vector<int64_t> poly{1};
        int64_t fact = 1;
        for (int i = 1; i <= k - 1; ++i) {
            std::vector<int64_t> next(poly.size() + 1, 0);
            for (std::size_t j = 0; j < poly.size(); ++j) {
                next[j + 1] += poly[j];
                next[j] -= i * poly[j];
            }
            poly = next;
            fact *= i;
        }
        int64_t binom_dk = 1;
        for (int i = 1; i <= k; ++i) binom_dk = binom_dk * (d - k + i) / i;
        int64_t scale = (int64_t{1} << k) * binom_dk * (dfact / fact);
        for (std::size_t j = 0; j < poly.size(); ++j) total[j] += scale * poly[j];
    }
    return total;
}

}  // namespace detail

// sum_{y != 0} |y|_1^{-alpha}: exact shells up to N-1, Euler-Maclaurin tail from N.
template <class Real>
Real lattice_zeta(int d, double alpha, double tail_tol, Real* error_out = nullptr) {
    static std::mutex mu;
    static std::map<std::pair<int, double>, std::pair<Real, Real>> cache;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find({d, alpha});
        if (it != cache.end()) {
            if (error_out) *error_out = it->second.second;
            return it->second.first;
        }
    }
    const std::vector<int64_t> poly = detail::shell_polynomial(d);
    Real dfact{1};
    for (int i = 2; i <= d - 1; ++i) dfact *= Real(i);
    const Real A = Real(alpha);
    // Bernoulli numbers B_2 .. B_14 as exact ratios.
    const double bnum[] = {1, -1, 1, -1, 5, -691, 7};
    const double bden[] = {6, 30, 42, 30, 66, 2730, 6};
    int64_t N = 512;
    Real value{0}, err{0};
    for (;;) {
        CompensatedSum<Real> head;
        for (int64_t n = N - 1; n >= 1; --n) head.add(Real(shell_count(d, n)) * rpow(Real(n), -A));
        CompensatedSum<Real> tail;
        Real last{0};
        const Real Nr = Real(N);
        for (std::size_t j = 0; j < poly.size(); ++j) {
            if (poly[j] == 0) continue;
            const Real c = Real(static_cast<double>(poly[j])) / dfact;
            const Real p = Real(static_cast<double>(j)) - A;
            tail.add(-c * rpow(Nr, p + 1) / (p + 1));
            tail.add(c * rpow(Nr, p) / 2);
            // (2k-1)-th derivative of n^p at N.
            Real fall{1};
            int order = 0;
            double factorial = 1.0;
            for (int k = 1; k <= 7; ++k) {
                while (order < 2 * k - 1) {
                    fall *= (p - Real(order));
                    ++order;
                }
                factorial *= (2.0 * k - 1) * (2.0 * k);
                Real term = -Real(bnum[k - 1]) / (Real(bden[k - 1]) * Real(factorial)) * c * fall * rpow(Nr, p - Real(order));
                tail.add(term);
                if (k == 7) last += rabs(term);
            }
        }
        value = head.value() + tail.value();
        err = last;
        if (err <= Real(tail_tol) * value * Real(1e-6) || N > (int64_t{1} << 20)) break;
        N *= 2;
    }
    std::lock_guard<std::mutex> lock(mu);
    cache[{d, alpha}] = {value, err};
    if (error_out) *error_out = err;
    return value;
}

// Ordered pair counts by l1 distance between two regions, excluding coincident sites.
struct DistanceHistogram {
    std::vector<int64_t> count;

    template <class Real>
    Real weighted(double alpha) const {
        CompensatedSum<Real> s;
        for (std::size_t r = count.size(); r-- > 1;)
            if (count[r]) s.add(Real(count[r]) * rpow(Real(static_cast<double>(r)), Real(-alpha)));
        return s.value();
    }
};

namespace detail {

struct Line {
    Site key;  // last coordinate zeroed
    std::vector<std::pair<int, int>> runs;
};

inline std::vector<Line> lines_of(const Region& a) {
    std::vector<Line> out;
    if (a.empty()) return out;
    int d = a.dim();
    for (const Site& s : a) {
        Site k = s;
        k.x[d - 1] = 0;
        int v = s.x[d - 1];
        if (out.empty() || out.back().key != k) out.push_back({k, {}});
        auto& runs = out.back().runs;
        if (!runs.empty() && runs.back().second + 1 == v)
            runs.back().second = v;
        else
            runs.push_back({v, v});
    }
    return out;
}

}  // namespace detail

inline DistanceHistogram distance_histogram(const Region& a, const Region& b) {
    DistanceHistogram h;
    if (a.empty() || b.empty()) return h;
    int d = a.dim();
    int span = 0;
    for (int i = 0; i < d; ++i)
        span += std::max(a.hi()[i], b.hi()[i]) - std::min(a.lo()[i], b.lo()[i]);
    h.count.assign(span + 1, 0);
    auto la = detail::lines_of(a);
    auto lb = detail::lines_of(b);
    for (const auto& p : la)
        for (const auto& q : lb) {
            int t = 0;
            for (int i = 0; i < d - 1; ++i) t += std::abs(p.key.x[i] - q.key.x[i]);
            for (auto [a1, a2] : p.runs)
                for (auto [b1, b2] : q.runs)
                    for (int delta = b1 - a2; delta <= b2 - a1; ++delta) {
                        int c = std::min(a2, b2 - delta) - std::max(a1, b1 - delta) + 1;
                        if (c <= 0) continue;
                        int r = t + std::abs(delta);
                        if (r == 0) continue;
                        h.count[r] += c;
                    }
        }
    return h;
}

// Exterior sums share one truncation of the lattice constant, so identities between
// energies built from it hold to rounding error.
template <class Real = double>
class LatticeSums {
public:
    explicit LatticeSums(const ModelParams& p) : p_(p) {
        p_.validate();
        zeta_ = lattice_zeta<Real>(p.d, p.alpha, p.tail_tol, &zeta_err_);
        table_.resize(kTable);
        for (int r = 1; r < kTable; ++r) table_[r] = rpow(Real(r), Real(-p.alpha));
    }

    const ModelParams& params() const { return p_; }
    Real J() const { return Real(p_.J); }
    Real zeta() const { return zeta_; }
    Real zeta_error() const { return zeta_err_; }

    Real inv_pow(int r) const {
        if (r < kTable) return table_[r];
        return rpow(Real(r), Real(-p_.alpha));
    }
    Real coupling(const Site& x, const Site& y) const {
        int r = l1(x, y);
        return r == 0 ? Real(0) : J() * inv_pow(r);
    }
    Real weighted(const DistanceHistogram& h) const {
        CompensatedSum<Real> s;
        for (std::size_t r = h.count.size(); r-- > 1;)
            if (h.count[r]) s.add(Real(h.count[r]) * inv_pow(static_cast<int>(r)));
        return s.value();
    }

    // sum over x in a, y in b, x != y of J_xy.
    Real cross(const Region& a, const Region& b) const {
        if (a.empty() || b.empty()) return Real(0);
        if (a.size() * b.size() <= 4096) {
            CompensatedSum<Real> s;
            for (const Site& x : a)
                for (const Site& y : b) {
                    int r = l1(x, y);
                    if (r) s.add(inv_pow(r));
                }
            return J() * s.value();
        }
        return J() * weighted(distance_histogram(a, b));
    }

    // sum over y outside a of J_xy.
    Real exterior(const Site& x, const Region& a) const {
        CompensatedSum<Real> s;
        for (const Site& y : a) {
            int r = l1(x, y);
            if (r) s.add(inv_pow(r));
        }
        return J() * (zeta_ - s.value());
    }

    // F_A = sum_{x in A, y not in A} J_xy.
    Real surface(const Region& a) const {
        if (a.empty()) return Real(0);
        return J() * Real(static_cast<double>(a.size())) * zeta_ - cross(a, a);
    }
    Real surface_error(const Region& a) const {
        return J() * Real(static_cast<double>(a.size())) * zeta_err_;
    }

    // F_{A,B}; the regions must be disjoint.
    Real pair(const Region& a, const Region& b) const {
        require(disjoint(a, b), "pair surface energy needs disjoint regions");
        return cross(a, b);
    }

private:
    static constexpr int kTable = 8192;
    ModelParams p_;
    Real zeta_{0}, zeta_err_{0};
    std::vector<Real> table_;
};

inline double surface_energy(const Region& a, const ModelParams& p) {
    return LatticeSums<double>(p).surface(a);
}

inline double pair_surface_energy(const Region& a, const Region& b, const ModelParams& p) {
    return LatticeSums<double>(p).pair(a, b);
}

enum class Regime { kSubcritical, kCritical, kSupercritical };

inline Regime regime_of(int d, double alpha) {
    if (std::abs(alpha - (d + 1)) < 1e-12) return Regime::kCritical;
    return alpha < d + 1 ? Regime::kSubcritical : Regime::kSupercritical;
}

inline double regime_prediction(int d, double alpha, double R) {
    switch (regime_of(d, alpha)) {
        case Regime::kSubcritical: return std::pow(R, 2.0 * d - alpha);
        case Regime::kCritical: return std::pow(R, d - 1.0) * std::log(R);
        default: return std::pow(R, d - 1.0);
    }
}

struct RegimeRow {
    int R;
    double F;
    double prediction;
    double ratio;
};

inline std::vector<RegimeRow> regime_scan(const ModelParams& p, const std::vector<int>& radii) {
    for (std::size_t i = 0; i < radii.size(); ++i) {
        require(radii[i] > 0, "radii must be positive");
        if (i) require(radii[i] > radii[i - 1], "radii must increase");
    }
    LatticeSums<double> sums(p);
    std::vector<RegimeRow> rows;
    for (int R : radii) {
        Region ball = l1_ball(origin(p.d), R);
        double F = sums.surface(ball);
        double pred = regime_prediction(p.d, p.alpha, R);
        rows.push_back({R, F, pred, F / pred});
    }
    return rows;
}

}  // namespace lrising
