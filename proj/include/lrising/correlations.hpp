#pragma once

#include "lrising/oracle.hpp"
#include "lrising/polymer.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace lrising {

struct DecayPair {
    Site x1, x2;
    int distance = 0;
    double correlation = 0;
    double J_value = 0;
    double ratio = 0;  // correlation / J
};

struct DecayReport {
    std::vector<DecayPair> pairs;
    double fitted_slope = std::numeric_limits<double>::quiet_NaN();
    double slope_without_farthest = std::numeric_limits<double>::quiet_NaN();
    double alpha_ref = 0;
    double c4_emp = 0;   // max ratio
    double c_emp = 0;    // min ratio
    bool degenerate = false;  // some correlation is not positive, no log-log fit
    bool monotone = true;     // nonincreasing in distance

    double slope_shift() const { return std::abs(fitted_slope - slope_without_farthest); }
};

// Ordinary least squares slope of y against x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() >= 2, "slope fit needs at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

// ⟨σ_{x0}; σ_{x0 + t e_1}⟩ for t = 2..max_dist, all from one exhaustive sweep.
inline DecayReport decay_scan(const Region& lambda, const Site& x0, int max_dist, const ModelParams& p,
                              const OracleOptions& opt = {}) {
    require(max_dist >= 3, "decay scan needs distances 2..max_dist with max_dist >= 3");
    require(lambda.contains(x0), "x0 outside the window");
    std::vector<Site> targets;
    for (int t = 2; t <= max_dist; ++t) {
        Site x = x0;
        x.x[0] += t;
        require(lambda.contains(x), "scan site " + to_string(x) + " outside the window");
        targets.push_back(x);
    }
    std::vector<MinusExpansion> fs{expand_observable(ObservableSpec::spin(x0), lambda)};
    for (const Site& x : targets) fs.push_back(expand_observable(ObservableSpec::spin(x), lambda));
    std::vector<uint64_t> events;
    const uint64_t m0 = detail::site_mask(lambda, x0);
    events.push_back(m0);
    for (const Site& x : targets) {
        events.push_back(detail::site_mask(lambda, x));
        events.push_back(m0 | detail::site_mask(lambda, x));
    }
    OracleSweep<double> sweep(lambda, {}, p, events, opt);
    DecayReport rep;
    rep.alpha_ref = p.alpha;
    LatticeSums<double> sums(p);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        DecayPair d;
        d.x1 = x0;
        d.x2 = targets[i];
        d.distance = l1(x0, targets[i]);
        d.correlation = sweep.covariance(fs[0], fs[i + 1]);
        d.J_value = sums.coupling(x0, targets[i]);
        d.ratio = d.correlation / d.J_value;
        rep.pairs.push_back(d);
    }
    rep.c4_emp = -INFINITY;
    rep.c_emp = INFINITY;
    for (std::size_t i = 0; i < rep.pairs.size(); ++i) {
        const DecayPair& d = rep.pairs[i];
        rep.c4_emp = std::max(rep.c4_emp, d.ratio);
        rep.c_emp = std::min(rep.c_emp, d.ratio);
        if (!(d.correlation > 0)) rep.degenerate = true;
        if (i > 0 && d.correlation > rep.pairs[i - 1].correlation) rep.monotone = false;
    }
    if (!rep.degenerate) {
        std::vector<double> lx, ly;
        for (const DecayPair& d : rep.pairs) {
            lx.push_back(std::log(static_cast<double>(d.distance)));
            ly.push_back(std::log(d.correlation));
        }
        rep.fitted_slope = ols_slope(lx, ly);
        if (lx.size() >= 3) {
            lx.pop_back();
            ly.pop_back();
            rep.slope_without_farthest = ols_slope(lx, ly);
        }
    }
    return rep;
}

// f = Σ_A f_A n_A with n_A = Π_{x∈A} (1 + σ_x)/2, keyed by site masks in lambda.
inline std::map<uint64_t, double> occupation_expansion(const ObservableSpec& f, const Region& lambda) {
    std::vector<uint64_t> bits;
    for (const Site& x : f.sites) bits.push_back(detail::site_mask(lambda, x));
    const std::size_t k = bits.size();
    require(k <= 16, "observable support too large");
    std::vector<double> c(std::size_t{1} << k);
    std::vector<int> spins(k);
    for (std::size_t s = 0; s < c.size(); ++s) {  // s = plus pattern
        for (std::size_t i = 0; i < k; ++i) spins[i] = (s >> i & 1) ? 1 : -1;
        c[s] = f.value(spins);
    }
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t s = 0; s < c.size(); ++s)
            if (s >> i & 1) c[s] -= c[s ^ (std::size_t{1} << i)];
    std::map<uint64_t, double> out;
    for (std::size_t s = 0; s < c.size(); ++s) {
        if (c[s] == 0.0) continue;
        uint64_t m = 0;
        for (std::size_t i = 0; i < k; ++i)
            if (s >> i & 1) m |= bits[i];
        out[m] += c[s];
    }
    return out;
}

struct LocalCorrelation {
    double value = 0;                 // ⟨f;g⟩ directly
    double value_from_expansion = 0;  // Σ f_A g_B ⟨n_A;n_B⟩
    double bound = 0;                 // J C_{f,g} / dist^α
    double c4 = 0;
    double norm_f = 0, norm_g = 0;    // max |f_A|, max |g_B|
    int distance = 0;
    bool lebowitz_holds = true;       // ⟨n_A;n_B⟩ ≤ Σ_{x∈A,y∈B} ⟨n_x;n_y⟩ for all A, B
    double lebowitz_worst = -INFINITY;  // max of lhs - rhs
    bool holds() const { return value <= bound && lebowitz_holds; }
};

inline MinusExpansion occupation_minus_expansion(uint64_t a) {
    // n_A = Π (1 - m_x) = Σ_{B⊆A} (-1)^{|B|} m_B
    MinusExpansion e;
    for (uint64_t b = a;; b = (b - 1) & a) {
        e.coeff[b] += (std::popcount(b) % 2) ? -1.0 : 1.0;
        if (b == 0) break;
    }
    return e;
}

inline LocalCorrelation local_function_correlation(const ObservableSpec& f, const ObservableSpec& g,
                                                   const Region& lambda, const ModelParams& p, double c4,
                                                   const OracleOptions& opt = {}) {
    require(!f.sites.empty() && !g.sites.empty(), "local functions need nonempty supports");
    require(f.sites.size() <= 4 && g.sites.size() <= 4, "supports limited to 4 sites");
    Region sf(f.sites), sg(g.sites);
    require(disjoint(sf, sg), "supports of f and g overlap");
    auto fa = occupation_expansion(f, lambda), gb = occupation_expansion(g, lambda);
    uint64_t all = 0;
    for (const Site& x : sf) all |= detail::site_mask(lambda, x);
    for (const Site& x : sg) all |= detail::site_mask(lambda, x);
    std::vector<uint64_t> events;
    for (uint64_t b = all; b; b = (b - 1) & all) events.push_back(b);
    OracleSweep<double> sweep(lambda, {}, p, events, opt);

    LocalCorrelation out;
    out.c4 = c4;
    out.value = sweep.covariance(expand_observable(f, lambda), expand_observable(g, lambda));
    auto nn = [&](uint64_t a, uint64_t b) {
        return sweep.covariance(occupation_minus_expansion(a), occupation_minus_expansion(b));
    };
    CompensatedSum<double> ex;
    for (auto [a, ca] : fa) {
        out.norm_f = std::max(out.norm_f, std::abs(ca));
        for (auto [b, cb] : gb) {
            if (a == 0 || b == 0) continue;
            const double lhs = nn(a, b);
            ex.add(ca * cb * lhs);
            double rhs = 0;
            for (uint64_t x = a; x; x &= x - 1)
                for (uint64_t y = b; y; y &= y - 1) rhs += nn(x & (~x + 1), y & (~y + 1));
            out.lebowitz_worst = std::max(out.lebowitz_worst, lhs - rhs);
            // relative slack for rounding in the covariance differences
            if (lhs > rhs + 1e-12 * (std::abs(rhs) + 1e-300)) out.lebowitz_holds = false;
        }
    }
    for (auto [b, cb] : gb) out.norm_g = std::max(out.norm_g, std::abs(cb));
    out.value_from_expansion = ex.value();
    out.distance = region_distance(sf, sg);
    const double nf = static_cast<double>(sf.size()), ng = static_cast<double>(sg.size());
    const double C = c4 * nf * ng * out.norm_f * out.norm_g * std::pow(2.0, nf + ng - 2);
    out.bound = p.J * C / std::pow(static_cast<double>(out.distance), p.alpha);
    return out;
}

struct EdgeErasing {
    double lhs = 0;  // F_{A,B} F_{B,C}
    double rhs = 0;  // 2^{2α-1} J |B|² diam(B)^α F_{A,C} (dist(A,B)^{-α} + dist(B,C)^{-α})
    double diam_B = 0;  // l1 diameter, 1 for a singleton
    bool holds() const { return lhs <= rhs; }
};

inline EdgeErasing edge_erasing_check(const Region& A, const Region& B, const Region& C, const ModelParams& p) {
    require(!A.empty() && !B.empty() && !C.empty(), "edge erasing needs nonempty sets");
    require(disjoint(A, B) && disjoint(B, C) && disjoint(A, C), "sets must be pairwise disjoint");
    LatticeSums<double> sums(p);
    EdgeErasing e;
    e.diam_B = std::max(1, diameter(B));
    e.lhs = sums.cross(A, B) * sums.cross(B, C);
    const double a = p.alpha;
    const double nb = static_cast<double>(B.size());
    e.rhs = std::pow(2.0, 2 * a - 1) * p.J * nb * nb * std::pow(e.diam_B, a) * sums.cross(A, C) *
            (std::pow(region_distance(A, B), -a) + std::pow(region_distance(B, C), -a));
    return e;
}

struct FieldActivitySample {
    std::vector<double> h;
    double z = 0;
    double z_tilde = 0;
};

struct FieldActivityReport {
    double radius = 0;  // (12 β n)^{-1}
    std::vector<FieldActivitySample> samples;
    std::size_t violations = 0;
    double max_ratio = 0;  // max |z_h| / z̃
};

// |z_{β,h}(Γ)| ≤ z̃_β(Γ) for real fields on `sites` over a grid of fractions of the radius.
inline FieldActivityReport field_activity_bound_check(const Polymer& poly, const std::vector<Site>& sites,
                                                      const std::vector<double>& fractions, const ModelParams& p,
                                                      const PolymerOptions& opt = {}) {
    const std::size_t n = sites.size();
    require(n >= 1 && n <= 2, "field check uses 1 or 2 field sites");
    require(p.beta > 0, "field radius needs beta > 0");
    FieldActivityReport rep;
    rep.radius = 1.0 / (12.0 * p.beta * static_cast<double>(n));
    const double zt = ActivityModel<double>(p, {}, opt).simplified_activity(poly);
    std::vector<std::size_t> idx(n, 0);
    for (;;) {
        FieldAssignment h;
        FieldActivitySample s;
        for (std::size_t i = 0; i < n; ++i) {
            double v = fractions[idx[i]] * rep.radius;
            require(std::abs(v) < rep.radius, "field samples must lie strictly inside the radius");
            h.values[sites[i]] = v;
            s.h.push_back(v);
        }
        s.z = ActivityModel<double>(p, h, opt).activity(poly);
        s.z_tilde = zt;
        rep.max_ratio = std::max(rep.max_ratio, std::abs(s.z) / zt);
        if (std::abs(s.z) > zt) ++rep.violations;
        rep.samples.push_back(std::move(s));
        std::size_t k = 0;
        while (k < n && ++idx[k] == fractions.size()) idx[k++] = 0;
        if (k == n) break;
    }
    return rep;
}

}  // namespace lrising
