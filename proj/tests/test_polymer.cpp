#include "lrising/oracle.hpp"
#include "lrising/polymer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace lrising;

namespace {

ModelParams model(double beta, double M = 8.0) {
    ModelParams p;
    p.beta = beta;
    p.M = M;
    return p;
}

Site s2(int i, int j) { return make_site({i, j}); }

Contour single_flip(const Site& x, const ModelParams& p) {
    return detail::contour_of_minus_set(Region{x}, p);
}

// Σ over set partitions of {0..n-1} of Π φ^T(block), with blocks restricted to the graph.
double mayer_partition_sum(int n, uint64_t incompatible) {
    std::function<double(uint32_t)> rec = [&](uint32_t rest) -> double {
        if (rest == 0) return 1.0;
        const uint32_t low = rest & (~rest + 1);
        const uint32_t others = rest ^ low;
        double s = 0;
        for (uint32_t sub = others;; sub = (sub - 1) & others) {
            uint32_t block = sub | low;
            std::vector<int> m;
            for (int i = 0; i < n; ++i)
                if (block >> i & 1) m.push_back(i);
            uint64_t e = 0;
            for (std::size_t a = 0; a < m.size(); ++a)
                for (std::size_t b = a + 1; b < m.size(); ++b)
                    if (incompatible >> edge_index(m[a], m[b], n) & 1)
                        e |= uint64_t{1} << edge_index(static_cast<int>(a), static_cast<int>(b), static_cast<int>(m.size()));
            s += static_cast<double>(ursell_graph(static_cast<int>(m.size()), e)) * rec(rest ^ block);
            if (sub == 0) break;
        }
        return s;
    };
    return rec((1u << n) - 1);
}

}  // namespace

TEST(Ursell, SmallCases) {
    EXPECT_EQ(ursell_graph(1, 0), 1);
    EXPECT_EQ(ursell_graph(2, 1), -1);
    EXPECT_EQ(ursell_graph(2, 0), 0);
    EXPECT_EQ(ursell_graph(3, complete_edges(3)), 2);
    EXPECT_EQ(ursell_graph(4, complete_edges(4)), -6);
    EXPECT_THROW(ursell_graph(7, 0), GuardExceeded);
    EXPECT_THROW(ursell_graph(4, 0, 3), GuardExceeded);
}

TEST(Ursell, CompleteGraphsAlternateFactorials) {
    int64_t f = 1;
    for (int n = 1; n <= 6; ++n) {
        if (n > 1) f *= (n - 1);
        EXPECT_EQ(ursell_graph(n, complete_edges(n)), (n % 2 ? 1 : -1) * f) << n;
    }
}

TEST(Ursell, DisconnectedGraphsVanishAndMayerIdentity) {
    for (int n = 1; n <= 5; ++n)
        for (uint64_t g = 0; g <= complete_edges(n); ++g) {
            if (!graph_connected(n, g)) {
                EXPECT_EQ(ursell_graph(n, g), 0);
            }
            // Σ_partitions Π φ^T = Π 1{compatible}
            EXPECT_EQ(mayer_partition_sum(n, g), g == 0 ? 1.0 : 0.0) << n << " " << g;
        }
}

TEST(TreeGraph, BoundOnAllGraphs) {
    for (int n = 1; n <= 5; ++n)
        for (uint64_t g = 0; g <= complete_edges(n); ++g) EXPECT_TRUE(tree_graph_bound_check(n, g).holds());
    auto t3 = tree_graph_bound_check(3, complete_edges(3));
    EXPECT_EQ(t3.phi, 2);
    EXPECT_EQ(t3.tree_bound, 3u);
    auto t2 = tree_graph_bound_check(2, 0);
    EXPECT_EQ(t2.phi, 0);
    EXPECT_EQ(t2.tree_bound, 0u);
    auto t4 = tree_graph_bound_check(4, complete_edges(4));
    EXPECT_EQ(t4.phi, -6);
    EXPECT_EQ(t4.tree_bound, 16u);
}

TEST(Cayley, Examples) {
    EXPECT_EQ(cayley_count({1, 2, 1}), 1u);
    EXPECT_EQ(cayley_count({1, 1}), 1u);
    EXPECT_EQ(cayley_count({3, 1, 1, 1}), 1u);
    EXPECT_EQ(cayley_count({2, 2, 1, 1}), 2u);
    EXPECT_THROW(cayley_count({2, 2}), std::invalid_argument);
    EXPECT_THROW(cayley_count({0, 2, 2}), std::invalid_argument);
}

TEST(Cayley, MatchesBruteForceTreesUpToSevenVertices) {
    for (int m = 2; m <= 7; ++m) {
        const auto& el = edge_list(m);
        std::map<std::vector<int>, uint64_t> brute;
        // every (m-1)-edge subset that connects all vertices
        std::function<void(std::size_t, int, uint64_t)> rec = [&](std::size_t start, int left, uint64_t edges) {
            if (left == 0) {
                if (!graph_connected(m, edges)) return;
                std::vector<int> deg(m, 0);
                for (std::size_t e = 0; e < el.size(); ++e)
                    if (edges >> e & 1) {
                        ++deg[el[e].first];
                        ++deg[el[e].second];
                    }
                ++brute[deg];
                return;
            }
            for (std::size_t e = start; e < el.size(); ++e) rec(e + 1, left - 1, edges | (uint64_t{1} << e));
        };
        rec(0, m - 1, 0);
        uint64_t total = 0, expected = 1;
        for (int i = 0; i < m - 2; ++i) expected *= static_cast<uint64_t>(m);
        for (auto& [deg, count] : brute) {
            EXPECT_EQ(cayley_count(deg), count);
            total += cayley_count(deg);
        }
        EXPECT_EQ(total, expected);
        uint64_t prufer = 0;
        for_each_labelled_tree(m, [&](uint64_t t) {
            EXPECT_TRUE(graph_connected(m, t));
            EXPECT_EQ(std::popcount(t), m - 1);
            ++prufer;
        });
        EXPECT_EQ(prufer, expected);
    }
}

TEST(Weight, SingleFlipAndEmptyInterior) {
    auto p = model(1.7);
    LatticeSums<double> sums(p);
    Contour g = single_flip(s2(0, 0), p);
    auto w = weight_W(g, p);
    EXPECT_NEAR(w.W, std::exp(-2 * p.beta * sums.zeta()), 1e-15);
    EXPECT_EQ(w.z_check, 1.0);
    EXPECT_EQ(w.families, 1u);
}

TEST(Weight, BlockWithMinusInterior) {
    // a 6x6 minus block has I_- = the inner 4x4; no inner flip survives as a separate contour
    auto p = model(0.4);
    Region block = box_region(s2(0, 0), s2(5, 5));
    auto gs = extract_contours(SpinConfig::with_minus(block, block), p);
    ASSERT_EQ(gs.size(), 1u);
    EXPECT_EQ(gs[0].I_minus.size(), 16u);
    auto w = weight_W(gs[0], p);
    EXPECT_EQ(w.families, 1u);
    EXPECT_EQ(w.z_check, 1.0);
    EXPECT_NEAR(w.W, std::exp(-p.beta * 2 * LatticeSums<double>(p).surface(block)), 1e-300);
    PolymerOptions small;
    small.interior_guard = 15;
    EXPECT_THROW(weight_W(gs[0], p, small), GuardExceeded);
}

TEST(Weight, PeierlsBoundOnSmallContours) {
    auto p = model(3.0);
    const double c2 = peierls_c2(p);
    LatticeSums<double> sums(p);
    for (const Contour& g : small_contour_shapes(10, p)) {
        double w = weight_W(g, p).W;
        EXPECT_GT(w, 0);
        EXPECT_LE(w, std::exp(-p.beta * c2 * contour_norm(g, sums)));
    }
}

TEST(GraphSum, SingletonAndFarPair) {
    auto p = model(1.2, 1.5);
    Contour a = single_flip(s2(0, 0), p);
    EXPECT_EQ(graph_sum_K(make_polymer({a}, p), p), 1.0);
    for (int r : {300, 1000, 100000}) {
        Contour b = single_flip(s2(r, 0), p);
        Polymer two = make_polymer({a, b}, p);
        double k = graph_sum_K(two, p);
        EXPECT_NEAR(k, std::expm1(4 * p.beta * p.J * std::pow(r, -p.alpha)), 1e-12 * k) << r;
        EXPECT_LT(k, 1e-6);
    }
    Polymer five = make_polymer({a, single_flip(s2(300, 0), p), single_flip(s2(600, 0), p),
                                 single_flip(s2(900, 0), p), single_flip(s2(1200, 0), p)},
                                p);
    EXPECT_GT(graph_sum_K(five, p), 0);
    PolymerOptions opt;
    opt.k_guard = 4;
    EXPECT_THROW(graph_sum_K(five, p, opt), GuardExceeded);
}

TEST(Activity, PairRegroupsCrystallicWeight) {
    // z({a,b}) + z({a}) z({b}) = e^{-β H⁺} of the configuration carrying both flips
    auto p = model(0.3, 1.5);
    Contour a = single_flip(s2(0, 0), p), b = single_flip(s2(0, 250), p);
    LatticeSums<double> sums(p);
    double za = activity(make_polymer({a}, p), p), zb = activity(make_polymer({b}, p), p);
    double zab = activity(make_polymer({a, b}, p), p);
    double direct = std::exp(-p.beta * 2 * sums.surface(Region{s2(0, 0), s2(0, 250)}));
    EXPECT_NEAR((zab + za * zb) / direct, 1.0, 1e-14);
    EXPECT_EQ(za, weight_W(a, p).W);
}

TEST(SimplifiedActivity, TreeSums) {
    auto p = model(2.0, 1.5);
    LatticeSums<double> sums(p);
    const double c2 = peierls_c2(p);
    Contour a = single_flip(s2(0, 0), p), b = single_flip(s2(300, 0), p), c = single_flip(s2(0, 300), p);
    auto pref = [&](const Contour& g) { return std::exp(-p.beta * c2 * contour_norm(g, sums) / 2); };
    auto F = [&](const Contour& g, const Contour& h) { return sums.cross(g.V_tilde, h.V_tilde); };
    EXPECT_NEAR(simplified_activity(make_polymer({a}, p), p), pref(a), 1e-15);
    EXPECT_NEAR(simplified_activity(make_polymer({a, b}, p), p), pref(a) * pref(b) * F(a, b), 1e-20);
    double hand = pref(a) * pref(b) * pref(c) * (F(a, b) * F(a, c) + F(a, b) * F(b, c) + F(a, c) * F(b, c));
    double got = simplified_activity(make_polymer({a, b, c}, p), p);
    EXPECT_NEAR(got / hand, 1.0, 1e-13);
}

TEST(PolymerGas, EmptyCellAndLargeBeta) {
    EXPECT_EQ(polymer_partition_function(Region{}, model(1.0)), 1.0);
    Region cell = box_region(s2(0, 0), s2(1, 1));
    double z = polymer_partition_function(cell, model(60.0));
    EXPECT_NEAR(z, 1.0, 1e-100);
}

TEST(PolymerGas, MatchesOracleOnFourByFour) {
    Region cell = box_region(s2(0, 0), s2(3, 3));
    auto p0 = model(1.0);
    auto polymers = enumerate_polymers(cell, p0);
    EXPECT_EQ(polymers.size(), 65535u);
    EXPECT_TRUE(cell_forces_incompatibility(cell, p0));
    for (double beta : {1.0, 2.0}) {
        auto p = model(beta);
        ActivityModel<double> m(p);
        PolymerGas<double> gas;
        gas.polymers = polymers;
        for (const Polymer& g : polymers) gas.z.push_back(m.activity(g));
        gas.all_incompatible = true;
        double zg = polymer_partition_function(gas);
        double zo = exact_partition(cell, {}, p).z_tilde;
        EXPECT_NEAR(zg / zo - 1, 0, 1e-8) << beta;
    }
}

TEST(PolymerGas, FarCellsWithCompatiblePolymers) {
    // three 2-site cells, far apart: multi-contour polymers carry K ≠ 0 and compatible
    // sets of up to three polymers occur
    auto p = model(0.4, 1.5);
    std::vector<Region> cells{Region{s2(0, 0), s2(1, 0)}, Region{s2(400, 0), s2(401, 0)},
                              Region{s2(0, 400), s2(0, 401)}};
    Region all;
    for (const Region& c : cells) all = unite(all, c);
    ActivityModel<quad> m(p);
    auto gas = build_gas(all, m);
    EXPECT_FALSE(gas.all_incompatible);
    std::size_t multi = 0;
    for (const Polymer& g : gas.polymers) multi += g.size() > 1;
    EXPECT_GT(multi, 0u);
    quad zg = polymer_partition_function(gas);
    auto zo = exact_partition<quad>(all, {}, p);
    EXPECT_LT(static_cast<double>(abs(zg / zo.z_tilde - 1)), 1e-25);
    // the interaction part of log Z̃, orders of magnitude below Z̃ itself
    quad inter_o = zo.log_z_tilde, inter_g = log(zg);
    for (const Region& c : cells) {
        inter_o -= exact_partition<quad>(c, {}, p).log_z_tilde;
        inter_g -= log(polymer_partition_function(build_gas(c, m)));
    }
    EXPECT_GT(static_cast<double>(inter_o), 1e-12);
    EXPECT_LT(static_cast<double>(abs(inter_g / inter_o - 1)), 1e-12);
}

TEST(ClusterSeries, EmptyAndSmallCell) {
    auto p = model(3.0);
    ActivityModel<quad> m(p);
    auto empty = build_gas(Region{}, m);
    auto rep0 = cluster_series(empty, 3, 1e9, p);
    for (const quad& s : rep0.partial_sums) EXPECT_EQ(s, quad(0));

    Region cell = box_region(s2(0, 0), s2(2, 1));
    auto gas = build_gas(cell, m);
    auto rep = cluster_series(gas, 3, 1e9, p);
    EXPECT_EQ(rep.excluded, 0u);
    quad sum_z = 0;
    for (const quad& z : gas.z) sum_z += z;
    EXPECT_LT(static_cast<double>(abs(rep.partial_sums[0] / sum_z - 1)), 1e-30);
    quad exact = exact_partition<quad>(cell, {}, p).log_z_tilde;
    quad r1 = abs(rep.partial_sums[0] - exact), r3 = abs(rep.partial_sums[2] - exact);
    EXPECT_LT(r3, r1);
    EXPECT_LT(static_cast<double>(abs(rep.partial_sums[2] / exact - 1)), 0.05);
    // a cutoff drops polymers and accounts for their activity
    auto cut = cluster_series(gas, 2, 40.0, p);
    EXPECT_GT(cut.excluded, 0u);
    EXPECT_GT(cut.excluded_activity, quad(0));
}

TEST(Pfister, ZeroActivities) {
    auto r = pfister_exp_check({0, 0, 0}, complete_edges(3));
    EXPECT_EQ(r.lhs_literal, 1.0);
    EXPECT_EQ(r.rhs, 1.0);
}

TEST(Pfister, SinglePolymerShowsSetVersusMultiset) {
    auto r = pfister_exp_check({0.1}, 0);
    EXPECT_NEAR(r.rhs, 1.1, 1e-15);
    EXPECT_NEAR(r.lhs_literal, std::exp(0.1), 1e-15);
    EXPECT_GT(r.literal_gap, 1e-3);
    EXPECT_LT(r.nilpotent_gap, 1e-15);
}

TEST(Pfister, RandomActivities) {
    for (int seed = 0; seed < 100; ++seed) {
        std::mt19937 rng(seed);
        std::uniform_real_distribution<double> u(0, 0.1);
        std::uniform_int_distribution<int> size(1, 4);
        int n = size(rng);
        std::vector<double> z(n);
        for (double& v : z) v = u(rng);
        uint64_t g = std::uniform_int_distribution<uint64_t>(0, complete_edges(n))(rng);
        auto r = pfister_exp_check(z, g);
        EXPECT_LT(r.nilpotent_gap, 1e-10);
        EXPECT_LT(r.mayer_gap, 1e-10);
    }
}

TEST(Lemmas, ExplicitConstants) {
    auto p = model(3.0);
    auto c = lemma_constants(p);
    double b = std::max(std::pow(2.0, 7) * std::exp(1.0), 24 * M_PI * M_PI / 6);
    EXPECT_DOUBLE_EQ(c.b_star, b);
    EXPECT_DOUBLE_EQ(c.c3, b / 8);
    EXPECT_DOUBLE_EQ(c.c2, 1.0 / 160);
    EXPECT_FALSE(c.m_small_c3);
    EXPECT_FALSE(c.beta_above_peierls);
    auto q = model(40.0 * 160);
    EXPECT_NEAR(lemma_constants(q).c_beta, std::exp(-10.0) / (1 - std::exp(-10.0)), 1e-18);
}

TEST(Lemmas, PairBoundsOnSmallContours) {
    auto p = model(3.0);
    auto shapes = small_contour_shapes(9, p);
    ASSERT_EQ(shapes.size(), 5u / 5 + 32u / 8 + 18u / 9);
    Contour g0 = shapes.front();
    for (const Contour& g : shapes) {
        int s = compatible_shift(g0, g, p);
        Site t = origin(2);
        t.x[0] = s;
        Polymer rest = make_polymer({translated(g, t)}, p);
        EXPECT_TRUE(lemma_K_check(g0, rest, p).holds());
    }
    auto f = fvol_check(g0, shapes, 2, p);
    EXPECT_GT(f.placements, 0u);
    EXPECT_TRUE(f.holds());
}
