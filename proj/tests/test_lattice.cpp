#include <set>
#include <sstream>

#include "doctest.h"
#include "fkdl/lattice.hpp"

using namespace fkdl;

TEST_CASE("box counts") {
    auto l2 = build_box(2, 1);
    CHECK(l2.num_vertices() == 9);
    CHECK(l2.num_edges() == 12);
    CHECK(l2.count_kind(EdgeKind::line) == 2);
    int a = l2.index({-1, 0}), b = l2.index({0, 0}), c = l2.index({1, 0});
    CHECK(l2.edge(l2.find_edge(a, b)).kind == EdgeKind::line);
    CHECK(l2.edge(l2.find_edge(b, c)).kind == EdgeKind::line);

    auto l3 = build_box(3, 1);
    CHECK(l3.num_vertices() == 27);
    // brute-force count of unit-distance pairs
    int pairs = 0;
    for (int u = 0; u < 27; ++u)
        for (int v = u + 1; v < 27; ++v) {
            int d1 = 0;
            for (int k = 0; k < 3; ++k) d1 += std::abs(l3.coord(u, k) - l3.coord(v, k));
            pairs += d1 == 1;
        }
    CHECK(pairs == 54);
    CHECK(l3.num_edges() == 54);
}

TEST_CASE("line edge count is 2n") {
    for (int d = 2; d <= 4; ++d)
        for (int n = 1; n <= 3; ++n) {
            if (d == 4 && n == 3) continue;
            CHECK(build_box(d, n).count_kind(EdgeKind::line) == 2 * n);
        }
}

TEST_CASE("bad parameters") {
    CHECK_THROWS_AS(build_box(1, 3), ParameterError);
    CHECK_THROWS_AS(build_box(2, 0), ParameterError);
    auto l = build_box(2, 1);
    CHECK_THROWS_AS(edge_weight(l, WeightField{0.5, 2.0, 2.0}, 99), ParameterError);
}

TEST_CASE("indexer round trip and edge invariants") {
    auto l = build_box(3, 2);
    for (int v = 0; v < l.num_vertices(); ++v) CHECK(l.index(l.coords(v)) == v);
    for (int v = 1; v < l.num_vertices(); ++v) CHECK(l.coords(v - 1) < l.coords(v));
    for (const auto& e : l.edges()) {
        int d1 = 0;
        for (int k = 0; k < 3; ++k) d1 += std::abs(l.coord(e.u, k) - l.coord(e.v, k));
        CHECK(d1 == 1);
        bool on = l.coord(e.u, 1) == 0 && l.coord(e.u, 2) == 0 && l.coord(e.v, 1) == 0 &&
                  l.coord(e.v, 2) == 0;
        CHECK(on == (e.kind == EdgeKind::line));
    }
    for (int i = 1; i < l.num_edges(); ++i) {
        auto p = std::make_pair(l.edge(i - 1).u, l.edge(i - 1).axis);
        auto q = std::make_pair(l.edge(i).u, l.edge(i).axis);
        CHECK(p < q);
    }
}

TEST_CASE("weights") {
    auto l = build_box(2, 1);
    WeightField w{0.5, 2.0, 2.0};
    for (int e = 0; e < l.num_edges(); ++e)
        CHECK(edge_weight(l, w, e) == (l.edge(e).kind == EdgeKind::line ? 2.0 : 0.5));
    auto wf = WeightField::from_beta(0.7, 1.3, 3.0);
    CHECK(std::abs(wf.beta() - 0.7) < 1e-12);
    CHECK(std::abs(wf.J() - 1.3) < 1e-12);
    CHECK(wf.theta1() == doctest::Approx(std::min(wf.x / (wf.x + 3), wf.xp / (wf.xp + 3))));
    CHECK(wf.theta0() == doctest::Approx(1.0 / (1.0 + wf.xp)));
    CHECK_THROWS_AS(WeightField::from_beta(0.5, 1.0, 0.5), ParameterError);
}

TEST_CASE("clusters") {
    auto l = build_box(2, 1);
    EdgeConfiguration closed(l.num_edges());
    CHECK(rebuild_clusters(l, closed, BoundaryCondition::free()).kappa == 9);
    CHECK(rebuild_clusters(l, closed, BoundaryCondition::wired()).kappa == 2);
    EdgeConfiguration open(l.num_edges(), true);
    CHECK(open.open_count() == 12);
    CHECK(rebuild_clusters(l, open, BoundaryCondition::free()).kappa == 1);
}

TEST_CASE("single flips change kappa by at most one") {
    auto l = build_box(2, 2);
    std::uint64_t s = 0x9e3779b97f4a7c15ULL;
    for (int trial = 0; trial < 200; ++trial) {
        s = s * 6364136223846793005ULL + 1442695040888963407ULL;
        auto w = EdgeConfiguration::from_mask(l.num_edges(), s >> 7);
        CHECK(w.open_count() == w.popcount());
        for (auto bc : {BoundaryCondition::free(), BoundaryCondition::wired()}) {
            auto c0 = rebuild_clusters(l, w, bc);
            for (int e = 0; e < l.num_edges(); ++e) {
                auto w2 = w;
                w2.flip(e);
                CHECK(w2.open_count() == w2.popcount());
                int k = rebuild_clusters(l, w2, bc).kappa;
                CHECK(std::abs(k - c0.kappa) <= 1);
                CHECK(k >= 1);
                CHECK(k <= l.num_vertices());
            }
            // equivalence relation via labels
            for (const auto& e : l.edges())
                if (w.get(l.find_edge(e.u, e.v))) CHECK(c0.connected(e.u, e.v));
        }
    }
}

TEST_CASE("partition and dobrushin groups") {
    auto l = build_box(2, 1);
    auto bnd = l.boundary_vertices();
    CHECK(bnd.size() == 8);
    std::vector<int> a(bnd.begin(), bnd.begin() + 4), b(bnd.begin() + 4, bnd.end());
    CHECK(l.boundary_groups(BoundaryCondition::partition({a, b})).size() == 2);
    CHECK_THROWS_AS(l.boundary_groups(BoundaryCondition::partition({a})), ParameterError);
    CHECK_THROWS_AS(l.boundary_groups(BoundaryCondition::partition({a, a, b})), ParameterError);
    auto g = l.boundary_groups(BoundaryCondition::dobrushin());
    CHECK(g[0].size() == 3);
    CHECK(g[1].size() == 5);
    EdgeConfiguration closed(l.num_edges());
    auto ci = rebuild_clusters(l, closed, BoundaryCondition::dobrushin());
    CHECK(ci.kappa == 3);
    CHECK(dobrushin_ok(l, ci));
}

TEST_CASE("dump round trip") {
    auto l = build_box(2, 2);
    l.mark_dual_line();
    std::stringstream ss;
    l.dump(ss, 2);
    auto r = read_lattice_dump(ss);
    REQUIRE(r.num_edges() == l.num_edges());
    for (int e = 0; e < l.num_edges(); ++e) CHECK(r.edge(e).kind == l.edge(e).kind);
    CHECK(l.count_kind(EdgeKind::dualline) == 5);
}
