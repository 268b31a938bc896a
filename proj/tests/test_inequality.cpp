#include <cmath>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "fkdl/inequality.hpp"

using namespace fkdl;

namespace {

Lattice path2_line() { return Lattice::graph(3, {{0, 1}, {1, 2}}, {EdgeKind::line, EdgeKind::line}); }

Lattice cycle4() {
    return Lattice::graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}},
                          {EdgeKind::line, EdgeKind::bulk, EdgeKind::bulk, EdgeKind::bulk});
}

}  // namespace

TEST_CASE("pivotal sets on small events") {
    auto all = [](std::uint64_t) { return true; };
    CHECK(pivotal_set(0b101, 3, all).empty());

    auto both = [](std::uint64_t m) { return (m & 3) == 3; };
    CHECK(pivotal_set(0b11, 2, both) == std::vector<int>{0, 1});
    CHECK(pivotal_set(0b01, 2, both) == std::vector<int>{1});

    // 0 <-> 2 on the 4-cycle with both routes open: no single edge is pivotal
    auto g = cycle4();
    ExactMeasure meas(g, std::vector<double>(4, 1.0), 1.0, BoundaryCondition::free());
    auto conn = [&](std::uint64_t m) { return meas.connected(m, 0, 2); };
    CHECK(pivotal_set(0b1111, 4, conn).empty());

    // pivotality is preserved by flipping the pivotal edge
    for (std::uint64_t m = 0; m < 16; ++m)
        for (int e : pivotal_set(m, 4, conn)) {
            auto p = pivotal_set(m ^ (1ULL << e), 4, conn);
            CHECK(std::find(p.begin(), p.end(), e) != p.end());
        }
}

TEST_CASE("monotonicity and simpson") {
    CHECK(is_increasing(3, [](std::uint64_t m) { return (m & 1) != 0; }));
    CHECK_FALSE(is_increasing(3, [](std::uint64_t m) { return (m & 1) == 0; }));
    double v = adaptive_simpson([](double s) { return 1 / s; }, 1, 5, 1e-12);
    CHECK(v == doctest::Approx(std::log(5.0)).epsilon(1e-11));
}

TEST_CASE("Russo bound is an equality for a series pair at q = 1") {
    auto g = path2_line();
    ExactMeasure meas(g, {1.0, 1.0}, 1.0, BoundaryCondition::free());
    EdgeEvent A = [&](std::uint64_t m) { return meas.connected(m, 0, 2); };
    for (auto [s1, s2] : {std::pair{0.2, 0.5}, std::pair{0.5, 3.0}, std::pair{1.0, 7.0}}) {
        auto r = russo_bound_check(g, {0, 1}, A, 1.0, 1.0, s1, s2);
        double exact = 2 * std::log(s2 * (1 + s1) / (s1 * (1 + s2)));
        CHECK(std::fabs(r.lhs - exact) < 1e-10);
        CHECK(std::fabs(r.rhs - exact) < 1e-10);
        CHECK(r.holds);
    }
}

TEST_CASE("Russo bound edge cases") {
    auto g = cycle4();
    auto r0 = russo_bound_check(g, {0}, [](std::uint64_t) { return true; }, 2.0, 1.0, 0.5, 2.0);
    CHECK(r0.lhs == doctest::Approx(0.0));
    CHECK(r0.rhs == doctest::Approx(0.0));

    ExactMeasure meas(g, std::vector<double>(4, 1.0), 1.0, BoundaryCondition::free());
    EdgeEvent A = [&](std::uint64_t m) { return meas.connected(m, 0, 2); };
    auto r = russo_bound_check(g, {0}, A, 2.0, 1.0, 0.5, 2.0);
    CHECK(r.margin > 1e-4);

    EdgeEvent dec = [](std::uint64_t m) { return (m & 1) == 0; };
    CHECK_THROWS_AS(russo_bound_check(g, {0}, dec, 2.0, 1.0, 0.5, 2.0), PreconditionError);
    EdgeEvent never = [](std::uint64_t) { return false; };
    CHECK_THROWS_AS(russo_bound_check(g, {0}, never, 2.0, 1.0, 0.5, 2.0), PreconditionError);
}

TEST_CASE("Russo suite holds on the corpus") {
    auto cases = russo_suite();
    CHECK(cases.size() > 500);
    double worst = 1;
    for (const auto& c : cases) worst = std::min(worst, c.report.margin);
    CHECK(worst >= -1e-9);
    std::ostringstream os;
    write_russo_jsonl(os, cases.front());
    auto j = nlohmann::json::parse(os.str());
    CHECK(j["kind"] == "russo");
}

TEST_CASE("pivotal profile for a series pair") {
    auto g = path2_line();
    ExactMeasure meas(g, {1.0, 1.0}, 1.0, BoundaryCondition::free());
    auto p = pivotal_profile(g, {0, 1}, [&](std::uint64_t m) { return meas.connected(m, 0, 2); }, "0<->2", 2.0, 1.0,
                             {0.5, 1.0});
    CHECK(p.expected[0] == doctest::Approx(2.0));
    CHECK(p.expected[1] == doctest::Approx(2.0));
}

TEST_CASE("frontier sum matches enumeration") {
    for (const auto& cg : graph_corpus()) {
        const auto& g = cg.lat;
        std::vector<double> x;
        for (int e = 0; e < g.num_edges(); ++e) x.push_back(0.3 + 0.17 * e);
        std::vector<std::pair<int, int>> edges;
        for (const auto& e : g.edges()) edges.emplace_back(e.u, e.v);
        std::vector<int> order(g.num_vertices());
        for (int i = 0; i < g.num_vertices(); ++i) order[i] = g.num_vertices() - 1 - i;
        for (double q : {1.0, 2.0, 3.5}) {
            ExactMeasure meas(g, x, q, BoundaryCondition::free());
            long double f = frontier_sum(g.num_vertices(), edges, x, q, std::vector<int>(edges.size(), -1), order);
            CHECK(static_cast<double>(f / meas.Z()) == doctest::Approx(1.0).epsilon(1e-12));
            // forcing edge 0 open
            std::vector<int> forced(edges.size(), -1);
            forced[0] = 1;
            long double f1 = frontier_sum(g.num_vertices(), edges, x, q, forced, order);
            long double w = 0;
            for (std::uint64_t m = 0; m < meas.num_configs(); ++m)
                if (m & 1) w += meas.weight(m);
            CHECK(static_cast<double>(f1 / w) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("boundary decoupling ratios for a central edge") {
    std::vector<std::vector<int>> D{{0, 0}, {1, 0}};
    EdgeEvent A = [](std::uint64_t m) { return (m & 1) != 0; };
    auto rep = lfree_ratio_check(D, A, 0.5, 2.0, {1, 2, 3});
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.above_one);
    CHECK(rep.decreasing);
    CHECK(rep.rows[0].ratio > rep.rows[2].ratio);
    for (const auto& r : rep.rows) CHECK(r.ratio >= 1.0);

    // independent percolation has no boundary influence
    auto perc = lfree_ratio_check(D, A, 0.5, 1.0, {1, 2});
    for (const auto& r : perc.rows) CHECK(r.ratio == doctest::Approx(1.0).epsilon(1e-12));

    EdgeEvent dec = [](std::uint64_t m) { return (m & 1) == 0; };
    CHECK_THROWS_AS(lfree_ratio_check(D, dec, 0.5, 2.0, {1}), PreconditionError);
}

TEST_CASE("cone-points of the origin cluster carry a pivotal edge") {
    for (int n = 1; n <= 4; ++n) {
        auto rep = cone_point_pivotality(n);
        CHECK(rep.violations == 0);
        CHECK(rep.configurations > 0);
        if (n >= 2) CHECK(rep.cone_points > 0);
    }
    CHECK_THROWS_AS(cone_point_pivotality(5), CapacityError);
}
