#include <cmath>

#include "doctest.h"
#include "fkdl/exact_oracle.hpp"

using namespace fkdl;

namespace {

Lattice cycle4() { return Lattice::graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}}); }

}  // namespace

TEST_CASE("single edge") {
    auto g = Lattice::graph(2, {{0, 1}});
    ExactMeasure m(g, {1.0}, 2.0, BoundaryCondition::free());
    CHECK(static_cast<double>(m.Z()) == doctest::Approx(6.0));
    CHECK(static_cast<double>(m.prob(1)) == doctest::Approx(1.0 / 3));
    CHECK(static_cast<double>(exact_two_point(m, 0, 1)) == doctest::Approx(1.0 / 3));
    CHECK(exact_two_point(m, 1, 1) == 1.0L);
    double p = 1.0 / 3;
    auto ind = [](std::uint64_t s) { return double(s & 1); };
    CHECK(static_cast<double>(exact_covariance(m, ind, ind)) == doctest::Approx(p * (1 - p)));
    CHECK(std::fabs(static_cast<double>(exact_covariance(m, [](auto) { return 2.0; }, ind))) < 1e-15);
}

TEST_CASE("q = 1 factorizes") {
    for (const auto& c : graph_corpus()) {
        std::vector<double> x(c.lat.num_edges());
        for (int e = 0; e < c.lat.num_edges(); ++e) x[e] = 0.3 + 0.4 * e;
        ExactMeasure m(c.lat, x, 1.0, BoundaryCondition::free());
        for (std::uint64_t s = 0; s < m.num_configs(); ++s) {
            long double pr = 1;
            for (int e = 0; e < m.num_edges(); ++e)
                pr *= ((s >> e) & 1) ? x[e] / (1 + x[e]) : 1 / (1 + x[e]);
            CHECK(std::fabs(static_cast<double>(m.prob(s) - pr)) < 1e-15);
        }
    }
    auto path = Lattice::graph(3, {{0, 1}, {1, 2}});
    ExactMeasure m(path, {1.0, 1.0}, 1.0, BoundaryCondition::free());
    CHECK(static_cast<double>(exact_two_point(m, 0, 2)) == doctest::Approx(0.25));
}

TEST_CASE("4-cycle values") {
    auto g = cycle4();
    ExactMeasure m(g, {1, 1, 1, 1}, 2.0, BoundaryCondition::free());
    // independent recount of Z
    long double z = 0;
    for (int s = 0; s < 16; ++s) {
        int open = __builtin_popcount(s);
        int k = open == 4 ? 1 : 4 - open;
        z += std::pow(2.0L, k);
    }
    CHECK(std::fabs(static_cast<double>(m.Z() - z)) < 1e-12);
    CHECK(static_cast<double>(m.prob(15)) == doctest::Approx(static_cast<double>(2 / z)));
    CHECK(static_cast<double>(exact_conditional(m, 3, {1, 1, 1, 0})) == doctest::Approx(0.5));
    CHECK(static_cast<double>(exact_conditional(m, 3, {0, 1, 1, 0})) == doctest::Approx(1.0 / 3));
    CHECK_THROWS_AS(exact_conditional(m, 3, {1, -1, 1, 0}), ParameterError);
    CHECK_THROWS_AS(exact_conditional(m, 3, {1, 1}), ParameterError);
}

TEST_CASE("capacity error names the cap") {
    auto l = build_box(2, 2);  // 40 edges
    try {
        enumerate_measure(l, WeightField{1, 1, 2}, BoundaryCondition::free());
        FAIL("expected capacity error");
    } catch (const CapacityError& e) {
        CHECK(std::string(e.what()).find("24") != std::string::npos);
    }
}

TEST_CASE("probabilities sum to one on a box") {
    auto l = build_box(2, 1);
    for (auto bc : {BoundaryCondition::free(), BoundaryCondition::wired(), BoundaryCondition::dobrushin()}) {
        auto m = enumerate_measure(l, WeightField{1.3, 0.4, 2.5}, bc);
        long double s = 0;
        for (std::uint64_t c = 0; c < m.num_configs(); ++c) s += m.prob(c);
        CHECK(std::fabs(static_cast<double>(s - 1)) < 1e-14);
    }
}

TEST_CASE("finite energy bounds") {
    for (const auto& c : graph_corpus()) {
        for (double q : {1.0, 1.5, 2.0, 3.0}) {
            WeightField w{0.8, 2.5, q};
            for (auto bc : {BoundaryCondition::free(), BoundaryCondition::wired()}) {
                auto m = enumerate_measure(c.lat, w, bc);
                auto x = edge_weights(c.lat, w);
                for (int e = 0; e < m.num_edges(); ++e)
                    for (std::uint64_t s = 0; s < m.num_configs(); ++s) {
                        if ((s >> e) & 1) continue;
                        std::vector<int> rest(m.num_edges());
                        for (int i = 0; i < m.num_edges(); ++i) rest[i] = (s >> i) & 1;
                        double p = static_cast<double>(exact_conditional(m, e, rest));
                        CHECK(p >= x[e] / (x[e] + q) - 1e-14);
                        CHECK(p <= x[e] / (x[e] + 1) + 1e-14);
                    }
            }
        }
    }
}

TEST_CASE("positive association and monotonicity in the line weight") {
    for (const auto& c : graph_corpus()) {
        for (double q : {1.0, 2.0, 3.5}) {
            auto m = enumerate_measure(c.lat, WeightField{1.1, 0.7, q}, BoundaryCondition::free());
            auto m2 = enumerate_measure(c.lat, WeightField{1.1, 2.1, q}, BoundaryCondition::free());
            auto fam = monotone_family(m);
            for (std::size_t i = 0; i < fam.size(); ++i) {
                CHECK(m2.expectation(fam[i].f) >= m.expectation(fam[i].f) - 1e-12);
                for (std::size_t j = i; j < fam.size(); ++j)
                    CHECK(exact_covariance(m, fam[i].f, fam[j].f) >= -1e-12);
            }
        }
    }
}
