#include <cmath>

#include "doctest.h"
#include "fkdl/couplings.hpp"
#include "fkdl/stats.hpp"

using namespace fkdl;

TEST_CASE("stats helpers") {
    CHECK(chi_square_sf(0.0, 3) == 1.0);
    CHECK(chi_square_sf(7.814727903, 3) == doctest::Approx(0.05).epsilon(1e-6));
    auto r = chi_square_gof({50, 50}, {0.5, 0.5});
    CHECK(r.stat == 0.0);
    CHECK(r.df == 1);
    auto mw = mann_whitney({1, 2, 3}, {4, 5, 6});
    CHECK(mw.u == 0.0);
    CHECK(mw.z < 0);
    CHECK(median({3, 1, 2, 10}) == 2.5);
}

TEST_CASE("pair chain at q = 1 agrees off e") {
    auto c4 = Lattice::graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
    ChainParams p;
    p.sweeps = 500;
    p.burn_in = 10;
    auto r = conditioned_pair_chain(c4, {1, 2, 0.5, 1}, 1.0, BoundaryCondition::free(), 2, p);
    for (const auto& pr : r.pairs) {
        CHECK(pr.omega.dominates(pr.eta));
        CHECK(pr.omega.get(2));
        CHECK_FALSE(pr.eta.get(2));
        for (int f : {0, 1, 3}) CHECK(pr.omega.get(f) == pr.eta.get(f));
    }
    CHECK(r.agreement_rate == doctest::Approx(0.75));
}

TEST_CASE("pair chain marginals match conditional oracle") {
    auto c4 = Lattice::graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
    std::vector<double> x{1.0, 0.6, 2.0, 1.4};
    ExactMeasure m(c4, x, 2.5, BoundaryCondition::free());
    int e = 1;
    ChainParams p;
    p.sweeps = 100000;
    p.burn_in = 100;
    p.seed = 8;
    auto r = conditioned_pair_chain(c4, x, 2.5, BoundaryCondition::free(), e, p);
    auto open_e = [e](std::uint64_t s) { return double((s >> e) & 1); };
    auto closed_e = [e](std::uint64_t s) { return double(!((s >> e) & 1)); };
    for (int f = 0; f < 4; ++f) {
        if (f == e) continue;
        auto ind = [f](std::uint64_t s) { return double((s >> f) & 1); };
        std::vector<double> a, b;
        for (const auto& pr : r.pairs) {
            a.push_back(pr.omega.get(f));
            b.push_back(pr.eta.get(f));
        }
        auto ea = binned_mean(a), eb = binned_mean(b);
        double xa = static_cast<double>(m.conditional_expectation(ind, open_e));
        double xb = static_cast<double>(m.conditional_expectation(ind, closed_e));
        CHECK(std::fabs(ea.mean - xa) < 4 * ea.se);
        CHECK(std::fabs(eb.mean - xb) < 4 * eb.se);
    }
}

TEST_CASE("exploration with equal fields gives equal configurations") {
    auto l = build_box(2, 1);
    auto w = edge_weights(l, WeightField{1.0, 2.0, 2.0});
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        auto p = exploration_coupling(l, w, w, 2.0, {3}, rng);
        CHECK(p.omega == p.eta);
    }
    auto lo = w;
    lo[0] = 5.0;
    CHECK_THROWS_AS(ExplorationCoupler(l, w, lo, 2.0, {0}), ParameterError);
    lo = w;
    lo[1] = 0.1;
    CHECK_THROWS_AS(ExplorationCoupler(l, w, lo, 2.0, {0}), ParameterError);
}

TEST_CASE("exploration marginals pass chi-square") {
    struct Case {
        std::string graph;
        std::vector<int> E;
        int samples;
    };
    std::vector<Case> cases{{"K4", {0}, 100000}, {"cycle4", {0, 2}, 50000}, {"theta", {0, 1}, 50000},
                            {"grid2x3", {0, 1}, 20000}, {"ladder2x4", {1}, 10000}};
    auto corpus = graph_corpus();
    std::uint64_t idx = 0;
    for (const auto& cs : cases) {
        const Lattice* lat = nullptr;
        for (const auto& c : corpus)
            if (c.name == cs.graph) lat = &c.lat;
        REQUIRE(lat);
        for (double q : {1.0, 2.0, 3.0}) {
            auto hi = edge_weights(*lat, WeightField{1.2, 1.2, q});
            auto lo = hi;
            for (int e : cs.E) lo[e] = 0.3;
            ExplorationCoupler c(*lat, hi, lo, q, cs.E);
            Rng rng(derive_seed(21, idx++));
            std::vector<double> co(c.high().num_configs(), 0.0), ce(co.size(), 0.0);
            for (int i = 0; i < cs.samples; ++i) {
                auto p = c.sample(rng);
                c.verify(p);
                co[p.omega.mask64()] += 1;
                ce[p.eta.mask64()] += 1;
            }
            std::vector<double> ph(co.size()), pl(co.size());
            for (std::size_t s = 0; s < co.size(); ++s) {
                ph[s] = static_cast<double>(c.high().prob(s));
                pl[s] = static_cast<double>(c.low().prob(s));
            }
            INFO(cs.graph << " q=" << q);
            CHECK(chi_square_gof(co, ph).p_value > 1e-3);
            CHECK(chi_square_gof(ce, pl).p_value > 1e-3);
        }
    }
}
