#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fkdl/exact_oracle.hpp"
#include "fkdl/observables.hpp"

using namespace fkdl;

namespace {

TwoPointCurve synthetic(const std::function<double(int)>& f, int a, int b) {
    TwoPointCurve c;
    for (int n = a; n <= b; ++n) c.points.push_back({n, f(n), 0.0, 0});
    return c;
}

}  // namespace

TEST_CASE("pure exponential: all methods exact") {
    auto c = synthetic([](int n) { return 0.5 * std::exp(-0.3 * n); }, 1, 40);
    for (auto m : {XiMethod::slope_fit, XiMethod::ratio, XiMethod::prefactor_fit})
        CHECK(xi_fit(c, m).value == doctest::Approx(0.3).epsilon(1e-10));
    // log(0.5)/n term pushes the bound above 0.3; at large n it approaches 0.3
    auto s = xi_fit(c, XiMethod::subadditive);
    CHECK(s.value == doctest::Approx(0.3 + std::log(2.0) / 40).epsilon(1e-12));
    auto e = synthetic([](int n) { return std::exp(-0.3 * n); }, 1, 40);
    CHECK(xi_fit(e, XiMethod::subadditive).value == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("power-law prefactor: ratio method") {
    auto c = synthetic([](int n) { return std::pow(n, -0.5) * std::exp(-0.3 * n); }, 64, 256);
    CHECK(std::fabs(xi_fit(c, XiMethod::ratio).value - 0.3) < 1e-3);
}

TEST_CASE("prefactor exponent on synthetic curves") {
    auto oz = synthetic([](int n) { return 0.7 * std::pow(n, -0.5) * std::exp(-0.4 * n); }, 4, 30);
    XiEstimate xi;
    xi.value = 0.4;
    CHECK(std::fabs(prefactor_exponent(oz, xi).alpha - 0.5) < 0.05);
    auto pure = synthetic([](int n) { return 0.7 * std::exp(-0.4 * n); }, 4, 30);
    auto a0 = prefactor_exponent(pure, xi);
    CHECK(a0.alpha == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(a0.se == doctest::Approx(0.0));
    auto joint = xi_fit(oz, XiMethod::prefactor_fit);
    CHECK(joint.alpha == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(joint.value == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("fit errors") {
    auto c = synthetic([](int n) { return std::exp(-0.3 * n); }, 1, 3);
    CHECK_THROWS_AS(xi_fit(c, XiMethod::slope_fit), DataQualityError);
    auto z = synthetic([](int n) { return n < 5 ? std::exp(-n) : 0.0; }, 1, 8);
    CHECK_THROWS_AS(xi_fit(z, XiMethod::slope_fit), DataQualityError);
}

TEST_CASE("planar Ising reference value") {
    double bc = std::log(1 + std::sqrt(2.0));
    CHECK(std::fabs(ising_xi_potts_beta(0.75 * bc) - 0.481586) < 5e-7);
    // independent evaluation through the dual coupling: xi = 2 (K* - K)
    double K = 0.75 * bc / 2;
    double Kstar = std::atanh(std::exp(-2 * K));
    CHECK(ising_xi(K) == doctest::Approx(2 * (Kstar - K)).epsilon(1e-13));
}

TEST_CASE("potts translation") {
    CHECK(potts_two_point(0, 3) == doctest::Approx(1.0 / 3));
    CHECK(potts_two_point(1, 5) == 1.0);
    CHECK(potts_two_point(1.0 / 3, 2) == doctest::Approx(2.0 / 3));
}

TEST_CASE("independent line edges") {
    auto lat = Lattice::box({{-6, 6}, {-1, 1}});
    std::vector<double> x(lat.num_edges(), 0.0);
    double xp = 1.5;
    for (int e = 0; e < lat.num_edges(); ++e)
        if (lat.edge(e).kind == EdgeKind::line) x[e] = xp;
    FkSampler s(lat, x, 1.0, BoundaryCondition::free());
    ChainParams p;
    p.sweeps = 20000;
    p.burn_in = 10;
    p.keep_snapshots = true;
    auto b = run_chain(s, p, {});
    auto c = two_point_curve(b, lat, BoundaryCondition::free(), {0, 1, 2, 3, 4}, 0);
    CHECK(c.points[0].p == 1.0);
    for (const auto& pt : c.points) {
        double exact = std::pow(xp / (1 + xp), pt.n);
        CHECK(std::fabs(pt.p - exact) <= 4 * pt.se + 1e-12);
    }
    CHECK_THROWS_AS(two_point_curve(b, lat, BoundaryCondition::free(), {1, 11}), GeometryError);
}

TEST_CASE("small box two-point matches the oracle") {
    auto lat = build_box(2, 1);
    WeightField w{1.1, 2.4, 2.0};
    auto m = enumerate_measure(lat, w, BoundaryCondition::free());
    ChainParams p;
    p.sweeps = 100000;
    p.burn_in = 100;
    p.keep_snapshots = true;
    p.dynamics = Dynamics::mixed;
    auto b = run_chain(lat, w, p, {});
    auto c = two_point_curve(b, lat, BoundaryCondition::free(), {0, 1}, 0);
    double exact = static_cast<double>(exact_two_point(m, lat.index({0, 0}), lat.index({1, 0})));
    CHECK(std::fabs(c.points[1].p - exact) < 4 * c.points[1].se);
    CHECK(subadditivity_violations(c).empty());
}

TEST_CASE("lipschitz report") {
    XiScanResult r;
    CHECK(lipschitz_check(r).empty());
    XiScanRow a, b, c;
    a.xp = 1.0;
    a.xi.value = 0.5;
    b.xp = 2.0;
    b.xi.value = 0.5;
    c.xp = 4.0;
    c.xi.value = 0.2;
    r.rows = {a, c, b};
    auto rep = lipschitz_check(r);
    REQUIRE(rep.size() == 2);
    CHECK(rep[0].pass);
    CHECK(rep[1].pass);
    r.rows = {a};
    CHECK(lipschitz_check(r).empty());
}

TEST_CASE("scan smoke run and output records") {
    XiScanConfig cfg;
    cfg.beta = 0.75;
    cfg.Js = {0.5, 1.0, 3.0};
    cfg.half_length = 24;
    cfg.half_width = 6;
    cfg.sweeps = 600;
    cfg.burn_in = 50;
    cfg.ns = {1, 2, 3, 4, 5, 6};
    cfg.end_margin = 4;
    auto res = xi_scan(cfg);
    REQUIRE(res.rows.size() == 3);
    CHECK(res.rows[2].xi.value < res.rows[1].xi.value);
    std::ostringstream os;
    write_xi_jsonl(os, 1.0, res.rows[1].xi);
    CHECK(os.str().find("\"kind\":\"xi\"") != std::string::npos);
    std::ostringstream cs;
    write_two_point_csv(cs, res.rows[0].curve);
    CHECK(cs.str().rfind("kind,n,p,se\n", 0) == 0);
    cfg.beta = 1.0;  // x = e - 1 > sqrt 2
    CHECK_THROWS_AS(xi_scan(cfg), ParameterError);
}
