#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fkdl/interface.hpp"
#include "fkdl/stats.hpp"

using namespace fkdl;

namespace {

// Spin marginals on {-1,0,1} x {0,1} by direct enumeration of q^6 states.
std::vector<std::vector<double>> potts_marginals(double beta, double J, int q) {
    std::vector<std::pair<int, int>> site;
    for (int y = 0; y <= 1; ++y)
        for (int x = -1; x <= 1; ++x) site.push_back({x, y});
    auto ext = [](int y) { return y >= 1 ? 1 : 2; };
    auto at = [&](int x, int y) {
        for (int k = 0; k < 6; ++k)
            if (site[k] == std::pair<int, int>{x, y}) return k;
        return -1;
    };
    std::vector<std::vector<double>> marg(6, std::vector<double>(q + 1, 0.0));
    double Z = 0;
    std::vector<int> s(6);
    int total = 1;
    for (int k = 0; k < 6; ++k) total *= q;
    for (int c = 0; c < total; ++c) {
        int r = c;
        for (int k = 0; k < 6; ++k) {
            s[k] = 1 + r % q;
            r /= q;
        }
        double E = 0;
        for (int k = 0; k < 6; ++k) {
            auto [x, y] = site[k];
            const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
            for (int t = 0; t < 4; ++t) {
                int nx = x + dx[t], ny = y + dy[t];
                int o = at(nx, ny);
                double K = (dx[t] == 0 && std::min(y, ny) == 0) ? beta * J : beta;
                if (o >= 0) {
                    if (o > k && s[o] == s[k]) E += K;
                } else if (s[k] == ext(ny)) {
                    E += K;
                }
            }
        }
        double w = std::exp(E);
        Z += w;
        for (int k = 0; k < 6; ++k) marg[k][s[k]] += w;
    }
    for (auto& m : marg)
        for (auto& v : m) v /= Z;
    return marg;
}

}  // namespace

TEST_CASE("Dobrushin Potts marginals match enumeration") {
    for (int q : {2, 3}) {
        const double beta = 0.9, J = 0.4;
        auto ex = potts_marginals(beta, J, q);
        for (bool hb_only : {false, true}) {
            DobrushinPotts m(1, beta, J, q);
            Rng rng(100 + q + hb_only);
            std::vector<std::vector<double>> ind(6 * (q + 1));
            for (int t = 0; t < 60000; ++t) {
                if (!hb_only) m.sw_sweep(rng);
                m.heat_bath_sweep(rng);
                if (t < 500) continue;
                for (int y = 0; y <= 1; ++y)
                    for (int x = -1; x <= 1; ++x) {
                        int k = (y * 3) + (x + 1);
                        for (int s = 1; s <= q; ++s) ind[k * (q + 1) + s].push_back(m.spin(x, y) == s);
                    }
            }
            for (int k = 0; k < 6; ++k)
                for (int s = 1; s <= q; ++s) {
                    auto e = binned_mean(ind[k * (q + 1) + s]);
                    CHECK(std::fabs(e.mean - ex[k][s]) <= 4 * e.se + 1e-3);
                }
        }
    }
}

TEST_CASE("seeded runs are reproducible") {
    InterfaceRunParams p;
    p.sweeps = 60;
    p.burn_in = 10;
    p.thin = 5;
    p.seed = 77;
    auto a = sample_dobrushin(6, 1.2, 1.0, 2, p);
    auto b = sample_dobrushin(6, 1.2, 1.0, 2, p);
    REQUIRE(a.profiles.size() == b.profiles.size());
    for (std::size_t i = 0; i < a.profiles.size(); ++i) CHECK(a.profiles[i].upper == b.profiles[i].upper);
    CHECK(a.duality_checks == 10);
}

TEST_CASE("flat, bumped and stepped interfaces") {
    DobrushinPotts m(4, 1.0, 1.0, 3);
    auto flat = extract_interface(m);
    for (double u : flat.upper) CHECK(u == 0.5);
    for (double l : flat.lower) CHECK(l == 0.5);
    CHECK(flat.max_width() == 0);
    CHECK(flat.gamma_plus0() == 0.5);

    m.set_spin(0, 1, 2);
    auto bump = extract_interface(m);
    CHECK(envelopes_bound(bump));
    for (int k = 0; k < 10; ++k) {
        double x = -4.5 + k;
        double w = bump.upper[k] - bump.lower[k];
        CHECK(w == (std::fabs(x) == 0.5 ? 1.0 : 0.0));
    }
    CHECK(bump.gamma_plus0() == 1.5);
    CHECK(bump.max_width() == 1.0);

    // a third colour inside the lower phase forms a closed contour, not part of the interface
    m.set_flat();
    m.set_spin(0, -2, 3);
    auto island = extract_interface(m);
    CHECK(island.max_width() == 0);

    m.set_flat();
    for (int x = 1; x <= 4; ++x) m.set_spin(x, 1, 2);
    auto step = extract_interface(m);
    CHECK(step.upper[5] == 1.5);
    CHECK(step.lower[5] == 0.5);
    CHECK(step.upper[7] == 1.5);
    CHECK(step.lower[7] == 1.5);
}

TEST_CASE("frozen interface gives zero widths") {
    std::vector<InterfaceProfile> ps(100, extract_interface(DobrushinPotts(5, 1.0, 1.0, 2)));
    auto s = width_stats(ps);
    CHECK(s.median_max_width == 0);
    CHECK(s.var_gamma0 == 0);
    CHECK(s.median_max_upper == 0.5);
    ps.resize(50);
    CHECK_THROWS_AS(width_stats(ps), ParameterError);
}

TEST_CASE("large beta freezes the flat interface") {
    InterfaceRunParams p;
    p.sweeps = 30;
    p.burn_in = 0;
    p.thin = 1;
    auto r = sample_dobrushin(5, 12.0, 0.5, 2, p);
    for (const auto& pr : r.profiles) CHECK(pr.max_width() == 0);
}

TEST_CASE("duality assertions and their failure modes") {
    DobrushinPotts m(5, 1.3, 1.0, 2);
    Rng rng(4);
    for (int t = 0; t < 40; ++t) {
        m.sw_sweep(rng);
        auto pr = extract_interface(m);
        CHECK_NOTHROW(check_duality(m, m.es_bonds(rng), pr));
    }
    auto pr = extract_interface(m);
    std::vector<char> all(m.bonds().size(), 1);
    CHECK_THROWS_AS(check_duality(m, all, pr), InterfaceError);
}

TEST_CASE("planar dual of a box") {
    auto lat = build_box(2, 3);
    auto dl = dual_lattice(lat);
    CHECK(dl.num_vertices() == 6 * 6 + 1);
    CHECK(dl.num_edges() == lat.num_edges());
    // Euler: V - E + F = 2 with F = dual vertices
    CHECK(lat.num_vertices() - lat.num_edges() + dl.num_vertices() == 2);
    EdgeConfiguration full(lat.num_edges(), true);
    CHECK(dual_config(lat, full).open_count() == 0);
    Rng rng(3);
    EdgeConfiguration w(lat.num_edges());
    for (int e = 0; e < w.size(); ++e) w.set(e, rng.uniform() < 0.4);
    CHECK(dual_config(lat, dual_config(lat, w)) == w);
    CHECK(dual_weight(std::sqrt(2.0), 2.0) == doctest::Approx(std::sqrt(2.0)));
    CHECK(dual_weight(1.0, 3.0) == doctest::Approx(3.0));
    CHECK_THROWS_AS(dual_config(build_box(3, 1), EdgeConfiguration(54)), UnsupportedDynamics);
}
