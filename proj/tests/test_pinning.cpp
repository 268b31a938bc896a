#include <cmath>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "fkdl/pinning.hpp"

using namespace fkdl;

namespace {

// A(m) summed over compositions of m.
double A_brute(double c, double s, int m) {
    double total = 0;
    std::function<void(int, double)> rec = [&](int left, double w) {
        if (left == 0) {
            total += w;
            return;
        }
        for (int l = 1; l <= left; ++l) rec(left - l, w * c * std::pow(l, -s));
    };
    rec(m, 1.0);
    return total;
}

double li_direct(double s, double mu) {
    long double t = 0;
    for (long l = 1; l < 2000000; ++l) t += std::pow(double(l), -s) * std::exp(-mu * l);
    return static_cast<double>(t);
}

}  // namespace

TEST_CASE("polylog evaluation on both branches") {
    for (double s : {0.5, 1.0, 1.5, 2.0, 2.5})
        for (double mu : {0.05, 0.3, 0.999, 1.0, 2.0}) {
            auto v = polylog_exp(s, mu);
            CHECK(v.value == doctest::Approx(li_direct(s, mu)).epsilon(1e-11));
            CHECK(v.error <= 1e-15);
        }
    CHECK(polylog_exp(2.0, 0.0).value == doctest::Approx(M_PI * M_PI / 6));
    CHECK(std::isinf(polylog_exp(1.0, 0.0).value));
    // closed form for s = 1
    for (double mu : {1e-9, 1e-4, 0.2, 0.7, 3.0})
        CHECK(polylog_exp(1.0, mu).value == doctest::Approx(-std::log(-std::expm1(-mu))).epsilon(1e-12));
}

TEST_CASE("series B and its geometric sum") {
    PinningSpec sp;
    sp.d = 3;
    auto b = series_B(sp, 0.3, 20);
    CHECK(b.c[0] == 0);
    CHECK(b.c[4] == doctest::Approx(0.3 / 4));
    auto zero = series_B(sp, 0.0, 10);
    CHECK(zero.eval(0.9) == 0);
    // d = 3 closed form
    for (double z : {0.1, 0.5, 0.9, 0.999, 1 - 1e-6})
        CHECK(eval_B(sp, 0.3, z).value == doctest::Approx(-0.3 * std::log1p(-z)).epsilon(1e-10));
    sp.d = 5;
    CHECK(eval_B(sp, 0.2, 1.0).value == doctest::Approx(0.2 * M_PI * M_PI / 6).epsilon(1e-14));

    sp.d = 2;
    auto a = geometric_series(series_B(sp, 0.7, 12));
    for (int m = 1; m <= 12; ++m) CHECK(a.c[m] == doctest::Approx(A_brute(0.7, 0.5, m)).epsilon(1e-12));
    // A = B + B A
    auto bb = series_B(sp, 0.7, 12);
    auto ba = series_product(bb, a);
    for (int m = 1; m <= 12; ++m) CHECK(a.c[m] == doctest::Approx(bb.c[m] + ba.c[m]).epsilon(1e-12));
    CHECK_THROWS_AS(geometric_series(SeriesFunction{{1.0, 0.5}}), ParameterError);
}

TEST_CASE("closed-form root in d = 3") {
    PinningSpec sp;
    sp.d = 3;
    auto s = solve_f(sp, 0.25);
    CHECK(std::fabs(s.f - (-std::log1p(-std::exp(-4.0)))) < 1e-10);
    CHECK(std::fabs(s.residual) < 1e-10);
    for (double l : {0.05, 0.1, 0.5, 2.0}) {
        auto r = solve_f(sp, l);
        CHECK(r.f == doctest::Approx(-std::log1p(-std::exp(-1 / l))).epsilon(1e-10));
    }
    sp.C1 = 2;
    CHECK(solve_f(sp, 0.125).f == doctest::Approx(s.f).epsilon(1e-12));
}

TEST_CASE("monotone curves and residuals") {
    for (int d : {2, 3, 4, 5}) {
        PinningSpec sp;
        sp.d = d;
        for (double l = 0.01; l < 3; l *= 1.3) sp.lambdas.push_back(l);
        auto c = pinning_curve(sp);
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (c[i].f > 0) CHECK(std::fabs(c[i].residual) < 1e-10);
            if (i) CHECK(c[i].f >= c[i - 1].f);
        }
        PinningSpec big = sp;
        big.C1 = 1.5;
        auto cb = pinning_curve(big);
        for (std::size_t i = 0; i < c.size(); ++i) CHECK(cb[i].f >= c[i].f);
    }
}

TEST_CASE("A(m) against the exponential bound") {
    PinningSpec sp;
    sp.d = 2;
    const double l = 0.5;
    auto sol = solve_f(sp, l);
    auto A = A_coefficients(sp, l, 200);
    for (int m = 100; m <= 200; ++m) CHECK(A[m] <= std::exp(2 * sol.f * m));
    // the growth rate of A is exactly f
    CHECK(std::log(A[200] / A[199]) == doctest::Approx(sol.f).epsilon(0.02));
}

TEST_CASE("asymptotic exponents and zeta thresholds") {
    PinningSpec s2;
    s2.d = 2;
    for (double l = 1e-3; l <= 1.0 + 1e-12; l *= std::pow(10.0, 0.125)) s2.lambdas.push_back(l);
    auto f2 = asymptotic_fit(s2);
    CHECK(std::fabs(f2.slope - 2) < 0.05);

    PinningSpec s3 = s2;
    s3.d = 3;
    s3.lambdas.clear();
    for (double l = 1e-2; l <= 1.0 + 1e-12; l *= std::pow(10.0, 0.125)) s3.lambdas.push_back(l);
    auto f3 = asymptotic_fit(s3);
    CHECK(std::fabs(f3.slope - 1) < 0.05);
    auto small = solve_f(s3, 0.02);
    CHECK(0.02 * -std::log(small.f) == doctest::Approx(1.0).epsilon(1e-6));

    for (int d : {4, 5}) {
        PinningSpec s = s3;
        s.d = d;
        auto f = asymptotic_fit(s);
        CHECK(f.zero_below_threshold);
        CHECK(solve_f(s, 0.99 * f.threshold).no_pinning);
        CHECK(solve_f(s, 1.01 * f.threshold).f > 0);
    }
}

TEST_CASE("local time of lazy walks") {
    auto z = simulate_local_time({0, 0.5}, 50, 10, {0.0, 1.0}, 1);
    for (long L : z.samples) CHECK(L == 51);
    CHECK(z.tails[0].p == 1.0);
    CHECK(z.tails[1].p == 1.0);

    const int n = 60;
    auto law = local_time_law_1d(0.5, n);
    double tot = 0;
    for (double p : law) tot += p;
    CHECK(tot == doctest::Approx(1.0).epsilon(1e-12));
    auto mc = simulate_local_time({1, 0.5}, n, 200000, {0.1, 0.2, 0.3}, 9);
    for (const auto& t : mc.tails) {
        double exact = 0;
        for (int L = 0; L <= n + 1; ++L)
            if (L >= t.delta * n) exact += law[L];
        CHECK(std::fabs(t.p - exact) <= 4 * t.se + 1e-4);
    }
    CHECK(mc.tails[0].p >= mc.tails[1].p);

    auto far = simulate_local_time({1, 0.5}, 400, 300000, {0.15, 0.2, 0.25}, 10);
    CHECK(std::fabs(rate_exponent(far) - 2) < 0.3);
}

TEST_CASE("renewal hitting probabilities") {
    auto one = renewal_constant({1.0}, {1, 5, 40}, 100, 2);
    for (const auto& p : one.points) {
        CHECK(p.exact == 1.0);
        CHECK(p.mc == 1.0);
    }
    auto u12 = renewal_constant({0.5, 0.5}, {10, 100}, 100000, 3);
    CHECK(u12.limit == doctest::Approx(2.0 / 3));
    CHECK(std::fabs(u12.points[1].exact - 2.0 / 3) < 1e-12);
    CHECK(std::fabs(u12.points[1].mc - 2.0 / 3) < 0.01);
    auto u123 = renewal_constant({1. / 3, 1. / 3, 1. / 3}, {100}, 0, 3);
    CHECK(u123.points[0].exact == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(renewal_constant({0.0, 0.5, 0.0, 0.5}, {10}, 10, 1), ParameterError);
    CHECK_THROWS_AS(renewal_constant({0.5, 0.4}, {10}, 10, 1), ParameterError);
}

TEST_CASE("coarse lambda grids are rejected") {
    PinningSpec s;
    s.d = 2;
    s.lambdas = {0.1, 0.2, 0.3};
    CHECK_THROWS_AS(asymptotic_fit(s), DiagnosticsError);
}
