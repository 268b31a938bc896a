#include "fkdl/pinning.hpp"

#include <algorithm>
#include <boost/math/special_functions/zeta.hpp>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace fkdl {

void PinningSpec::validate() const {
    if (d < 2) throw ParameterError("pinning needs d >= 2");
    if (!(C1 > 0)) throw ParameterError("C1 must be positive");
    if (!(tol > 0)) throw ParameterError("tolerance must be positive");
    for (double l : lambdas)
        if (!(l > 0)) throw ParameterError("lambda grid must be positive");
}

double SeriesFunction::eval(double z) const {
    double r = 0;
    for (std::size_t k = c.size(); k-- > 0;) r = r * z + c[k];
    return r;
}

SeriesFunction series_product(const SeriesFunction& a, const SeriesFunction& b) {
    std::size_t N = std::min(a.size(), b.size());
    SeriesFunction r;
    r.c.assign(N, 0.0);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; i + j < N; ++j) r.c[i + j] += a.c[i] * b.c[j];
    return r;
}

SeriesFunction geometric_series(const SeriesFunction& b) {
    if (b.c.empty() || b.c[0] != 0.0) throw ParameterError("geometric series needs B(0) = 0");
    SeriesFunction a;
    a.c.assign(b.size(), 0.0);
    for (std::size_t m = 1; m < b.size(); ++m) {
        double s = b.c[m];
        for (std::size_t l = 1; l < m; ++l) s += b.c[l] * a.c[m - l];
        a.c[m] = s;
    }
    return a;
}

Certified polylog_exp(double s, double mu, double tol) {
    if (!(mu >= 0)) throw ParameterError("polylog argument must satisfy mu >= 0");
    Certified r;
    if (mu == 0) {
        if (s <= 1) {
            r.value = std::numeric_limits<double>::infinity();
            return r;
        }
        r.value = boost::math::zeta(s);
        r.error = 4e-16 * r.value;
        return r;
    }
    if (mu >= 1) {
        long double sum = 0;
        long l = 1;
        while (true) {
            sum += std::pow(static_cast<double>(l), -s) * std::exp(-mu * l);
            double tail = std::pow(static_cast<double>(l + 1), -s) * std::exp(-mu * (l + 1)) / -std::expm1(-mu);
            if (tail <= tol || l > 100000000) {
                r.error = tail;
                break;
            }
            ++l;
        }
        r.value = static_cast<double>(sum);
        r.terms = l;
        if (r.error > tol) throw PrecisionError("polylog tail not certified");
        return r;
    }
    // expansion around mu = 0, valid for mu < 2 pi
    long double sum = 0;
    double rs = std::round(s);
    bool integer = std::fabs(s - rs) < 1e-14 && rs >= 1;
    int m = static_cast<int>(rs);
    if (integer) {
        double h = 0, fact = 1;
        for (int j = 1; j <= m - 1; ++j) {
            h += 1.0 / j;
            fact *= j;
        }
        sum += std::pow(-mu, m - 1) / fact * (h - std::log(mu));
    } else {
        sum += std::tgamma(1 - s) * std::pow(mu, s - 1);
    }
    const double twopi = 2 * M_PI;
    const double zeta3 = 1.2020569031595942;
    int k0 = static_cast<int>(std::ceil(s)) + 2;
    double term_fact = 1;  // (-mu)^k / k!
    for (int k = 0; k < 400; ++k) {
        if (k > 0) term_fact *= -mu / k;
        if (!(integer && k == m - 1)) sum += boost::math::zeta(s - k) * term_fact;
        if (k >= k0) {
            double lg = std::lgamma(k + 2 - s) - std::lgamma(k + 2.0);
            double Tnext = 2 * zeta3 * std::pow(twopi, s - 1) * std::exp(lg + (k + 1) * std::log(mu / twopi));
            double tail = Tnext / (1 - mu / twopi);
            if (tail <= tol) {
                r.error = tail;
                r.terms = k + 1;
                r.value = static_cast<double>(sum);
                return r;
            }
        }
    }
    throw PrecisionError("polylog expansion not certified");
}

SeriesFunction series_B(const PinningSpec& spec, double lambda, int N) {
    SeriesFunction b;
    b.c.assign(N + 1, 0.0);
    for (int l = 1; l <= N; ++l) b.c[l] = spec.C1 * lambda * std::pow(static_cast<double>(l), -spec.s());
    return b;
}

namespace {

Certified B_of_mu(const PinningSpec& spec, double lambda, double mu) {
    double scale = spec.C1 * lambda;
    if (scale == 0) return {};
    auto li = polylog_exp(spec.s(), mu, spec.tol / scale);
    li.value *= scale;
    li.error *= scale;
    return li;
}

}  // namespace

Certified eval_B(const PinningSpec& spec, double lambda, double z) {
    if (!(z >= 0 && z <= 1)) throw ParameterError("B is evaluated on [0, 1]");
    if (z == 0) return {};
    return B_of_mu(spec, lambda, -std::log(z));
}

std::vector<double> A_coefficients(const PinningSpec& spec, double lambda, int M) {
    return geometric_series(series_B(spec, lambda, M)).c;
}

PinningSolution solve_f(const PinningSpec& spec, double lambda) {
    spec.validate();
    if (!(lambda > 0)) throw ParameterError("lambda must be positive");
    PinningSolution r;
    r.lambda = lambda;
    r.B_at_one = spec.s() > 1 ? spec.C1 * lambda * boost::math::zeta(spec.s())
                              : std::numeric_limits<double>::infinity();
    if (r.B_at_one <= 1) {
        r.no_pinning = true;
        return r;
    }
    auto g = [&](double f) {
        auto b = B_of_mu(spec, lambda, f);
        if (b.error > 1e-12) throw PrecisionError("series truncation not certified");
        return b.value - 1;
    };
    double hi = std::log1p(spec.C1 * lambda);
    double lo = hi;
    while (g(lo) <= 0) {
        lo *= 0.5;
        if (lo < 1e-300) throw PrecisionError("root below double range");
    }
    while (hi - lo > std::min(1e-12, 1e-13 * hi)) {
        double mid = hi / lo < 2 ? 0.5 * (lo + hi) : std::sqrt(lo * hi);
        if (mid <= lo || mid >= hi) break;
        (g(mid) > 0 ? lo : hi) = mid;
    }
    r.f = 0.5 * (lo + hi);
    r.residual = g(r.f);
    return r;
}

std::vector<PinningSolution> pinning_curve(const PinningSpec& spec) {
    spec.validate();
    std::vector<double> ls = spec.lambdas;
    std::sort(ls.begin(), ls.end());
    std::vector<PinningSolution> out;
    for (double l : ls) {
        out.push_back(solve_f(spec, l));
        if (out.size() > 1 && out.back().f < out[out.size() - 2].f * (1 - 1e-12))
            throw std::logic_error("f(lambda) decreased along the grid");
    }
    return out;
}

namespace {

std::pair<double, double> ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    double b = sxy / sxx;
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) rss += std::pow(y[i] - my - b * (x[i] - mx), 2);
    double se = x.size() > 2 ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
    return {b, se};
}

}  // namespace

ExponentFit asymptotic_fit(const PinningSpec& spec) {
    auto sol = pinning_curve(spec);
    ExponentFit fit;
    fit.d = spec.d;
    if (sol.size() < 3) throw DiagnosticsError("lambda grid too coarse");
    double lmin = sol.front().lambda, lmax = sol.back().lambda;
    if (lmax / lmin < 100 * (1 - 1e-12)) throw DiagnosticsError("lambda grid must span two decades");
    if (spec.d >= 4) {
        fit.threshold = 1 / (spec.C1 * boost::math::zeta(spec.s()));
        for (const auto& s : sol)
            if (s.lambda < fit.threshold && (s.f != 0 || !s.no_pinning)) fit.zero_below_threshold = false;
        fit.points = static_cast<int>(sol.size());
        return fit;
    }
    std::vector<double> x, y;
    for (const auto& s : sol) {
        if (s.lambda > 10 * lmin * (1 + 1e-12)) continue;
        if (!(s.f > 0)) throw DiagnosticsError("f vanished on the fit window");
        if (spec.d == 2) {
            x.push_back(std::log(s.lambda));
            y.push_back(std::log(s.f));
        } else {
            x.push_back(std::log(1 / s.lambda));
            y.push_back(std::log(-std::log(s.f)));
        }
    }
    if (x.size() < 3) throw DiagnosticsError("lambda grid too coarse on the smallest decade");
    auto [b, se] = ols_slope(x, y);
    fit.slope = b;
    fit.slope_se = se;
    fit.points = static_cast<int>(x.size());
    return fit;
}

void write_pinning_csv(std::ostream& os, const PinningSpec& spec, const std::vector<PinningSolution>& sol) {
    os << "d,C1,lambda,f,no_pinning,B_at_one,residual\n";
    char buf[256];
    for (const auto& s : sol) {
        std::snprintf(buf, sizeof buf, "%d,%.6g,%.10g,%.17g,%d,%.10g,%.3g\n", spec.d, spec.C1, s.lambda, s.f,
                      s.no_pinning ? 1 : 0, s.B_at_one, s.residual);
        os << buf;
    }
}

// ---------------------------------------------------------------------------

LocalTimeResult simulate_local_time(const LazyWalk& w, int n, long trials, const std::vector<double>& deltas,
                                    std::uint64_t seed) {
    if (w.k < 0 || n < 0 || trials < 1 || !(w.lazy >= 0 && w.lazy <= 1))
        throw ParameterError("bad local-time parameters");
    Rng rng(seed);
    LocalTimeResult res;
    res.n = n;
    res.trials = trials;
    std::vector<int> pos(w.k);
    for (long t = 0; t < trials; ++t) {
        std::fill(pos.begin(), pos.end(), 0);
        int nonzero = 0;
        long L = 1;
        for (int s = 1; s <= n; ++s) {
            if (w.k > 0 && rng.uniform() >= w.lazy) {
                int a = rng.below(2 * w.k);
                int& c = pos[a >> 1];
                int before = c;
                c += (a & 1) ? 1 : -1;
                nonzero += (c != 0) - (before != 0);
            }
            if (nonzero == 0) ++L;
        }
        res.samples.push_back(L);
    }
    for (double d : deltas) {
        LocalTimeTail tl;
        tl.delta = d;
        long hit = 0;
        for (long L : res.samples) hit += L >= d * n;
        tl.p = static_cast<double>(hit) / trials;
        tl.se = std::sqrt(tl.p * (1 - tl.p) / trials);
        tl.rate = tl.p > 0 ? -std::log(tl.p) / n : std::numeric_limits<double>::infinity();
        res.tails.push_back(tl);
    }
    return res;
}

double rate_exponent(const LocalTimeResult& r) {
    std::vector<double> x, y;
    for (const auto& t : r.tails)
        if (t.delta > 0 && t.p > 0 && t.p < 1) {
            x.push_back(std::log(t.delta));
            y.push_back(std::log(t.rate));
        }
    if (x.size() < 2) throw DiagnosticsError("need two tails with 0 < p < 1");
    return ols_slope(x, y).first;
}

std::vector<double> local_time_law_1d(double lazy, int n) {
    // u_t = P(S_t = 0), r_t = first-return law, then convolution powers of r
    std::vector<double> dist(2 * n + 3, 0.0), next(dist.size());
    int off = n + 1;
    dist[off] = 1;
    std::vector<double> u(n + 1, 0.0);
    u[0] = 1;
    for (int t = 1; t <= n; ++t) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 1; i + 1 < dist.size(); ++i) {
            if (dist[i] == 0) continue;
            next[i] += lazy * dist[i];
            next[i - 1] += 0.5 * (1 - lazy) * dist[i];
            next[i + 1] += 0.5 * (1 - lazy) * dist[i];
        }
        dist.swap(next);
        u[t] = dist[off];
    }
    std::vector<double> r(n + 1, 0.0);
    for (int t = 1; t <= n; ++t) {
        double s = u[t];
        for (int k = 1; k < t; ++k) s -= r[k] * u[t - k];
        r[t] = s;
    }
    // P(j returns within n) via cumulative convolution powers
    std::vector<double> law(n + 2, 0.0);
    std::vector<double> pw(n + 1, 0.0), np(n + 1);
    pw[0] = 1;  // zero returns
    double prev = 1;  // P(T_1 + ... + T_j <= n) for j = 0
    for (int j = 1; j <= n + 1; ++j) {
        std::fill(np.begin(), np.end(), 0.0);
        for (int a = 0; a <= n; ++a) {
            if (pw[a] == 0) continue;
            for (int b = 1; a + b <= n; ++b) np[a + b] += pw[a] * r[b];
        }
        pw.swap(np);
        double cur = std::accumulate(pw.begin(), pw.end(), 0.0);
        law[j] = prev - cur;  // local time = j (visits at times 0 plus j-1 returns)
        prev = cur;
        if (cur == 0) break;
    }
    return law;  // law[L] = P(local time = L)
}

RenewalCurve renewal_constant(const std::vector<double>& law, const std::vector<int>& ns, long trials,
                              std::uint64_t seed) {
    if (law.empty()) throw ParameterError("empty step law");
    double tot = 0;
    int g = 0;
    RenewalCurve c;
    for (std::size_t k = 0; k < law.size(); ++k) {
        if (law[k] < 0) throw ParameterError("negative probability");
        tot += law[k];
        c.mean_step += (k + 1) * law[k];
        if (law[k] > 0) g = std::gcd(g, static_cast<int>(k + 1));
    }
    if (std::fabs(tot - 1) > 1e-12) throw ParameterError("step law must sum to 1");
    if (g != 1) throw ParameterError("periodic step law");
    c.limit = 1 / c.mean_step;
    int nmax = 0;
    for (int n : ns) {
        if (n < 0) throw ParameterError("n must be >= 0");
        nmax = std::max(nmax, n);
    }
    std::vector<double> u(nmax + 1, 0.0);
    u[0] = 1;
    for (int n = 1; n <= nmax; ++n)
        for (std::size_t k = 0; k < law.size() && static_cast<int>(k) + 1 <= n; ++k) u[n] += law[k] * u[n - k - 1];
    std::vector<double> cdf(law.size());
    std::partial_sum(law.begin(), law.end(), cdf.begin());
    std::vector<long> hits(nmax + 1, 0);
    Rng rng(seed);
    for (long t = 0; t < trials; ++t) {
        long s = 0;
        while (s <= nmax) {
            ++hits[s];
            double v = rng.uniform();
            std::size_t k = std::upper_bound(cdf.begin(), cdf.end(), v) - cdf.begin();
            if (k >= law.size()) k = law.size() - 1;
            s += static_cast<long>(k) + 1;
        }
    }
    for (int n : ns) {
        RenewalPoint p;
        p.n = n;
        p.exact = u[n];
        if (trials > 0) {
            p.mc = static_cast<double>(hits[n]) / trials;
            p.se = std::sqrt(p.mc * (1 - p.mc) / trials);
        }
        c.points.push_back(p);
    }
    return c;
}

}  // namespace fkdl
