#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "fkdl/sampler.hpp"

namespace fkdl {

struct PrecisionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PinningSpec {
    int d = 3;
    double C1 = 1.0;
    std::vector<double> lambdas;
    double tol = 1e-14;  // absolute truncation tolerance for series evaluations
    void validate() const;
    double s() const { return 0.5 * (d - 1); }
};

// Truncated power series sum_k c_k z^k.
struct SeriesFunction {
    std::vector<double> c;
    double eval(double z) const;
    std::size_t size() const { return c.size(); }
};

SeriesFunction series_product(const SeriesFunction& a, const SeriesFunction& b);
// sum_{k >= 1} B^k = B / (1 - B), coefficientwise; requires c_0 = 0.
SeriesFunction geometric_series(const SeriesFunction& b);

struct Certified {
    double value = 0;
    double error = 0;  // bound on the truncation error
    long terms = 0;
};

// Li_s(e^{-mu}) for mu >= 0; infinite at mu = 0 when s <= 1.
Certified polylog_exp(double s, double mu, double tol = 1e-15);

// Coefficients b_l = C1 lambda l^{-(d-1)/2}, l = 1..N.
SeriesFunction series_B(const PinningSpec& spec, double lambda, int N);
// B(z) for z in [0, 1] with a certified tail.
Certified eval_B(const PinningSpec& spec, double lambda, double z);
// A(m), m = 1..M, by convolution.
std::vector<double> A_coefficients(const PinningSpec& spec, double lambda, int M);

struct PinningSolution {
    double lambda = 0;
    double f = 0;
    bool no_pinning = false;
    double B_at_one = 0;  // may be +inf
    double residual = 0;  // B(e^{-f}) - 1 when f > 0
};

PinningSolution solve_f(const PinningSpec& spec, double lambda);
std::vector<PinningSolution> pinning_curve(const PinningSpec& spec);

struct ExponentFit {
    int d = 0;
    double slope = 0;
    double slope_se = 0;
    int points = 0;
    double threshold = 0;  // d >= 4: 1 / (C1 zeta((d-1)/2))
    bool zero_below_threshold = true;
};

// d = 2: slope of log f against log lambda on the smallest decade.
// d = 3: slope of log(-log f) against log(1/lambda) on the smallest decade.
// d >= 4: threshold check.
ExponentFit asymptotic_fit(const PinningSpec& spec);

void write_pinning_csv(std::ostream& os, const PinningSpec& spec, const std::vector<PinningSolution>& sol);

// ---- random walks ----

// Lazy simple walk on Z^k: stays with probability `lazy`, otherwise moves to a
// uniformly chosen neighbour. k = 0 gives the walk that never moves.
struct LazyWalk {
    int k = 1;
    double lazy = 0.5;
};

struct LocalTimeTail {
    double delta = 0;
    double p = 0;
    double se = 0;
    double rate = 0;  // -(1/n) log p, +inf when p = 0
};

struct LocalTimeResult {
    int n = 0;
    long trials = 0;
    std::vector<LocalTimeTail> tails;
    std::vector<long> samples;  // local times
};

// Local time at 0 over times 0..n and tail probabilities P(L >= delta n).
LocalTimeResult simulate_local_time(const LazyWalk& w, int n, long trials, const std::vector<double>& deltas,
                                    std::uint64_t seed);
// Log-log slope of the rates against delta over tails with 0 < p < 1.
double rate_exponent(const LocalTimeResult& r);
// Exact law of the local time for the one-dimensional lazy walk.
std::vector<double> local_time_law_1d(double lazy, int n);

struct RenewalPoint {
    int n = 0;
    double exact = 0;
    double mc = 0;
    double se = 0;
};

struct RenewalCurve {
    double mean_step = 0;
    double limit = 0;  // 1 / E[X]
    std::vector<RenewalPoint> points;
};

// law[k-1] = P(X = k). Hitting probability of n by the partial sums.
RenewalCurve renewal_constant(const std::vector<double>& law, const std::vector<int>& ns, long trials,
                              std::uint64_t seed);

}  // namespace fkdl
