#include "fkdl/stats.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fkdl {

double chi_square_sf(double stat, int df) {
    if (df <= 0) return 1.0;
    if (stat <= 0) return 1.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * stat);
}

ChiSquare chi_square_gof(const std::vector<double>& counts, const std::vector<double>& probs,
                         double min_expected) {
    if (counts.size() != probs.size()) throw std::invalid_argument("chi-square: size mismatch");
    double n = std::accumulate(counts.begin(), counts.end(), 0.0);
    ChiSquare r;
    double pooled_obs = 0, pooled_exp = 0;
    int cells = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        double e = n * probs[i];
        if (e < min_expected) {
            pooled_obs += counts[i];
            pooled_exp += e;
            continue;
        }
        r.stat += (counts[i] - e) * (counts[i] - e) / e;
        ++cells;
    }
    if (pooled_exp > 0) {
        r.stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
        ++cells;
    } else if (pooled_obs > 0) {
        r.stat = INFINITY;
    }
    r.df = cells - 1;
    r.p_value = std::isinf(r.stat) ? 0.0 : chi_square_sf(r.stat, r.df);
    return r;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

MannWhitney mann_whitney(const std::vector<double>& a, const std::vector<double>& b) {
    std::size_t n1 = a.size(), n2 = b.size();
    if (n1 == 0 || n2 == 0) throw std::invalid_argument("mann-whitney: empty sample");
    std::vector<std::pair<double, int>> all;
    all.reserve(n1 + n2);
    for (double v : a) all.push_back({v, 0});
    for (double v : b) all.push_back({v, 1});
    std::sort(all.begin(), all.end());
    double rank_a = 0, tie_term = 0;
    std::size_t i = 0, N = all.size();
    while (i < N) {
        std::size_t j = i;
        while (j < N && all[j].first == all[i].first) ++j;
        double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        for (std::size_t k = i; k < j; ++k)
            if (all[k].second == 0) rank_a += avg;
        i = j;
    }
    MannWhitney r;
    double dn1 = n1, dn2 = n2, dN = N;
    r.u = rank_a - dn1 * (dn1 + 1) / 2;
    double mu = dn1 * dn2 / 2;
    double var = dn1 * dn2 / 12 * ((dN + 1) - tie_term / (dN * (dN - 1)));
    if (var <= 0) {
        r.z = 0;
        return r;
    }
    r.z = (r.u - mu) / std::sqrt(var);
    r.p_greater = normal_sf(r.z);
    r.p_two_sided = std::min(1.0, 2 * normal_sf(std::fabs(r.z)));
    return r;
}

double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty sample");
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile(std::vector<double> v, double p) {
    if (v.empty()) throw std::invalid_argument("quantile of empty sample");
    if (!(p >= 0 && p <= 1)) throw std::invalid_argument("quantile level outside [0, 1]");
    std::sort(v.begin(), v.end());
    double h = p * (v.size() - 1);
    std::size_t i = static_cast<std::size_t>(h);
    if (i + 1 >= v.size()) return v.back();
    return v[i] + (h - i) * (v[i + 1] - v[i]);
}

double mean(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean of empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double variance(const std::vector<double>& v) {
    if (v.size() < 2) throw std::invalid_argument("variance needs two values");
    double m = mean(v), s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
}

}  // namespace fkdl
