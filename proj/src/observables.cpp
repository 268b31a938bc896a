#include "fkdl/observables.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "fkdl/parallel.hpp"

namespace fkdl {

void TwoPointCurve::validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (i && p.n <= points[i - 1].n) throw DataQualityError("separations must increase");
        if (p.p < 0 || p.p > 1 || p.se < 0) throw DataQualityError("estimate out of range");
    }
}

std::string to_string(XiMethod m) {
    switch (m) {
        case XiMethod::slope_fit: return "slope-fit";
        case XiMethod::ratio: return "ratio";
        case XiMethod::subadditive: return "subadditive-bound";
        case XiMethod::prefactor_fit: return "prefactor-fit";
    }
    return "?";
}

XiMethod parse_xi_method(const std::string& s) {
    if (s == "slope-fit" || s == "slope") return XiMethod::slope_fit;
    if (s == "ratio") return XiMethod::ratio;
    if (s == "subadditive-bound" || s == "subadditive") return XiMethod::subadditive;
    if (s == "prefactor-fit") return XiMethod::prefactor_fit;
    throw ParameterError("unknown xi method '" + s + "'");
}

namespace {

int origin_index(const Lattice& lat) { return lat.index(std::vector<int>(lat.dim(), 0)); }

int axis_index(const Lattice& lat, int x) {
    std::vector<int> c(lat.dim(), 0);
    c[0] = x;
    return lat.index(c);
}

void check_margin(const Lattice& lat, const std::vector<int>& ns, int margin) {
    if (ns.empty()) return;
    int nmax = *std::max_element(ns.begin(), ns.end());
    if (margin < 0) margin = nmax / 2;
    int L = lat.extent(0) - 1;
    if (nmax > L - margin)
        throw GeometryError("separation " + std::to_string(nmax) + " exceeds box length " + std::to_string(L) +
                            " minus margin " + std::to_string(margin));
    if (axis_index(lat, nmax) < 0 || origin_index(lat) < 0)
        throw GeometryError("separation leaves the box");
}

struct Lsq {
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov;
};

// Weighted least squares. Zero standard errors switch to unit weights with
// the residual variance as scale.
Lsq wls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& sd) {
    bool unit = (sd.array() <= 0).any();
    Eigen::VectorXd w = unit ? Eigen::VectorXd::Ones(y.size()) : Eigen::VectorXd(sd.array().square().inverse());
    Eigen::MatrixXd XtW = X.transpose() * w.asDiagonal();
    Eigen::MatrixXd A = XtW * X;
    Lsq r;
    r.beta = A.ldlt().solve(XtW * y);
    r.cov = A.ldlt().solve(Eigen::MatrixXd::Identity(A.rows(), A.cols()));
    if (unit) {
        Eigen::VectorXd res = y - X * r.beta;
        long dof = static_cast<long>(y.size()) - X.cols();
        double s2 = dof > 0 ? res.squaredNorm() / dof : 0.0;
        r.cov *= s2;
    }
    return r;
}

std::vector<TwoPointPoint> window(const TwoPointCurve& c, const FitOptions& opt, std::size_t need) {
    std::vector<TwoPointPoint> w;
    for (const auto& p : c.points)
        if (p.n >= opt.n_min && p.n <= opt.n_max && p.n > 0) {
            if (!(p.p > 0)) throw DataQualityError("nonpositive estimate at n=" + std::to_string(p.n));
            w.push_back(p);
        }
    if (w.size() < need)
        throw DataQualityError("need at least " + std::to_string(need) + " usable points, got " +
                               std::to_string(w.size()));
    return w;
}

XiEstimate finish(XiEstimate e) {
    e.lo = e.value - 2 * e.se;
    e.hi = e.value + 2 * e.se;
    return e;
}

}  // namespace

TwoPointData two_point_data(const SampleBatch& b, const Lattice& lat, const BoundaryCondition& bc,
                            const std::vector<int>& ns, int margin) {
    check_margin(lat, ns, margin);
    if (b.snapshots.empty()) throw DiagnosticsError("batch holds no configuration snapshots");
    TwoPointData d;
    d.ns = ns;
    int o = origin_index(lat);
    for (const auto& s : b.snapshots) {
        auto ci = rebuild_clusters(lat, s, bc);
        std::vector<double> row;
        for (int n : ns) row.push_back(ci.connected(o, axis_index(lat, n)) ? 1.0 : 0.0);
        d.samples.push_back(std::move(row));
    }
    return d;
}

TwoPointCurve curve_from_data(const TwoPointData& data) {
    TwoPointCurve c;
    for (std::size_t k = 0; k < data.ns.size(); ++k) {
        std::vector<double> col;
        col.reserve(data.samples.size());
        for (const auto& r : data.samples) col.push_back(r[k]);
        TwoPointPoint p;
        p.n = data.ns[k];
        p.samples = static_cast<long>(col.size());
        if (p.n == 0) {
            p.p = 1;
        } else {
            auto e = binned_mean(col);
            p.p = e.mean;
            p.se = e.se;
        }
        c.points.push_back(p);
    }
    c.validate();
    return c;
}

TwoPointCurve two_point_curve(const SampleBatch& b, const Lattice& lat, const BoundaryCondition& bc,
                              const std::vector<int>& ns, int margin) {
    auto c = curve_from_data(two_point_data(b, lat, bc, ns, margin));
    c.d = lat.dim();
    return c;
}

std::vector<Observable> line_pair_observables(const Lattice& lat, const std::vector<int>& ns, int end_margin) {
    std::vector<Observable> obs;
    int a = lat.lo(0) + end_margin;
    for (int n : ns) {
        int b = lat.hi(0) - end_margin - n;
        if (b < a) throw GeometryError("separation " + std::to_string(n) + " does not fit the box");
        std::vector<std::pair<int, int>> pairs;
        for (int x = a; x <= b; ++x) pairs.push_back({axis_index(lat, x), axis_index(lat, x + n)});
        obs.push_back([pairs](const EdgeConfiguration&, const ClusterIndex& ci) {
            int hits = 0;
            for (auto [u, v] : pairs) hits += ci.label[u] == ci.label[v];
            return static_cast<double>(hits) / pairs.size();
        });
    }
    return obs;
}

XiEstimate xi_fit(const TwoPointCurve& c, XiMethod m, const FitOptions& opt) {
    XiEstimate e;
    e.method = m;
    std::size_t need = m == XiMethod::prefactor_fit ? (opt.inverse_n_term ? 5 : 4) : 4;
    auto w = window(c, opt, need);
    e.n_min = w.front().n;
    e.n_max = w.back().n;
    int k = static_cast<int>(w.size());
    switch (m) {
        case XiMethod::slope_fit: {
            Eigen::MatrixXd X(k, 2);
            Eigen::VectorXd y(k), sd(k);
            for (int i = 0; i < k; ++i) {
                X(i, 0) = 1;
                X(i, 1) = w[i].n;
                y(i) = std::log(w[i].p);
                sd(i) = w[i].se / w[i].p;
            }
            auto r = wls(X, y, sd);
            e.value = -r.beta(1);
            e.se = std::sqrt(std::max(0.0, r.cov(1, 1)));
            break;
        }
        case XiMethod::ratio: {
            // local ratios, extrapolated linearly in 1/n to remove the power-law prefactor
            std::vector<double> inv, rr, sr;
            for (int i = 0; i < k; ++i)
                for (int j = i + 1; j < k; ++j)
                    if (w[j].n - w[i].n == opt.ratio_step) {
                        double dn = opt.ratio_step;
                        inv.push_back(1.0 / w[i].n);
                        rr.push_back(std::log(w[i].p / w[j].p) / dn);
                        double vi = w[i].se / w[i].p, vj = w[j].se / w[j].p;
                        sr.push_back(std::sqrt(vi * vi + vj * vj) / dn);
                    }
            if (rr.size() < 3) throw DataQualityError("ratio method needs three separations at the ratio step");
            int kr = static_cast<int>(rr.size());
            Eigen::MatrixXd X(kr, 2);
            Eigen::VectorXd y(kr), sd(kr);
            for (int i = 0; i < kr; ++i) {
                X(i, 0) = 1;
                X(i, 1) = inv[i];
                y(i) = rr[i];
                sd(i) = sr[i];
            }
            auto r = wls(X, y, sd);
            e.value = r.beta(0);
            e.se = std::sqrt(std::max(0.0, r.cov(0, 0)));
            break;
        }
        case XiMethod::subadditive: {
            double best = INFINITY, se = 0;
            for (const auto& p : w) {
                double v = -std::log(p.p) / p.n;
                if (v < best) {
                    best = v;
                    se = p.se / (p.p * p.n);
                }
            }
            e.value = best;
            e.se = se;
            break;
        }
        case XiMethod::prefactor_fit: {
            int cols = opt.inverse_n_term ? 4 : 3;
            Eigen::MatrixXd X(k, cols);
            Eigen::VectorXd y(k), sd(k);
            for (int i = 0; i < k; ++i) {
                X(i, 0) = 1;
                X(i, 1) = -std::log(static_cast<double>(w[i].n));
                X(i, 2) = -static_cast<double>(w[i].n);
                if (cols == 4) X(i, 3) = 1.0 / w[i].n;
                y(i) = std::log(w[i].p);
                sd(i) = w[i].se / w[i].p;
            }
            auto r = wls(X, y, sd);
            e.value = r.beta(2);
            e.se = std::sqrt(std::max(0.0, r.cov(2, 2)));
            e.alpha = r.beta(1);
            e.alpha_se = std::sqrt(std::max(0.0, r.cov(1, 1)));
            break;
        }
    }
    return finish(e);
}

namespace {

int jackknife_bins(std::size_t n) {
    if (n < 16) throw DiagnosticsError("need at least 16 samples for a jackknife");
    std::size_t B = 16;
    while (B < 128 && (2 * B) * (2 * B) <= n) B *= 2;
    return static_cast<int>(B);
}

// Leave-one-bin-out replicate curves sharing the full-data standard errors.
std::vector<TwoPointCurve> replicates(const TwoPointData& data, const TwoPointCurve& full) {
    int B = jackknife_bins(data.samples.size());
    std::size_t per = data.samples.size() / B, K = data.ns.size();
    std::vector<std::vector<double>> bin(B, std::vector<double>(K, 0.0));
    std::vector<double> tot(K, 0.0);
    for (int b = 0; b < B; ++b)
        for (std::size_t i = 0; i < per; ++i)
            for (std::size_t k = 0; k < K; ++k) bin[b][k] += data.samples[b * per + i][k];
    for (int b = 0; b < B; ++b)
        for (std::size_t k = 0; k < K; ++k) tot[k] += bin[b][k];
    std::vector<TwoPointCurve> out;
    for (int b = 0; b < B; ++b) {
        TwoPointCurve c = full;
        for (std::size_t k = 0; k < K; ++k)
            if (c.points[k].n != 0) c.points[k].p = (tot[k] - bin[b][k]) / (per * (B - 1));
        out.push_back(std::move(c));
    }
    return out;
}

double jk_se(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= v.size();
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s * (v.size() - 1) / v.size());
}

}  // namespace

XiEstimate xi_fit_jackknife(const TwoPointData& data, XiMethod m, const FitOptions& opt) {
    auto full = curve_from_data(data);
    XiEstimate e = xi_fit(full, m, opt);
    std::vector<double> vals, alphas;
    for (const auto& c : replicates(data, full)) {
        auto r = xi_fit(c, m, opt);
        vals.push_back(r.value);
        alphas.push_back(r.alpha);
    }
    e.se = jk_se(vals);
    if (m == XiMethod::prefactor_fit) e.alpha_se = jk_se(alphas);
    return finish(e);
}

namespace {

struct AlphaFit {
    double alpha, se, dalpha_dxi;
};

AlphaFit alpha_fit(const std::vector<TwoPointPoint>& w, double xi) {
    int k = static_cast<int>(w.size());
    Eigen::MatrixXd X(k, 2);
    Eigen::VectorXd y(k), sd(k);
    for (int i = 0; i < k; ++i) {
        X(i, 0) = 1;
        X(i, 1) = std::log(static_cast<double>(w[i].n));
        y(i) = std::log(w[i].p) + xi * w[i].n;
        sd(i) = w[i].se / w[i].p;
    }
    auto r = wls(X, y, sd);
    // sensitivity of the slope to xi: regress n on log n with the same weights
    Eigen::VectorXd nn(k);
    for (int i = 0; i < k; ++i) nn(i) = w[i].n;
    auto rn = wls(X, nn, sd);
    return {-r.beta(1), std::sqrt(std::max(0.0, r.cov(1, 1))), -rn.beta(1)};
}

PrefactorEstimate finish_alpha(double alpha, double se, int d) {
    PrefactorEstimate p;
    p.alpha = alpha;
    p.se = se;
    p.lo = alpha - 2 * se;
    p.hi = alpha + 2 * se;
    p.inconclusive = 2 * se > (d - 1) / 4.0;
    return p;
}

}  // namespace

PrefactorEstimate prefactor_exponent(const TwoPointCurve& c, const XiEstimate& xi, const FitOptions& opt) {
    auto w = window(c, opt, 5);
    auto f = alpha_fit(w, xi.value);
    double se = std::sqrt(f.se * f.se + f.dalpha_dxi * f.dalpha_dxi * xi.se * xi.se);
    return finish_alpha(f.alpha, se, c.d);
}

PrefactorEstimate prefactor_exponent_jackknife(const TwoPointData& data, const XiEstimate& xi,
                                               const FitOptions& opt, int d) {
    auto full = curve_from_data(data);
    auto w = window(full, opt, 5);
    auto f = alpha_fit(w, xi.value);
    std::vector<double> vals;
    for (const auto& c : replicates(data, full)) vals.push_back(alpha_fit(window(c, opt, 5), xi.value).alpha);
    double se = jk_se(vals);
    se = std::sqrt(se * se + f.dalpha_dxi * f.dalpha_dxi * xi.se * xi.se);
    return finish_alpha(f.alpha, se, d);
}

double potts_two_point(double p, double q) {
    if (p < 0 || p > 1) throw ParameterError("probability out of range");
    if (!(q >= 1)) throw ParameterError("q must be >= 1");
    return 1.0 / q + (q - 1) / q * p;
}

double ising_xi(double K) {
    if (!(K > 0)) throw ParameterError("coupling must be positive");
    double v = -std::log(std::tanh(K)) - 2 * K;
    if (v <= 0) throw ParameterError("coupling is not in the high-temperature phase");
    return v;
}

double ising_xi_potts_beta(double beta) { return ising_xi(beta / 2); }

TwoPointData measure_line_pairs(const XiScanConfig& cfg, double J, std::uint64_t seed) {
    std::vector<std::pair<int, int>> ranges{{-cfg.half_length, cfg.half_length}};
    for (int a = 1; a < cfg.d; ++a) ranges.push_back({-cfg.half_width, cfg.half_width});
    Lattice lat = Lattice::box(ranges);
    auto w = WeightField::from_beta(cfg.beta, J, cfg.q);
    FkSampler s(lat, w, BoundaryCondition::free());
    ChainParams p;
    p.sweeps = cfg.sweeps;
    p.burn_in = cfg.burn_in;
    p.seed = seed;
    p.dynamics = cfg.dynamics;
    auto b = run_chain(s, p, line_pair_observables(lat, cfg.ns, cfg.end_margin));
    TwoPointData d;
    d.ns = cfg.ns;
    d.samples = std::move(b.values);
    return d;
}

XiScanResult xi_scan(const XiScanConfig& cfg, int workers) {
    XiScanResult out;
    for (double J : cfg.Js)
        if (J < 0) throw ParameterError("J must be >= 0");
    double x = std::expm1(cfg.beta);
    if (cfg.d == 2) {
        if (!(x < std::sqrt(cfg.q)))
            throw ParameterError("beta is not below the planar critical point (x >= sqrt(q))");
    } else {
        out.warnings.push_back("subcriticality of beta is not checked for d != 2");
    }
    out.rows.resize(cfg.Js.size());
    parallel_for(
        static_cast<int>(cfg.Js.size()),
        [&](int i) {
            XiScanRow r;
            r.J = cfg.Js[i];
            r.xp = std::expm1(cfg.beta * r.J);
            r.data = measure_line_pairs(cfg, r.J, derive_seed(cfg.seed, i));
            r.curve = curve_from_data(r.data);
            r.curve.d = cfg.d;
            r.curve.q = cfg.q;
            r.curve.x = x;
            r.curve.xp = r.xp;
            r.curve.bc = "free";
            r.xi = xi_fit_jackknife(r.data, cfg.method, cfg.fit);
            out.rows[i] = std::move(r);
        },
        workers);
    return out;
}

std::vector<LipschitzPair> lipschitz_check(const XiScanResult& scan) {
    std::vector<const XiScanRow*> rows;
    for (const auto& r : scan.rows) rows.push_back(&r);
    std::sort(rows.begin(), rows.end(), [](auto a, auto b) { return a->xp < b->xp; });
    std::vector<LipschitzPair> out;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        const auto& a = *rows[i];
        const auto& b = *rows[i + 1];
        if (!(a.xp > 0) || !(b.xp > a.xp)) continue;
        LipschitzPair p;
        p.x1 = a.xp;
        p.x2 = b.xp;
        p.lhs = a.xi.value - b.xi.value;
        p.bound = 3 * (std::log(b.xp) - std::log(a.xp)) + 3 * std::hypot(a.xi.se, b.xi.se);
        p.pass = p.lhs <= p.bound;
        out.push_back(p);
    }
    return out;
}

std::vector<std::pair<int, int>> subadditivity_violations(const TwoPointCurve& c, double sigmas) {
    std::vector<std::pair<int, int>> bad;
    for (const auto& a : c.points)
        for (const auto& b : c.points) {
            if (a.n <= 0 || b.n < a.n) continue;
            for (const auto& s : c.points)
                if (s.n == a.n + b.n) {
                    double prod = a.p * b.p;
                    double se = std::sqrt(s.se * s.se + b.p * b.p * a.se * a.se + a.p * a.p * b.se * b.se);
                    if (s.p < prod - sigmas * se) bad.push_back({a.n, b.n});
                }
        }
    return bad;
}

void write_two_point_jsonl(std::ostream& os, const TwoPointCurve& c) {
    for (const auto& p : c.points) {
        nlohmann::json j{{"kind", "two_point"}, {"n", p.n}, {"p", p.p}, {"se", p.se}};
        os << j.dump() << '\n';
    }
}

void write_xi_jsonl(std::ostream& os, double J, const XiEstimate& e) {
    nlohmann::json j{{"kind", "xi"}, {"J", J}, {"xi", e.value}, {"lo", e.lo}, {"hi", e.hi}, {"method", to_string(e.method)}};
    os << j.dump() << '\n';
}

void write_two_point_csv(std::ostream& os, const TwoPointCurve& c, bool header) {
    if (header) os << "kind,n,p,se\n";
    char buf[128];
    for (const auto& p : c.points) {
        std::snprintf(buf, sizeof buf, "two_point,%d,%.17g,%.17g\n", p.n, p.p, p.se);
        os << buf;
    }
}

void write_xi_csv(std::ostream& os, double J, const XiEstimate& e, bool header) {
    if (header) os << "kind,J,xi,lo,hi,method\n";
    char buf[192];
    std::snprintf(buf, sizeof buf, "xi,%.17g,%.17g,%.17g,%.17g,%s\n", J, e.value, e.lo, e.hi,
                  to_string(e.method).c_str());
    os << buf;
}

}  // namespace fkdl
