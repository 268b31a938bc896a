#include "fkdl/verify.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "fkdl/cone.hpp"
#include "fkdl/exact_oracle.hpp"
#include "fkdl/inequality.hpp"
#include "fkdl/parallel.hpp"
#include "fkdl/pinning.hpp"
#include "fkdl/renewal.hpp"
#include "fkdl/sampler.hpp"

namespace fkdl {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void add_item(SuiteReport& r, const std::string& name, double value, double bound, bool ok) {
    ++r.checks;
    if (!ok) {
        ++r.failures;
        if (r.worst_item.empty()) r.worst_item = name;
    }
    r.items.push_back({name, value, bound, ok});
}

}  // namespace

void write_suite_jsonl(std::ostream& os, const SuiteReport& r) {
    nlohmann::json j = {{"kind", "suite"},          {"suite", r.suite},   {"pass", r.pass()},
                        {"checks", r.checks},       {"failures", r.failures}, {"worst", r.worst},
                        {"bound", r.bound},         {"worst_item", r.worst_item}, {"seconds", r.seconds}};
    auto items = nlohmann::json::array();
    for (const auto& it : r.items)
        items.push_back({{"name", it.name}, {"value", it.value}, {"bound", it.bound}, {"pass", it.pass}});
    j["items"] = items;
    os << j.dump() << '\n';
}

SuiteReport oracle_equivalence_suite(const OracleSuiteConfig& cfg) {
    auto t0 = Clock::now();
    struct Job {
        int graph;
        double q;
        Dynamics dyn;
    };
    auto corpus = graph_corpus();
    std::vector<Job> jobs;
    for (int g = 0; g < static_cast<int>(corpus.size()); ++g)
        for (double q : cfg.qs) {
            jobs.push_back({g, q, Dynamics::heat_bath});
            if (q == std::floor(q)) jobs.push_back({g, q, Dynamics::edwards_sokal});
        }
    struct Outcome {
        double worst = 0;
        long checks = 0, failures = 0;
        std::string item;
    };
    std::vector<Outcome> out(jobs.size());
    parallel_for(
        static_cast<int>(jobs.size()),
        [&](int j) {
            const auto& job = jobs[j];
            const auto& lat = corpus[job.graph].lat;
            WeightField wf{cfg.x, cfg.xp, job.q};
            auto m = enumerate_measure(lat, wf, BoundaryCondition::free());
            std::vector<Observable> obs;
            std::vector<ConfigFn> exact;
            std::vector<std::string> names;
            for (int e = 0; e < lat.num_edges(); ++e) {
                obs.push_back([e](const EdgeConfiguration& w, const ClusterIndex&) { return double(w.get(e)); });
                exact.push_back([e](std::uint64_t s) { return double((s >> e) & 1); });
                names.push_back("edge" + std::to_string(e));
            }
            for (int u = 0; u < lat.num_vertices(); ++u)
                for (int v = u + 1; v < lat.num_vertices(); ++v) {
                    obs.push_back(
                        [u, v](const EdgeConfiguration&, const ClusterIndex& c) { return double(c.connected(u, v)); });
                    exact.push_back([&m, u, v](std::uint64_t s) { return double(m.connected(s, u, v)); });
                    names.push_back(std::to_string(u) + "<->" + std::to_string(v));
                }
            ChainParams p;
            p.sweeps = cfg.sweeps;
            p.burn_in = cfg.burn_in;
            p.thin = cfg.thin;
            p.dynamics = job.dyn;
            p.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(j));
            auto batch = run_chain(lat, wf, p, obs);
            Outcome& o = out[j];
            for (std::size_t k = 0; k < obs.size(); ++k) {
                auto est = binned_mean(batch.column(k));
                double ex = static_cast<double>(m.expectation(exact[k]));
                double dev = std::fabs(est.mean - ex);
                double z = est.se > 0 ? dev / est.se : (dev > 1e-12 ? std::numeric_limits<double>::infinity() : 0);
                ++o.checks;
                if (!(z < cfg.sigmas)) ++o.failures;
                if (z >= o.worst) {
                    o.worst = z;
                    o.item = corpus[job.graph].name + " q=" + std::to_string(job.q) +
                             (job.dyn == Dynamics::heat_bath ? " heat-bath " : " edwards-sokal ") + names[k];
                }
            }
        },
        cfg.workers);
    SuiteReport r;
    r.suite = "oracle-equivalence";
    r.bound = cfg.sigmas;
    for (const auto& o : out) {
        r.checks += o.checks;
        r.failures += o.failures;
        if (o.worst >= r.worst) {
            r.worst = o.worst;
            r.worst_item = o.item;
        }
    }
    r.seconds = since(t0);
    return r;
}

SuiteReport finite_energy_suite() {
    auto t0 = Clock::now();
    SuiteReport r;
    r.suite = "finite-energy";
    r.bound = 0;
    r.worst = std::numeric_limits<double>::infinity();  // smallest slack seen
    for (const auto& c : graph_corpus())
        for (double q : {1.0, 1.5, 2.0, 3.0})
            for (auto [x, xp] : {std::pair{0.8, 2.5}, std::pair{3.0, 0.2}})
                for (auto bc : {BoundaryCondition::free(), BoundaryCondition::wired()}) {
                    WeightField w{x, xp, q};
                    auto m = enumerate_measure(c.lat, w, bc);
                    auto xe = edge_weights(c.lat, w);
                    std::vector<int> rest(m.num_edges());
                    for (int e = 0; e < m.num_edges(); ++e)
                        for (std::uint64_t s = 0; s < m.num_configs(); ++s) {
                            if ((s >> e) & 1) continue;
                            for (int i = 0; i < m.num_edges(); ++i) rest[i] = (s >> i) & 1;
                            double p = static_cast<double>(exact_conditional(m, e, rest));
                            double slack = std::min(p - xe[e] / (xe[e] + q), xe[e] / (xe[e] + 1) - p);
                            ++r.checks;
                            if (slack < -1e-14) {
                                ++r.failures;
                                if (r.worst_item.empty()) r.worst_item = c.name + " edge " + std::to_string(e);
                            }
                            r.worst = std::min(r.worst, slack);
                        }
                }
    r.seconds = since(t0);
    return r;
}

SuiteReport fkg_suite() {
    auto t0 = Clock::now();
    SuiteReport r;
    r.suite = "fkg";
    r.bound = -1e-12;
    r.worst = std::numeric_limits<double>::infinity();  // smallest covariance or increment
    for (const auto& c : graph_corpus())
        for (double q : {1.0, 1.5, 2.0, 3.0}) {
            auto m = enumerate_measure(c.lat, WeightField{1.1, 0.7, q}, BoundaryCondition::free());
            auto m2 = enumerate_measure(c.lat, WeightField{1.1, 2.1, q}, BoundaryCondition::free());
            auto fam = monotone_family(m);
            std::vector<long double> mean(fam.size());
            for (std::size_t i = 0; i < fam.size(); ++i) mean[i] = m.expectation(fam[i].f);
            for (std::size_t i = 0; i < fam.size(); ++i) {
                double inc = static_cast<double>(m2.expectation(fam[i].f) - mean[i]);
                ++r.checks;
                if (inc < r.bound) ++r.failures;
                r.worst = std::min(r.worst, inc);
                for (std::size_t j = i; j < fam.size(); ++j) {
                    const auto& f = fam[i].f;
                    const auto& g = fam[j].f;
                    long double fg = m.expectation([&](std::uint64_t s) { return f(s) * g(s); });
                    double cov = static_cast<double>(fg - mean[i] * mean[j]);
                    ++r.checks;
                    if (cov < r.bound) {
                        ++r.failures;
                        if (r.worst_item.empty()) r.worst_item = c.name + " " + fam[i].name + " / " + fam[j].name;
                    }
                    r.worst = std::min(r.worst, cov);
                }
            }
        }
    r.seconds = since(t0);
    return r;
}

SuiteReport russo_margin_suite() {
    auto t0 = Clock::now();
    SuiteReport r;
    r.suite = "russo-margin";
    r.bound = -1e-9;
    r.worst = std::numeric_limits<double>::infinity();
    for (const auto& c : russo_suite()) {
        ++r.checks;
        if (!(c.report.margin >= r.bound)) {
            ++r.failures;
            if (r.worst_item.empty()) r.worst_item = c.graph + " " + c.event;
        }
        r.worst = std::min(r.worst, c.report.margin);
    }
    r.seconds = since(t0);
    return r;
}

SuiteReport russo_closed_form_suite() {
    auto t0 = Clock::now();
    SuiteReport r;
    r.suite = "russo-closed-form";
    r.bound = 1e-10;
    auto g = Lattice::graph(3, {{0, 1}, {1, 2}}, {EdgeKind::line, EdgeKind::line});
    ExactMeasure meas(g, {1.0, 1.0}, 1.0, BoundaryCondition::free());
    EdgeEvent A = [&](std::uint64_t m) { return meas.connected(m, 0, 2); };
    for (auto [s1, s2] : {std::pair{0.2, 0.5}, std::pair{0.5, 1.0}, std::pair{1.0, 2.0}, std::pair{0.3, 3.0},
                          std::pair{2.0, 5.0}}) {
        auto rep = russo_bound_check(g, {0, 1}, A, 1.0, 1.0, s1, s2);
        double exact = 2 * std::log(s2 * (1 + s1) / (s1 * (1 + s2)));
        double err = std::max(std::fabs(rep.lhs - exact), std::fabs(rep.rhs - exact));
        r.worst = std::max(r.worst, err);
        add_item(r, "s=" + std::to_string(s1) + ".." + std::to_string(s2), err, r.bound, err <= r.bound);
    }
    r.seconds = since(t0);
    return r;
}

SuiteReport renewal_suite(const std::string& kernel_dir) {
    auto t0 = Clock::now();
    SuiteReport r;
    r.suite = "renewal";
    std::vector<SequenceTest> tests = {
        [](int, const Word&, int) { return 1.0; },
        [](int, const Word& x, int) { return x.front() == 0 ? 1.0 : -1.0; },
        [](int, const Word& x, int) { return x.front() == x.back() ? 1.0 : 0.0; },
    };
    std::vector<double> zs;
    for (int i = 0; i <= 9; ++i) zs.push_back(0.1 * i);
    for (const char* name : {"memoryless", "memory1", "memory2", "symmetric"}) {
        std::string n = name;
        auto k = load_kernel(kernel_dir + "/" + n + ".kernel");
        auto dw = depth_weights(k);
        auto law = factor_weights(k, dw, 12);
        double mass_err = std::fabs(law.p_mass - 1);
        add_item(r, n + " p mass", mass_err, 1e-8, mass_err <= 1e-8);
        auto tel = telescoping_check(k, dw);
        add_item(r, n + " telescoping", tel.max_error, 1e-13, tel.max_error <= 1e-13 && tel.min_delta >= 0);
        auto id = generating_identity_check(k, dw, zs);
        add_item(r, n + " identity", id.max_residual, 1e-8, id.max_residual < 1e-8);
        std::vector<DefectReport> reps;
        for (int len = 4; len <= 12; ++len) reps.push_back(factorization_defect(k, law, len, tests));
        auto fit = fit_decay(reps);
        if (fit.exact_zero) {
            add_item(r, n + " defect (identically zero)", 0, 0, true);
        } else {
            add_item(r, n + " defect rate", fit.rate, 0, fit.rate < 0);
            add_item(r, n + " defect r2", fit.r2, 0.95, fit.r2 > 0.95);
        }
        if (n == "symmetric") {
            auto pf = pushforward(k, dw, factor_weights(k, dw, 9));
            add_item(r, n + " push-forward symmetry", pf.symmetry_defect, 1e-15,
                     pf.p5_symmetric && pf.symmetry_defect <= 1e-15);
        }
    }
    r.seconds = since(t0);
    return r;
}

SuiteReport pinning_suite() {
    auto t0 = Clock::now();
    SuiteReport r;
    r.suite = "pinning";
    PinningSpec s3;
    s3.d = 3;
    auto sol = solve_f(s3, 0.25);
    double closed = -std::log1p(-std::exp(-4.0));
    add_item(r, "d=3 closed form", std::fabs(sol.f - closed), 1e-10, std::fabs(sol.f - closed) <= 1e-10);

    PinningSpec s2;
    s2.d = 2;
    for (double l = 1e-3; l <= 1.0 + 1e-12; l *= std::pow(10.0, 0.125)) s2.lambdas.push_back(l);
    auto f2 = asymptotic_fit(s2);
    add_item(r, "d=2 exponent", f2.slope, 2, std::fabs(f2.slope - 2) <= 0.05);
    s3.lambdas.clear();
    for (double l = 1e-2; l <= 1.0 + 1e-12; l *= std::pow(10.0, 0.125)) s3.lambdas.push_back(l);
    auto f3 = asymptotic_fit(s3);
    add_item(r, "d=3 exponent", f3.slope, 1, std::fabs(f3.slope - 1) <= 0.05);
    for (int d : {4, 5}) {
        PinningSpec s = s3;
        s.d = d;
        auto f = asymptotic_fit(s);
        bool below = solve_f(s, 0.99 * f.threshold).no_pinning && solve_f(s, 0.5 * f.threshold).no_pinning;
        bool above = solve_f(s, 1.01 * f.threshold).f > 0;
        add_item(r, "d=" + std::to_string(d) + " threshold", f.threshold, 0, f.zero_below_threshold && below && above);
    }
    r.seconds = since(t0);
    return r;
}

SuiteReport renewal_constant_suite(long trials, std::uint64_t seed) {
    auto t0 = Clock::now();
    SuiteReport r;
    r.suite = "renewal-constant";
    r.bound = 0.01;
    auto curve = renewal_constant({0.5, 0.5}, {10, 50, 100}, trials, seed);
    for (const auto& p : curve.points) {
        if (p.n != 100) continue;
        double err_exact = std::fabs(p.exact - 2.0 / 3);
        double err_mc = std::fabs(p.mc - 2.0 / 3);
        add_item(r, "exact n=100", err_exact, r.bound, err_exact <= r.bound);
        add_item(r, "simulated n=100", err_mc, r.bound, err_mc <= r.bound);
        r.worst = std::max(err_exact, err_mc);
    }
    r.seconds = since(t0);
    return r;
}

SuiteReport cone_pivot_suite() {
    auto t0 = Clock::now();
    SuiteReport r;
    r.suite = "cone-pivotality";
    for (int n = 1; n <= 4; ++n) {
        auto rep = cone_point_pivotality(n);
        add_item(r, "n=" + std::to_string(n), static_cast<double>(rep.violations), 0, rep.violations == 0);
    }
    r.seconds = since(t0);
    return r;
}

}  // namespace fkdl
