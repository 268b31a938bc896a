#include "fkdl/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "fkdl/cone.hpp"
#include "fkdl/interface.hpp"
#include "fkdl/observables.hpp"
#include "fkdl/parallel.hpp"
#include "fkdl/pinning.hpp"
#include "fkdl/renewal.hpp"
#include "fkdl/sampler.hpp"
#include "fkdl/stats.hpp"
#include "fkdl/verify.hpp"

namespace fkdl {

const char* const kCodeVersion = "fkdl 1.0.0";

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

using Task = std::function<TaskOutput(std::uint64_t seed, const std::vector<TaskOutput>& done)>;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string row(std::initializer_list<std::string> cells) {
    std::string s;
    for (const auto& c : cells) s += (s.empty() ? "" : ",") + c;
    return s;
}

int workers_for(const RunConfig& cfg) {
    long w = cfg.integer("chain.workers");
    return w > 0 ? static_cast<int>(w) : default_workers();
}

json suite_json(const SuiteReport& r) {
    std::ostringstream os;
    write_suite_jsonl(os, r);
    auto j = json::parse(os.str());
    j.erase("seconds");  // keeps records byte-identical across reruns
    return j;
}

std::vector<Task> verify_tasks(const RunConfig& cfg, const RunOptions& opt) {
    std::string kernels = cfg.str("verify.kernels");
    if (kernels.empty()) kernels = opt.data_dir + "/kernels";
    auto wrap = [](std::function<SuiteReport(std::uint64_t)> f) -> Task {
        return [f](std::uint64_t seed, const std::vector<TaskOutput>&) {
            auto r = f(seed);
            TaskOutput o;
            o.records.push_back(suite_json(r));
            o.csv_rows.push_back(row({r.suite, r.pass() ? "1" : "0", std::to_string(r.checks),
                                      std::to_string(r.failures), fmt(r.worst), fmt(r.bound)}));
            o.ok = r.pass();
            return o;
        };
    };
    OracleSuiteConfig oc;
    oc.sweeps = cfg.integer("verify.sweeps");
    oc.burn_in = cfg.integer("verify.burn_in");
    oc.thin = cfg.integer("verify.thin");
    oc.qs = cfg.list("verify.q");
    oc.sigmas = cfg.num("verify.sigmas");
    oc.workers = workers_for(cfg);
    long trials = cfg.integer("verify.renewal_trials");
    return {
        wrap([](std::uint64_t) { return finite_energy_suite(); }),
        wrap([](std::uint64_t) { return fkg_suite(); }),
        wrap([oc](std::uint64_t seed) {
            auto c = oc;
            c.seed = seed;
            return oracle_equivalence_suite(c);
        }),
        wrap([](std::uint64_t) { return russo_margin_suite(); }),
        wrap([](std::uint64_t) { return russo_closed_form_suite(); }),
        wrap([kernels](std::uint64_t) { return renewal_suite(kernels); }),
        wrap([](std::uint64_t) { return pinning_suite(); }),
        wrap([trials](std::uint64_t seed) { return renewal_constant_suite(trials, seed); }),
        wrap([](std::uint64_t) { return cone_pivot_suite(); }),
    };
}

// beta and J recovered from the canonical (x, x') form
double beta_of(const RunConfig& cfg) { return std::log1p(cfg.num("model.x")); }

std::vector<double> js_of(const RunConfig& cfg) {
    double b = beta_of(cfg);
    std::vector<double> js;
    for (double xp : cfg.list("model.xp")) js.push_back(std::log1p(xp) / b);
    return js;
}

std::vector<Task> xi_tasks(const RunConfig& cfg) {
    XiScanConfig xc;
    xc.d = static_cast<int>(cfg.integer("model.d"));
    xc.q = cfg.num("model.q");
    xc.beta = beta_of(cfg);
    xc.half_length = static_cast<int>(cfg.integer("xi.half_length"));
    xc.half_width = static_cast<int>(cfg.integer("xi.half_width"));
    xc.ns = cfg.int_list("xi.ns");
    xc.end_margin = static_cast<int>(cfg.integer("xi.end_margin"));
    xc.method = parse_xi_method(cfg.str("xi.method"));
    xc.fit.n_min = static_cast<int>(cfg.integer("xi.n_min"));
    xc.fit.n_max = static_cast<int>(cfg.integer("xi.n_max"));
    xc.fit.inverse_n_term = cfg.flag("xi.inverse_n");
    xc.sweeps = cfg.integer("chain.sweeps");
    xc.burn_in = cfg.integer("chain.burn_in");
    xc.dynamics = parse_dynamics(cfg.str("chain.dynamics"));
    if (xc.d == 2 && !(cfg.num("model.x") < std::sqrt(xc.q)))
        throw ConfigError("model.x: not below the planar critical point x_c = sqrt(q)");
    auto xps = cfg.list("model.xp");
    auto js = js_of(cfg);
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < js.size(); ++i) {
        double J = js[i], xp = xps[i];
        tasks.push_back([xc, J, xp](std::uint64_t seed, const std::vector<TaskOutput>&) {
            auto data = measure_line_pairs(xc, J, seed);
            auto curve = curve_from_data(data);
            curve.d = xc.d;
            curve.q = xc.q;
            curve.x = std::expm1(xc.beta);
            curve.xp = xp;
            curve.bc = "free";
            auto xi = xi_fit_jackknife(data, xc.method, xc.fit);
            TaskOutput o;
            std::ostringstream a, b;
            write_two_point_jsonl(a, curve);
            write_xi_jsonl(b, J, xi);
            std::istringstream lines(a.str());
            for (std::string line; std::getline(lines, line);) o.records.push_back(json::parse(line));
            auto jx = json::parse(b.str());
            jx["xp"] = xp;
            o.records.push_back(jx);
            o.csv_rows.push_back(row({fmt(J), fmt(xi.value), fmt(xi.lo), fmt(xi.hi)}));
            return o;
        });
    }
    return tasks;
}

std::vector<Task> cone_tasks(const RunConfig& cfg) {
    ConeRunConfig base;
    base.d = static_cast<int>(cfg.integer("model.d"));
    base.n = static_cast<int>(cfg.integer("model.n"));
    base.margin = static_cast<int>(cfg.integer("cone.margin"));
    base.half_width = static_cast<int>(cfg.integer("cone.half_width"));
    base.sweeps = cfg.integer("chain.sweeps");
    base.burn_in = cfg.integer("chain.burn_in");
    base.thin = cfg.integer("chain.thin");
    double x = cfg.num("model.x"), q = cfg.num("model.q");
    auto xps = cfg.list("model.xp");
    auto js = js_of(cfg);
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < js.size(); ++i) {
        ConeRunConfig c = base;
        c.w = WeightField{x, xps[i], q};
        double J = js[i];
        tasks.push_back([c, J](std::uint64_t seed, const std::vector<TaskOutput>&) mutable {
            c.seed = seed;
            auto r = cone_density_run(c);
            TaskOutput o;
            o.records.push_back({{"kind", "cone-density"},
                                 {"n", c.n},
                                 {"J", J},
                                 {"xp", c.w.xp},
                                 {"rho", r.density.rho},
                                 {"se", r.density.se},
                                 {"samples", r.density.samples}});
            o.csv_rows.push_back(row({fmt(J), fmt(r.density.rho), fmt(r.density.se), std::to_string(r.density.samples)}));
            return o;
        });
    }
    return tasks;
}

std::vector<Task> interface_tasks(const RunConfig& cfg) {
    long q = cfg.integer("model.q");
    double beta = beta_of(cfg);
    auto js = js_of(cfg);
    auto ns = cfg.int_list("interface.ns");
    InterfaceRunParams base;
    base.sweeps = cfg.integer("chain.sweeps");
    base.burn_in = cfg.integer("chain.burn_in");
    base.thin = cfg.integer("chain.thin");
    base.heat_bath = cfg.flag("interface.heat_bath");
    base.check = cfg.flag("interface.check");
    bool profiles = cfg.flag("interface.profiles");
    std::vector<Task> tasks;
    for (int n : ns)
        for (double J : js)
            tasks.push_back([=](std::uint64_t seed, const std::vector<TaskOutput>&) {
                auto p = base;
                p.seed = seed;
                auto run = sample_dobrushin(n, beta, J, static_cast<int>(q), p);
                auto s = width_stats(run.profiles);
                TaskOutput o;
                if (profiles)
                    for (const auto& pr : run.profiles) {
                        std::ostringstream os;
                        write_profile_jsonl(os, pr, J, static_cast<int>(q));
                        o.records.push_back(json::parse(os.str()));
                    }
                o.records.push_back({{"kind", "width-stats"},
                                     {"n", n},
                                     {"J", J},
                                     {"q", q},
                                     {"samples", s.samples},
                                     {"median_max_width", s.median_max_width},
                                     {"iqr_max_width", s.iqr_max_width},
                                     {"median_span", s.median_span},
                                     {"var_gamma0", s.var_gamma0},
                                     {"var_gamma0_se", s.var_gamma0_se},
                                     {"duality_checks", run.duality_checks},
                                     {"max_width", s.max_width}});
                o.csv_rows.push_back(row({std::to_string(n), fmt(J), fmt(s.median_max_width), fmt(s.iqr_max_width)}));
                return o;
            });
    // Mann-Whitney between the first two J values at each n
    if (js.size() >= 2)
        tasks.push_back([ns, js](std::uint64_t, const std::vector<TaskOutput>& done) {
            TaskOutput o;
            auto widths = [&](int n, double J) {
                for (const auto& t : done)
                    for (const auto& r : t.records)
                        if (r["kind"] == "width-stats" && r["n"] == n && r["J"] == J)
                            return r["max_width"].get<std::vector<double>>();
                throw std::runtime_error("missing width record");
            };
            for (int n : ns) {
                auto mw = mann_whitney(widths(n, js[0]), widths(n, js[1]));
                o.records.push_back({{"kind", "mann-whitney"},
                                     {"n", n},
                                     {"J_a", js[0]},
                                     {"J_b", js[1]},
                                     {"z", mw.z},
                                     {"p", mw.p_two_sided}});
            }
            return o;
        });
    return tasks;
}

std::vector<Task> pinning_tasks(const RunConfig& cfg) {
    PinningSpec spec;
    spec.d = static_cast<int>(cfg.integer("pinning.d"));
    spec.C1 = cfg.num("pinning.C1");
    double lo = cfg.num("pinning.lambda_min"), hi = cfg.num("pinning.lambda_max");
    long pts = cfg.integer("pinning.points");
    if (!(lo > 0) || !(hi > lo) || pts < 2) throw ConfigError("pinning.lambda_min/lambda_max/points: bad grid");
    for (long i = 0; i < pts; ++i) spec.lambdas.push_back(lo * std::pow(hi / lo, double(i) / (pts - 1)));
    bool fit = cfg.flag("pinning.fit");
    return {[spec, fit](std::uint64_t, const std::vector<TaskOutput>&) {
        TaskOutput o;
        for (const auto& s : pinning_curve(spec)) {
            o.records.push_back({{"kind", "pinning"},
                                 {"d", spec.d},
                                 {"C1", spec.C1},
                                 {"lambda", s.lambda},
                                 {"f", s.f},
                                 {"no_pinning", s.no_pinning},
                                 {"residual", s.residual}});
            o.csv_rows.push_back(row({fmt(s.lambda), fmt(s.f)}));
        }
        if (fit) {
            auto f = asymptotic_fit(spec);
            o.records.push_back({{"kind", "pinning-fit"},
                                 {"d", f.d},
                                 {"slope", f.slope},
                                 {"slope_se", f.slope_se},
                                 {"points", f.points},
                                 {"threshold", f.threshold},
                                 {"zero_below_threshold", f.zero_below_threshold}});
        }
        return o;
    }};
}

std::vector<Task> renewal_tasks(const RunConfig& cfg, const RunOptions& opt) {
    std::string k = cfg.str("renewal.kernel");
    std::string path = fs::exists(k) ? k : opt.data_dir + "/kernels/" + k + ".kernel";
    int cap = static_cast<int>(cfg.integer("renewal.cap"));
    int n0 = static_cast<int>(cfg.integer("renewal.n_min")), n1 = static_cast<int>(cfg.integer("renewal.n_max"));
    auto zs = cfg.list("renewal.z");
    return {[=](std::uint64_t, const std::vector<TaskOutput>&) {
        auto kern = load_kernel(path);
        auto dw = depth_weights(kern);
        auto law = factor_weights(kern, dw, cap);
        TaskOutput o;
        std::ostringstream os;
        write_law_json(os, kern, law);
        auto lj = json::parse(os.str());
        lj["kind"] = "renewal-law";
        o.records.push_back(lj);
        auto tel = telescoping_check(kern, dw);
        o.records.push_back(
            {{"kind", "telescoping"}, {"max_error", tel.max_error}, {"min_delta", tel.min_delta}, {"contexts", tel.contexts}});
        std::vector<SequenceTest> tests = {[](int, const Word&, int) { return 1.0; }};
        std::vector<DefectReport> reps;
        for (int n = n0; n <= n1; ++n) {
            reps.push_back(factorization_defect(kern, law, n, tests));
            o.records.push_back({{"kind", "defect"}, {"n", n}, {"total_variation", reps.back().total_variation}});
            o.csv_rows.push_back(row({std::to_string(n), fmt(reps.back().total_variation)}));
        }
        auto fit = fit_decay(reps);
        o.records.push_back({{"kind", "defect-fit"}, {"rate", fit.rate}, {"r2", fit.r2}, {"exact_zero", fit.exact_zero}});
        auto id = generating_identity_check(kern, dw, zs);
        o.records.push_back({{"kind", "identity"}, {"z", id.z}, {"residual", id.residual}, {"B_at_one", id.B_at_one}});
        if (!kern.displacement.empty()) {
            auto pf = pushforward(kern, dw, law);
            o.records.push_back({{"kind", "push-forward"},
                                 {"d", pf.d},
                                 {"p_mass", pf.p_mass},
                                 {"tail_rate", pf.tail_rate},
                                 {"P1", pf.p1_tails},
                                 {"P2", pf.p2_directed},
                                 {"P3", pf.p3_aperiodic},
                                 {"P4", pf.p4_irreducible},
                                 {"P5", pf.p5_symmetric},
                                 {"symmetry_defect", pf.symmetry_defect}});
        }
        return o;
    }};
}

std::vector<Task> local_time_tasks(const RunConfig& cfg) {
    LazyWalk w{static_cast<int>(cfg.integer("local_time.k")), cfg.num("local_time.lazy")};
    int n = static_cast<int>(cfg.integer("local_time.n"));
    long trials = cfg.integer("local_time.trials");
    auto deltas = cfg.list("local_time.deltas");
    auto law = cfg.list("renewal.law");
    auto ns = cfg.int_list("renewal.ns");
    long rtrials = cfg.integer("renewal.trials");
    return {
        [=](std::uint64_t seed, const std::vector<TaskOutput>&) {
            auto r = simulate_local_time(w, n, trials, deltas, seed);
            TaskOutput o;
            for (const auto& t : r.tails) {
                o.records.push_back({{"kind", "local-time"},
                                     {"k", w.k},
                                     {"n", n},
                                     {"delta", t.delta},
                                     {"p", t.p},
                                     {"se", t.se},
                                     {"rate", std::isfinite(t.rate) ? json(t.rate) : json(nullptr)}});
                o.csv_rows.push_back(row({"local-time", fmt(t.delta), fmt(t.p), fmt(t.se)}));
            }
            return o;
        },
        [=](std::uint64_t seed, const std::vector<TaskOutput>&) {
            auto c = renewal_constant(law, ns, rtrials, seed);
            TaskOutput o;
            for (const auto& p : c.points) {
                o.records.push_back({{"kind", "renewal-hit"},
                                     {"n", p.n},
                                     {"exact", p.exact},
                                     {"mc", p.mc},
                                     {"se", p.se},
                                     {"limit", c.limit}});
                o.csv_rows.push_back(row({"renewal", fmt(p.n), fmt(p.mc), fmt(p.se)}));
            }
            return o;
        },
    };
}

json task_json(int index, const TaskOutput& t) {
    return {{"index", index}, {"records", t.records}, {"csv", t.csv_rows}, {"ok", t.ok}};
}

void save_progress(const std::string& path, const std::string& digest, const json& tasks) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write checkpoint " + tmp);
        f << json{{"digest", digest}, {"version", kCodeVersion}, {"tasks", tasks}}.dump() << '\n';
    }
    fs::rename(tmp, path);
}

}  // namespace

std::string csv_header(const std::string& kind) {
    if (kind == "verify") return "suite,pass,checks,failures,worst,bound";
    if (kind == "xi-scan") return "J,xi,lo,hi";
    if (kind == "cone-density") return "J,rho,se,samples";
    if (kind == "interface") return "n,J,median_width,iqr";
    if (kind == "pinning-curve") return "lambda,f";
    if (kind == "renewal-demo") return "n,total_variation";
    if (kind == "local-time") return "series,x,p,se";
    throw ConfigError("unknown experiment '" + kind + "'");
}

RunSummary run_experiment(const RunConfig& cfg_in, const RunOptions& opt, std::ostream& log) {
    auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = cfg_in;
    if (opt.seed) cfg.set("chain.seed", static_cast<double>(*opt.seed));
    const std::string& kind = cfg.kind();
    std::vector<Task> tasks;
    if (kind == "verify") tasks = verify_tasks(cfg, opt);
    else if (kind == "xi-scan") tasks = xi_tasks(cfg);
    else if (kind == "cone-density") tasks = cone_tasks(cfg);
    else if (kind == "interface") tasks = interface_tasks(cfg);
    else if (kind == "pinning-curve") tasks = pinning_tasks(cfg);
    else if (kind == "renewal-demo") tasks = renewal_tasks(cfg, opt);
    else if (kind == "local-time") tasks = local_time_tasks(cfg);
    else throw ConfigError("unknown experiment '" + kind + "'");

    RunSummary sum;
    sum.digest = cfg.digest();
    sum.tasks = static_cast<int>(tasks.size());
    fs::create_directories(opt.out_dir);
    fs::path base = fs::path(opt.out_dir) / kind;
    sum.jsonl_path = base.string() + ".jsonl";
    sum.csv_path = base.string() + ".csv";
    sum.checkpoint_path = opt.resume.empty() ? base.string() + ".ckpt" : opt.resume;

    std::vector<TaskOutput> done;
    json saved = json::array();
    if (!opt.resume.empty()) {
        std::ifstream f(opt.resume);
        if (!f) throw std::runtime_error("cannot open checkpoint " + opt.resume);
        json ck = json::parse(f);
        if (ck.value("digest", "") != sum.digest)
            throw ConfigError("checkpoint " + opt.resume + " was written for a different config (digest mismatch)");
        for (const auto& t : ck["tasks"]) {
            if (t["index"].get<int>() != static_cast<int>(done.size())) throw std::runtime_error("corrupt checkpoint");
            TaskOutput o;
            o.records = t["records"].get<std::vector<json>>();
            o.csv_rows = t["csv"].get<std::vector<std::string>>();
            o.ok = t["ok"].get<bool>();
            done.push_back(std::move(o));
            saved.push_back(t);
        }
        sum.resumed = static_cast<int>(done.size());
    }

    std::ofstream jl(sum.jsonl_path, std::ios::trunc);
    if (!jl) throw std::runtime_error("cannot write " + sum.jsonl_path);
    auto emit = [&](const TaskOutput& o) {
        for (auto r : o.records) {
            r["config_digest"] = sum.digest;
            r["version"] = kCodeVersion;
            jl << r.dump() << '\n';
        }
        jl.flush();
    };
    for (const auto& o : done) emit(o);
    std::uint64_t seed = static_cast<std::uint64_t>(cfg.integer("chain.seed"));
    for (std::size_t i = done.size(); i < tasks.size(); ++i) {
        log << kind << ": task " << i + 1 << "/" << tasks.size() << '\n';
        auto o = tasks[i](derive_seed(seed, i), done);
        emit(o);
        saved.push_back(task_json(static_cast<int>(i), o));
        save_progress(sum.checkpoint_path, sum.digest, saved);
        done.push_back(std::move(o));
    }

    if (cfg.flag("output.csv")) {
        std::ofstream csv(sum.csv_path, std::ios::trunc);
        csv << csv_header(kind) << '\n';
        for (const auto& o : done)
            for (const auto& r : o.csv_rows) csv << r << '\n';
    }
    for (const auto& o : done) sum.ok = sum.ok && o.ok;
    sum.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream meta(base.string() + ".run.json", std::ios::trunc);
    meta << json{{"experiment", kind},
                 {"config", json::parse(cfg.canonical())},
                 {"config_digest", sum.digest},
                 {"version", kCodeVersion},
                 {"tasks", sum.tasks},
                 {"resumed", sum.resumed},
                 {"ok", sum.ok},
                 {"wall_clock_seconds", sum.seconds}}
                .dump(2)
         << '\n';
    return sum;
}

}  // namespace fkdl
