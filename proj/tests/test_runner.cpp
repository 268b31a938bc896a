#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "fkdl/config.hpp"
#include "fkdl/runner.hpp"

using namespace fkdl;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("fkdl_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

RunOptions options(const fs::path& dir) {
    RunOptions o;
    o.out_dir = dir.string();
    o.data_dir = FKDL_DATA_DIR;
    return o;
}

const json kSmallInterface = json::parse(
    R"({"interface": {"ns": [8, 12]}, "chain": {"sweeps": 1000, "burn_in": 40, "thin": 4}})");

}  // namespace

TEST_CASE("config digest ignores key order and weight style") {
    auto a = RunConfig::parse("xi-scan", json::parse(R"({"model": {"q": 2, "beta": 0.5, "J": [1, 2]}})"));
    auto b = RunConfig::parse("xi-scan", json::parse(R"({"model.J": [1.0, 2.0], "model.beta": 0.5, "model.q": 2.0})"));
    CHECK(a.digest() == b.digest());
    json xs = {{"model", {{"x", std::expm1(0.5)}, {"xp", {std::expm1(0.5), std::expm1(1.0)}}}}};
    auto c = RunConfig::parse("xi-scan", xs);
    CHECK(c.canonical() == a.canonical());
    auto d = RunConfig::parse("xi-scan", json::parse(R"({"model": {"q": 2, "beta": 0.5, "J": [1, 3]}})"));
    CHECK(d.digest() != a.digest());
    CHECK(a.digest().size() == 64);
}

TEST_CASE("config validation names the keys") {
    auto msg = [](const char* kind, const char* doc) {
        try {
            RunConfig::parse(kind, json::parse(doc));
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    auto both = msg("interface", R"({"model": {"beta": 1, "xp": 2, "x": 1}})");
    CHECK(both.find("model.beta") != std::string::npos);
    CHECK(both.find("model.x") != std::string::npos);
    CHECK(both.find("model.xp") != std::string::npos);
    CHECK(msg("verify", R"({"verify": {"sweep": 10}})").find("verify.sweep") != std::string::npos);
    CHECK(msg("verify", R"({"model": {"beta": 1}})").find("model.beta") != std::string::npos);
    CHECK(msg("cone-density", R"({"chain": {"sweeps": "many"}})").find("chain.sweeps") != std::string::npos);
    CHECK(msg("xi-scan", R"({"experiment": "interface"})").find("experiment") != std::string::npos);
    CHECK(msg("xi-scan", R"({"model": {"J": -1}})").find("model.J") != std::string::npos);
    CHECK(msg("nonsense", "{}").find("nonsense") != std::string::npos);
    CHECK(msg("xi-scan", R"({"experiment": "xi-scan", "model": {"x": 0.5}})").empty());
    for (int i = 0; kExperiments[i]; ++i) CHECK_NOTHROW(RunConfig::defaults(kExperiments[i]));
}

TEST_CASE("rerun gives byte-identical JSONL") {
    auto cfg = RunConfig::parse("interface", kSmallInterface);
    std::ostringstream log;
    auto d1 = scratch("rerun1"), d2 = scratch("rerun2");
    auto s1 = run_experiment(cfg, options(d1), log);
    auto s2 = run_experiment(cfg, options(d2), log);
    CHECK(s1.tasks == 5);
    CHECK(slurp(s1.jsonl_path) == slurp(s2.jsonl_path));
    CHECK(slurp(s1.csv_path) == slurp(s2.csv_path));
    auto first = json::parse(slurp(s1.jsonl_path).substr(0, slurp(s1.jsonl_path).find('\n')));
    CHECK(first["config_digest"] == cfg.digest());
    CHECK(first["version"] == kCodeVersion);
    CHECK_FALSE(first.contains("seconds"));
    auto meta = json::parse(slurp((d1 / "interface.run.json").string()));
    CHECK(meta.contains("wall_clock_seconds"));

    auto opt = options(d2);
    opt.seed = 99;
    auto s3 = run_experiment(cfg, opt, log);
    CHECK(s3.digest != s1.digest);
    CHECK(slurp(s3.jsonl_path) != slurp(s1.jsonl_path));
}

TEST_CASE("resume from a partial checkpoint reproduces the run") {
    auto cfg = RunConfig::parse("interface", kSmallInterface);
    std::ostringstream log;
    auto full = scratch("full"), part = scratch("part");
    auto s = run_experiment(cfg, options(full), log);

    auto ck = json::parse(slurp(s.checkpoint_path));
    REQUIRE(ck["tasks"].size() == 5);
    ck["tasks"].erase(ck["tasks"].begin() + 2, ck["tasks"].end());
    auto ckpath = (part / "interrupted.ckpt").string();
    std::ofstream(ckpath) << ck.dump();
    auto opt = options(part);
    opt.resume = ckpath;
    auto r = run_experiment(cfg, opt, log);
    CHECK(r.resumed == 2);
    CHECK(slurp(r.jsonl_path) == slurp(s.jsonl_path));
    CHECK(slurp(r.csv_path) == slurp(s.csv_path));

    auto other = RunConfig::parse("interface", json::parse(R"({"interface": {"ns": [8]}})"));
    CHECK_THROWS_AS(run_experiment(other, opt, log), ConfigError);
}

TEST_CASE("empty result set writes a header-only CSV") {
    auto cfg = RunConfig::parse("cone-density", json::parse(R"({"model": {"J": []}})"));
    std::ostringstream log;
    auto d = scratch("empty");
    auto s = run_experiment(cfg, options(d), log);
    CHECK(s.tasks == 0);
    CHECK(slurp(s.csv_path) == csv_header("cone-density") + "\n");
    CHECK(slurp(s.jsonl_path).empty());
    CHECK_THROWS_AS(csv_header("bogus"), ConfigError);
}

TEST_CASE("small runs of every experiment") {
    std::ostringstream log;
    auto d = scratch("all");
    json docs = {
        {"verify", json::parse(R"({"verify": {"sweeps": 2000, "burn_in": 100, "q": [2], "renewal_trials": 20000}})")},
        {"xi-scan", json::parse(R"({"model": {"J": [1, 3]}, "xi": {"half_length": 24, "half_width": 6, "ns": [2, 3, 4, 5, 6],
            "end_margin": 4, "n_min": 2, "n_max": 6}, "chain": {"sweeps": 200, "burn_in": 20}})")},
        {"cone-density", json::parse(R"({"model": {"n": 12}, "cone": {"margin": 4, "half_width": 5},
            "chain": {"sweeps": 200, "burn_in": 20, "thin": 2}})")},
        {"pinning-curve", json::object()},
        {"renewal-demo", json::object()},
        {"local-time", json::parse(R"({"local_time": {"trials": 20000}, "renewal": {"trials": 20000}})")},
    };
    for (auto& [kind, doc] : docs.items()) {
        INFO(kind);
        auto s = run_experiment(RunConfig::parse(kind, doc), options(d), log);
        CHECK(s.ok);
        CHECK(s.tasks > 0);
        std::ifstream f(s.jsonl_path);
        int lines = 0;
        for (std::string line; std::getline(f, line); ++lines) CHECK(json::parse(line)["config_digest"] == s.digest);
        CHECK(lines > 0);
    }
}
