#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "fkdl/verify.hpp"

using namespace fkdl;

TEST_CASE("exact suites pass") {
    for (const auto& r : {finite_energy_suite(), fkg_suite(), russo_closed_form_suite(), pinning_suite(),
                          renewal_suite(std::string(FKDL_DATA_DIR) + "/kernels")}) {
        INFO(r.suite << " " << r.worst_item);
        CHECK(r.pass());
    }
}

TEST_CASE("short oracle equivalence run") {
    OracleSuiteConfig cfg;
    cfg.sweeps = 20000;
    cfg.burn_in = 100;
    cfg.qs = {1.0, 2.0};
    auto r = oracle_equivalence_suite(cfg);
    INFO(r.worst_item);
    CHECK(r.checks > 400);
    CHECK(r.pass());
    std::ostringstream os;
    write_suite_jsonl(os, r);
    auto j = nlohmann::json::parse(os.str());
    CHECK(j["suite"] == "oracle-equivalence");
    CHECK(j["pass"] == true);
}

TEST_CASE("renewal constant suite") {
    auto r = renewal_constant_suite(100000, 3);
    CHECK(r.pass());
    CHECK(r.items.size() == 2);
}
