#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace fkdl {

struct CheckItem {
    std::string name;
    double value = 0;
    double bound = 0;
    bool pass = false;
};

// Outcome of one exact or statistical suite. `worst` is the suite's figure of
// merit (largest z-score, smallest margin, largest residual, ...) and `bound`
// the threshold it is compared against.
struct SuiteReport {
    std::string suite;
    long checks = 0;
    long failures = 0;
    double worst = 0;
    double bound = 0;
    std::string worst_item;
    double seconds = 0;
    std::vector<CheckItem> items;  // named sub-checks of small suites
    bool pass() const { return checks > 0 && failures == 0; }
};

void write_suite_jsonl(std::ostream& os, const SuiteReport& r);

struct OracleSuiteConfig {
    long sweeps = 1000000;
    long burn_in = 1000;
    long thin = 1;
    std::vector<double> qs{1.0, 1.5, 2.0, 3.0};
    double x = 0.8, xp = 2.5;
    double sigmas = 4.0;
    std::uint64_t seed = 1;
    int workers = 1;
};

// Heat-bath for every q and Edwards-Sokal for integer q on every corpus graph:
// all single-edge marginals and two-point probabilities against enumeration.
// worst = largest |mean - exact| / binned se.
SuiteReport oracle_equivalence_suite(const OracleSuiteConfig& cfg);

// Exact: every edge and every rest of the others, free and wired boundary.
SuiteReport finite_energy_suite();
// Exact: covariances over the monotone family and monotonicity in x'.
SuiteReport fkg_suite();

// Russo suite margins plus the q = 1 series closed form.
SuiteReport russo_margin_suite();
SuiteReport russo_closed_form_suite();

// Shipped kernel corpus: p mass, telescoping, defect decay, generating
// identity and push-forward symmetry.
SuiteReport renewal_suite(const std::string& kernel_dir);

// d = 3 closed form, d = 2 and d = 3 exponents, d in {4, 5} thresholds.
SuiteReport pinning_suite();

// Uniform {1, 2} step law: exact and simulated hitting probability of n.
SuiteReport renewal_constant_suite(long trials, std::uint64_t seed);

SuiteReport cone_pivot_suite();

}  // namespace fkdl
