#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "fkdl/exact_oracle.hpp"
#include "fkdl/lattice.hpp"

namespace fkdl {

struct PreconditionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Event on edge configurations given as bit masks in edge order.
using EdgeEvent = std::function<bool(std::uint64_t)>;

// Edges whose flip changes the indicator of A.
std::vector<int> pivotal_set(std::uint64_t mask, int num_edges, const EdgeEvent& A);
// Exhaustive check over all 2^m configurations.
bool is_increasing(int num_edges, const EdgeEvent& A);

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol);

struct RussoReport {
    double lhs = 0;  // log(P^{s2}(A) / P^{s1}(A))
    double rhs = 0;  // integral of sum_e P^s(e in Piv_A | A) / (s(1+s))
    double margin = 0;
    bool holds = false;  // lhs >= rhs - 1e-9
    long evaluations = 0;
};

// Graph with weight x on edges outside E and s on edges of E, free boundary.
// Throws PreconditionError if A is not increasing or has probability zero.
RussoReport russo_bound_check(const Lattice& g, const std::vector<int>& E, const EdgeEvent& A, double q,
                              double x, double s1, double s2, double tol = 1e-10);

struct PivotalReport {
    std::string event;
    std::vector<double> s;
    std::vector<double> expected;  // sum_e P_s(e in Piv_A | A)
};
PivotalReport pivotal_profile(const Lattice& g, const std::vector<int>& E, const EdgeEvent& A,
                              const std::string& name, double q, double x, const std::vector<double>& s);

struct RussoCase {
    std::string graph, event;
    double q = 1, s1 = 0, s2 = 0;
    RussoReport report;
};
// Corpus graphs x q in {1, 1.5, 2, 3} x five (s1, s2) pairs x connection and
// single-edge events; E is the set of line edges of each graph.
std::vector<RussoCase> russo_suite(double x = 1.0);
void write_russo_jsonl(std::ostream& os, const RussoCase& c);

// Random-cluster weight sum on an abstract graph by vertex elimination in the
// given order. forced[e]: -1 free, 0 closed, 1 open. Throws CapacityError if
// the frontier grows beyond max_states partitions.
long double frontier_sum(int nv, const std::vector<std::pair<int, int>>& edges, const std::vector<double>& x,
                         double q, const std::vector<int>& forced, const std::vector<int>& order,
                         std::size_t max_states = 2000000);

struct LfreeRow {
    int R = 0;
    int edges = 0;
    double p_wired = 0;
    double ratio = 0;
};
struct LfreeReport {
    double reference = 0;  // free-boundary probability on the largest domain
    std::vector<LfreeRow> rows;
    bool above_one = false;   // every ratio >= 1 - 1e-12
    bool decreasing = false;  // ratios nonincreasing in R
};

// A depends on the edges of Z^d joining two points of D, listed in the order
// returned by domain_edges(D). Wired boundary on D_R for each R; the
// reference uses the free measure on the largest D_R, which lower-bounds the
// infinite-volume probability.
std::vector<std::pair<std::vector<int>, std::vector<int>>> domain_edges(const std::vector<std::vector<int>>& D);
LfreeReport lfree_ratio_check(const std::vector<std::vector<int>>& D, const EdgeEvent& A, double x, double q,
                              const std::vector<int>& Rs);

struct ConePivotReport {
    int n = 0;
    long configurations = 0;  // configurations with 0 <-> n e_1
    long cone_points = 0;     // interior cone-points of C_0 on the axis
    long violations = 0;      // cone-points with no pivotal axis edge at them
};
// Exhaustive over the box [0, n] x [-1, 1] (n <= 4).
ConePivotReport cone_point_pivotality(int n);

}  // namespace fkdl
