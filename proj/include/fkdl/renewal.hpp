#pragma once

#include <algorithm>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fkdl/exact_oracle.hpp"
#include "fkdl/lattice.hpp"
#include "fkdl/pinning.hpp"

namespace fkdl {

struct CapabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Word = std::vector<int>;

// Finite-memory kernel on a finite alphabet. Letters are 0..A-1. Targets of
// the kernel are letters followed by the right boundary symbols (A..A+R-1).
// Contexts are keyed by their last m* letters; a context with fewer letters is
// keyed by its left boundary symbol (encoded A + i) followed by all letters.
struct MemoryKernel {
    std::string name;
    std::vector<std::string> letters, left, right;
    std::vector<double> left_weight;
    int memory = 0;  // m*; negative means a general kernel without a finite depth
    bool has_mixing_constants = false;
    std::map<Word, std::vector<double>> table;
    std::map<std::string, std::vector<int>> displacement;
    int witness = 0;

    int A() const { return static_cast<int>(letters.size()); }
    int targets() const { return A() + static_cast<int>(right.size()); }
    // Psi(t | bl + x[0..k)). bl < 0 only for k >= m*. Requires finalize().
    double psi(int t, int bl, const int* x, int k) const;
    double psi(int t, int bl, const Word& x) const { return psi(t, bl, x.data(), static_cast<int>(x.size())); }
    // Checks that every reachable context is tabulated, weights are finite and
    // >= 0, and no key is unreachable; then builds the dense lookup.
    void finalize();
    int context_index(int bl, const int* x, int k) const;
    int contexts() const { return static_cast<int>(dense_.size()) / std::max(targets(), 1); }
    // Row of weights for a dense context index.
    const double* row(int ctx) const { return dense_.data() + static_cast<long>(ctx) * targets(); }
    // (H1): sup over contexts of sum_t Psi(t | b).
    double summability() const;
    // (H4): inf over contexts of Psi(witness | b).
    double witness_floor() const;

private:
    std::vector<double> dense_;
    std::vector<int> short_offset_;  // per (bl, length < m*)
};

MemoryKernel parse_kernel(std::istream& is, const std::string& name = "");
MemoryKernel load_kernel(const std::string& path);

struct DepthWeights {
    int memory = 0;
    int T = 0, A = 0;
    // a[k][code(u) * T + t] = a_k(t | u) for suffixes u of length k <= m*.
    std::vector<std::vector<double>> a;
    double a_of(int t, const int* suffix, int k) const;
    // Delta_k(t | bl + x[0..c)); bl < 0 for a context without a boundary
    // symbol, in which case depth k must be <= c.
    double delta(const MemoryKernel& kern, int t, int k, int bl, const int* x, int c) const;
    // Largest depth with possibly nonzero weight at a context of c letters.
    int max_depth(int c, bool boundary) const;
};

DepthWeights depth_weights(const MemoryKernel& kern);

// Worst violation of sum_k Delta_k = Psi over contexts with up to m*+2 letters,
// plus the minimal Delta seen (must be >= 0).
struct TelescopeReport {
    double max_error = 0;
    double min_delta = 0;
    long contexts = 0;
};
TelescopeReport telescoping_check(const MemoryKernel& kern, const DepthWeights& dw);

// Stick configurations on {0..n+1}: position 0 carries b_L, n+1 carries b_R.
struct StickDecomposition {
    std::vector<int> I;
    std::vector<char> cut;     // cut[k]: no stick covers k + 1/2, k = 0..n
    std::vector<int> lengths;  // cluster lengths, summing to n + 2
};
StickDecomposition make_sticks(const std::vector<int>& I);

struct StickTable {
    int n = 0;
    // marginal[bl][br][code]: sum over memory values of the stick weight.
    std::vector<std::vector<std::vector<double>>> marginal;
    std::map<std::vector<int>, double> shape_mass;  // cluster tuple -> mass
    double total = 0;
    long configurations = 0;
};

using StickVisitor = std::function<void(int bl, const Word& x, int br, const std::vector<int>& I, double w)>;

// Enumerates (b_L, x, b_R, I) with nonzero weight. Throws CapacityError when
// the enumeration would exceed `cap` configurations.
void for_each_stick(const MemoryKernel& kern, const DepthWeights& dw, int n, const StickVisitor& f,
                    double cap = 5e8);
StickTable stick_expansion(const MemoryKernel& kern, const DepthWeights& dw, int n, double cap = 5e8);

// Direct product Psi_n(b_L, x, b_R).
double psi_n(const MemoryKernel& kern, int bl, const Word& x, int br);

// Words of length len encoded in base A, first letter most significant.
long word_code(const Word& x, int A);
Word word_decode(long code, int len, int A);

// Stick-shape weights for a fixed word: rho_L with shape (n+1),
// p with shape (1,n), rho_R with shape (1,n+1). rho_L includes Psi(b_L).
double rho_left(const MemoryKernel& kern, const DepthWeights& dw, int bl, const Word& x);
double rho_right(const MemoryKernel& kern, const DepthWeights& dw, const Word& x, int br);
double step_weight(const MemoryKernel& kern, const DepthWeights& dw, const Word& x);
// Single stick cluster covering b_L, x and b_R.
double one_cluster(const MemoryKernel& kern, const DepthWeights& dw, int bl, const Word& x, int br);

// Length-indexed masses summed over all words, by transfer matrices.
struct MassSeries {
    std::vector<double> mu;     // mu[n] = sum Psi_n, n >= 0
    std::vector<double> nu;     // nu[n] = p mass on words of length n (nu[0] = 0)
    std::vector<double> rho_l;  // rho_l[m] = rho_L mass with m letters
    std::vector<double> rho_r;  // rho_r[m] = rho_R mass with m letters
    std::vector<double> single; // one-cluster mass with n letters
};
MassSeries mass_series(const MemoryKernel& kern, const DepthWeights& dw, int N);

struct FactorizedLaw {
    int A = 0;
    int cap = 0;
    // Indexed [length][code]; rho_L additionally by b_L, rho_R by b_R.
    std::vector<std::vector<std::vector<double>>> rho_l, rho_r;
    std::vector<std::vector<double>> p;
    std::vector<double> nu;  // p mass per length up to the certificate length
    double p_mass = 0;       // certified sum of p over all words
    double tail = 0;         // bound on the mass beyond the certificate length
    double tail_ratio = 0;   // measured nu_{n+1}/nu_n at the certificate length
    double p_of(const Word& x) const;
    double rho_left_of(int bl, const Word& x) const;
    double rho_right_of(const Word& x, int br) const;
};

// Word tables up to `cap` letters and the p mass with a geometric tail
// certificate. Throws PrecisionError if the tail cannot be certified below tol.
FactorizedLaw factor_weights(const MemoryKernel& kern, const DepthWeights& dw, int cap, double tol = 1e-12);
void write_law_json(std::ostream& os, const MemoryKernel& kern, const FactorizedLaw& law);

using SequenceTest = std::function<double(int bl, const Word& x, int br)>;

struct DefectReport {
    int n = 0;
    std::vector<double> defects;  // |sum f Psi_n - sum f Xi_n| per test function
    double total_variation = 0;   // sum |Psi_n - Xi_n|
    double psi_mass = 0, xi_mass = 0;
};

// Xi_n(b_L, x, b_R): rho_L x P x rho_R restricted to at least one middle word.
double xi_n(const MemoryKernel& kern, const FactorizedLaw& law, int bl, const Word& x, int br);
DefectReport factorization_defect(const MemoryKernel& kern, const FactorizedLaw& law, int n,
                                  const std::vector<SequenceTest>& tests);

struct DecayFit {
    double rate = 0;  // slope of log defect in n
    double r2 = 0;
    bool exact_zero = false;
};
DecayFit fit_decay(const std::vector<DefectReport>& reports);

struct IdentityReport {
    std::vector<double> z, lhs, rhs, residual;
    double B_at_one = 0;
    double max_residual = 0;
    int terms = 0;
};
// Throws ParameterError if some z is outside [0, 1) or beyond the radius
// where the truncated series can be certified.
IdentityReport generating_identity_check(const MemoryKernel& kern, const DepthWeights& dw,
                                         const std::vector<double>& zs, double tol = 1e-12);

struct PushForward {
    int d = 0;
    std::map<std::vector<int>, double> p_hat, rho_l_hat, rho_r_hat;
    double p_mass = 0;           // mass captured by words up to the length cap
    double tail_rate = 0;        // fitted geometric ratio of p mass per step in e_1
    bool p1_tails = false;
    bool p2_directed = false;
    bool p3_aperiodic = false;
    bool p4_irreducible = false;
    bool p5_symmetric = false;   // kernel invariant under the perp flip
    double symmetry_defect = 0;  // max |p(X_perp = u) - p(X_perp = -u)|
};

// Words up to the law's length cap. Throws ParameterError when V is missing a
// symbol or has inconsistent dimension.
PushForward pushforward(const MemoryKernel& kern, const DepthWeights& dw, const FactorizedLaw& law);

// Minimal conditional probability that I_k = 0 given the memory values to the
// right of k, over all stick configurations of length n.
double cut_floor(const MemoryKernel& kern, const DepthWeights& dw, int n);
// P(no cut among the l edges ending at the last letter), l = 1..n-1.
std::vector<double> no_cut_curve(const MemoryKernel& kern, const DepthWeights& dw, int n);

}  // namespace fkdl
