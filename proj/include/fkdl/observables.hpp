#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fkdl/sampler.hpp"

namespace fkdl {

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataQualityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TwoPointPoint {
    int n = 0;
    double p = 0;
    double se = 0;
    long samples = 0;
};

struct TwoPointCurve {
    std::vector<TwoPointPoint> points;
    int d = 2;
    double q = 0, x = 0, xp = 0;
    std::string box, bc;
    void validate() const;
};

// Per-sample values for each separation; the raw material for jackknife fits.
struct TwoPointData {
    std::vector<int> ns;
    std::vector<std::vector<double>> samples;  // [sample][k]
};

enum class XiMethod { slope_fit, ratio, subadditive, prefactor_fit };
std::string to_string(XiMethod m);
XiMethod parse_xi_method(const std::string& s);

struct XiEstimate {
    double value = 0;
    double se = 0;
    double lo = 0, hi = 0;  // value -/+ 2 se
    XiMethod method = XiMethod::slope_fit;
    int n_min = 0, n_max = 0;
    double alpha = 0;  // prefactor exponent, prefactor_fit only
    double alpha_se = 0;
};

struct FitOptions {
    int n_min = 0;
    int n_max = 1 << 30;
    int ratio_step = 1;
    bool inverse_n_term = false;  // prefactor_fit: add b/n
};

// P(0 <-> n e_1) from configuration snapshots. margin < 0 means n_max / 2.
TwoPointCurve two_point_curve(const SampleBatch& b, const Lattice& lat, const BoundaryCondition& bc,
                              const std::vector<int>& ns, int margin = -1);
TwoPointData two_point_data(const SampleBatch& b, const Lattice& lat, const BoundaryCondition& bc,
                            const std::vector<int>& ns, int margin = -1);

// One observable per n: fraction of positions x0 on the axis, with
// end_margin sites kept free at both ends, such that (x0,0..) <-> (x0+n,0..).
std::vector<Observable> line_pair_observables(const Lattice& lat, const std::vector<int>& ns, int end_margin);

TwoPointCurve curve_from_data(const TwoPointData& data);

XiEstimate xi_fit(const TwoPointCurve& c, XiMethod m, const FitOptions& opt = {});
// Same point estimate; standard error from a leave-one-bin-out jackknife.
XiEstimate xi_fit_jackknife(const TwoPointData& data, XiMethod m, const FitOptions& opt = {});

struct PrefactorEstimate {
    double alpha = 0;
    double se = 0;
    double lo = 0, hi = 0;
    bool inconclusive = false;
};
PrefactorEstimate prefactor_exponent(const TwoPointCurve& c, const XiEstimate& xi, const FitOptions& opt = {});
PrefactorEstimate prefactor_exponent_jackknife(const TwoPointData& data, const XiEstimate& xi,
                                               const FitOptions& opt = {}, int d = 2);

double potts_two_point(double p, double q);

// Inverse correlation length of the homogeneous planar Ising model at
// coupling K (high temperature): -log tanh K - 2K.
double ising_xi(double K);
// Same in the q = 2 random-cluster parametrisation, K = beta / 2.
double ising_xi_potts_beta(double beta);

struct XiScanConfig {
    int d = 2;
    double q = 2;
    double beta = 0;
    std::vector<double> Js;
    int half_length = 128;  // box [-half_length, half_length] along e_1
    int half_width = 16;    // transverse half-width
    long sweeps = 2000;
    long burn_in = 200;
    std::uint64_t seed = 1;
    Dynamics dynamics = Dynamics::edwards_sokal;
    std::vector<int> ns;
    int end_margin = 16;
    XiMethod method = XiMethod::slope_fit;
    FitOptions fit;
};

struct XiScanRow {
    double J = 0;
    double xp = 0;
    XiEstimate xi;
    TwoPointCurve curve;
    TwoPointData data;
};

struct XiScanResult {
    std::vector<XiScanRow> rows;
    std::vector<std::string> warnings;
};

// One chain per J with stream derive_seed(seed, index).
XiScanResult xi_scan(const XiScanConfig& cfg, int workers = 1);
TwoPointData measure_line_pairs(const XiScanConfig& cfg, double J, std::uint64_t seed);

struct LipschitzPair {
    double x1 = 0, x2 = 0;
    double lhs = 0, bound = 0;
    bool pass = true;
};
std::vector<LipschitzPair> lipschitz_check(const XiScanResult& scan);

// Pairs (n, m) with p_{n+m} < p_n p_m - sigmas * se; empty when consistent.
std::vector<std::pair<int, int>> subadditivity_violations(const TwoPointCurve& c, double sigmas = 4.0);

void write_two_point_jsonl(std::ostream& os, const TwoPointCurve& c);
void write_xi_jsonl(std::ostream& os, double J, const XiEstimate& e);
void write_two_point_csv(std::ostream& os, const TwoPointCurve& c, bool header = true);
void write_xi_csv(std::ostream& os, double J, const XiEstimate& e, bool header = true);

}  // namespace fkdl
