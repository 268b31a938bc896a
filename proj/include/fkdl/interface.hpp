#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fkdl/lattice.hpp"
#include "fkdl/sampler.hpp"

namespace fkdl {

struct InterfaceError : std::logic_error {
    using std::logic_error::logic_error;
};

// Potts spins on {-n..n} x {-n+1..n} with Dobrushin exterior spins: 1 for
// y >= 1, 2 for y <= 0. Couplings beta in the bulk, beta*J on the dual-line
// edges {(x,0),(x,1)}.
class DobrushinPotts {
public:
    struct Bond {
        int a;       // site
        int b;       // site, or num_sites() + s - 1 for an exterior spin s
        int ax, ay;  // coordinates of a
        int bx, by;  // coordinates of b (exterior point for boundary bonds)
        double coupling;
    };

    DobrushinPotts(int n, double beta, double J, int q);

    int n() const { return n_; }
    int q() const { return q_; }
    double beta() const { return beta_; }
    double J() const { return J_; }
    int num_sites() const { return w_ * h_; }
    int index(int x, int y) const;  // -1 outside
    static int exterior_spin(int y) { return y >= 1 ? 1 : 2; }
    int spin(int x, int y) const { return s_[index(x, y)]; }
    void set_spin(int x, int y, int s);
    const std::vector<std::uint8_t>& spins() const { return s_; }
    const std::vector<Bond>& bonds() const { return bonds_; }
    // x = e^beta - 1 above sqrt(q)
    bool supercritical() const;

    void set_flat();
    void randomize(Rng& rng);
    void heat_bath_sweep(Rng& rng);
    void sw_sweep(Rng& rng);
    // Edwards-Sokal bonds for the current spins, one flag per bond.
    std::vector<char> es_bonds(Rng& rng) const;

private:
    int n_, q_, w_, h_;
    double beta_, J_;
    std::vector<std::uint8_t> s_;
    std::vector<Bond> bonds_;
    std::vector<std::vector<int>> site_bonds_;
};

// Dual vertex (i + 1/2, j + 1/2) with i in [-n-1, n], j in [-n, n].
struct InterfaceProfile {
    int n = 0;
    std::vector<std::pair<int, int>> edges;  // dual edges as (i, j) pairs of endpoints, see dual_id
    std::vector<double> upper, lower;        // at x = -n - 1/2 + k, k = 0..2n+1
    std::vector<double> upper_mid, lower_mid;  // at integer x = -n + k, k = 0..2n

    double max_upper() const;
    double min_lower() const;
    double max_width() const;  // max over dual columns of upper - lower
    double span() const { return max_upper() - min_lower(); }
    double gamma_plus0() const { return upper_mid[n]; }
};

int dual_id(int n, int i, int j);
std::pair<int, int> dual_coords(int n, int id);

// Component of disagreement dual edges through the left marker (-n-1/2, 1/2).
InterfaceProfile extract_interface(const DobrushinPotts& m);
bool envelopes_bound(const InterfaceProfile& p);

// Disagreement bonds are closed, and every interface edge lies in the open
// dual cluster joining the two markers. Throws InterfaceError otherwise.
void check_duality(const DobrushinPotts& m, const std::vector<char>& bonds, const InterfaceProfile& p);

struct InterfaceRunParams {
    long sweeps = 2000;
    long burn_in = 200;
    long thin = 10;
    std::uint64_t seed = 1;
    bool heat_bath = true;  // one heat-bath sweep after each cluster sweep
    bool check = true;
};

struct InterfaceRun {
    std::vector<InterfaceProfile> profiles;
    long duality_checks = 0;
    bool supercritical = true;
};

InterfaceRun sample_dobrushin(int n, double beta, double J, int q, const InterfaceRunParams& p);

struct WidthSummary {
    long samples = 0;
    double median_max_upper = 0, median_min_lower = 0, median_max_width = 0, median_span = 0;
    double iqr_max_width = 0;
    double mean_max_width = 0;
    double mean_gamma0 = 0, var_gamma0 = 0, var_gamma0_se = 0;
    std::vector<double> max_width;
};

WidthSummary width_stats(const std::vector<InterfaceProfile>& profiles);

void write_profile_jsonl(std::ostream& os, const InterfaceProfile& p, double J, int q);
void write_width_csv_header(std::ostream& os);
void write_width_csv_row(std::ostream& os, int n, double J, int q, const WidthSummary& s);

// ---- planar duality for box configurations ----

double dual_weight(double x, double q);  // q / x
// Faces of the box plus one outer vertex; dual edge k crosses primal edge k.
Lattice dual_lattice(const Lattice& lat);
// Dual edge open iff primal edge closed.
EdgeConfiguration dual_config(const Lattice& lat, const EdgeConfiguration& w);

}  // namespace fkdl
