#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fkdl/lattice.hpp"

namespace fkdl {

struct UnsupportedDynamics : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DiagnosticsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// splitmix64 finalizer
std::uint64_t splitmix64(std::uint64_t x);
// Stream seed for chain `index` under `master`: splitmix64(master ^ splitmix64(index + 1)).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

class Rng {
public:
    explicit Rng(std::uint64_t seed = 1) : eng_(seed) {}
    std::uint64_t next() { return eng_(); }
    // 53-bit uniform in [0,1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    int below(int n) { return static_cast<int>(uniform() * n); }
    std::string state() const;
    void set_state(const std::string& s);
    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

enum class Dynamics { heat_bath, edwards_sokal, mixed };
Dynamics parse_dynamics(const std::string& s);

// Heat-bath and cluster dynamics for the random-cluster measure with per-edge
// weights. Boundary groups are represented by one virtual node each.
class FkSampler {
public:
    FkSampler(const Lattice& lat, std::vector<double> weights, double q, BoundaryCondition bc);
    FkSampler(const Lattice& lat, const WeightField& w, BoundaryCondition bc)
        : FkSampler(lat, edge_weights(lat, w), w.q, std::move(bc)) {}

    const Lattice& lattice() const { return *lat_; }
    const std::vector<double>& weights() const { return x_; }
    double q() const { return q_; }
    const BoundaryCondition& bc() const { return bc_; }

    // Are the endpoints of e joined by an open path avoiding e?
    bool connected_off(const EdgeConfiguration& w, int e);
    // Probability that e is open given the rest of the configuration.
    double conditional_open(const EdgeConfiguration& w, int e);
    // Resample e: open iff u < conditional_open. Returns the new state.
    bool heat_bath_step(EdgeConfiguration& w, int e, double u);
    void heat_bath_sweep(EdgeConfiguration& w, Rng& rng);
    void edwards_sokal_sweep(EdgeConfiguration& w, Rng& rng);

    // Heat-bath step for the measure conditioned on {a <-> b}. Closing an edge
    // pivotal for the event is refused. Requires a <-> b in w.
    bool conditioned_step(EdgeConfiguration& w, int e, double u, int a, int b);
    void conditioned_sweep(EdgeConfiguration& w, Rng& rng, int a, int b);
    bool connected(const EdgeConfiguration& w, int a, int b);

private:
    struct Search {
        bool connected = false;
        int exhausted_side = -1;  // 0: component of u, 1: component of v
    };
    Search bisearch(const EdgeConfiguration& w, int u, int v, int skip_edge);
    bool in_side(int node, int side) const { return seen_[node] == stamp_ && side_[node] == side; }
    bool reaches(const EdgeConfiguration& w, int from, int target, int skip_edge);
    template <class F>
    void for_neighbours(const EdgeConfiguration& w, int node, int skip_edge, F&& f) const;

    const Lattice* lat_;
    std::vector<double> x_;
    double q_;
    BoundaryCondition bc_;
    std::vector<std::vector<int>> groups_;
    std::vector<int> group_of_;
    bool dobrushin_ = false;
    int nv_;
    std::vector<std::uint32_t> seen_;
    std::vector<std::uint8_t> side_;
    std::uint32_t stamp_ = 0;
    std::vector<int> qa_, qb_;
    std::vector<int> color_;
};

struct ChainParams {
    long sweeps = 1000;
    long burn_in = 100;
    long thin = 1;
    std::uint64_t seed = 1;
    Dynamics dynamics = Dynamics::heat_bath;
    BoundaryCondition bc;
    bool keep_snapshots = false;
    void validate() const;
};

using Observable = std::function<double(const EdgeConfiguration&, const ClusterIndex&)>;

struct SampleBatch {
    std::vector<long> sweep;
    std::vector<std::vector<double>> values;  // [record][observable]
    std::vector<EdgeConfiguration> snapshots;
    std::uint64_t seed = 0;
    std::size_t size() const { return sweep.size(); }
    std::vector<double> column(std::size_t k) const;
};

struct ChainState {
    EdgeConfiguration omega;
    Rng rng;
    long sweep = 0;
};

ChainState initial_state(const Lattice& lat, std::uint64_t seed, bool open = false);
void run_sweep(FkSampler& s, ChainState& st, Dynamics dyn);

// Runs sweeps st.sweep+1 .. params.sweeps, recording observables at thinned
// sweeps past the burn-in.
SampleBatch run_chain(FkSampler& s, const ChainParams& params, const std::vector<Observable>& obs,
                      ChainState* resume = nullptr);
SampleBatch run_chain(const Lattice& lat, const WeightField& w, const ChainParams& params,
                      const std::vector<Observable>& obs);

struct Estimate {
    double mean = 0;
    double se = 0;
    int bins = 0;
};

// Blocked mean: bin count is a power of two >= 16.
Estimate binned_mean(const std::vector<double>& xs);
// Integrated autocorrelation time with the automatic windowing rule (c = 6).
double integrated_autocorr(const std::vector<double>& xs);

Estimate estimate_connectivity(const SampleBatch& b, const Lattice& lat, const BoundaryCondition& bc,
                               int u, int v);

// Samples conditioned on {a <-> b}.
SampleBatch conditioned_by_rejection(FkSampler& s, const ChainParams& p, int a, int b,
                                     const std::vector<Observable>& obs);
// Seeded bridge: open a shortest lattice path a..b, then run conditioned dynamics.
SampleBatch conditioned_by_bridge(FkSampler& s, const ChainParams& p, int a, int b,
                                  const std::vector<Observable>& obs);

struct CheckpointHeader {
    int d = 0;
    int n = 0;
    double q = 0, x = 0, xp = 0;
    std::uint64_t seed = 0;
    long sweep = 0;
};
void save_checkpoint(const std::string& path, const CheckpointHeader& h, const ChainState& st);
ChainState load_checkpoint(const std::string& path, CheckpointHeader* h = nullptr);

}  // namespace fkdl
