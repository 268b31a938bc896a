#pragma once

#include <string>
#include <vector>

#include "fkdl/exact_oracle.hpp"
#include "fkdl/sampler.hpp"

namespace fkdl {

struct CouplingViolation : std::logic_error {
    using std::logic_error::logic_error;
};

struct CoupledPair {
    EdgeConfiguration omega;
    EdgeConfiguration eta;
    std::string tag;
};

struct PairChainResult {
    std::vector<CoupledPair> pairs;
    std::vector<long> sweep;
    double agreement_rate = 0;  // mean fraction of edges with omega == eta
};

// Two heat-bath chains driven by the same uniforms: omega with e held open,
// eta with e held closed. Throws CouplingViolation if the order ever breaks.
PairChainResult conditioned_pair_chain(const Lattice& lat, const std::vector<double>& x, double q,
                                       const BoundaryCondition& bc, int e, const ChainParams& params);

// Exploration coupling of two weight fields differing only on E. Explored
// edges use the exact conditional given all explored edges; the unexplored
// remainder is drawn once from the omega conditional and copied to eta.
class ExplorationCoupler {
public:
    ExplorationCoupler(const Lattice& lat, std::vector<double> w_high, std::vector<double> w_low, double q,
                       std::vector<int> E, const BoundaryCondition& bc = BoundaryCondition::free());

    CoupledPair sample(Rng& rng) const;
    const ExactMeasure& high() const { return high_; }
    const ExactMeasure& low() const { return low_; }

    // Vertex set of the omega-cluster of the endpoints of E.
    std::vector<char> cluster_of_E(const EdgeConfiguration& omega) const;
    // Hard checks: order, and agreement off the cluster and its edge boundary.
    void verify(const CoupledPair& p) const;

private:
    double nested(const ExactMeasure& m, std::uint64_t known, std::uint64_t val, int f) const;

    const Lattice* lat_;
    std::vector<int> E_;
    ExactMeasure high_, low_;
};

CoupledPair exploration_coupling(const Lattice& lat, const std::vector<double>& w_high,
                                 const std::vector<double>& w_low, double q, const std::vector<int>& E,
                                 Rng& rng);

}  // namespace fkdl
