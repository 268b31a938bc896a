#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fkdl/lattice.hpp"

namespace fkdl {

struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using ConfigFn = std::function<double(std::uint64_t)>;

// Full enumeration of the random-cluster measure on a small graph.
// Configurations are bit masks in edge order. Dobrushin boundary conditions
// give weight zero to configurations joining the two exterior halves.
class ExactMeasure {
public:
    ExactMeasure(const Lattice& lat, std::vector<double> weights, double q,
                 const BoundaryCondition& bc, int cap = 24);

    int num_edges() const { return m_; }
    std::uint64_t num_configs() const { return 1ULL << m_; }
    long double Z() const { return Z_; }
    int kappa(std::uint64_t mask) const { return kappa_[mask]; }
    bool admissible(std::uint64_t mask) const { return kappa_[mask] != 0; }
    long double weight(std::uint64_t mask) const;
    long double prob(std::uint64_t mask) const { return weight(mask) / Z_; }
    const Lattice& lattice() const { return *lat_; }
    const BoundaryCondition& bc() const { return bc_; }
    double q() const { return q_; }
    const std::vector<double>& weights() const { return x_; }

    long double expectation(const ConfigFn& f) const;
    // conditional on an event given as indicator
    long double conditional_expectation(const ConfigFn& f, const ConfigFn& given) const;

    // labels of all vertices for one configuration (with bc identifications)
    std::vector<int> labels(std::uint64_t mask) const;
    bool connected(std::uint64_t mask, int u, int v) const;

private:
    const Lattice* lat_;
    std::vector<double> x_;
    double q_;
    BoundaryCondition bc_;
    int m_;
    std::vector<std::uint8_t> kappa_;  // 0 marks excluded configurations
    std::vector<long double> lo_prod_, hi_prod_, qpow_;
    int split_;
    long double Z_ = 0;
};

ExactMeasure enumerate_measure(const Lattice& lat, const WeightField& w,
                               const BoundaryCondition& bc, int cap = 24);

long double exact_two_point(const ExactMeasure& m, int u, int v);

// rest[i] in {0,1} for every i != e; rest[e] is ignored. Any other value is a
// parameter error.
long double exact_conditional(const ExactMeasure& m, int e, const std::vector<int>& rest);

long double exact_covariance(const ExactMeasure& m, const ConfigFn& f, const ConfigFn& g);

struct MonotoneEvent {
    std::string name;
    ConfigFn f;
};

// Single-edge indicators and connection indicators for all vertex pairs.
std::vector<MonotoneEvent> monotone_family(const ExactMeasure& m);

struct CorpusGraph {
    std::string name;
    Lattice lat;
};

// Small graphs (at most 10 edges) with a few line-flagged edges.
std::vector<CorpusGraph> graph_corpus();

}  // namespace fkdl
