#include "fkdl/couplings.hpp"

#include <algorithm>

namespace fkdl {

PairChainResult conditioned_pair_chain(const Lattice& lat, const std::vector<double>& x, double q,
                                       const BoundaryCondition& bc, int e, const ChainParams& params) {
    params.validate();
    if (e < 0 || e >= lat.num_edges()) throw ParameterError("invalid edge id");
    FkSampler s(lat, x, q, bc);
    EdgeConfiguration omega(lat.num_edges(), true), eta(lat.num_edges());
    Rng rng(params.seed);
    PairChainResult out;
    double agree = 0;
    for (long sweep = 1; sweep <= params.sweeps; ++sweep) {
        for (int f = 0; f < lat.num_edges(); ++f) {
            if (f == e) continue;
            double u = rng.uniform();
            bool a = s.heat_bath_step(omega, f, u);
            bool b = s.heat_bath_step(eta, f, u);
            if (b && !a) throw CouplingViolation("pair chain lost its order at edge " + std::to_string(f));
        }
        if (sweep > params.burn_in && (sweep - params.burn_in) % params.thin == 0) {
            int same = 0;
            for (int f = 0; f < lat.num_edges(); ++f) same += omega.get(f) == eta.get(f);
            agree += static_cast<double>(same) / lat.num_edges();
            out.pairs.push_back({omega, eta, "conditioned-pair e=" + std::to_string(e)});
            out.sweep.push_back(sweep);
        }
    }
    if (!out.pairs.empty()) out.agreement_rate = agree / out.pairs.size();
    return out;
}

namespace {

void check_fields(const Lattice& lat, const std::vector<double>& hi, const std::vector<double>& lo,
                  const std::vector<int>& E) {
    if (static_cast<int>(hi.size()) != lat.num_edges() || static_cast<int>(lo.size()) != lat.num_edges())
        throw ParameterError("weight vector size mismatch");
    std::vector<char> inE(lat.num_edges(), 0);
    for (int e : E) {
        if (e < 0 || e >= lat.num_edges()) throw ParameterError("invalid edge id in E");
        inE[e] = 1;
    }
    for (int e = 0; e < lat.num_edges(); ++e) {
        if (lo[e] > hi[e]) throw ParameterError("w_low exceeds w_high on edge " + std::to_string(e));
        if (!inE[e] && lo[e] != hi[e]) throw ParameterError("weight fields differ outside E on edge " + std::to_string(e));
    }
}

}  // namespace

ExplorationCoupler::ExplorationCoupler(const Lattice& lat, std::vector<double> w_high, std::vector<double> w_low,
                                       double q, std::vector<int> E, const BoundaryCondition& bc)
    : lat_(&lat),
      E_((check_fields(lat, w_high, w_low, E), std::move(E))),
      high_(lat, std::move(w_high), q, bc),
      low_(lat, std::move(w_low), q, bc) {
    if (E_.empty()) throw ParameterError("edge set E must be nonempty");
}

double ExplorationCoupler::nested(const ExactMeasure& m, std::uint64_t known, std::uint64_t val, int f) const {
    std::uint64_t all = m.num_configs() - 1;
    std::uint64_t free_bits = all & ~known & ~(1ULL << f);
    long double w1 = 0, w0 = 0;
    std::uint64_t sub = free_bits;
    while (true) {
        std::uint64_t c = val | sub;
        w0 += m.weight(c);
        w1 += m.weight(c | (1ULL << f));
        if (sub == 0) break;
        sub = (sub - 1) & free_bits;
    }
    if (w0 + w1 <= 0) throw CouplingViolation("exploration reached a zero-weight state");
    return static_cast<double>(w1 / (w0 + w1));
}

CoupledPair ExplorationCoupler::sample(Rng& rng) const {
    const Lattice& lat = *lat_;
    int m = lat.num_edges();
    auto groups = lat.boundary_groups(high_.bc());
    std::vector<int> group_of(lat.num_vertices(), -1);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (int v : groups[g]) group_of[v] = static_cast<int>(g);
    std::vector<char> inS(lat.num_vertices(), 0);
    auto add = [&](int v) {
        if (inS[v]) return;
        inS[v] = 1;
        if (group_of[v] >= 0)
            for (int w : groups[group_of[v]]) inS[w] = 1;
    };
    for (int e : E_) {
        add(lat.edge(e).u);
        add(lat.edge(e).v);
    }
    std::uint64_t known = 0, vo = 0, ve = 0;
    while (true) {
        int f = -1;
        for (int g = 0; g < m; ++g)
            if (!((known >> g) & 1) && (inS[lat.edge(g).u] || inS[lat.edge(g).v])) {
                f = g;
                break;
            }
        if (f < 0) break;
        double u = rng.uniform();
        bool a = u < nested(high_, known, vo, f);
        bool b = u < nested(low_, known, ve, f);
        if (b && !a) throw CouplingViolation("exploration coupling lost its order at edge " + std::to_string(f));
        known |= 1ULL << f;
        if (a) {
            vo |= 1ULL << f;
            add(lat.edge(f).u);
            add(lat.edge(f).v);
        }
        if (b) ve |= 1ULL << f;
    }
    // remainder from the omega conditional, shared by both
    std::uint64_t all = high_.num_configs() - 1, free_bits = all & ~known;
    std::vector<std::pair<std::uint64_t, long double>> cand;
    long double tot = 0;
    std::uint64_t sub = free_bits;
    while (true) {
        long double w = high_.weight(vo | sub);
        if (w > 0) {
            tot += w;
            cand.push_back({sub, tot});
        }
        if (sub == 0) break;
        sub = (sub - 1) & free_bits;
    }
    long double target = rng.uniform() * tot;
    std::uint64_t rest = cand.back().first;
    for (const auto& [s, c] : cand)
        if (target < c) {
            rest = s;
            break;
        }
    CoupledPair p{EdgeConfiguration::from_mask(m, vo | rest), EdgeConfiguration::from_mask(m, ve | rest),
                  "exploration"};
    return p;
}

std::vector<char> ExplorationCoupler::cluster_of_E(const EdgeConfiguration& omega) const {
    auto lab = high_.labels(omega.mask64());
    std::vector<char> in(lat_->num_vertices(), 0);
    for (int e : E_) {
        int lu = lab[lat_->edge(e).u], lv = lab[lat_->edge(e).v];
        for (int v = 0; v < lat_->num_vertices(); ++v)
            if (lab[v] == lu || lab[v] == lv) in[v] = 1;
    }
    return in;
}

void ExplorationCoupler::verify(const CoupledPair& p) const {
    if (!p.omega.dominates(p.eta)) throw CouplingViolation("pair is not ordered");
    auto C = cluster_of_E(p.omega);
    for (int f = 0; f < lat_->num_edges(); ++f) {
        const Edge& ed = lat_->edge(f);
        if (!C[ed.u] && !C[ed.v] && p.omega.get(f) != p.eta.get(f))
            throw CouplingViolation("configurations differ off the explored cluster at edge " + std::to_string(f));
    }
}

CoupledPair exploration_coupling(const Lattice& lat, const std::vector<double>& w_high,
                                 const std::vector<double>& w_low, double q, const std::vector<int>& E,
                                 Rng& rng) {
    ExplorationCoupler c(lat, w_high, w_low, q, E);
    auto p = c.sample(rng);
    c.verify(p);
    return p;
}

}  // namespace fkdl
