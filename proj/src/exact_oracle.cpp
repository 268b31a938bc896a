#include "fkdl/exact_oracle.hpp"

#include <bit>
#include <cmath>

namespace fkdl {

namespace {

struct Neumaier {
    long double s = 0, c = 0;
    void add(long double v) {
        long double t = s + v;
        if (std::fabs(s) >= std::fabs(v)) c += (s - t) + v;
        else c += (v - t) + s;
        s = t;
    }
    long double value() const { return s + c; }
};

}  // namespace

ExactMeasure::ExactMeasure(const Lattice& lat, std::vector<double> weights, double q,
                           const BoundaryCondition& bc, int cap)
    : lat_(&lat), x_(std::move(weights)), q_(q), bc_(bc), m_(lat.num_edges()) {
    if (m_ > cap)
        throw CapacityError("exact enumeration cap exceeded: " + std::to_string(m_) +
                            " edges > cap " + std::to_string(cap));
    if (cap > 30) throw CapacityError("exact enumeration cap must be <= 30");
    if (static_cast<int>(x_.size()) != m_) throw ParameterError("weight vector size mismatch");
    if (lat.num_vertices() > 250) throw CapacityError("too many vertices for enumeration");
    if (!(q >= 1)) throw ParameterError("q must be >= 1");
    for (double v : x_)
        if (!(v >= 0)) throw ParameterError("edge weights must be >= 0");

    split_ = m_ / 2;
    lo_prod_.assign(1ULL << split_, 1.0L);
    hi_prod_.assign(1ULL << (m_ - split_), 1.0L);
    for (std::uint64_t s = 1; s < lo_prod_.size(); ++s) {
        int b = std::countr_zero(s);
        lo_prod_[s] = lo_prod_[s & (s - 1)] * x_[b];
    }
    for (std::uint64_t s = 1; s < hi_prod_.size(); ++s) {
        int b = std::countr_zero(s);
        hi_prod_[s] = hi_prod_[s & (s - 1)] * x_[split_ + b];
    }

    auto groups = lat.boundary_groups(bc);
    bool dob = bc.kind == BcKind::dobrushin && groups.size() == 2 && !groups[0].empty() &&
               !groups[1].empty();
    kappa_.assign(num_configs(), 0);
    DisjointSets base(lat.num_vertices());
    for (const auto& g : groups)
        for (std::size_t i = 1; i < g.size(); ++i) base.unite(g[0], g[i]);
    int base_k = 0;
    for (int v = 0; v < lat.num_vertices(); ++v)
        if (base.find(v) == v) ++base_k;

    qpow_.assign(lat.num_vertices() + 1, 1.0L);
    for (std::size_t k = 1; k < qpow_.size(); ++k) qpow_[k] = qpow_[k - 1] * q;

    Neumaier z;
    for (std::uint64_t mask = 0; mask < num_configs(); ++mask) {
        DisjointSets ds = base;
        int k = base_k;
        std::uint64_t mm = mask;
        while (mm) {
            int b = std::countr_zero(mm);
            mm &= mm - 1;
            if (ds.unite(lat.edge(b).u, lat.edge(b).v)) --k;
        }
        if (dob && ds.find(groups[0][0]) == ds.find(groups[1][0])) continue;
        kappa_[mask] = static_cast<std::uint8_t>(k);
        z.add(qpow_[k] * lo_prod_[mask & ((1ULL << split_) - 1)] * hi_prod_[mask >> split_]);
    }
    Z_ = z.value();
    if (!(Z_ > 0)) throw ParameterError("partition function vanishes");
}

long double ExactMeasure::weight(std::uint64_t mask) const {
    int k = kappa_[mask];
    if (k == 0) return 0.0L;
    return qpow_[k] * lo_prod_[mask & ((1ULL << split_) - 1)] *
           hi_prod_[mask >> split_];
}

long double ExactMeasure::expectation(const ConfigFn& f) const {
    Neumaier s;
    for (std::uint64_t mask = 0; mask < num_configs(); ++mask) {
        if (!kappa_[mask]) continue;
        long double wgt = weight(mask);
        if (wgt == 0) continue;
        s.add(wgt * f(mask));
    }
    return s.value() / Z_;
}

long double ExactMeasure::conditional_expectation(const ConfigFn& f, const ConfigFn& given) const {
    Neumaier num, den;
    for (std::uint64_t mask = 0; mask < num_configs(); ++mask) {
        if (!kappa_[mask] || given(mask) == 0) continue;
        long double wgt = weight(mask);
        num.add(wgt * f(mask));
        den.add(wgt);
    }
    if (den.value() <= 0) throw ParameterError("conditioning event has probability zero");
    return num.value() / den.value();
}

std::vector<int> ExactMeasure::labels(std::uint64_t mask) const {
    DisjointSets ds(lat_->num_vertices());
    for (const auto& g : lat_->boundary_groups(bc_))
        for (std::size_t i = 1; i < g.size(); ++i) ds.unite(g[0], g[i]);
    std::uint64_t mm = mask;
    while (mm) {
        int b = std::countr_zero(mm);
        mm &= mm - 1;
        ds.unite(lat_->edge(b).u, lat_->edge(b).v);
    }
    std::vector<int> lab(lat_->num_vertices());
    for (int v = 0; v < lat_->num_vertices(); ++v) lab[v] = ds.find(v);
    return lab;
}

bool ExactMeasure::connected(std::uint64_t mask, int u, int v) const {
    if (u == v) return true;
    auto lab = labels(mask);
    return lab[u] == lab[v];
}

ExactMeasure enumerate_measure(const Lattice& lat, const WeightField& w,
                               const BoundaryCondition& bc, int cap) {
    w.validate();
    if (lat.num_edges() > cap)
        throw CapacityError("exact enumeration cap exceeded: " + std::to_string(lat.num_edges()) +
                            " edges > cap " + std::to_string(cap));
    return ExactMeasure(lat, edge_weights(lat, w), w.q, bc, cap);
}

long double exact_two_point(const ExactMeasure& m, int u, int v) {
    int nv = m.lattice().num_vertices();
    if (u < 0 || v < 0 || u >= nv || v >= nv) throw ParameterError("invalid vertex");
    if (u == v) return 1.0L;
    return m.expectation([&](std::uint64_t s) { return m.connected(s, u, v) ? 1.0 : 0.0; });
}

long double exact_conditional(const ExactMeasure& m, int e, const std::vector<int>& rest) {
    if (e < 0 || e >= m.num_edges()) throw ParameterError("invalid edge id");
    if (static_cast<int>(rest.size()) != m.num_edges())
        throw ParameterError("partial configuration must assign every edge except e");
    std::uint64_t mask = 0;
    for (int i = 0; i < m.num_edges(); ++i) {
        if (i == e) continue;
        if (rest[i] != 0 && rest[i] != 1)
            throw ParameterError("partial configuration leaves edge " + std::to_string(i) +
                                 " unassigned");
        if (rest[i]) mask |= 1ULL << i;
    }
    long double w1 = m.weight(mask | (1ULL << e));
    long double w0 = m.weight(mask);
    if (w0 + w1 <= 0) throw ParameterError("conditioning configuration has weight zero");
    return w1 / (w0 + w1);
}

long double exact_covariance(const ExactMeasure& m, const ConfigFn& f, const ConfigFn& g) {
    long double ef = m.expectation(f);
    long double eg = m.expectation(g);
    long double efg = m.expectation([&](std::uint64_t s) { return f(s) * g(s); });
    return efg - ef * eg;
}

std::vector<MonotoneEvent> monotone_family(const ExactMeasure& m) {
    std::vector<MonotoneEvent> out;
    for (int e = 0; e < m.num_edges(); ++e)
        out.push_back({"edge" + std::to_string(e),
                       [e](std::uint64_t s) { return ((s >> e) & 1ULL) ? 1.0 : 0.0; }});
    const ExactMeasure* mp = &m;
    int nv = m.lattice().num_vertices();
    for (int u = 0; u < nv; ++u)
        for (int v = u + 1; v < nv; ++v)
            out.push_back({"conn" + std::to_string(u) + "_" + std::to_string(v),
                           [mp, u, v](std::uint64_t s) { return mp->connected(s, u, v) ? 1.0 : 0.0; }});
    return out;
}

std::vector<CorpusGraph> graph_corpus() {
    using K = EdgeKind;
    std::vector<CorpusGraph> c;
    c.push_back({"K2", Lattice::graph(2, {{0, 1}}, {K::line})});
    c.push_back({"path2", Lattice::graph(3, {{0, 1}, {1, 2}}, {K::line, K::bulk})});
    c.push_back({"triangle", Lattice::graph(3, {{0, 1}, {1, 2}, {0, 2}}, {K::line, K::bulk, K::bulk})});
    c.push_back({"cycle4", Lattice::graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}},
                                          {K::line, K::bulk, K::line, K::bulk})});
    c.push_back({"diamond", Lattice::graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {0, 2}},
                                           {K::bulk, K::bulk, K::bulk, K::bulk, K::line})});
    c.push_back({"K4", Lattice::graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}},
                                      {K::line, K::bulk, K::bulk, K::bulk, K::bulk, K::line})});
    // 2x3 grid: vertices (r,c) -> 3r+c
    c.push_back({"grid2x3", Lattice::graph(6, {{0, 1}, {1, 2}, {3, 4}, {4, 5}, {0, 3}, {1, 4}, {2, 5}},
                                           {K::line, K::line, K::bulk, K::bulk, K::bulk, K::bulk, K::bulk},
                                           {0, 2, 3, 5})});
    // 2x5 ladder, 13 edges would exceed the corpus bound; use 2x4 (10 edges)
    c.push_back({"ladder2x4",
                 Lattice::graph(8,
                                {{0, 1}, {1, 2}, {2, 3}, {4, 5}, {5, 6}, {6, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}},
                                {K::line, K::line, K::line, K::bulk, K::bulk, K::bulk, K::bulk, K::bulk,
                                 K::bulk, K::bulk},
                                {0, 3, 4, 7})});
    c.push_back({"theta", Lattice::graph(5, {{0, 1}, {1, 4}, {0, 2}, {2, 4}, {0, 3}, {3, 4}},
                                         {K::line, K::line, K::bulk, K::bulk, K::bulk, K::bulk})});
    return c;
}

}  // namespace fkdl
