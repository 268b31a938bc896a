#include "fkdl/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace fkdl {

Lattice Lattice::box(std::vector<std::pair<int, int>> ranges) {
    if (ranges.size() < 2) throw ParameterError("box dimension must be >= 2");
    Lattice L;
    L.d_ = static_cast<int>(ranges.size());
    L.ranges_ = std::move(ranges);
    long long nv = 1;
    for (auto [a, b] : L.ranges_) {
        if (b < a) throw ParameterError("empty box range");
        nv *= (b - a + 1);
        if (nv > (1LL << 30)) throw ParameterError("box too large");
    }
    L.nv_ = static_cast<int>(nv);
    // row-major with axis 0 most significant, so index order is lexicographic
    L.stride_.assign(L.d_, 1);
    for (int a = L.d_ - 2; a >= 0; --a) L.stride_[a] = L.stride_[a + 1] * L.extent(a + 1);
    L.coords_.resize(static_cast<std::size_t>(L.nv_) * L.d_);
    L.boundary_.assign(L.nv_, 0);
    L.adj_.assign(L.nv_, {});
    for (int v = 0; v < L.nv_; ++v) {
        int r = v;
        bool bnd = false;
        for (int a = 0; a < L.d_; ++a) {
            int c = r / L.stride_[a];
            r %= L.stride_[a];
            int x = L.lo(a) + c;
            L.coords_[static_cast<std::size_t>(v) * L.d_ + a] = x;
            if (x == L.lo(a) || x == L.hi(a)) bnd = true;
        }
        L.boundary_[v] = bnd;
        if (bnd) L.boundary_list_.push_back(v);
    }
    for (int v = 0; v < L.nv_; ++v) {
        for (int a = 0; a < L.d_; ++a) {
            if (L.coord(v, a) == L.hi(a)) continue;
            int w = v + L.stride_[a];
            bool on_line = (a == 0);
            for (int b = 1; b < L.d_ && on_line; ++b)
                if (L.coord(v, b) != 0) on_line = false;
            L.add_edge(v, w, a, on_line ? EdgeKind::line : EdgeKind::bulk);
        }
    }
    return L;
}

Lattice Lattice::graph(int num_vertices, const std::vector<std::pair<int, int>>& edges,
                       const std::vector<EdgeKind>& kinds, std::vector<int> boundary) {
    if (num_vertices < 1) throw ParameterError("graph needs at least one vertex");
    Lattice L;
    L.nv_ = num_vertices;
    L.adj_.assign(num_vertices, {});
    L.boundary_.assign(num_vertices, 0);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        auto [u, v] = edges[i];
        if (u < 0 || v < 0 || u >= num_vertices || v >= num_vertices || u == v)
            throw ParameterError("bad edge endpoint");
        EdgeKind k = i < kinds.size() ? kinds[i] : EdgeKind::bulk;
        L.add_edge(std::min(u, v), std::max(u, v), -1, k);
    }
    std::sort(boundary.begin(), boundary.end());
    boundary.erase(std::unique(boundary.begin(), boundary.end()), boundary.end());
    for (int b : boundary) {
        if (b < 0 || b >= num_vertices) throw ParameterError("bad boundary vertex");
        L.boundary_[b] = 1;
    }
    L.boundary_list_ = boundary;
    return L;
}

void Lattice::add_edge(int u, int v, int axis, EdgeKind k) {
    int id = static_cast<int>(edges_.size());
    edges_.push_back({u, v, axis, k});
    adj_[u].push_back({v, id});
    adj_[v].push_back({u, id});
}

std::vector<int> Lattice::coords(int v) const {
    return {coords_.begin() + static_cast<std::ptrdiff_t>(v) * d_,
            coords_.begin() + static_cast<std::ptrdiff_t>(v + 1) * d_};
}

bool Lattice::contains(const std::vector<int>& x) const {
    if (static_cast<int>(x.size()) != d_) return false;
    for (int a = 0; a < d_; ++a)
        if (x[a] < lo(a) || x[a] > hi(a)) return false;
    return true;
}

int Lattice::index(const std::vector<int>& x) const {
    if (!contains(x)) return -1;
    int v = 0;
    for (int a = 0; a < d_; ++a) v += (x[a] - lo(a)) * stride_[a];
    return v;
}

int Lattice::index2(int x0, int x1) const {
    if (x0 < lo(0) || x0 > hi(0) || x1 < lo(1) || x1 > hi(1)) return -1;
    return (x0 - lo(0)) * stride_[0] + (x1 - lo(1));
}

int Lattice::find_edge(int u, int v) const {
    for (auto [w, e] : adj_[u])
        if (w == v) return e;
    return -1;
}

int Lattice::count_kind(EdgeKind k) const {
    return static_cast<int>(
        std::count_if(edges_.begin(), edges_.end(), [k](const Edge& e) { return e.kind == k; }));
}

void Lattice::mark_dual_line() {
    if (d_ != 2) throw ParameterError("dual line needs d == 2");
    for (auto& e : edges_) {
        if (e.axis == 1 && coord(e.u, 1) == 0) e.kind = EdgeKind::dualline;
    }
}

std::vector<std::vector<int>> Lattice::boundary_groups(const BoundaryCondition& bc) const {
    switch (bc.kind) {
        case BcKind::free_bc:
            return {};
        case BcKind::wired:
            if (boundary_list_.empty()) return {};
            return {boundary_list_};
        case BcKind::partition: {
            std::vector<int> seen(nv_, 0);
            int covered = 0;
            for (const auto& g : bc.groups) {
                for (int v : g) {
                    if (v < 0 || v >= nv_ || !boundary_[v])
                        throw ParameterError("partition group contains a non-boundary vertex");
                    if (seen[v]) throw ParameterError("partition groups overlap");
                    seen[v] = 1;
                    ++covered;
                }
            }
            if (covered != static_cast<int>(boundary_list_.size()))
                throw ParameterError("partition groups do not cover the boundary");
            return bc.groups;
        }
        case BcKind::dobrushin: {
            if (d_ != 2) throw ParameterError("dobrushin boundary needs d == 2");
            std::vector<int> up, down;
            for (int v : boundary_list_) (coord(v, 1) >= 1 ? up : down).push_back(v);
            return {up, down};
        }
    }
    return {};
}

void Lattice::dump(std::ostream& os, int n_label) const {
    os << d_ << ' ' << n_label << '\n';
    for (const auto& e : edges_) {
        const char* f = e.kind == EdgeKind::line ? "line" : e.kind == EdgeKind::dualline ? "dualline" : "bulk";
        os << e.u << ' ' << e.v << ' ' << f << '\n';
    }
}

Lattice read_lattice_dump(std::istream& is) {
    int d = 0, n = 0;
    if (!(is >> d >> n)) throw ParameterError("lattice dump: missing header");
    std::vector<std::pair<int, int>> es;
    std::vector<EdgeKind> ks;
    int u, v;
    std::string f;
    while (is >> u >> v >> f) {
        es.emplace_back(u, v);
        if (f == "bulk") ks.push_back(EdgeKind::bulk);
        else if (f == "line") ks.push_back(EdgeKind::line);
        else if (f == "dualline") ks.push_back(EdgeKind::dualline);
        else throw ParameterError("lattice dump: unknown flag " + f);
    }
    if (d == 0) return Lattice::graph(n, es, ks);
    Lattice L = build_box(d, n);
    if (L.num_edges() != static_cast<int>(es.size())) throw ParameterError("lattice dump: edge count mismatch");
    for (int i = 0; i < L.num_edges(); ++i) {
        if (L.edge(i).u != es[i].first || L.edge(i).v != es[i].second)
            throw ParameterError("lattice dump: edge order mismatch");
        if (ks[i] == EdgeKind::dualline && L.edge(i).kind != EdgeKind::dualline) L.mark_dual_line();
    }
    return L;
}

Lattice build_box(int d, int n) {
    if (d < 2) throw ParameterError("d must be >= 2 (got " + std::to_string(d) + ")");
    if (n < 1) throw ParameterError("n must be >= 1 (got " + std::to_string(n) + ")");
    return Lattice::box(std::vector<std::pair<int, int>>(d, {-n, n}));
}

WeightField WeightField::from_beta(double beta, double J, double q) {
    WeightField w{std::expm1(beta), std::expm1(beta * J), q};
    w.validate();
    return w;
}

double WeightField::beta() const { return std::log1p(x); }
double WeightField::J() const { return std::log1p(xp) / std::log1p(x); }
double WeightField::theta1() const { return std::min(x / (x + q), xp / (xp + q)); }
double WeightField::theta0() const { return 1.0 / (1.0 + std::max(x, xp)); }

void WeightField::validate() const {
    if (!(x >= 0) || !(xp >= 0)) throw ParameterError("edge weights must be >= 0");
    if (!(q >= 1)) throw ParameterError("cluster weight q must be >= 1");
}

double edge_weight(const Lattice& lat, const WeightField& w, int e) {
    if (e < 0 || e >= lat.num_edges()) throw ParameterError("invalid edge id");
    return lat.edge(e).kind == EdgeKind::line ? w.xp : w.x;
}

std::vector<double> edge_weights(const Lattice& lat, const WeightField& w) {
    std::vector<double> out(lat.num_edges());
    for (int e = 0; e < lat.num_edges(); ++e) out[e] = edge_weight(lat, w, e);
    return out;
}

EdgeConfiguration::EdgeConfiguration(int num_edges, bool open)
    : n_(num_edges), open_(open ? num_edges : 0), words_((num_edges + 63) / 64, open ? ~0ULL : 0ULL) {
    if (open && (num_edges & 63)) words_.back() = (1ULL << (num_edges & 63)) - 1;
}

EdgeConfiguration EdgeConfiguration::from_mask(int num_edges, std::uint64_t mask) {
    EdgeConfiguration c(num_edges);
    if (num_edges > 0) {
        c.words_[0] = num_edges >= 64 ? mask : (mask & ((1ULL << num_edges) - 1));
        c.recount();
    }
    return c;
}

void EdgeConfiguration::set(int e, bool open) {
    std::uint64_t bit = 1ULL << (e & 63);
    std::uint64_t& w = words_[e >> 6];
    bool cur = w & bit;
    if (cur == open) return;
    if (open) {
        w |= bit;
        ++open_;
    } else {
        w &= ~bit;
        --open_;
    }
}

int EdgeConfiguration::popcount() const {
    int c = 0;
    for (auto w : words_) c += std::popcount(w);
    return c;
}

bool EdgeConfiguration::dominates(const EdgeConfiguration& o) const {
    for (std::size_t i = 0; i < words_.size(); ++i)
        if (o.words_[i] & ~words_[i]) return false;
    return true;
}

void DisjointSets::reset(int n) {
    parent_.resize(n);
    std::iota(parent_.begin(), parent_.end(), 0);
    rank_.assign(n, 0);
}

int DisjointSets::find(int a) {
    int r = a;
    while (parent_[r] != r) r = parent_[r];
    while (parent_[a] != r) {
        int nx = parent_[a];
        parent_[a] = r;
        a = nx;
    }
    return r;
}

bool DisjointSets::unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
}

std::vector<int> ClusterIndex::members(int lab) const {
    std::vector<int> out;
    for (int v = 0; v < static_cast<int>(label.size()); ++v)
        if (label[v] == lab) out.push_back(v);
    return out;
}

std::vector<int> ClusterIndex::sizes() const {
    std::vector<int> s(kappa, 0);
    for (int l : label) ++s[l];
    return s;
}

ClusterIndex rebuild_clusters(const Lattice& lat, const EdgeConfiguration& w,
                              const BoundaryCondition& bc) {
    DisjointSets ds(lat.num_vertices());
    for (const auto& g : lat.boundary_groups(bc))
        for (std::size_t i = 1; i < g.size(); ++i) ds.unite(g[0], g[i]);
    const auto& words = w.words();
    for (std::size_t k = 0; k < words.size(); ++k) {
        std::uint64_t m = words[k];
        while (m) {
            int b = std::countr_zero(m);
            m &= m - 1;
            const Edge& e = lat.edge(static_cast<int>(k * 64 + b));
            ds.unite(e.u, e.v);
        }
    }
    ClusterIndex ci;
    ci.label.assign(lat.num_vertices(), -1);
    std::vector<int> root_label(lat.num_vertices(), -1);
    for (int v = 0; v < lat.num_vertices(); ++v) {
        int r = ds.find(v);
        if (root_label[r] < 0) root_label[r] = ci.kappa++;
        ci.label[v] = root_label[r];
    }
    return ci;
}

bool dobrushin_ok(const Lattice& lat, const ClusterIndex& ci) {
    auto g = lat.boundary_groups(BoundaryCondition::dobrushin());
    if (g[0].empty() || g[1].empty()) return true;
    return ci.label[g[0][0]] != ci.label[g[1][0]];
}

}  // namespace fkdl
