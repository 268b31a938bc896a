#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fkdl {

struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class EdgeKind : std::uint8_t { bulk, line, dualline };

struct Edge {
    int u;
    int v;
    int axis;  // -1 for abstract graphs
    EdgeKind kind;
};

enum class BcKind { free_bc, wired, partition, dobrushin };

// Boundary identifications. For boxes the boundary is the set of vertices with
// at least one coordinate at the end of its range; abstract graphs declare it.
struct BoundaryCondition {
    BcKind kind = BcKind::free_bc;
    std::vector<std::vector<int>> groups;  // only for partition

    static BoundaryCondition free() { return {}; }
    static BoundaryCondition wired() { return {BcKind::wired, {}}; }
    static BoundaryCondition partition(std::vector<std::vector<int>> g) {
        return {BcKind::partition, std::move(g)};
    }
    // Upper exterior half wired, lower exterior half wired, the two never joined.
    static BoundaryCondition dobrushin() { return {BcKind::dobrushin, {}}; }
};

class Lattice {
public:
    // Box [lo_i, hi_i] per axis. Throws ParameterError for d < 2 or empty ranges.
    static Lattice box(std::vector<std::pair<int, int>> ranges);
    static Lattice graph(int num_vertices, const std::vector<std::pair<int, int>>& edges,
                         const std::vector<EdgeKind>& kinds = {},
                         std::vector<int> boundary = {});

    int dim() const { return d_; }
    bool has_geometry() const { return d_ > 0; }
    int num_vertices() const { return nv_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    const Edge& edge(int e) const { return edges_.at(e); }
    const std::vector<Edge>& edges() const { return edges_; }
    // (neighbour, edge id) pairs
    const std::vector<std::pair<int, int>>& adj(int v) const { return adj_[v]; }

    const std::vector<std::pair<int, int>>& ranges() const { return ranges_; }
    int lo(int axis) const { return ranges_[axis].first; }
    int hi(int axis) const { return ranges_[axis].second; }
    int extent(int axis) const { return hi(axis) - lo(axis) + 1; }

    int coord(int v, int axis) const { return coords_[static_cast<std::size_t>(v) * d_ + axis]; }
    std::vector<int> coords(int v) const;
    bool contains(const std::vector<int>& x) const;
    int index(const std::vector<int>& x) const;  // -1 if outside
    int index2(int x0, int x1) const;            // d == 2 shortcut, -1 if outside

    bool is_boundary(int v) const { return boundary_[v] != 0; }
    const std::vector<int>& boundary_vertices() const { return boundary_list_; }
    int find_edge(int u, int v) const;  // -1 if absent

    int count_kind(EdgeKind k) const;
    // d == 2 only: mark edges {(x,0),(x,1)} as dual-line edges.
    void mark_dual_line();

    // Groups of boundary vertices identified by bc (empty for free).
    std::vector<std::vector<int>> boundary_groups(const BoundaryCondition& bc) const;

    void dump(std::ostream& os, int n_label) const;

private:
    void add_edge(int u, int v, int axis, EdgeKind k);

    int d_ = 0;
    int nv_ = 0;
    std::vector<std::pair<int, int>> ranges_;
    std::vector<int> stride_;
    std::vector<int> coords_;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::pair<int, int>>> adj_;
    std::vector<char> boundary_;
    std::vector<int> boundary_list_;
};

// Lambda_n = [-n, n]^d with line flags on the e_1 axis.
Lattice build_box(int d, int n);

struct WeightField {
    double x = 0.0;   // bulk
    double xp = 0.0;  // line
    double q = 1.0;

    static WeightField from_beta(double beta, double J, double q);
    double beta() const;
    double J() const;
    double theta1() const;
    double theta0() const;
    void validate() const;
};

double edge_weight(const Lattice& lat, const WeightField& w, int e);
std::vector<double> edge_weights(const Lattice& lat, const WeightField& w);

class EdgeConfiguration {
public:
    EdgeConfiguration() = default;
    explicit EdgeConfiguration(int num_edges, bool open = false);
    static EdgeConfiguration from_mask(int num_edges, std::uint64_t mask);

    int size() const { return n_; }
    bool get(int e) const { return (words_[e >> 6] >> (e & 63)) & 1u; }
    void set(int e, bool open);
    void flip(int e) { set(e, !get(e)); }
    int open_count() const { return open_; }
    int popcount() const;  // recomputed, for cache checks
    std::uint64_t mask64() const { return words_.empty() ? 0 : words_[0]; }
    const std::vector<std::uint64_t>& words() const { return words_; }
    std::vector<std::uint64_t>& raw_words() { return words_; }
    void recount() { open_ = popcount(); }
    bool operator==(const EdgeConfiguration& o) const { return n_ == o.n_ && words_ == o.words_; }
    bool dominates(const EdgeConfiguration& o) const;  // this >= o edgewise

private:
    int n_ = 0;
    int open_ = 0;
    std::vector<std::uint64_t> words_;
};

class DisjointSets {
public:
    explicit DisjointSets(int n = 0) { reset(n); }
    void reset(int n);
    int find(int a);
    bool unite(int a, int b);
    int size() const { return static_cast<int>(parent_.size()); }

private:
    std::vector<int> parent_;
    std::vector<int> rank_;
};

struct ClusterIndex {
    std::vector<int> label;  // 0..kappa-1, numbered by first vertex
    int kappa = 0;
    bool connected(int u, int v) const { return label[u] == label[v]; }
    std::vector<int> members(int lab) const;
    std::vector<int> sizes() const;
};

ClusterIndex rebuild_clusters(const Lattice& lat, const EdgeConfiguration& w,
                              const BoundaryCondition& bc);

// Dobrushin constraint: upper and lower exterior groups not connected.
bool dobrushin_ok(const Lattice& lat, const ClusterIndex& ci);

Lattice read_lattice_dump(std::istream& is);

}  // namespace fkdl
