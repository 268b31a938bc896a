#pragma once

#include <cmath>
#include <iosfwd>
#include <map>
#include <vector>

#include "fkdl/lattice.hpp"
#include "fkdl/sampler.hpp"

namespace fkdl {

using Point = std::vector<int>;

struct SamplingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Cones of aperture psi around e_1. forward(u): u in Y<; backward(u): u in Y>.
struct ConeSystem {
    double psi = M_PI / 2;
    explicit ConeSystem(double psi_ = M_PI / 2);
    bool forward(const Point& u) const;
    bool backward(const Point& u) const;
    bool either(const Point& u) const { return forward(u) || backward(u); }
    bool in_diamond(const Point& u, const Point& a, const Point& b) const;  // (a+Y<) n (b+Y>)

private:
    bool right_angle_;
    double c_;
};

Point sub(const Point& a, const Point& b);
Point add(const Point& a, const Point& b);

// Open cluster: sorted vertex indices and the open edges among them.
struct Cluster {
    std::vector<int> vertices;
    std::vector<int> edges;
    bool contains(int v) const;
};

Cluster extract_cluster(const Lattice& lat, const EdgeConfiguration& w, int v);
// Cluster built from explicit coordinates (all lattice edges between listed
// vertices are taken as open).
Cluster cluster_from_points(const Lattice& lat, const std::vector<Point>& pts);

bool is_cone_point(const Lattice& lat, const Cluster& c, int v, const ConeSystem& cones);
// All cone-points, sorted by e_1 coordinate. Only vertices alone in their
// e_1-slice can qualify, which prunes the quadratic check.
std::vector<int> cone_points(const Lattice& lat, const Cluster& c, const ConeSystem& cones);
std::vector<int> cone_points_brute(const Lattice& lat, const Cluster& c, const ConeSystem& cones);

struct Piece {
    std::vector<Point> vertices;  // relative to the piece's anchor
    std::vector<std::pair<Point, Point>> edges;
    Point displacement;
};

struct IrreducibleDecomposition {
    Piece back;                 // gamma^b, anchored at 0
    std::vector<Piece> middle;  // gamma_1..gamma_m, each anchored at its left cone-point
    Piece front;                // gamma^f, anchored at n e_1
    std::vector<Point> cone_points;
    bool no_cone_points = false;
    int m() const { return static_cast<int>(middle.size()); }
};

IrreducibleDecomposition decompose(const Lattice& lat, const Cluster& c, int n, const ConeSystem& cones);

struct PointSet {
    std::vector<Point> vertices;                     // sorted
    std::vector<std::pair<Point, Point>> edges;      // sorted, each pair ordered
};
PointSet to_point_set(const Lattice& lat, const Cluster& c);
PointSet reconstruct(const IrreducibleDecomposition& dec, int d);
bool middle_pieces_in_diamonds(const IrreducibleDecomposition& dec, const ConeSystem& cones);

// ---- coarse graining along the line ----

int kbar(int K, double r);  // floor(K + r log K)

struct LineTree {
    int root = -1;
    std::vector<int> vertices;
    std::vector<std::pair<int, int>> edges;  // (parent, child)
};

struct LineCoarseGraining {
    int K = 0, Kbar = 0;
    std::vector<LineTree> trees;
    std::vector<char> in_F;
    std::vector<int> covered;    // slice indices i with B_i covered
    std::vector<int> uncovered;  // interior slices that are not covered
    int num_slices = 0;
    int residual_max_diameter = 0;
    long total_tree_vertices() const;
};

LineCoarseGraining coarse_grain_line(const Lattice& lat, const EdgeConfiguration& w, int K, double r);

// ---- coarse graining of the cluster of the origin ----

struct ClusterTree {
    int K = 0, Kbar = 0, H = 0, Hbar = 0;
    std::vector<Point> vertices;  // v_0 = 0 first
    std::vector<std::pair<int, int>> edges;
    std::vector<char> lfree;
    int num_lfree() const;
    bool contained = true;  // cluster inside Vbar plus boundary boxes
};

ClusterTree coarse_grain_cluster(const Lattice& lat, const EdgeConfiguration& w, int K, double r);

// ---- shades ----

class ShadeProfile {
public:
    void add(long a, long b);
    void add(const ShadeProfile& o);
    const std::vector<std::pair<long, long>>& intervals() const { return iv_; }
    long length() const;  // number of covered sites
    bool covers(long x) const;
    bool covers(long a, long b) const;

private:
    std::vector<std::pair<long, long>> iv_;
};

std::pair<long, long> point_shade(const Point& v);
std::pair<long, long> tree_vertex_shade(const ClusterTree& t, const Point& v);
ShadeProfile tree_shade(const ClusterTree& t);
// Union of point shades of cluster vertices with |v_perp|_inf > band.
ShadeProfile cluster_shade(const Lattice& lat, const Cluster& c, int band);

// Indices i >= 1 of illuminated boxes along [0, n] with slices of width 7K.
std::vector<int> illuminated_boxes(const Lattice& lat, const Cluster& c0, int n, int K);
std::vector<int> illuminated_boxes_brute(const Lattice& lat, const Cluster& c0, int n, int K);

struct ConeDensity {
    double rho = 0;
    double se = 0;
    long samples = 0;
};

// Interior cone-points of C_0 on the axis with 0 < x < n, divided by n + 1.
double cone_point_fraction(const Lattice& lat, const Cluster& c0, int n, const ConeSystem& cones);
ConeDensity cone_point_density(const Lattice& lat, const std::vector<EdgeConfiguration>& samples, int n,
                               const ConeSystem& cones);

// Conditioned chain on {0 <-> n e_1} in the box [-margin, n + margin] x
// [-half_width, half_width]^{d-1}, seeded with an open segment.
struct ConeRunConfig {
    int d = 2;
    int n = 64;
    int margin = 8;
    int half_width = 12;
    WeightField w;
    long sweeps = 4000;
    long burn_in = 400;
    long thin = 4;
    std::uint64_t seed = 1;
};
struct ConeRun {
    ConeDensity density;
    std::vector<double> fractions;
};
ConeRun cone_density_run(const ConeRunConfig& cfg, const ConeSystem& cones = ConeSystem());

struct SampleAnalysis {
    long tree_vertices = 0;
    int lfree = 0;
    long shade_length = 0;
    long shade_undercount = 0;
    int illuminated = 0;
    int cone_points = 0;
};
SampleAnalysis analyse_sample(const Lattice& lat, const EdgeConfiguration& w, int n, int K, double r,
                              const ConeSystem& cones);
void write_analysis_jsonl(std::ostream& os, const SampleAnalysis& a);

}  // namespace fkdl
