#include "fkdl/cone.hpp"
#include "fkdl/observables.hpp"

#include <algorithm>
#include <json.hpp>
#include <ostream>
#include <queue>
#include <set>

namespace fkdl {

namespace {

long long norm2sq(const Point& u, int from = 0) {
    long long s = 0;
    for (std::size_t a = from; a < u.size(); ++a) s += static_cast<long long>(u[a]) * u[a];
    return s;
}

long isqrt(long long s) {
    long r = static_cast<long>(std::sqrt(static_cast<double>(s)));
    while (static_cast<long long>(r) * r > s) --r;
    while (static_cast<long long>(r + 1) * (r + 1) <= s) ++r;
    return r;
}

int tnorm_inf(const Lattice& lat, int v) {
    int m = 0;
    for (int a = 1; a < lat.dim(); ++a) m = std::max(m, std::abs(lat.coord(v, a)));
    return m;
}

int origin(const Lattice& lat) {
    int o = lat.index(Point(lat.dim(), 0));
    if (o < 0) throw GeometryError("origin is not in the box");
    return o;
}

}  // namespace

ConeSystem::ConeSystem(double psi_) : psi(psi_) {
    if (!(psi > 0) || psi > M_PI / 2 + 1e-15) throw ParameterError("aperture must lie in (0, pi/2]");
    right_angle_ = std::fabs(psi - M_PI / 2) < 1e-15;
    c_ = std::cos(psi / 2);
}

bool ConeSystem::forward(const Point& u) const {
    if (right_angle_) {
        if (u[0] < 0) return false;
        return 2LL * u[0] * u[0] >= norm2sq(u);
    }
    double n = std::sqrt(static_cast<double>(norm2sq(u)));
    return u[0] >= n * c_ - 1e-12 * std::max(1.0, n);
}

bool ConeSystem::backward(const Point& u) const {
    Point m(u.size());
    for (std::size_t a = 0; a < u.size(); ++a) m[a] = -u[a];
    return forward(m);
}

bool ConeSystem::in_diamond(const Point& u, const Point& a, const Point& b) const {
    return forward(sub(u, a)) && backward(sub(u, b));
}

Point sub(const Point& a, const Point& b) {
    Point r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

Point add(const Point& a, const Point& b) {
    Point r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

bool Cluster::contains(int v) const { return std::binary_search(vertices.begin(), vertices.end(), v); }

Cluster extract_cluster(const Lattice& lat, const EdgeConfiguration& w, int v) {
    Cluster c;
    std::vector<char> seen(lat.num_vertices(), 0);
    std::vector<int> q{v};
    seen[v] = 1;
    for (std::size_t h = 0; h < q.size(); ++h)
        for (auto [nb, id] : lat.adj(q[h]))
            if (w.get(id)) {
                if (!seen[nb]) {
                    seen[nb] = 1;
                    q.push_back(nb);
                }
            }
    std::sort(q.begin(), q.end());
    c.vertices = q;
    for (int u : q)
        for (auto [nb, id] : lat.adj(u))
            if (w.get(id) && u < nb) c.edges.push_back(id);
    std::sort(c.edges.begin(), c.edges.end());
    return c;
}

Cluster cluster_from_points(const Lattice& lat, const std::vector<Point>& pts) {
    Cluster c;
    for (const auto& p : pts) {
        int v = lat.index(p);
        if (v < 0) throw ParameterError("point outside the box");
        c.vertices.push_back(v);
    }
    std::sort(c.vertices.begin(), c.vertices.end());
    c.vertices.erase(std::unique(c.vertices.begin(), c.vertices.end()), c.vertices.end());
    for (int u : c.vertices)
        for (auto [nb, id] : lat.adj(u))
            if (u < nb && c.contains(nb)) c.edges.push_back(id);
    std::sort(c.edges.begin(), c.edges.end());
    return c;
}

bool is_cone_point(const Lattice& lat, const Cluster& c, int v, const ConeSystem& cones) {
    if (!c.contains(v)) throw ParameterError("vertex is not in the cluster");
    Point pv = lat.coords(v);
    for (int u : c.vertices)
        if (!cones.either(sub(lat.coords(u), pv))) return false;
    return true;
}

std::vector<int> cone_points_brute(const Lattice& lat, const Cluster& c, const ConeSystem& cones) {
    std::vector<int> out;
    for (int v : c.vertices)
        if (is_cone_point(lat, c, v, cones)) out.push_back(v);
    std::sort(out.begin(), out.end(), [&](int a, int b) { return lat.coord(a, 0) < lat.coord(b, 0); });
    return out;
}

std::vector<int> cone_points(const Lattice& lat, const Cluster& c, const ConeSystem& cones) {
    std::map<int, int> count;
    for (int v : c.vertices) ++count[lat.coord(v, 0)];
    std::vector<int> out;
    std::vector<Point> pts;
    pts.reserve(c.vertices.size());
    for (int u : c.vertices) pts.push_back(lat.coords(u));
    for (int v : c.vertices) {
        if (count[lat.coord(v, 0)] != 1) continue;
        Point pv = lat.coords(v);
        bool ok = true;
        for (const auto& pu : pts)
            if (!cones.either(sub(pu, pv))) {
                ok = false;
                break;
            }
        if (ok) out.push_back(v);
    }
    std::sort(out.begin(), out.end(), [&](int a, int b) { return lat.coord(a, 0) < lat.coord(b, 0); });
    return out;
}

namespace {

Piece make_piece(const Lattice& lat, const Cluster& c, const std::vector<char>& in, const Point& anchor,
                 const Point& disp, std::vector<char>& edge_used) {
    Piece p;
    p.displacement = disp;
    for (std::size_t i = 0; i < c.vertices.size(); ++i)
        if (in[i]) p.vertices.push_back(sub(lat.coords(c.vertices[i]), anchor));
    for (std::size_t k = 0; k < c.edges.size(); ++k) {
        if (edge_used[k]) continue;
        const Edge& e = lat.edge(c.edges[k]);
        auto iu = std::lower_bound(c.vertices.begin(), c.vertices.end(), e.u) - c.vertices.begin();
        auto iv = std::lower_bound(c.vertices.begin(), c.vertices.end(), e.v) - c.vertices.begin();
        if (in[iu] && in[iv]) {
            p.edges.push_back({sub(lat.coords(e.u), anchor), sub(lat.coords(e.v), anchor)});
            edge_used[k] = 1;
        }
    }
    return p;
}

}  // namespace

IrreducibleDecomposition decompose(const Lattice& lat, const Cluster& c, int n, const ConeSystem& cones) {
    int d = lat.dim();
    Point zero(d, 0), ne(d, 0);
    ne[0] = n;
    int o = lat.index(zero), t = lat.index(ne);
    if (o < 0 || t < 0 || !c.contains(o) || !c.contains(t))
        throw ParameterError("cluster must contain 0 and n e_1");
    IrreducibleDecomposition dec;
    std::vector<int> cps;
    for (int v : cone_points(lat, c, cones))
        if (lat.coord(v, 0) >= 0 && lat.coord(v, 0) <= n) cps.push_back(v);
    std::vector<char> used(c.edges.size(), 0);
    std::size_t N = c.vertices.size();
    if (cps.empty()) {
        dec.no_cone_points = true;
        std::vector<char> all(N, 1);
        dec.back = make_piece(lat, c, all, zero, ne, used);
        dec.front.displacement = zero;
        return dec;
    }
    for (int v : cps) dec.cone_points.push_back(lat.coords(v));
    std::vector<Point> pts;
    for (int u : c.vertices) pts.push_back(lat.coords(u));
    const Point& first = dec.cone_points.front();
    const Point& last = dec.cone_points.back();
    std::vector<char> in(N);
    for (std::size_t i = 0; i < N; ++i) in[i] = cones.backward(sub(pts[i], first));
    dec.back = make_piece(lat, c, in, zero, first, used);
    for (std::size_t k = 0; k + 1 < dec.cone_points.size(); ++k) {
        const Point& a = dec.cone_points[k];
        const Point& b = dec.cone_points[k + 1];
        for (std::size_t i = 0; i < N; ++i) in[i] = cones.in_diamond(pts[i], a, b);
        dec.middle.push_back(make_piece(lat, c, in, a, sub(b, a), used));
    }
    for (std::size_t i = 0; i < N; ++i) in[i] = cones.forward(sub(pts[i], last));
    dec.front = make_piece(lat, c, in, ne, sub(ne, last), used);
    for (char u : used)
        if (!u) throw std::logic_error("decomposition left an edge unassigned");
    return dec;
}

namespace {

void normalise(PointSet& s) {
    for (auto& e : s.edges)
        if (e.second < e.first) std::swap(e.first, e.second);
    std::sort(s.vertices.begin(), s.vertices.end());
    s.vertices.erase(std::unique(s.vertices.begin(), s.vertices.end()), s.vertices.end());
    std::sort(s.edges.begin(), s.edges.end());
    s.edges.erase(std::unique(s.edges.begin(), s.edges.end()), s.edges.end());
}

void place(PointSet& s, const Piece& p, const Point& at) {
    for (const auto& v : p.vertices) s.vertices.push_back(add(v, at));
    for (const auto& [a, b] : p.edges) s.edges.push_back({add(a, at), add(b, at)});
}

}  // namespace

PointSet to_point_set(const Lattice& lat, const Cluster& c) {
    PointSet s;
    for (int v : c.vertices) s.vertices.push_back(lat.coords(v));
    for (int e : c.edges) s.edges.push_back({lat.coords(lat.edge(e).u), lat.coords(lat.edge(e).v)});
    normalise(s);
    return s;
}

PointSet reconstruct(const IrreducibleDecomposition& dec, int d) {
    PointSet s;
    Point at(d, 0);
    place(s, dec.back, at);
    at = add(at, dec.back.displacement);
    for (const auto& p : dec.middle) {
        place(s, p, at);
        at = add(at, p.displacement);
    }
    at = add(at, dec.front.displacement);
    place(s, dec.front, at);
    normalise(s);
    return s;
}

bool middle_pieces_in_diamonds(const IrreducibleDecomposition& dec, const ConeSystem& cones) {
    for (const auto& p : dec.middle) {
        if (!cones.forward(p.displacement)) return false;
        Point z(p.displacement.size(), 0);
        for (const auto& v : p.vertices)
            if (!cones.in_diamond(v, z, p.displacement)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------

int kbar(int K, double r) { return static_cast<int>(std::floor(K + r * std::log(static_cast<double>(K)))); }

long LineCoarseGraining::total_tree_vertices() const {
    long s = 0;
    for (const auto& t : trees) s += static_cast<long>(t.vertices.size());
    return s;
}

namespace {

int linf(const Lattice& lat, int a, int b) {
    int m = 0;
    for (int k = 0; k < lat.dim(); ++k) m = std::max(m, std::abs(lat.coord(a, k) - lat.coord(b, k)));
    return m;
}

// Vertices of the box prod [c_k - h_k, c_k + h_k] clipped to the lattice.
template <class F>
void for_box(const Lattice& lat, const Point& c, const std::vector<int>& h, F&& f) {
    int d = lat.dim();
    Point lo(d), hi(d), x(d);
    for (int k = 0; k < d; ++k) {
        lo[k] = std::max(lat.lo(k), c[k] - h[k]);
        hi[k] = std::min(lat.hi(k), c[k] + h[k]);
        if (lo[k] > hi[k]) return;
    }
    x = lo;
    while (true) {
        f(lat.index(x));
        int k = d - 1;
        while (k >= 0 && x[k] == hi[k]) {
            x[k] = lo[k];
            --k;
        }
        if (k < 0) return;
        ++x[k];
    }
}

}  // namespace

LineCoarseGraining coarse_grain_line(const Lattice& lat, const EdgeConfiguration& w, int K, double r) {
    if (K < 2 || r < 1) throw ParameterError("need K >= 2 and r >= 1");
    int d = lat.dim();
    for (int a = 1; a < d; ++a)
        if (lat.hi(a) < 2 * K + 1 || lat.lo(a) > -(2 * K + 1))
            throw GeometryError("K too large for the box: transverse extent below 2K+1");
    if (lat.extent(0) - 1 < 9 * K) throw GeometryError("K too large for the box: need length >= 9K");

    LineCoarseGraining out;
    out.K = K;
    out.Kbar = kbar(K, r);
    int Kb = out.Kbar;
    int nv = lat.num_vertices();
    auto ci = rebuild_clusters(lat, w, BoundaryCondition::free());
    std::vector<char> touches(ci.kappa, 0);
    for (int v = 0; v < nv; ++v)
        if (tnorm_inf(lat, v) <= 2 * K) touches[ci.label[v]] = 1;
    out.in_F.assign(nv, 0);
    std::vector<int> Fverts;
    for (int v = 0; v < nv; ++v)
        if (tnorm_inf(lat, v) > 2 * K && touches[ci.label[v]]) {
            out.in_F[v] = 1;
            Fverts.push_back(v);
        }

    std::vector<char> cov(nv, 0);
    std::vector<int> stamp(nv, 0);
    int cur = 0;
    auto connects = [&](int s) {
        // s <-> boundary of Delta_K(s) inside F minus the covered region
        ++cur;
        std::vector<int> q{s};
        stamp[s] = cur;
        for (std::size_t h = 0; h < q.size(); ++h) {
            int x = q[h];
            if (linf(lat, x, s) == K) return true;
            for (auto [nb, id] : lat.adj(x)) {
                if (!w.get(id) || stamp[nb] == cur || !out.in_F[nb] || cov[nb]) continue;
                if (linf(lat, nb, s) > K) continue;
                stamp[nb] = cur;
                q.push_back(nb);
            }
        }
        return false;
    };
    std::vector<int> hb(d, Kb);
    auto cover = [&](int v) { for_box(lat, lat.coords(v), hb, [&](int u) { cov[u] = 1; }); };
    auto on_ext = [&](int v) {
        if (cov[v]) return false;
        for (auto [nb, id] : lat.adj(v))
            if (cov[nb]) return true;
        return false;
    };
    std::vector<int> V;
    auto parent_of = [&](int x) {
        int best = -1;
        for (int u : V) {
            // x adjacent to Delta_Kbar(u) but outside it
            int far = 0;
            bool inside = true;
            for (int k = 0; k < d; ++k) {
                int dk = std::abs(lat.coord(x, k) - lat.coord(u, k));
                if (dk == Kb + 1) ++far;
                else if (dk > Kb) inside = false;
            }
            if (inside && far == 1 && (best < 0 || u < best)) best = u;
        }
        return best;
    };

    while (true) {
        int root = -1;
        for (int v : Fverts)
            if (tnorm_inf(lat, v) == 2 * K + 1 && !cov[v] && connects(v)) {
                root = v;
                break;
            }
        if (root < 0) break;
        LineTree t;
        t.root = root;
        t.vertices.push_back(root);
        V.push_back(root);
        cover(root);
        while (true) {
            int nx = -1;
            for (int v : Fverts)
                if (on_ext(v) && connects(v)) {
                    nx = v;
                    break;
                }
            if (nx < 0) break;
            int par = parent_of(nx);
            if (par < 0) throw std::logic_error("coarse graining: exterior vertex without parent");
            t.vertices.push_back(nx);
            t.edges.push_back({par, nx});
            V.push_back(nx);
            cover(nx);
        }
        out.trees.push_back(std::move(t));
    }

    // residual components of F minus the covered region, and components of F
    std::vector<int> comp(nv, -1);
    int ncomp = 0;
    int worst = 0;
    for (int s : Fverts) {
        if (cov[s] || comp[s] >= 0) continue;
        std::vector<int> q{s};
        comp[s] = ncomp;
        Point lo = lat.coords(s), hi = lo;
        for (std::size_t h = 0; h < q.size(); ++h)
            for (auto [nb, id] : lat.adj(q[h]))
                if (w.get(id) && out.in_F[nb] && !cov[nb] && comp[nb] < 0) {
                    comp[nb] = ncomp;
                    q.push_back(nb);
                    for (int k = 0; k < d; ++k) {
                        lo[k] = std::min(lo[k], lat.coord(nb, k));
                        hi[k] = std::max(hi[k], lat.coord(nb, k));
                    }
                }
        for (int k = 0; k < d; ++k) worst = std::max(worst, hi[k] - lo[k]);
        ++ncomp;
    }
    out.residual_max_diameter = worst;
    if (worst > 2 * Kb) throw std::logic_error("coarse graining left a residual component of diameter > 2 Kbar");

    // covered boxes
    int slice = 3 * K;
    out.num_slices = (lat.hi(0) - lat.lo(0)) / slice;
    std::vector<int> fc(nv, -1);
    std::vector<std::pair<int, int>> span;
    for (int s : Fverts) {
        if (fc[s] >= 0) continue;
        int id0 = static_cast<int>(span.size());
        std::vector<int> q{s};
        fc[s] = id0;
        int a = lat.coord(s, 0), b = a;
        for (std::size_t h = 0; h < q.size(); ++h)
            for (auto [nb, id] : lat.adj(q[h]))
                if (w.get(id) && out.in_F[nb] && fc[nb] < 0) {
                    fc[nb] = id0;
                    q.push_back(nb);
                    a = std::min(a, lat.coord(nb, 0));
                    b = std::max(b, lat.coord(nb, 0));
                }
        span.push_back({a, b});
    }
    for (int i = 2; i <= out.num_slices - 1; ++i) {
        int end_prev = lat.lo(0) + (i - 1) * slice;  // right end of S_{i-1}
        int start_next = lat.lo(0) + i * slice;      // left end of S_{i+1}
        bool cv = false;
        for (auto [a, b] : span)
            if (a <= end_prev && b >= start_next) {
                cv = true;
                break;
            }
        (cv ? out.covered : out.uncovered).push_back(i);
    }
    return out;
}

// ---------------------------------------------------------------------------

int ClusterTree::num_lfree() const {
    int s = 0;
    for (char c : lfree) s += c;
    return s;
}

ClusterTree coarse_grain_cluster(const Lattice& lat, const EdgeConfiguration& w, int K, double r) {
    if (K < 2 || r < 1) throw ParameterError("need K >= 2 and r >= 1");
    int d = lat.dim();
    ClusterTree t;
    t.K = K;
    t.Kbar = kbar(K, r);
    double lk = std::log(static_cast<double>(K));
    t.H = static_cast<int>(std::floor(2 * K + 3 * r * lk));
    t.Hbar = static_cast<int>(std::floor(2 * K + 4 * r * lk));
    int nv = lat.num_vertices();
    int o = origin(lat);
    Cluster c0 = extract_cluster(lat, w, o);
    std::vector<char> inC(nv, 0);
    for (int v : c0.vertices) inC[v] = 1;

    std::vector<char> vbar(nv, 0);
    std::vector<int> hbar(d, t.Hbar);
    hbar[0] = t.Kbar;
    auto cover = [&](const Point& p) { for_box(lat, p, hbar, [&](int u) { vbar[u] = 1; }); };
    auto in_delta = [&](int u, const Point& c) {
        if (std::abs(lat.coord(u, 0) - c[0]) > K) return false;
        for (int a = 1; a < d; ++a)
            if (std::abs(lat.coord(u, a) - c[a]) > t.H) return false;
        return true;
    };
    auto on_delta_boundary = [&](int u, const Point& c) {
        if (std::abs(lat.coord(u, 0) - c[0]) == K) return true;
        for (int a = 1; a < d; ++a)
            if (std::abs(lat.coord(u, a) - c[a]) == t.H) return true;
        return false;
    };
    std::vector<int> stamp(nv, 0);
    int cur = 0;
    auto connects = [&](int s) {
        ++cur;
        Point c = lat.coords(s);
        std::vector<int> q;
        stamp[s] = cur;
        for (auto [nb, id] : lat.adj(s))
            if (w.get(id) && !vbar[nb] && stamp[nb] != cur && in_delta(nb, c)) {
                stamp[nb] = cur;
                q.push_back(nb);
            }
        for (std::size_t h = 0; h < q.size(); ++h) {
            int x = q[h];
            if (on_delta_boundary(x, c)) return true;
            for (auto [nb, id] : lat.adj(x))
                if (w.get(id) && !vbar[nb] && stamp[nb] != cur && in_delta(nb, c)) {
                    stamp[nb] = cur;
                    q.push_back(nb);
                }
        }
        return false;
    };
    auto inner_boundary = [&](int v) {
        if (!vbar[v]) return false;
        for (auto [nb, id] : lat.adj(v))
            if (!vbar[nb]) return true;
        return false;
    };
    auto metric = [&](const Point& a, const Point& b) {
        double m = std::abs(a[0] - b[0]) / static_cast<double>(t.Kbar);
        for (int k = 1; k < d; ++k) m = std::max(m, std::abs(a[k] - b[k]) / static_cast<double>(t.Hbar));
        return m;
    };

    t.vertices.push_back(Point(d, 0));
    cover(t.vertices[0]);
    while (true) {
        int pick = -1;
        for (int v : c0.vertices)  // sorted, so the first hit is lexicographically smallest
            if (inner_boundary(v) && connects(v)) {
                pick = v;
                break;
            }
        if (pick < 0) break;
        Point pv = lat.coords(pick);
        int best = 0;
        double bm = metric(t.vertices[0], pv);
        for (std::size_t i = 1; i < t.vertices.size(); ++i) {
            double m = metric(t.vertices[i], pv);
            if (m < bm - 1e-12 || (std::fabs(m - bm) <= 1e-12 && t.vertices[i] < t.vertices[best])) {
                bm = m;
                best = static_cast<int>(i);
            }
        }
        t.vertices.push_back(pv);
        t.edges.push_back({best, static_cast<int>(t.vertices.size()) - 1});
        cover(pv);
    }
    for (const auto& v : t.vertices) {
        int m = 0;
        for (int a = 1; a < d; ++a) m = std::max(m, std::abs(v[a]));
        t.lfree.push_back(m > t.Hbar);
    }
    // containment: C_0 inside Vbar together with Delta(w) of its boundary vertices
    std::vector<Point> bnd;
    for (int v : c0.vertices)
        if (inner_boundary(v)) bnd.push_back(lat.coords(v));
    for (int u : c0.vertices) {
        if (vbar[u]) continue;
        bool ok = false;
        for (const auto& b : bnd)
            if (in_delta(u, b)) {
                ok = true;
                break;
            }
        if (!ok) {
            t.contained = false;
            break;
        }
    }
    if (!t.contained) throw std::logic_error("cluster escapes the coarse-grained tree neighbourhood");
    return t;
}

// ---------------------------------------------------------------------------

void ShadeProfile::add(long a, long b) {
    if (b < a) return;
    std::vector<std::pair<long, long>> out;
    bool placed = false;
    for (auto [x, y] : iv_) {
        if (y + 1 < a) {
            out.push_back({x, y});
        } else if (b + 1 < x) {
            if (!placed) {
                out.push_back({a, b});
                placed = true;
            }
            out.push_back({x, y});
        } else {
            a = std::min(a, x);
            b = std::max(b, y);
        }
    }
    if (!placed) out.push_back({a, b});
    std::sort(out.begin(), out.end());
    iv_ = std::move(out);
}

void ShadeProfile::add(const ShadeProfile& o) {
    for (auto [a, b] : o.iv_) add(a, b);
}

long ShadeProfile::length() const {
    long s = 0;
    for (auto [a, b] : iv_) s += b - a + 1;
    return s;
}

bool ShadeProfile::covers(long x) const { return covers(x, x); }

bool ShadeProfile::covers(long a, long b) const {
    for (auto [x, y] : iv_)
        if (x <= a && b <= y) return true;
    return false;
}

std::pair<long, long> point_shade(const Point& v) {
    long h = isqrt(norm2sq(v, 1));
    return {v[0] - h, v[0] + h};
}

std::pair<long, long> tree_vertex_shade(const ClusterTree& t, const Point& v) {
    long long s = 0;
    for (std::size_t a = 1; a < v.size(); ++a) {
        long long m = std::abs(v[a]) + t.Hbar + t.K;
        s += m * m;
    }
    long h = isqrt(s);
    long reach = t.Kbar + t.K;
    return {v[0] - reach - h, v[0] + reach + h};
}

ShadeProfile tree_shade(const ClusterTree& t) {
    ShadeProfile s;
    for (std::size_t i = 0; i < t.vertices.size(); ++i)
        if (t.lfree[i]) {
            auto [a, b] = tree_vertex_shade(t, t.vertices[i]);
            s.add(a, b);
        }
    return s;
}

ShadeProfile cluster_shade(const Lattice& lat, const Cluster& c, int band) {
    ShadeProfile s;
    std::vector<std::pair<long, long>> all;
    for (int v : c.vertices)
        if (tnorm_inf(lat, v) > band) all.push_back(point_shade(lat.coords(v)));
    std::sort(all.begin(), all.end());
    for (auto [a, b] : all) s.add(a, b);
    return s;
}

std::vector<int> illuminated_boxes(const Lattice& lat, const Cluster& c0, int n, int K) {
    if (K < 1) throw ParameterError("K must be >= 1");
    auto sh = cluster_shade(lat, c0, 3 * K);
    std::vector<int> out;
    for (int i = 1; i <= n / (7 * K); ++i) {
        long a = static_cast<long>(i - 1) * 7 * K + 3 * K, b = static_cast<long>(i) * 7 * K - 3 * K;
        if (!sh.covers(a, b)) out.push_back(i);
    }
    return out;
}

std::vector<int> illuminated_boxes_brute(const Lattice& lat, const Cluster& c0, int n, int K) {
    std::vector<int> out;
    for (int i = 1; i <= n / (7 * K); ++i) {
        long a = static_cast<long>(i - 1) * 7 * K + 3 * K, b = static_cast<long>(i) * 7 * K - 3 * K;
        bool lit = false;
        for (long x = a; x <= b && !lit; ++x) {
            bool shaded = false;
            for (int v : c0.vertices) {
                if (tnorm_inf(lat, v) <= 3 * K) continue;
                long dx = x - lat.coord(v, 0);
                long long t = 0;
                for (int k = 1; k < lat.dim(); ++k) t += static_cast<long long>(lat.coord(v, k)) * lat.coord(v, k);
                if (dx * dx <= t) {
                    shaded = true;
                    break;
                }
            }
            if (!shaded) lit = true;
        }
        if (lit) out.push_back(i);
    }
    return out;
}

double cone_point_fraction(const Lattice& lat, const Cluster& c0, int n, const ConeSystem& cones) {
    int cnt = 0;
    for (int v : cone_points(lat, c0, cones)) {
        int x = lat.coord(v, 0);
        if (x <= 0 || x >= n || tnorm_inf(lat, v) != 0) continue;
        ++cnt;
    }
    return static_cast<double>(cnt) / (n + 1);
}

ConeDensity cone_point_density(const Lattice& lat, const std::vector<EdgeConfiguration>& samples, int n,
                               const ConeSystem& cones) {
    int o = origin(lat);
    Point ne(lat.dim(), 0);
    ne[0] = n;
    int t = lat.index(ne);
    if (t < 0) throw GeometryError("n e_1 is not in the box");
    std::vector<double> vals;
    for (const auto& w : samples) {
        Cluster c = extract_cluster(lat, w, o);
        if (!c.contains(t)) continue;
        vals.push_back(cone_point_fraction(lat, c, n, cones));
    }
    if (vals.empty()) throw SamplingError("conditioning event 0 <-> n e_1 never observed");
    ConeDensity r;
    r.samples = static_cast<long>(vals.size());
    auto e = binned_mean(vals);
    r.rho = e.mean;
    r.se = e.se;
    return r;
}

ConeRun cone_density_run(const ConeRunConfig& cfg, const ConeSystem& cones) {
    if (cfg.n < 1 || cfg.margin < 0 || cfg.half_width < 1) throw ParameterError("bad cone-density geometry");
    std::vector<std::pair<int, int>> ranges{{-cfg.margin, cfg.n + cfg.margin}};
    for (int a = 1; a < cfg.d; ++a) ranges.emplace_back(-cfg.half_width, cfg.half_width);
    Lattice lat = Lattice::box(ranges);
    FkSampler s(lat, cfg.w, BoundaryCondition::free());
    ChainParams p;
    p.sweeps = cfg.sweeps;
    p.burn_in = cfg.burn_in;
    p.thin = cfg.thin;
    p.seed = cfg.seed;
    int o = origin(lat);
    Point ne(lat.dim(), 0);
    ne[0] = cfg.n;
    int t = lat.index(ne);
    Observable frac = [&](const EdgeConfiguration& w, const ClusterIndex&) {
        return cone_point_fraction(lat, extract_cluster(lat, w, o), cfg.n, cones);
    };
    auto batch = conditioned_by_bridge(s, p, o, t, {frac});
    ConeRun r;
    r.fractions = batch.column(0);
    if (r.fractions.empty()) throw SamplingError("no samples recorded");
    auto e = binned_mean(r.fractions);
    r.density.rho = e.mean;
    r.density.se = e.se;
    r.density.samples = static_cast<long>(r.fractions.size());
    return r;
}

SampleAnalysis analyse_sample(const Lattice& lat, const EdgeConfiguration& w, int n, int K, double r,
                              const ConeSystem& cones) {
    SampleAnalysis a;
    int o = origin(lat);
    Cluster c0 = extract_cluster(lat, w, o);
    auto t = coarse_grain_cluster(lat, w, K, r);
    a.tree_vertices = static_cast<long>(t.vertices.size());
    a.lfree = t.num_lfree();
    auto ts = tree_shade(t);
    a.shade_length = ts.length();
    auto cs = cluster_shade(lat, c0, 3 * K);
    for (auto [x, y] : cs.intervals())
        for (long p = x; p <= y; ++p)
            if (!ts.covers(p)) ++a.shade_undercount;
    a.illuminated = static_cast<int>(illuminated_boxes(lat, c0, n, K).size());
    for (int v : cone_points(lat, c0, cones))
        if (tnorm_inf(lat, v) == 0 && lat.coord(v, 0) >= 0 && lat.coord(v, 0) <= n) ++a.cone_points;
    return a;
}

void write_analysis_jsonl(std::ostream& os, const SampleAnalysis& a) {
    nlohmann::json j{{"kind", "cone_sample"},       {"tree_vertices", a.tree_vertices},
                     {"lfree", a.lfree},            {"shade_length", a.shade_length},
                     {"shade_undercount", a.shade_undercount}, {"illuminated", a.illuminated},
                     {"cone_points", a.cone_points}};
    os << j.dump() << '\n';
}

}  // namespace fkdl
