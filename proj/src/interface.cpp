#include "fkdl/interface.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <json.hpp>

#include "fkdl/stats.hpp"

namespace fkdl {

DobrushinPotts::DobrushinPotts(int n, double beta, double J, int q)
    : n_(n), q_(q), w_(2 * n + 1), h_(2 * n), beta_(beta), J_(J) {
    if (n < 1) throw ParameterError("n must be >= 1");
    if (q < 2 || q > 255) throw ParameterError("q must be an integer in [2, 255]");
    if (!(beta > 0) || !(J >= 0)) throw ParameterError("need beta > 0 and J >= 0");
    s_.assign(num_sites(), 1);
    site_bonds_.assign(num_sites(), {});
    int N = num_sites();
    auto add = [&](int ax, int ay, int bx, int by) {
        int a = index(ax, ay);
        int b = index(bx, by);
        bool dual_line = ax == bx && std::min(ay, by) == 0;
        Bond bd{a, b >= 0 ? b : N + exterior_spin(by) - 1, ax, ay, bx, by, dual_line ? beta * J : beta};
        site_bonds_[a].push_back(static_cast<int>(bonds_.size()));
        if (b >= 0) site_bonds_[b].push_back(static_cast<int>(bonds_.size()));
        bonds_.push_back(bd);
    };
    for (int y = -n + 1; y <= n; ++y)
        for (int x = -n; x <= n; ++x) {
            add(x, y, x + 1, y);
            add(x, y, x, y + 1);
            if (x == -n) add(x, y, x - 1, y);
            if (y == -n + 1) add(x, y, x, y - 1);
        }
    set_flat();
}

int DobrushinPotts::index(int x, int y) const {
    if (x < -n_ || x > n_ || y < -n_ + 1 || y > n_) return -1;
    return (y + n_ - 1) * w_ + (x + n_);
}

void DobrushinPotts::set_spin(int x, int y, int s) {
    int v = index(x, y);
    if (v < 0 || s < 1 || s > q_) throw ParameterError("bad site or spin");
    s_[v] = static_cast<std::uint8_t>(s);
}

bool DobrushinPotts::supercritical() const { return std::expm1(beta_) > std::sqrt(static_cast<double>(q_)); }

void DobrushinPotts::set_flat() {
    for (int y = -n_ + 1; y <= n_; ++y)
        for (int x = -n_; x <= n_; ++x) s_[index(x, y)] = static_cast<std::uint8_t>(exterior_spin(y));
}

void DobrushinPotts::randomize(Rng& rng) {
    for (auto& s : s_) s = static_cast<std::uint8_t>(1 + rng.below(q_));
}

void DobrushinPotts::heat_bath_sweep(Rng& rng) {
    int N = num_sites();
    std::vector<double> e(q_ + 1);
    for (int v = 0; v < N; ++v) {
        std::fill(e.begin(), e.end(), 0.0);
        for (int k : site_bonds_[v]) {
            const Bond& b = bonds_[k];
            int o = b.a == v ? b.b : b.a;
            int so = o >= N ? o - N + 1 : s_[o];
            e[so] += b.coupling;
        }
        double mx = *std::max_element(e.begin() + 1, e.end());
        double tot = 0;
        for (int s = 1; s <= q_; ++s) tot += (e[s] = std::exp(e[s] - mx));
        double u = rng.uniform() * tot;
        int pick = q_;
        for (int s = 1; s <= q_; ++s) {
            u -= e[s];
            if (u < 0) {
                pick = s;
                break;
            }
        }
        s_[v] = static_cast<std::uint8_t>(pick);
    }
}

std::vector<char> DobrushinPotts::es_bonds(Rng& rng) const {
    int N = num_sites();
    std::vector<char> open(bonds_.size(), 0);
    for (std::size_t k = 0; k < bonds_.size(); ++k) {
        const Bond& b = bonds_[k];
        int sb = b.b >= N ? b.b - N + 1 : s_[b.b];
        if (s_[b.a] != sb) continue;
        open[k] = rng.uniform() < -std::expm1(-b.coupling);
    }
    return open;
}

void DobrushinPotts::sw_sweep(Rng& rng) {
    int N = num_sites();
    auto open = es_bonds(rng);
    DisjointSets ds(N + 2);
    for (std::size_t k = 0; k < bonds_.size(); ++k)
        if (open[k]) ds.unite(bonds_[k].a, bonds_[k].b);
    int r1 = ds.find(N), r2 = ds.find(N + 1);
    if (r1 == r2) throw InterfaceError("exterior phases joined by the cluster move");
    std::vector<int> color(N + 2, 0);
    color[r1] = 1;
    color[r2] = 2;
    for (int v = 0; v < N; ++v) {
        int r = ds.find(v);
        if (!color[r]) color[r] = 1 + rng.below(q_);
        s_[v] = static_cast<std::uint8_t>(color[r]);
    }
}

// ---------------------------------------------------------------------------

int dual_id(int n, int i, int j) { return (i + n + 1) * (2 * n + 1) + (j + n); }

std::pair<int, int> dual_coords(int n, int id) { return {id / (2 * n + 1) - n - 1, id % (2 * n + 1) - n}; }

namespace {

std::pair<int, int> dual_of(int n, const DobrushinPotts::Bond& b) {
    if (b.ay == b.by) {
        int i = std::min(b.ax, b.bx);
        return {dual_id(n, i, b.ay - 1), dual_id(n, i, b.ay)};
    }
    int j = std::min(b.ay, b.by);
    return {dual_id(n, b.ax - 1, j), dual_id(n, b.ax, j)};
}

int bond_spin(const DobrushinPotts& m, int v) {
    int N = m.num_sites();
    return v >= N ? v - N + 1 : m.spins()[v];
}

std::vector<char> reach(int nd, const std::vector<std::pair<int, int>>& edges, int from) {
    std::vector<std::vector<int>> adj(nd);
    for (auto [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<char> seen(nd, 0);
    std::vector<int> q{from};
    seen[from] = 1;
    for (std::size_t h = 0; h < q.size(); ++h)
        for (int u : adj[q[h]])
            if (!seen[u]) {
                seen[u] = 1;
                q.push_back(u);
            }
    return seen;
}

}  // namespace

double InterfaceProfile::max_upper() const { return *std::max_element(upper.begin(), upper.end()); }
double InterfaceProfile::min_lower() const { return *std::min_element(lower.begin(), lower.end()); }

double InterfaceProfile::max_width() const {
    double m = 0;
    for (std::size_t k = 0; k < upper.size(); ++k) m = std::max(m, upper[k] - lower[k]);
    return m;
}

InterfaceProfile extract_interface(const DobrushinPotts& m) {
    int n = m.n();
    int nd = (2 * n + 2) * (2 * n + 1);
    std::vector<std::pair<int, int>> dis;
    for (const auto& b : m.bonds())
        if (m.spins()[b.a] != bond_spin(m, b.b)) dis.push_back(dual_of(n, b));
    int left = dual_id(n, -n - 1, 0), right = dual_id(n, n, 0);
    auto seen = reach(nd, dis, left);
    if (!seen[right]) throw InterfaceError("no contour joins the two boundary markers");
    InterfaceProfile p;
    p.n = n;
    const double lo = -1e300, hi = 1e300;
    p.upper.assign(2 * n + 2, lo);
    p.lower.assign(2 * n + 2, hi);
    p.upper_mid.assign(2 * n + 1, lo);
    p.lower_mid.assign(2 * n + 1, hi);
    for (auto [a, b] : dis) {
        if (!seen[a]) continue;
        p.edges.push_back({a, b});
        for (int v : {a, b}) {
            auto [i, j] = dual_coords(n, v);
            double Y = j + 0.5;
            int k = i + n + 1;
            p.upper[k] = std::max(p.upper[k], Y);
            p.lower[k] = std::min(p.lower[k], Y);
        }
        auto [ia, ja] = dual_coords(n, a);
        auto [ib, jb] = dual_coords(n, b);
        if (ja == jb) {  // horizontal dual edge crossing the integer column max(ia, ib)
            int k = std::max(ia, ib) + n;
            p.upper_mid[k] = std::max(p.upper_mid[k], ja + 0.5);
            p.lower_mid[k] = std::min(p.lower_mid[k], ja + 0.5);
        }
    }
    for (double u : p.upper)
        if (u == lo) throw InterfaceError("interface misses a dual column");
    for (double u : p.upper_mid)
        if (u == lo) throw InterfaceError("interface misses an integer column");
    return p;
}

bool envelopes_bound(const InterfaceProfile& p) {
    for (std::size_t k = 0; k < p.upper.size(); ++k)
        if (p.lower[k] > p.upper[k]) return false;
    for (auto [a, b] : p.edges)
        for (int v : {a, b}) {
            auto [i, j] = dual_coords(p.n, v);
            int k = i + p.n + 1;
            if (j + 0.5 > p.upper[k] || j + 0.5 < p.lower[k]) return false;
        }
    return true;
}

void check_duality(const DobrushinPotts& m, const std::vector<char>& bonds, const InterfaceProfile& p) {
    int n = m.n();
    int nd = (2 * n + 2) * (2 * n + 1);
    if (bonds.size() != m.bonds().size()) throw ParameterError("bond vector size mismatch");
    std::vector<std::pair<int, int>> dual_open;
    std::vector<std::pair<int, int>> open_set;
    for (std::size_t k = 0; k < bonds.size(); ++k) {
        const auto& b = m.bonds()[k];
        if (m.spins()[b.a] != bond_spin(m, b.b) && bonds[k])
            throw InterfaceError("disagreement edge is open in the coupled configuration");
        if (!bonds[k]) {
            auto e = dual_of(n, b);
            dual_open.push_back(e);
            open_set.push_back({std::min(e.first, e.second), std::max(e.first, e.second)});
        }
    }
    auto seen = reach(nd, dual_open, dual_id(n, -n - 1, 0));
    if (!seen[dual_id(n, n, 0)]) throw InterfaceError("dual cluster does not join the markers");
    std::sort(open_set.begin(), open_set.end());
    for (auto [a, b] : p.edges) {
        std::pair<int, int> e{std::min(a, b), std::max(a, b)};
        if (!std::binary_search(open_set.begin(), open_set.end(), e) || !seen[a] || !seen[b])
            throw InterfaceError("interface edge outside the dual cluster");
    }
}

InterfaceRun sample_dobrushin(int n, double beta, double J, int q, const InterfaceRunParams& p) {
    if (p.sweeps < 1 || p.burn_in < 0 || p.thin < 1) throw ParameterError("bad sweep schedule");
    DobrushinPotts m(n, beta, J, q);
    InterfaceRun run;
    run.supercritical = m.supercritical();
    if (!run.supercritical)
        std::cerr << "warning: x = e^beta - 1 <= sqrt(q); the interface is not expected to localize\n";
    Rng rng(p.seed);
    for (long s = 1; s <= p.sweeps; ++s) {
        m.sw_sweep(rng);
        if (p.heat_bath) m.heat_bath_sweep(rng);
        if (s <= p.burn_in || (s - p.burn_in) % p.thin != 0) continue;
        auto prof = extract_interface(m);
        if (!envelopes_bound(prof)) throw InterfaceError("envelopes do not bound the interface");
        if (p.check) {
            check_duality(m, m.es_bonds(rng), prof);
            ++run.duality_checks;
        }
        run.profiles.push_back(std::move(prof));
    }
    return run;
}

WidthSummary width_stats(const std::vector<InterfaceProfile>& profiles) {
    if (profiles.size() < 100) throw ParameterError("width statistics need at least 100 profiles");
    WidthSummary s;
    s.samples = static_cast<long>(profiles.size());
    std::vector<double> up, lo, g0, sp;
    for (const auto& p : profiles) {
        up.push_back(p.max_upper());
        lo.push_back(p.min_lower());
        s.max_width.push_back(p.max_width());
        sp.push_back(p.span());
        g0.push_back(p.gamma_plus0());
    }
    s.median_max_upper = median(up);
    s.median_min_lower = median(lo);
    s.median_max_width = median(s.max_width);
    s.median_span = median(sp);
    s.iqr_max_width = quantile(s.max_width, 0.75) - quantile(s.max_width, 0.25);
    s.mean_max_width = mean(s.max_width);
    s.mean_gamma0 = mean(g0);
    s.var_gamma0 = variance(g0);
    double m4 = 0;
    for (double g : g0) m4 += std::pow(g - s.mean_gamma0, 4);
    m4 /= g0.size();
    s.var_gamma0_se = std::sqrt(std::max(0.0, m4 - s.var_gamma0 * s.var_gamma0) / g0.size());
    return s;
}

void write_profile_jsonl(std::ostream& os, const InterfaceProfile& p, double J, int q) {
    nlohmann::json j{{"kind", "interface"}, {"n", p.n},         {"J", J},
                     {"q", q},              {"upper", p.upper}, {"lower", p.lower}};
    os << j.dump() << '\n';
}

void write_width_csv_header(std::ostream& os) {
    os << "n,J,q,samples,median_max_upper,median_min_lower,median_max_width,iqr_max_width,median_span,"
          "mean_max_width,var_gamma0,var_gamma0_se\n";
}

void write_width_csv_row(std::ostream& os, int n, double J, int q, const WidthSummary& s) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d,%.6g,%d,%ld,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", n, J, q, s.samples,
                  s.median_max_upper, s.median_min_lower, s.median_max_width, s.iqr_max_width, s.median_span,
                  s.mean_max_width, s.var_gamma0, s.var_gamma0_se);
    os << buf;
}

// ---------------------------------------------------------------------------

double dual_weight(double x, double q) {
    if (!(x > 0)) throw ParameterError("dual weight needs x > 0");
    return q / x;
}

Lattice dual_lattice(const Lattice& lat) {
    if (lat.dim() != 2) throw UnsupportedDynamics("duality is only defined for d = 2");
    int a = lat.lo(0), b = lat.hi(0), c = lat.lo(1), d = lat.hi(1);
    int W = b - a, H = d - c;
    int outer = W * H;
    auto face = [&](int fx, int fy) {  // face with lower-left corner (fx, fy)
        if (fx < a || fx >= b || fy < c || fy >= d) return outer;
        return (fy - c) * W + (fx - a);
    };
    std::vector<std::pair<int, int>> edges;
    std::vector<EdgeKind> kinds;
    for (int e = 0; e < lat.num_edges(); ++e) {
        const Edge& ed = lat.edge(e);
        int x = lat.coord(ed.u, 0), y = lat.coord(ed.u, 1);
        int x2 = lat.coord(ed.v, 0), y2 = lat.coord(ed.v, 1);
        int f1, f2;
        if (y == y2) {
            int lx = std::min(x, x2);
            f1 = face(lx, y - 1);
            f2 = face(lx, y);
        } else {
            int ly = std::min(y, y2);
            f1 = face(x - 1, ly);
            f2 = face(x, ly);
        }
        if (f1 == f2) throw ParameterError("box too thin for a planar dual");
        edges.push_back({f1, f2});
        kinds.push_back(ed.kind);
    }
    return Lattice::graph(outer + 1, edges, kinds, {outer});
}

EdgeConfiguration dual_config(const Lattice& lat, const EdgeConfiguration& w) {
    if (lat.dim() != 2) throw UnsupportedDynamics("duality is only defined for d = 2");
    if (w.size() != lat.num_edges()) throw ParameterError("configuration size mismatch");
    EdgeConfiguration d(w.size());
    for (int e = 0; e < w.size(); ++e) d.set(e, !w.get(e));
    return d;
}

}  // namespace fkdl
