#include "fkdl/inequality.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "fkdl/cone.hpp"

namespace fkdl {

std::vector<int> pivotal_set(std::uint64_t mask, int num_edges, const EdgeEvent& A) {
    std::vector<int> piv;
    bool a = A(mask);
    for (int e = 0; e < num_edges; ++e)
        if (A(mask ^ (1ULL << e)) != a) piv.push_back(e);
    return piv;
}

bool is_increasing(int num_edges, const EdgeEvent& A) {
    if (num_edges > 24) throw CapacityError("monotonicity check limited to 24 edges");
    std::uint64_t N = 1ULL << num_edges;
    std::vector<char> val(N);
    for (std::uint64_t m = 0; m < N; ++m) val[m] = A(m);
    for (std::uint64_t m = 0; m < N; ++m)
        if (val[m])
            for (int e = 0; e < num_edges; ++e)
                if (!val[m | (1ULL << e)]) return false;
    return true;
}

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
    double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6 * (fa + 4 * flm + fm);
    double right = (b - m) / 6 * (fm + 4 * frm + fb);
    double diff = left + right - whole;
    if (depth <= 0 || std::fabs(diff) <= 15 * tol) return left + right + diff / 15;
    return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

// Per-configuration data grouped by everything the s-dependence needs.
struct RussoTable {
    int nE = 0;
    // key (kappa, open E edges, in A, pivotal E edges) -> sum of q-free weights
    std::map<std::tuple<int, int, int, int>, long double> groups;
};

RussoTable tabulate(const Lattice& g, const std::vector<int>& E, const EdgeEvent& A, double x) {
    int m = g.num_edges();
    if (m > 20) throw CapacityError("Russo check limited to 20 edges");
    std::vector<char> inE(m, 0);
    for (int e : E) {
        if (e < 0 || e >= m) throw ParameterError("edge index out of range");
        inE[e] = 1;
    }
    std::vector<double> w(m, x);
    ExactMeasure meas(g, w, 1.0, BoundaryCondition::free(), 24);
    RussoTable t;
    t.nE = static_cast<int>(E.size());
    for (std::uint64_t mask = 0; mask < meas.num_configs(); ++mask) {
        int openE = 0, openOther = 0;
        for (int e = 0; e < m; ++e)
            if (mask >> e & 1) (inE[e] ? openE : openOther)++;
        bool a = A(mask);
        int piv = 0;
        if (a)
            for (int e : E)
                if (!A(mask ^ (1ULL << e))) ++piv;
        t.groups[{meas.kappa(mask), openE, a ? 1 : 0, piv}] += std::pow(static_cast<long double>(x), openOther);
    }
    return t;
}

struct RussoEval {
    long double pA = 0;
    long double piv = 0;  // sum_e P(e in Piv_A | A)
};

RussoEval evaluate(const RussoTable& t, double q, double s) {
    long double Z = 0, ZA = 0, ZP = 0;
    for (const auto& [k, w] : t.groups) {
        auto [kappa, openE, a, piv] = k;
        long double v = w * std::pow(static_cast<long double>(q), kappa) * std::pow(static_cast<long double>(s), openE);
        Z += v;
        if (a) {
            ZA += v;
            ZP += v * piv;
        }
    }
    RussoEval r;
    r.pA = ZA / Z;
    r.piv = ZA > 0 ? ZP / ZA : 0;
    return r;
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
    if (a == b) return 0;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6 * (fa + 4 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50);
}

RussoReport russo_bound_check(const Lattice& g, const std::vector<int>& E, const EdgeEvent& A, double q,
                              double x, double s1, double s2, double tol) {
    if (q < 1) throw ParameterError("Russo bound needs q >= 1");
    if (!(s1 > 0) || !(s2 > s1)) throw ParameterError("need 0 < s1 < s2");
    if (!is_increasing(g.num_edges(), A)) throw PreconditionError("event is not increasing");
    auto t = tabulate(g, E, A, x);
    RussoReport r;
    auto p1 = evaluate(t, q, s1), p2 = evaluate(t, q, s2);
    if (p1.pA <= 0) throw PreconditionError("event has probability zero");
    r.lhs = static_cast<double>(std::log(p2.pA / p1.pA));
    r.rhs = adaptive_simpson(
        [&](double s) {
            ++r.evaluations;
            return static_cast<double>(evaluate(t, q, s).piv) / (s * (1 + s));
        },
        s1, s2, tol);
    r.margin = r.lhs - r.rhs;
    r.holds = r.margin >= -1e-9;
    return r;
}

PivotalReport pivotal_profile(const Lattice& g, const std::vector<int>& E, const EdgeEvent& A,
                              const std::string& name, double q, double x, const std::vector<double>& s) {
    auto t = tabulate(g, E, A, x);
    PivotalReport r;
    r.event = name;
    for (double v : s) {
        r.s.push_back(v);
        r.expected.push_back(static_cast<double>(evaluate(t, q, v).piv));
    }
    return r;
}

std::vector<RussoCase> russo_suite(double x) {
    const double qs[] = {1.0, 1.5, 2.0, 3.0};
    const std::pair<double, double> ss[] = {{0.2, 0.5}, {0.5, 1.0}, {1.0, 2.0}, {0.3, 3.0}, {2.0, 5.0}};
    std::vector<RussoCase> out;
    for (const auto& cg : graph_corpus()) {
        const Lattice& g = cg.lat;
        std::vector<int> E;
        for (int e = 0; e < g.num_edges(); ++e)
            if (g.edge(e).kind == EdgeKind::line) E.push_back(e);
        if (E.empty()) continue;
        ExactMeasure meas(g, std::vector<double>(g.num_edges(), x), 1.0, BoundaryCondition::free());
        std::vector<std::pair<std::string, EdgeEvent>> events;
        for (int u = 0; u < g.num_vertices(); ++u)
            for (int v = u + 1; v < g.num_vertices(); ++v)
                events.emplace_back(std::to_string(u) + "<->" + std::to_string(v),
                                    [&meas, u, v](std::uint64_t m) { return meas.connected(m, u, v); });
        for (int e = 0; e < g.num_edges(); ++e)
            events.emplace_back("open" + std::to_string(e), [e](std::uint64_t m) { return (m >> e & 1) != 0; });
        for (const auto& [name, A] : events) {
            auto t = tabulate(g, E, A, x);
            for (double q : qs)
                for (auto [s1, s2] : ss) {
                    RussoCase c{cg.name, name, q, s1, s2, {}};
                    auto p1 = evaluate(t, q, s1), p2 = evaluate(t, q, s2);
                    c.report.lhs = static_cast<double>(std::log(p2.pA / p1.pA));
                    c.report.rhs = adaptive_simpson(
                        [&](double s) {
                            ++c.report.evaluations;
                            return static_cast<double>(evaluate(t, q, s).piv) / (s * (1 + s));
                        },
                        s1, s2, 1e-10);
                    c.report.margin = c.report.lhs - c.report.rhs;
                    c.report.holds = c.report.margin >= -1e-9;
                    out.push_back(c);
                }
        }
    }
    return out;
}

void write_russo_jsonl(std::ostream& os, const RussoCase& c) {
    nlohmann::json j = {{"kind", "russo"},   {"graph", c.graph},          {"event", c.event},
                        {"q", c.q},          {"s1", c.s1},                {"s2", c.s2},
                        {"lhs", c.report.lhs}, {"rhs", c.report.rhs},     {"margin", c.report.margin},
                        {"holds", c.report.holds}};
    os << j.dump() << '\n';
}

// ---- frontier evaluation ----

namespace {

void canonical(std::string& s) {
    char map[128];
    std::fill(std::begin(map), std::end(map), -1);
    char next = 0;
    for (char& c : s) {
        if (map[static_cast<int>(c)] < 0) map[static_cast<int>(c)] = next++;
        c = map[static_cast<int>(c)];
    }
}

}  // namespace

long double frontier_sum(int nv, const std::vector<std::pair<int, int>>& edges, const std::vector<double>& x,
                         double q, const std::vector<int>& forced, const std::vector<int>& order,
                         std::size_t max_states) {
    if (static_cast<int>(order.size()) != nv) throw ParameterError("elimination order must list every vertex");
    std::vector<int> pos(nv, -1);
    for (int i = 0; i < nv; ++i) {
        if (order[i] < 0 || order[i] >= nv || pos[order[i]] >= 0) throw ParameterError("bad elimination order");
        pos[order[i]] = i;
    }
    int m = static_cast<int>(edges.size());
    std::vector<int> last(nv, 0);  // position after which a vertex has no pending edges
    std::vector<std::vector<int>> at(nv);  // edges processed when their later endpoint arrives
    for (int e = 0; e < m; ++e) {
        auto [u, v] = edges[e];
        if (u == v) throw ParameterError("self-loops are not supported");
        int p = std::max(pos[u], pos[v]);
        at[p].push_back(e);
        last[u] = std::max(last[u], p);
        last[v] = std::max(last[v], p);
    }
    for (int v = 0; v < nv; ++v) last[v] = std::max(last[v], pos[v]);

    std::vector<int> slots;  // frontier vertices
    std::unordered_map<std::string, long double> cur{{std::string(), 1.0L}}, nxt;
    long double q_ld = q;
    for (int p = 0; p < nv; ++p) {
        int v = order[p];
        nxt.clear();
        for (auto& [k, w] : cur) {
            std::string s = k;
            char lab = 0;
            for (char c : s) lab = std::max<char>(lab, static_cast<char>(c + 1));
            s.push_back(lab);
            nxt[s] += w;
        }
        std::swap(cur, nxt);
        slots.push_back(v);
        if (slots.size() > 120) throw CapacityError("frontier too wide");
        for (int e : at[p]) {
            auto [a, b] = edges[e];
            int ia = static_cast<int>(std::find(slots.begin(), slots.end(), a) - slots.begin());
            int ib = static_cast<int>(std::find(slots.begin(), slots.end(), b) - slots.begin());
            nxt.clear();
            for (auto& [k, w] : cur) {
                if (forced[e] != 1) nxt[k] += w;
                if (forced[e] != 0) {
                    std::string s = k;
                    char from = s[ib], to = s[ia];
                    for (char& c : s)
                        if (c == from) c = to;
                    canonical(s);
                    nxt[s] += w * x[e];
                }
            }
            std::swap(cur, nxt);
        }
        // retire vertices with no pending edges
        for (int i = static_cast<int>(slots.size()) - 1; i >= 0; --i) {
            if (last[slots[i]] > p) continue;
            nxt.clear();
            for (auto& [k, w] : cur) {
                char lab = k[i];
                int count = static_cast<int>(std::count(k.begin(), k.end(), lab));
                std::string s = k;
                s.erase(s.begin() + i);
                canonical(s);
                nxt[s] += count == 1 ? w * q_ld : w;
            }
            std::swap(cur, nxt);
            slots.erase(slots.begin() + i);
        }
        if (cur.size() > max_states) throw CapacityError("frontier state count above the cap");
    }
    long double total = 0;
    for (auto& [k, w] : cur) {
        std::set<char> labs(k.begin(), k.end());
        total += w * std::pow(q_ld, static_cast<long double>(labs.size()));
    }
    return total;
}

// ---- boundary decoupling ----

std::vector<std::pair<std::vector<int>, std::vector<int>>> domain_edges(const std::vector<std::vector<int>>& D) {
    std::set<std::vector<int>> pts(D.begin(), D.end());
    std::vector<std::pair<std::vector<int>, std::vector<int>>> out;
    for (const auto& p : pts)
        for (std::size_t a = 0; a < p.size(); ++a) {
            auto r = p;
            ++r[a];
            if (pts.count(r)) out.emplace_back(p, r);
        }
    return out;
}

namespace {

struct Domain {
    std::vector<std::vector<int>> pts;  // sorted lexicographically
    std::vector<char> boundary;
    std::vector<std::pair<int, int>> edges;
    std::vector<int> event_edges;  // indices of the D edges, in domain_edges order
};

Domain build_domain(const std::vector<std::vector<int>>& D, int R) {
    int d = static_cast<int>(D.front().size());
    std::set<std::vector<int>> s;
    for (const auto& c : D) {
        std::vector<int> off(d, -R);
        while (true) {
            auto p = c;
            for (int a = 0; a < d; ++a) p[a] += off[a];
            s.insert(p);
            int a = 0;
            while (a < d && off[a] == R) off[a++] = -R;
            if (a == d) break;
            ++off[a];
        }
    }
    Domain dom;
    dom.pts.assign(s.begin(), s.end());
    std::map<std::vector<int>, int> id;
    for (std::size_t i = 0; i < dom.pts.size(); ++i) id[dom.pts[i]] = static_cast<int>(i);
    dom.boundary.assign(dom.pts.size(), 0);
    for (std::size_t i = 0; i < dom.pts.size(); ++i)
        for (int a = 0; a < d; ++a)
            for (int sgn : {-1, 1}) {
                auto r = dom.pts[i];
                r[a] += sgn;
                auto it = id.find(r);
                if (it == id.end()) dom.boundary[i] = 1;
                else if (sgn > 0) dom.edges.emplace_back(static_cast<int>(i), it->second);
            }
    for (const auto& [a, b] : domain_edges(D)) {
        int ia = id.at(a), ib = id.at(b);
        auto it = std::find(dom.edges.begin(), dom.edges.end(), std::make_pair(ia, ib));
        dom.event_edges.push_back(static_cast<int>(it - dom.edges.begin()));
    }
    return dom;
}

// P(A) on the domain, wired (all boundary vertices identified) or free.
double domain_probability(const Domain& dom, const EdgeEvent& A, double x, double q, bool wired, int* edge_count) {
    int nv = static_cast<int>(dom.pts.size());
    std::vector<int> map(nv);
    int next = wired ? 1 : 0;  // vertex 0 is the wired node
    for (int i = 0; i < nv; ++i) map[i] = wired && dom.boundary[i] ? 0 : next++;
    std::vector<std::pair<int, int>> edges;
    std::vector<int> orig;
    for (std::size_t e = 0; e < dom.edges.size(); ++e) {
        int a = map[dom.edges[e].first], b = map[dom.edges[e].second];
        // edges inside the wired node only contribute a constant factor
        if (wired && a == 0 && b == 0) {
            if (std::find(dom.event_edges.begin(), dom.event_edges.end(), static_cast<int>(e)) != dom.event_edges.end())
                throw ParameterError("event edges must not lie on the boundary of D_R");
            continue;
        }
        edges.emplace_back(a, b);
        orig.push_back(static_cast<int>(e));
    }
    if (edge_count) *edge_count = static_cast<int>(edges.size());
    std::vector<int> order(next);
    for (int i = 0; i < next; ++i) order[i] = i;  // lexicographic, wired node first
    std::vector<double> w(edges.size(), x);
    std::vector<int> local(dom.event_edges.size());
    for (std::size_t k = 0; k < dom.event_edges.size(); ++k)
        local[k] = static_cast<int>(std::find(orig.begin(), orig.end(), dom.event_edges[k]) - orig.begin());
    std::vector<int> forced(edges.size(), -1);
    long double Z = frontier_sum(next, edges, w, q, forced, order);
    long double ZA = 0;
    int k = static_cast<int>(local.size());
    for (std::uint64_t mask = 0; mask < (1ULL << k); ++mask) {
        if (!A(mask)) continue;
        for (int i = 0; i < k; ++i) forced[local[i]] = static_cast<int>(mask >> i & 1);
        ZA += frontier_sum(next, edges, w, q, forced, order);
    }
    return static_cast<double>(ZA / Z);
}

}  // namespace

LfreeReport lfree_ratio_check(const std::vector<std::vector<int>>& D, const EdgeEvent& A, double x, double q,
                              const std::vector<int>& Rs) {
    if (D.empty() || Rs.empty()) throw ParameterError("need a domain and at least one R");
    int k = static_cast<int>(domain_edges(D).size());
    if (k > 16) throw CapacityError("event depends on too many edges");
    if (!is_increasing(k, A)) throw PreconditionError("event is not increasing");
    std::vector<int> rs(Rs);
    std::sort(rs.begin(), rs.end());
    LfreeReport rep;
    rep.reference = domain_probability(build_domain(D, rs.back()), A, x, q, false, nullptr);
    if (!(rep.reference > 0)) throw PreconditionError("event has probability zero");
    rep.above_one = true;
    rep.decreasing = true;
    for (int R : rs) {
        LfreeRow row;
        row.R = R;
        row.p_wired = domain_probability(build_domain(D, R), A, x, q, true, &row.edges);
        row.ratio = row.p_wired / rep.reference;
        if (row.ratio < 1 - 1e-12) rep.above_one = false;
        if (!rep.rows.empty() && row.ratio > rep.rows.back().ratio + 1e-12) rep.decreasing = false;
        rep.rows.push_back(row);
    }
    return rep;
}

// ---- cone-points and pivotal edges ----

ConePivotReport cone_point_pivotality(int n) {
    if (n < 1 || n > 4) throw CapacityError("exhaustive cone-point check limited to 1 <= n <= 4");
    auto lat = Lattice::box({{0, n}, {-1, 1}});
    int m = lat.num_edges();
    int o = lat.index2(0, 0), t = lat.index2(n, 0);
    ConeSystem cones;
    ConePivotReport rep;
    rep.n = n;
    DisjointSets ds(lat.num_vertices());
    auto joined = [&](std::uint64_t mask) {
        ds.reset(lat.num_vertices());
        for (int e = 0; e < m; ++e)
            if (mask >> e & 1) ds.unite(lat.edge(e).u, lat.edge(e).v);
        return ds.find(o) == ds.find(t);
    };
    for (std::uint64_t mask = 0; mask < (1ULL << m); ++mask) {
        if (!joined(mask)) continue;
        ++rep.configurations;
        auto w = EdgeConfiguration::from_mask(m, mask);
        auto c = extract_cluster(lat, w, o);
        for (int v : cone_points(lat, c, cones)) {
            int xv = lat.coord(v, 0);
            if (lat.coord(v, 1) != 0 || xv <= 0 || xv >= n) continue;
            if (c.contains(lat.index2(xv, 1)) || c.contains(lat.index2(xv, -1))) continue;
            ++rep.cone_points;
            bool any = false;
            for (int nb : {lat.index2(xv - 1, 0), lat.index2(xv + 1, 0)}) {
                int e = lat.find_edge(v, nb);
                if (!(mask >> e & 1)) continue;
                if (!joined(mask ^ (1ULL << e))) any = true;
            }
            if (!any) ++rep.violations;
        }
    }
    return rep;
}

}  // namespace fkdl
