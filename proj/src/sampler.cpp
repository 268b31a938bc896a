#include "fkdl/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <queue>
#include <sstream>

namespace fkdl {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master ^ splitmix64(index + 1));
}

std::string Rng::state() const {
    std::ostringstream os;
    os << eng_;
    return os.str();
}

void Rng::set_state(const std::string& s) {
    std::istringstream is(s);
    is >> eng_;
    if (!is) throw CheckpointError("corrupt rng state");
}

Dynamics parse_dynamics(const std::string& s) {
    if (s == "heat-bath" || s == "heat_bath") return Dynamics::heat_bath;
    if (s == "edwards-sokal" || s == "edwards_sokal") return Dynamics::edwards_sokal;
    if (s == "mixed") return Dynamics::mixed;
    throw ParameterError("unknown dynamics '" + s + "'");
}

FkSampler::FkSampler(const Lattice& lat, std::vector<double> weights, double q, BoundaryCondition bc)
    : lat_(&lat), x_(std::move(weights)), q_(q), bc_(std::move(bc)), nv_(lat.num_vertices()) {
    if (static_cast<int>(x_.size()) != lat.num_edges()) throw ParameterError("weight vector size mismatch");
    if (!(q >= 1)) throw ParameterError("q must be >= 1");
    for (double v : x_)
        if (!(v >= 0)) throw ParameterError("edge weights must be >= 0");
    groups_ = lat.boundary_groups(bc_);
    group_of_.assign(nv_, -1);
    for (std::size_t g = 0; g < groups_.size(); ++g)
        for (int v : groups_[g]) group_of_[v] = static_cast<int>(g);
    dobrushin_ = bc_.kind == BcKind::dobrushin && !groups_[0].empty() && !groups_[1].empty();
    seen_.assign(nv_ + groups_.size(), 0);
    side_.assign(nv_ + groups_.size(), 0);
}

template <class F>
void FkSampler::for_neighbours(const EdgeConfiguration& w, int node, int skip_edge, F&& f) const {
    if (node < nv_) {
        for (auto [nb, id] : lat_->adj(node))
            if (id != skip_edge && w.get(id)) f(nb);
        if (group_of_[node] >= 0) f(nv_ + group_of_[node]);
    } else {
        for (int m : groups_[node - nv_]) f(m);
    }
}

FkSampler::Search FkSampler::bisearch(const EdgeConfiguration& w, int u, int v, int skip_edge) {
    Search r;
    if (u == v) {
        r.connected = true;
        return r;
    }
    if (++stamp_ == 0) {
        std::fill(seen_.begin(), seen_.end(), 0);
        stamp_ = 1;
    }
    qa_.clear();
    qb_.clear();
    qa_.push_back(u);
    qb_.push_back(v);
    seen_[u] = stamp_;
    side_[u] = 0;
    seen_[v] = stamp_;
    side_[v] = 1;
    std::size_t ha = 0, hb = 0;
    // interleaved search: cost bounded by the smaller of the two components
    while (true) {
        if (ha == qa_.size()) {
            r.exhausted_side = 0;
            return r;
        }
        if (hb == qb_.size()) {
            r.exhausted_side = 1;
            return r;
        }
        int side = qa_.size() <= qb_.size() ? 0 : 1;
        auto& q = side == 0 ? qa_ : qb_;
        std::size_t& h = side == 0 ? ha : hb;
        int node = q[h++];
        bool hit = false;
        for_neighbours(w, node, skip_edge, [&](int nb) {
            if (hit) return;
            if (seen_[nb] == stamp_) {
                if (side_[nb] != side) hit = true;
                return;
            }
            seen_[nb] = stamp_;
            side_[nb] = static_cast<std::uint8_t>(side);
            q.push_back(nb);
        });
        if (hit) {
            r.connected = true;
            return r;
        }
    }
}

bool FkSampler::reaches(const EdgeConfiguration& w, int from, int target, int skip_edge) {
    if (from == target) return true;
    if (++stamp_ == 0) {
        std::fill(seen_.begin(), seen_.end(), 0);
        stamp_ = 1;
    }
    qa_.clear();
    qa_.push_back(from);
    seen_[from] = stamp_;
    side_[from] = 0;
    for (std::size_t h = 0; h < qa_.size(); ++h) {
        bool hit = false;
        for_neighbours(w, qa_[h], skip_edge, [&](int nb) {
            if (hit || seen_[nb] == stamp_) return;
            if (nb == target) hit = true;
            seen_[nb] = stamp_;
            side_[nb] = 0;
            qa_.push_back(nb);
        });
        if (hit) return true;
    }
    return false;
}

bool FkSampler::connected_off(const EdgeConfiguration& w, int e) {
    const Edge& ed = lat_->edge(e);
    return bisearch(w, ed.u, ed.v, e).connected;
}

bool FkSampler::connected(const EdgeConfiguration& w, int a, int b) {
    return bisearch(w, a, b, -1).connected;
}

double FkSampler::conditional_open(const EdgeConfiguration& w, int e) {
    double x = x_[e];
    if (x == 0) return 0.0;
    const Edge& ed = lat_->edge(e);
    Search s = bisearch(w, ed.u, ed.v, e);
    if (s.connected) return x / (1 + x);
    if (dobrushin_) {
        bool top = in_side(nv_, s.exhausted_side);
        bool bot = in_side(nv_ + 1, s.exhausted_side);
        if (top || bot) {
            int other = s.exhausted_side == 0 ? ed.v : ed.u;
            if (reaches(w, other, top ? nv_ + 1 : nv_, e)) return 0.0;
        }
    }
    return x / (x + q_);
}

bool FkSampler::heat_bath_step(EdgeConfiguration& w, int e, double u) {
    bool open = u < conditional_open(w, e);
    w.set(e, open);
    return open;
}

void FkSampler::heat_bath_sweep(EdgeConfiguration& w, Rng& rng) {
    for (int e = 0; e < lat_->num_edges(); ++e) heat_bath_step(w, e, rng.uniform());
}

void FkSampler::edwards_sokal_sweep(EdgeConfiguration& w, Rng& rng) {
    if (q_ != std::floor(q_)) throw UnsupportedDynamics("edwards-sokal dynamics needs integer q");
    int q = static_cast<int>(q_);
    if (dobrushin_ && q < 2) throw UnsupportedDynamics("dobrushin cluster dynamics needs q >= 2");
    ClusterIndex ci = rebuild_clusters(*lat_, w, bc_);
    color_.assign(ci.kappa, -1);
    if (dobrushin_) {
        color_[ci.label[groups_[0][0]]] = 0;
        color_[ci.label[groups_[1][0]]] = 1;
    } else if (bc_.kind == BcKind::wired && !groups_.empty()) {
        color_[ci.label[groups_[0][0]]] = 0;
    }
    for (int c = 0; c < ci.kappa; ++c)
        if (color_[c] < 0) color_[c] = q == 1 ? 0 : rng.below(q);
    auto& words = w.raw_words();
    std::fill(words.begin(), words.end(), 0ULL);
    int open = 0;
    for (int e = 0; e < lat_->num_edges(); ++e) {
        const Edge& ed = lat_->edge(e);
        if (color_[ci.label[ed.u]] != color_[ci.label[ed.v]]) continue;
        double x = x_[e];
        if (rng.uniform() < x / (1 + x)) {
            words[e >> 6] |= 1ULL << (e & 63);
            ++open;
        }
    }
    w.recount();
    (void)open;
}

bool FkSampler::conditioned_step(EdgeConfiguration& w, int e, double u, int a, int b) {
    if (!w.get(e)) return heat_bath_step(w, e, u);
    double x = x_[e];
    const Edge& ed = lat_->edge(e);
    Search s = bisearch(w, ed.u, ed.v, e);
    double p;
    if (s.connected) {
        p = x / (1 + x);
    } else {
        bool pa = in_side(a, s.exhausted_side), pb = in_side(b, s.exhausted_side);
        if (pa != pb) return true;  // pivotal for a <-> b: must stay open
        p = x / (x + q_);
    }
    bool open = u < p;
    w.set(e, open);
    return open;
}

void FkSampler::conditioned_sweep(EdgeConfiguration& w, Rng& rng, int a, int b) {
    for (int e = 0; e < lat_->num_edges(); ++e) conditioned_step(w, e, rng.uniform(), a, b);
}

void ChainParams::validate() const {
    if (sweeps < 1) throw ParameterError("sweeps must be >= 1");
    if (burn_in < 0 || burn_in >= sweeps) throw ParameterError("burn-in must be in [0, sweeps)");
    if (thin < 1) throw ParameterError("thinning interval must be >= 1");
}

std::vector<double> SampleBatch::column(std::size_t k) const {
    std::vector<double> c;
    c.reserve(values.size());
    for (const auto& r : values) c.push_back(r.at(k));
    return c;
}

ChainState initial_state(const Lattice& lat, std::uint64_t seed, bool open) {
    return ChainState{EdgeConfiguration(lat.num_edges(), open), Rng(seed), 0};
}

void run_sweep(FkSampler& s, ChainState& st, Dynamics dyn) {
    switch (dyn) {
        case Dynamics::heat_bath:
            s.heat_bath_sweep(st.omega, st.rng);
            break;
        case Dynamics::edwards_sokal:
            s.edwards_sokal_sweep(st.omega, st.rng);
            break;
        case Dynamics::mixed:
            s.edwards_sokal_sweep(st.omega, st.rng);
            s.heat_bath_sweep(st.omega, st.rng);
            break;
    }
    ++st.sweep;
}

namespace {

bool record_due(const ChainParams& p, long sweep) {
    return sweep > p.burn_in && (sweep - p.burn_in) % p.thin == 0;
}

void record(SampleBatch& out, const FkSampler& s, const ChainParams& p, const ChainState& st,
            const std::vector<Observable>& obs) {
    out.sweep.push_back(st.sweep);
    std::vector<double> vals;
    if (!obs.empty()) {
        ClusterIndex ci = rebuild_clusters(s.lattice(), st.omega, s.bc());
        for (const auto& o : obs) vals.push_back(o(st.omega, ci));
    }
    out.values.push_back(std::move(vals));
    if (p.keep_snapshots) out.snapshots.push_back(st.omega);
}

}  // namespace

SampleBatch run_chain(FkSampler& s, const ChainParams& params, const std::vector<Observable>& obs,
                      ChainState* resume) {
    params.validate();
    ChainState local;
    ChainState& st = resume ? *resume : local;
    if (!resume) st = initial_state(s.lattice(), params.seed);
    if (st.omega.size() != s.lattice().num_edges()) throw CheckpointError("state does not fit lattice");
    SampleBatch out;
    out.seed = params.seed;
    while (st.sweep < params.sweeps) {
        run_sweep(s, st, params.dynamics);
        if (record_due(params, st.sweep)) record(out, s, params, st, obs);
    }
    return out;
}

SampleBatch run_chain(const Lattice& lat, const WeightField& w, const ChainParams& params,
                      const std::vector<Observable>& obs) {
    FkSampler s(lat, w, params.bc);
    return run_chain(s, params, obs);
}

Estimate binned_mean(const std::vector<double>& xs) {
    std::size_t n = xs.size();
    if (n < 16) throw DiagnosticsError("need at least 16 samples for binned errors, got " + std::to_string(n));
    std::size_t B = 16;
    while (B < 128 && (2 * B) * (2 * B) <= n) B *= 2;
    std::size_t per = n / B;
    std::vector<double> m(B, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
        double s = 0;
        for (std::size_t i = 0; i < per; ++i) s += xs[b * per + i];
        m[b] = s / per;
    }
    double mean = 0;
    for (double v : m) mean += v;
    mean /= B;
    double var = 0;
    for (double v : m) var += (v - mean) * (v - mean);
    var /= (B - 1);
    return {mean, std::sqrt(var / B), static_cast<int>(B)};
}

double integrated_autocorr(const std::vector<double>& xs) {
    std::size_t n = xs.size();
    if (n < 16) throw DiagnosticsError("need at least 16 samples for autocorrelation");
    double mean = 0;
    for (double v : xs) mean += v;
    mean /= n;
    double c0 = 0;
    for (double v : xs) c0 += (v - mean) * (v - mean);
    c0 /= n;
    if (c0 == 0) return 0.5;
    double tau = 0.5;
    for (std::size_t t = 1; t < n / 2; ++t) {
        double c = 0;
        for (std::size_t i = 0; i + t < n; ++i) c += (xs[i] - mean) * (xs[i + t] - mean);
        c /= (n - t);
        tau += c / c0;
        if (static_cast<double>(t) >= 6.0 * tau) break;
    }
    return std::max(tau, 0.5);
}

Estimate estimate_connectivity(const SampleBatch& b, const Lattice& lat, const BoundaryCondition& bc,
                               int u, int v) {
    if (u == v) return {1.0, 0.0, 0};
    if (b.snapshots.empty()) throw DiagnosticsError("batch holds no configuration snapshots");
    std::vector<double> ind;
    ind.reserve(b.snapshots.size());
    for (const auto& s : b.snapshots) ind.push_back(rebuild_clusters(lat, s, bc).connected(u, v) ? 1.0 : 0.0);
    return binned_mean(ind);
}

SampleBatch conditioned_by_rejection(FkSampler& s, const ChainParams& p, int a, int b,
                                     const std::vector<Observable>& obs) {
    p.validate();
    ChainState st = initial_state(s.lattice(), p.seed);
    SampleBatch out;
    out.seed = p.seed;
    while (st.sweep < p.sweeps) {
        run_sweep(s, st, p.dynamics);
        if (record_due(p, st.sweep) && s.connected(st.omega, a, b)) record(out, s, p, st, obs);
    }
    return out;
}

SampleBatch conditioned_by_bridge(FkSampler& s, const ChainParams& p, int a, int b,
                                  const std::vector<Observable>& obs) {
    p.validate();
    const Lattice& lat = s.lattice();
    ChainState st = initial_state(lat, p.seed);
    // shortest path a..b in the full graph
    std::vector<int> prev_edge(lat.num_vertices(), -2);
    std::queue<int> bfs;
    bfs.push(a);
    prev_edge[a] = -1;
    while (!bfs.empty() && prev_edge[b] == -2) {
        int x = bfs.front();
        bfs.pop();
        for (auto [nb, id] : lat.adj(x))
            if (prev_edge[nb] == -2 && s.weights()[id] > 0) {
                prev_edge[nb] = id;
                bfs.push(nb);
            }
    }
    if (prev_edge[b] == -2) throw ParameterError("no path joins the conditioning vertices");
    for (int x = b; x != a;) {
        int id = prev_edge[x];
        st.omega.set(id, true);
        x = lat.edge(id).u == x ? lat.edge(id).v : lat.edge(id).u;
    }
    SampleBatch out;
    out.seed = p.seed;
    while (st.sweep < p.sweeps) {
        s.conditioned_sweep(st.omega, st.rng, a, b);
        ++st.sweep;
        if (record_due(p, st.sweep)) record(out, s, p, st, obs);
    }
    return out;
}

namespace {
constexpr char kMagic[8] = {'F', 'K', 'D', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw CheckpointError("truncated checkpoint");
    return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const CheckpointHeader& h, const ChainState& st) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot write checkpoint " + path);
    os.write(kMagic, 8);
    put(os, kVersion);
    put<std::int32_t>(os, h.d);
    put<std::int32_t>(os, h.n);
    put(os, h.q);
    put(os, h.x);
    put(os, h.xp);
    put(os, h.seed);
    put<std::int64_t>(os, st.sweep);
    put<std::int32_t>(os, st.omega.size());
    for (auto w : st.omega.words()) put(os, w);
    std::string rs = st.rng.state();
    put<std::uint64_t>(os, rs.size());
    os.write(rs.data(), static_cast<std::streamsize>(rs.size()));
    if (!os) throw CheckpointError("failed writing checkpoint " + path);
}

ChainState load_checkpoint(const std::string& path, CheckpointHeader* hp) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) throw CheckpointError("bad checkpoint magic");
    if (get<std::uint32_t>(is) != kVersion) throw CheckpointError("unsupported checkpoint version");
    CheckpointHeader h;
    h.d = get<std::int32_t>(is);
    h.n = get<std::int32_t>(is);
    h.q = get<double>(is);
    h.x = get<double>(is);
    h.xp = get<double>(is);
    h.seed = get<std::uint64_t>(is);
    ChainState st;
    st.sweep = static_cast<long>(get<std::int64_t>(is));
    h.sweep = st.sweep;
    int ne = get<std::int32_t>(is);
    st.omega = EdgeConfiguration(ne);
    for (auto& w : st.omega.raw_words()) w = get<std::uint64_t>(is);
    st.omega.recount();
    auto len = get<std::uint64_t>(is);
    std::string rs(len, '\0');
    is.read(rs.data(), static_cast<std::streamsize>(len));
    if (!is) throw CheckpointError("truncated checkpoint");
    st.rng.set_state(rs);
    if (hp) *hp = h;
    return st;
}

}  // namespace fkdl
