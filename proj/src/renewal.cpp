#include "fkdl/renewal.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fkdl {

namespace {

long ipow(int a, int k) {
    long r = 1;
    for (int i = 0; i < k; ++i) r *= a;
    return r;
}

long code_of(const int* x, int k, int A) {
    long c = 0;
    for (int i = 0; i < k; ++i) c = c * A + x[i];
    return c;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    for (std::string t; is >> t;) out.push_back(t);
    return out;
}

int find_name(const std::vector<std::string>& v, const std::string& s) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] == s) return static_cast<int>(i);
    return -1;
}

// Coverage state along a chain: distance from the current position to the
// oldest required edge not yet covered by a stick, 0 if there is none.
int next_dist(int dist, int k, bool required) {
    if (k == 0) {
        if (dist == 0) return required ? 1 : 0;
        return dist + 1;
    }
    if (dist == 0 || k >= dist + 1) return 0;
    return dist + 1;
}

// A pending edge at distance dist needs a later stick of depth >= dist + 1,
// which only exists for dist < m*.
bool alive(int dist, int m) { return dist == 0 || dist < m; }

double chain_word(const MemoryKernel& kern, const DepthWeights& dw, int bl, const int* x, int n, int br) {
    int m = std::max(kern.memory, 0);
    int N = n + (br >= 0 ? 1 : 0);
    std::vector<double> cur(m + 1, 0.0), nxt(m + 1);
    cur[0] = bl >= 0 ? kern.left_weight[bl] : 1.0;
    if (cur[0] == 0) return 0;
    std::vector<double> d(m + 2);
    for (int j = 1; j <= N; ++j) {
        int c = j - 1;
        int t = j <= n ? x[j - 1] : kern.A() + br;
        int kmax = dw.max_depth(c, bl >= 0);
        for (int k = 0; k <= kmax; ++k) d[k] = dw.delta(kern, t, k, bl, x, c);
        bool required = bl >= 0 || c >= 1;
        std::fill(nxt.begin(), nxt.end(), 0.0);
        for (int dist = 0; dist <= m; ++dist) {
            if (cur[dist] == 0) continue;
            for (int k = 0; k <= kmax; ++k) {
                if (d[k] == 0) continue;
                int nd = next_dist(dist, k, required);
                if (alive(nd, m)) nxt[nd] += cur[dist] * d[k];
            }
        }
        std::swap(cur, nxt);
    }
    return cur[0];
}

}  // namespace

// ---- kernel ----

int MemoryKernel::context_index(int bl, const int* x, int k) const {
    int m = memory;
    if (k >= m) return static_cast<int>(code_of(x + k - m, m, A()));
    if (bl < 0) throw std::logic_error("context shorter than the memory needs a boundary symbol");
    return short_offset_[bl * m + k] + static_cast<int>(code_of(x, k, A()));
}

double MemoryKernel::psi(int t, int bl, const int* x, int k) const {
    if (memory < 0) throw CapabilityError("kernel " + name + ": general contexts cannot be evaluated");
    if (dense_.empty()) throw std::logic_error("kernel " + name + " used before finalize()");
    return row(context_index(bl, x, k))[t];
}

void MemoryKernel::finalize() {
    if (memory < 0) {
        if (!has_mixing_constants)
            throw CapabilityError("kernel " + name + ": general kernel without mixing constants");
        throw CapabilityError("kernel " + name + ": only finite-memory kernels can be evaluated");
    }
    if (memory > 4) throw ParameterError("kernel " + name + ": memory depth above 4");
    if (letters.empty() || left.empty() || right.empty())
        throw ParameterError("kernel " + name + ": alphabet and boundary sets must be nonempty");
    if (left_weight.size() != left.size()) throw ParameterError("kernel " + name + ": left weights");
    for (double w : left_weight)
        if (!(w >= 0) || !std::isfinite(w)) throw ParameterError("kernel " + name + ": negative left weight");
    if (witness < 0 || witness >= A()) throw ParameterError("kernel " + name + ": witness letter");
    int m = memory, T = targets(), L = static_cast<int>(left.size());
    long full = ipow(A(), m);
    short_offset_.assign(static_cast<std::size_t>(L * m), 0);
    long off = full;
    for (int b = 0; b < L; ++b)
        for (int k = 0; k < m; ++k) {
            short_offset_[b * m + k] = static_cast<int>(off);
            off += ipow(A(), k);
        }
    dense_.assign(static_cast<std::size_t>(off * T), 0.0);
    std::size_t used = 0;
    auto fill = [&](const Word& key, long idx) {
        auto it = table.find(key);
        if (it == table.end()) {
            std::string s;
            for (int v : key) s += (s.empty() ? "" : " ") + (v < A() ? letters[v] : left[v - A()]);
            throw ParameterError("kernel " + name + ": context '" + s + "' not tabulated");
        }
        if (static_cast<int>(it->second.size()) != T) throw ParameterError("kernel " + name + ": row size");
        for (int t = 0; t < T; ++t) {
            double w = it->second[t];
            if (!(w >= 0) || !std::isfinite(w)) throw ParameterError("kernel " + name + ": negative weight");
            dense_[idx * T + t] = w;
        }
        ++used;
    };
    for (long c = 0; c < full; ++c) fill(word_decode(c, m, A()), c);
    for (int b = 0; b < L; ++b)
        for (int k = 0; k < m; ++k)
            for (long c = 0; c < ipow(A(), k); ++c) {
                Word key{A() + b};
                auto w = word_decode(c, k, A());
                key.insert(key.end(), w.begin(), w.end());
                fill(key, short_offset_[b * m + k] + c);
            }
    if (used != table.size()) throw ParameterError("kernel " + name + ": unreachable context in table");
}

double MemoryKernel::summability() const {
    double s = 0;
    for (int c = 0; c < contexts(); ++c) {
        double r = 0;
        for (int t = 0; t < targets(); ++t) r += row(c)[t];
        s = std::max(s, r);
    }
    return s;
}

double MemoryKernel::witness_floor() const {
    double s = std::numeric_limits<double>::infinity();
    for (int c = 0; c < contexts(); ++c) s = std::min(s, row(c)[witness]);
    return s;
}

MemoryKernel parse_kernel(std::istream& is, const std::string& name) {
    MemoryKernel k;
    k.name = name;
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> rows;
    std::vector<std::pair<std::string, std::vector<int>>> disp;
    std::string witness;
    bool have_memory = false;
    int lineno = 0;
    for (std::string line; std::getline(is, line);) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        auto tok = split_ws(line);
        if (tok.empty()) continue;
        auto bad = [&](const std::string& why) {
            return ParameterError("kernel " + name + " line " + std::to_string(lineno) + ": " + why);
        };
        const std::string& key = tok[0];
        try {
            if (key == "name") {
                if (tok.size() != 2) throw bad("name takes one value");
                k.name = tok[1];
            } else if (key == "alphabet") {
                k.letters.assign(tok.begin() + 1, tok.end());
            } else if (key == "left") {
                if (tok.size() % 2 != 1) throw bad("left takes symbol/weight pairs");
                for (std::size_t i = 1; i < tok.size(); i += 2) {
                    k.left.push_back(tok[i]);
                    k.left_weight.push_back(std::stod(tok[i + 1]));
                }
            } else if (key == "right") {
                k.right.assign(tok.begin() + 1, tok.end());
            } else if (key == "memory") {
                if (tok.size() != 2) throw bad("memory takes one value");
                k.memory = tok[1] == "general" ? -1 : std::stoi(tok[1]);
                have_memory = true;
            } else if (key == "mixing") {
                if (tok.size() != 3) throw bad("mixing takes c and L0");
                k.has_mixing_constants = std::stod(tok[1]) > 0 && std::stod(tok[2]) >= 0;
            } else if (key == "witness") {
                if (tok.size() != 2) throw bad("witness takes one letter");
                witness = tok[1];
            } else if (key == "ctx") {
                auto colon = std::find(tok.begin(), tok.end(), ":");
                if (colon == tok.end()) throw bad("ctx needs ':'");
                std::vector<std::string> ctx(tok.begin() + 1, colon), vals(colon + 1, tok.end());
                if (vals.size() % 2) throw bad("ctx weights come in target/weight pairs");
                rows.emplace_back(ctx, vals);
            } else if (key == "V") {
                if (tok.size() < 3) throw bad("V needs a symbol and coordinates");
                std::vector<int> v;
                for (std::size_t i = 2; i < tok.size(); ++i) v.push_back(std::stoi(tok[i]));
                disp.emplace_back(tok[1], v);
            } else {
                throw bad("unknown keyword '" + key + "'");
            }
        } catch (const std::logic_error& e) {
            if (dynamic_cast<const ParameterError*>(&e)) throw;
            throw bad("malformed number");
        }
    }
    if (!have_memory) throw ParameterError("kernel " + k.name + ": missing memory depth");
    if (k.left.empty()) {
        k.left = {"<"};
        k.left_weight = {1.0};
    }
    if (k.right.empty()) k.right = {">"};
    for (const auto& l : k.letters)
        if (find_name(k.left, l) >= 0 || find_name(k.right, l) >= 0)
            throw ParameterError("kernel " + k.name + ": letter '" + l + "' reused as a boundary symbol");
    for (auto& [ctx, vals] : rows) {
        Word key;
        for (std::size_t i = 0; i < ctx.size(); ++i) {
            int a = find_name(k.letters, ctx[i]);
            int b = find_name(k.left, ctx[i]);
            if (a >= 0) key.push_back(a);
            else if (b >= 0 && i == 0) key.push_back(k.A() + b);
            else throw ParameterError("kernel " + k.name + ": bad context symbol '" + ctx[i] + "'");
        }
        std::vector<double> r(k.targets(), 0.0);
        for (std::size_t i = 0; i < vals.size(); i += 2) {
            int t = find_name(k.letters, vals[i]);
            if (t < 0 && find_name(k.right, vals[i]) >= 0) t = k.A() + find_name(k.right, vals[i]);
            if (t < 0) throw ParameterError("kernel " + k.name + ": bad target '" + vals[i] + "'");
            r[t] = std::stod(vals[i + 1]);
        }
        if (!k.table.emplace(key, r).second) throw ParameterError("kernel " + k.name + ": duplicate context");
    }
    if (!witness.empty()) {
        k.witness = find_name(k.letters, witness);
        if (k.witness < 0) throw ParameterError("kernel " + k.name + ": unknown witness");
    }
    for (auto& [s, v] : disp) k.displacement[s] = v;
    k.finalize();
    return k;
}

MemoryKernel load_kernel(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParameterError("cannot open kernel file " + path);
    auto slash = path.find_last_of('/');
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    return parse_kernel(f, base.substr(0, base.find('.')));
}

// ---- depth weights ----

DepthWeights depth_weights(const MemoryKernel& kern) {
    if (kern.memory < 0) {
        if (!kern.has_mixing_constants)
            throw CapabilityError("kernel " + kern.name + ": general kernel without mixing constants");
        throw CapabilityError("kernel " + kern.name + ": only finite-memory kernels can be evaluated");
    }
    DepthWeights dw;
    int m = kern.memory, A = kern.A(), T = kern.targets(), L = static_cast<int>(kern.left.size());
    dw.memory = m;
    dw.T = T;
    dw.A = A;
    dw.a.resize(m + 1);
    for (int k = 0; k <= m; ++k) {
        long nu = ipow(A, k);
        dw.a[k].assign(static_cast<std::size_t>(nu * T), std::numeric_limits<double>::infinity());
        for (long uc = 0; uc < nu; ++uc) {
            Word u = word_decode(uc, k, A);
            double* out = dw.a[k].data() + uc * T;
            auto take = [&](int ctx) {
                const double* r = kern.row(ctx);
                for (int t = 0; t < T; ++t) out[t] = std::min(out[t], r[t]);
            };
            // Contexts ending in u: full-length ones, and boundary + shorter words.
            for (long wc = 0; wc < ipow(A, m - k); ++wc) {
                Word ctx = word_decode(wc, m - k, A);
                ctx.insert(ctx.end(), u.begin(), u.end());
                take(kern.context_index(-1, ctx.data(), m));
            }
            for (int b = 0; b < L; ++b)
                for (int j = 0; j + k < m; ++j)
                    for (long wc = 0; wc < ipow(A, j); ++wc) {
                        Word ctx = word_decode(wc, j, A);
                        ctx.insert(ctx.end(), u.begin(), u.end());
                        take(kern.context_index(b, ctx.data(), j + k));
                    }
        }
    }
    return dw;
}

double DepthWeights::a_of(int t, const int* suffix, int k) const {
    return a[k][code_of(suffix, k, A) * T + t];
}

int DepthWeights::max_depth(int c, bool boundary) const {
    if (boundary) return c < memory ? c + 1 : memory;
    return std::min(c, memory);
}

double DepthWeights::delta(const MemoryKernel& kern, int t, int k, int bl, const int* x, int c) const {
    int m = memory;
    if (k == 0) return a_of(t, x + c, 0);
    if (k <= c) {
        if (k > m) return 0;
        return a_of(t, x + c - k, k) - a_of(t, x + c - k + 1, k - 1);
    }
    if (k == c + 1 && bl >= 0 && c < m) return kern.psi(t, bl, x, c) - a_of(t, x, c);
    return 0;
}

TelescopeReport telescoping_check(const MemoryKernel& kern, const DepthWeights& dw) {
    TelescopeReport r;
    r.min_delta = std::numeric_limits<double>::infinity();
    int m = kern.memory, A = kern.A(), L = static_cast<int>(kern.left.size());
    for (int c = 0; c <= m + 2; ++c)
        for (long xc = 0; xc < ipow(A, c); ++xc) {
            Word x = word_decode(xc, c, A);
            for (int b = -1; b < L; ++b) {
                if (b < 0 && c < m) continue;
                for (int t = 0; t < kern.targets(); ++t) {
                    double s = 0;
                    for (int k = 0; k <= c + 1; ++k) {
                        double d = dw.delta(kern, t, k, b, x.data(), c);
                        r.min_delta = std::min(r.min_delta, d);
                        s += d;
                    }
                    double psi = kern.psi(t, b, x.data(), c);
                    r.max_error = std::max(r.max_error, std::fabs(s - psi));
                }
                ++r.contexts;
            }
        }
    return r;
}

// ---- sticks ----

StickDecomposition make_sticks(const std::vector<int>& I) {
    int N = static_cast<int>(I.size());  // n + 2 positions
    if (N < 1) throw ParameterError("empty stick configuration");
    for (int k = 0; k < N; ++k)
        if (I[k] < 0 || I[k] > k) throw ParameterError("memory value outside 0..k");
    StickDecomposition s;
    s.I = I;
    s.cut.assign(static_cast<std::size_t>(N - 1), 0);
    // Edge k (between k and k+1) is cut iff every stick j > k starts right of it.
    int reach = std::numeric_limits<int>::max();
    for (int k = N - 2; k >= 0; --k) {
        reach = std::min(reach, (k + 1) - I[k + 1]);
        s.cut[k] = reach >= k + 1;
    }
    int len = 1;
    for (int k = 0; k < N - 1; ++k) {
        if (s.cut[k]) {
            s.lengths.push_back(len);
            len = 1;
        } else {
            ++len;
        }
    }
    s.lengths.push_back(len);
    return s;
}

void for_each_stick(const MemoryKernel& kern, const DepthWeights& dw, int n, const StickVisitor& f, double cap) {
    int m = kern.memory, A = kern.A(), L = static_cast<int>(kern.left.size()), R = static_cast<int>(kern.right.size());
    double est = double(L) * R * std::pow(double(A), n) * std::pow(double(m + 1), n + 1);
    if (est > cap) throw CapacityError("stick enumeration of length " + std::to_string(n) + " exceeds the cap");
    Word x(n);
    std::vector<int> I(n + 2, 0);
    for (int bl = 0; bl < L; ++bl) {
        double w0 = kern.left_weight[bl];
        if (w0 == 0) continue;
        std::function<void(int, double)> rec = [&](int j, double w) {
            int c = j - 1;
            if (j == n + 1) {
                for (int br = 0; br < R; ++br)
                    for (int k = 0; k <= dw.max_depth(c, true); ++k) {
                        double d = dw.delta(kern, A + br, k, bl, x.data(), c);
                        if (d == 0) continue;
                        I[j] = k;
                        f(bl, x, br, I, w * d);
                    }
                return;
            }
            for (int s = 0; s < A; ++s) {
                x[c] = s;
                for (int k = 0; k <= dw.max_depth(c, true); ++k) {
                    double d = dw.delta(kern, s, k, bl, x.data(), c);
                    if (d == 0) continue;
                    I[j] = k;
                    rec(j + 1, w * d);
                }
            }
        };
        rec(1, w0);
    }
}

StickTable stick_expansion(const MemoryKernel& kern, const DepthWeights& dw, int n, double cap) {
    StickTable t;
    t.n = n;
    int L = static_cast<int>(kern.left.size()), R = static_cast<int>(kern.right.size());
    t.marginal.assign(L, std::vector<std::vector<double>>(R, std::vector<double>(ipow(kern.A(), n), 0.0)));
    for_each_stick(
        kern, dw, n,
        [&](int bl, const Word& x, int br, const std::vector<int>& I, double w) {
            t.marginal[bl][br][word_code(x, kern.A())] += w;
            t.shape_mass[make_sticks(I).lengths] += w;
            t.total += w;
            ++t.configurations;
        },
        cap);
    return t;
}

double psi_n(const MemoryKernel& kern, int bl, const Word& x, int br) {
    double w = kern.left_weight[bl];
    for (int j = 0; j < static_cast<int>(x.size()) && w != 0; ++j) w *= kern.psi(x[j], bl, x.data(), j);
    return w * kern.psi(kern.A() + br, bl, x.data(), static_cast<int>(x.size()));
}

long word_code(const Word& x, int A) { return code_of(x.data(), static_cast<int>(x.size()), A); }

Word word_decode(long code, int len, int A) {
    Word x(len);
    for (int i = len - 1; i >= 0; --i) {
        x[i] = static_cast<int>(code % A);
        code /= A;
    }
    return x;
}

double rho_left(const MemoryKernel& kern, const DepthWeights& dw, int bl, const Word& x) {
    return chain_word(kern, dw, bl, x.data(), static_cast<int>(x.size()), -1);
}

double rho_right(const MemoryKernel& kern, const DepthWeights& dw, const Word& x, int br) {
    return chain_word(kern, dw, -1, x.data(), static_cast<int>(x.size()), br);
}

double step_weight(const MemoryKernel& kern, const DepthWeights& dw, const Word& x) {
    if (x.empty()) return 0;
    return chain_word(kern, dw, -1, x.data(), static_cast<int>(x.size()), -1);
}

double one_cluster(const MemoryKernel& kern, const DepthWeights& dw, int bl, const Word& x, int br) {
    return chain_word(kern, dw, bl, x.data(), static_cast<int>(x.size()), br);
}

// ---- transfer matrices ----

MassSeries mass_series(const MemoryKernel& kern, const DepthWeights& dw, int N) {
    int m = kern.memory, A = kern.A(), L = static_cast<int>(kern.left.size()), R = static_cast<int>(kern.right.size());
    long S = ipow(A, m);
    // state (c, suffix code, dist), c = min(letters, m* + 1); the suffix keeps
    // min(c, m*) letters, and c > 0 records that a first edge exists.
    auto idx = [&](int c, long code, int dist) { return (static_cast<long>(c) * S + code) * (m + 1) + dist; };
    long NS = (m + 2) * S * (m + 1);
    MassSeries ms;
    ms.mu.assign(N + 1, 0.0);
    ms.nu.assign(N + 1, 0.0);
    ms.rho_l.assign(N + 1, 0.0);
    ms.rho_r.assign(N + 1, 0.0);
    ms.single.assign(N + 1, 0.0);

    // Sum over b_R of the transitions closing a chain at dist 0.
    auto close = [&](int bl, int c, const Word& suf, int dist) {
        double s = 0;
        int cs = static_cast<int>(suf.size());
        for (int br = 0; br < R; ++br)
            for (int k = 0; k <= dw.max_depth(cs, bl >= 0); ++k) {
                double d = dw.delta(kern, A + br, k, bl, suf.data(), cs);
                if (d != 0 && next_dist(dist, k, bl >= 0 || c >= 1) == 0) s += d;
            }
        return s;
    };
    auto run = [&](int bl, double w0) {
        std::vector<double> cur(NS, 0.0), nxt(NS);
        cur[idx(0, 0, 0)] = w0;
        for (int n = 0; n <= N; ++n) {
            for (int c = 0; c <= m + 1; ++c)
                for (long code = 0; code < ipow(A, std::min(c, m)); ++code) {
                    Word suf = word_decode(code, std::min(c, m), A);
                    for (int dist = 0; dist <= m; ++dist) {
                        double w = cur[idx(c, code, dist)];
                        if (w == 0) continue;
                        if (dist == 0) (bl >= 0 ? ms.rho_l : ms.nu)[n] += w;
                        (bl >= 0 ? ms.single : ms.rho_r)[n] += w * close(bl, c, suf, dist);
                    }
                }
            if (n == N) break;
            std::fill(nxt.begin(), nxt.end(), 0.0);
            for (int c = 0; c <= m + 1; ++c)
                for (long code = 0; code < ipow(A, std::min(c, m)); ++code) {
                    int cs = std::min(c, m);
                    Word suf = word_decode(code, cs, A);
                    bool required = bl >= 0 || c >= 1;
                    int kmax = dw.max_depth(cs, bl >= 0);
                    int nc = std::min(c + 1, m + 1);
                    for (int s = 0; s < A; ++s) {
                        Word ns = suf;
                        ns.push_back(s);
                        if (static_cast<int>(ns.size()) > m) ns.erase(ns.begin());
                        long ncode = word_code(ns, A);
                        for (int k = 0; k <= kmax; ++k) {
                            double d = dw.delta(kern, s, k, bl, suf.data(), cs);
                            if (d == 0) continue;
                            for (int dist = 0; dist <= m; ++dist) {
                                double w = cur[idx(c, code, dist)];
                                if (w == 0) continue;
                                int nd = next_dist(dist, k, required);
                                if (alive(nd, m)) nxt[idx(nc, ncode, nd)] += w * d;
                            }
                        }
                    }
                }
            std::swap(cur, nxt);
        }
    };
    for (int bl = 0; bl < L; ++bl)
        if (kern.left_weight[bl] != 0) run(bl, kern.left_weight[bl]);
    run(-1, 1.0);
    ms.nu[0] = 0;

    // mu_n = sum Psi_n over (b_L, x, b_R)
    for (int bl = 0; bl < L; ++bl) {
        if (kern.left_weight[bl] == 0) continue;
        std::vector<double> cur((m + 1) * S, 0.0), nxt((m + 1) * S);
        cur[0] = kern.left_weight[bl];
        for (int n = 0; n <= N; ++n) {
            for (int c = 0; c <= m; ++c)
                for (long code = 0; code < (c < m ? ipow(A, c) : S); ++code) {
                    double w = cur[c * S + code];
                    if (w == 0) continue;
                    Word suf = word_decode(code, c, A);
                    for (int br = 0; br < R; ++br) ms.mu[n] += w * kern.psi(A + br, bl, suf.data(), c);
                }
            if (n == N) break;
            std::fill(nxt.begin(), nxt.end(), 0.0);
            for (int c = 0; c <= m; ++c)
                for (long code = 0; code < (c < m ? ipow(A, c) : S); ++code) {
                    double w = cur[c * S + code];
                    if (w == 0) continue;
                    Word suf = word_decode(code, c, A);
                    for (int s = 0; s < A; ++s) {
                        Word ns = suf;
                        ns.push_back(s);
                        if (static_cast<int>(ns.size()) > m) ns.erase(ns.begin());
                        nxt[std::min(c + 1, m) * S + word_code(ns, A)] += w * kern.psi(s, bl, suf.data(), c);
                    }
                }
            std::swap(cur, nxt);
        }
    }
    return ms;
}

// ---- factorized law ----

namespace {

// Largest ratio of consecutive nonzero terms over the last `window` entries;
// returns 0 if the series has ended, +inf if it cannot be bounded.
double tail_ratio(const std::vector<double>& s, int window = 8) {
    int N = static_cast<int>(s.size()) - 1;
    bool ended = true;
    for (int i = std::max(0, N - window); i <= N; ++i)
        if (s[i] != 0) ended = false;
    if (ended) return 0;
    double r = 0;
    for (int i = std::max(0, N - window); i < N; ++i) {
        if (s[i] == 0) return std::numeric_limits<double>::infinity();
        r = std::max(r, std::fabs(s[i + 1] / s[i]));
    }
    return r;
}

}  // namespace

FactorizedLaw factor_weights(const MemoryKernel& kern, const DepthWeights& dw, int cap, double tol) {
    if (cap < 1) throw ParameterError("length cap must be positive");
    int A = kern.A(), L = static_cast<int>(kern.left.size()), R = static_cast<int>(kern.right.size());
    if (std::pow(double(A), cap) > 5e6) throw CapacityError("word tables above the length cap limit");
    FactorizedLaw law;
    law.A = A;
    law.cap = cap;
    law.rho_l.assign(L, std::vector<std::vector<double>>(cap + 1));
    law.rho_r.assign(R, std::vector<std::vector<double>>(cap + 1));
    law.p.assign(cap + 1, {});
    for (int len = 0; len <= cap; ++len) {
        long nw = ipow(A, len);
        for (int b = 0; b < L; ++b) law.rho_l[b][len].resize(nw);
        for (int b = 0; b < R; ++b) law.rho_r[b][len].resize(nw);
        law.p[len].assign(nw, 0.0);
        for (long c = 0; c < nw; ++c) {
            Word x = word_decode(c, len, A);
            for (int b = 0; b < L; ++b) law.rho_l[b][len][c] = rho_left(kern, dw, b, x);
            for (int b = 0; b < R; ++b) law.rho_r[b][len][c] = rho_right(kern, dw, x, b);
            if (len > 0) law.p[len][c] = step_weight(kern, dw, x);
        }
    }
    for (int N = 64;; N *= 2) {
        auto ms = mass_series(kern, dw, N);
        double r = tail_ratio(ms.nu);
        if (r < 1) {
            double tail = r == 0 ? 0 : ms.nu[N] * r / (1 - r);
            if (tail <= tol) {
                law.nu = ms.nu;
                law.tail = tail;
                law.tail_ratio = r;
                law.p_mass = 0;
                for (double v : ms.nu) law.p_mass += v;
                return law;
            }
        }
        if (N >= 4096)
            throw PrecisionError("kernel " + kern.name + ": step-law tail cannot be certified below tolerance");
    }
}

double FactorizedLaw::p_of(const Word& x) const {
    int n = static_cast<int>(x.size());
    if (n > cap) throw CapacityError("word longer than the table cap");
    return n == 0 ? 0.0 : p[n][word_code(x, A)];
}

double FactorizedLaw::rho_left_of(int bl, const Word& x) const {
    int n = static_cast<int>(x.size());
    if (n > cap) throw CapacityError("word longer than the table cap");
    return rho_l[bl][n][word_code(x, A)];
}

double FactorizedLaw::rho_right_of(const Word& x, int br) const {
    int n = static_cast<int>(x.size());
    if (n > cap) throw CapacityError("word longer than the table cap");
    return rho_r[br][n][word_code(x, A)];
}

void write_law_json(std::ostream& os, const MemoryKernel& kern, const FactorizedLaw& law) {
    auto spell = [&](const Word& x) {
        std::string s;
        for (int v : x) s += (s.empty() ? "" : " ") + kern.letters[v];
        return s;
    };
    nlohmann::json j;
    j["kernel"] = kern.name;
    j["cap"] = law.cap;
    j["p_mass"] = law.p_mass;
    j["tail"] = law.tail;
    nlohmann::json p = nlohmann::json::object(), rl = nlohmann::json::object(), rr = nlohmann::json::object();
    for (int len = 0; len <= law.cap; ++len)
        for (long c = 0; c < static_cast<long>(law.p[len].size()); ++c) {
            Word x = word_decode(c, len, law.A);
            if (len > 0 && law.p[len][c] != 0) p[spell(x)] = law.p[len][c];
            for (std::size_t b = 0; b < law.rho_l.size(); ++b)
                if (law.rho_l[b][len][c] != 0) {
                    std::string w = spell(x);
                    rl[kern.left[b] + (w.empty() ? "" : " " + w)] = law.rho_l[b][len][c];
                }
            for (std::size_t b = 0; b < law.rho_r.size(); ++b)
                if (law.rho_r[b][len][c] != 0) {
                    std::string w = spell(x);
                    rr[(w.empty() ? "" : w + " ") + kern.right[b]] = law.rho_r[b][len][c];
                }
        }
    j["p"] = p;
    j["rho_L"] = rl;
    j["rho_R"] = rr;
    os << j.dump() << '\n';
}

// ---- factorization defect ----

double xi_n(const MemoryKernel& kern, const FactorizedLaw& law, int bl, const Word& x, int br) {
    int n = static_cast<int>(x.size()), A = kern.A();
    if (n > law.cap) throw CapacityError("sequence longer than the table cap");
    // S[i]: weight of x[0..i) split as a left block followed by >= 1 steps.
    std::vector<double> S(n + 1, 0.0), left(n + 1, 0.0);
    for (int i = 0; i < n; ++i) left[i] = law.rho_l[bl][i][code_of(x.data(), i, A)];
    for (int j = 0; j < n; ++j) {
        double base = left[j] + S[j];
        if (base == 0) continue;
        long code = 0;
        for (int i = j + 1; i <= n; ++i) {
            code = code * A + x[i - 1];
            S[i] += base * law.p[i - j][code];
        }
    }
    double xi = 0;
    for (int i = 1; i <= n; ++i)
        if (S[i] != 0) xi += S[i] * law.rho_r[br][n - i][code_of(x.data() + i, n - i, A)];
    return xi;
}

DefectReport factorization_defect(const MemoryKernel& kern, const FactorizedLaw& law, int n,
                                  const std::vector<SequenceTest>& tests) {
    if (n < 1) throw ParameterError("defect needs n >= 1");
    if (n > law.cap || std::pow(double(kern.A()), n) > 5e6)
        throw CapacityError("defect enumeration of length " + std::to_string(n) + " exceeds the cap");
    DefectReport r;
    r.n = n;
    std::vector<double> acc(tests.size(), 0.0);
    int L = static_cast<int>(kern.left.size()), R = static_cast<int>(kern.right.size());
    for (int bl = 0; bl < L; ++bl)
        for (long c = 0; c < ipow(kern.A(), n); ++c) {
            Word x = word_decode(c, n, kern.A());
            for (int br = 0; br < R; ++br) {
                double psi = psi_n(kern, bl, x, br);
                double xi = xi_n(kern, law, bl, x, br);
                r.psi_mass += psi;
                r.xi_mass += xi;
                r.total_variation += std::fabs(psi - xi);
                for (std::size_t t = 0; t < tests.size(); ++t) acc[t] += tests[t](bl, x, br) * (psi - xi);
            }
        }
    for (double a : acc) r.defects.push_back(std::fabs(a));
    return r;
}

DecayFit fit_decay(const std::vector<DefectReport>& reports) {
    DecayFit f;
    std::vector<double> xs, ys;
    double worst = 0;
    for (const auto& r : reports) {
        worst = std::max(worst, r.total_variation);
        if (r.total_variation > 1e-300) {
            xs.push_back(r.n);
            ys.push_back(std::log(r.total_variation));
        }
    }
    if (worst <= 1e-13) {
        f.exact_zero = true;
        f.r2 = 1;
        return f;
    }
    if (xs.size() < 3) throw ParameterError("decay fit needs at least three nonzero defects");
    double n = static_cast<double>(xs.size()), mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i] / n;
        my += ys[i] / n;
    }
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    f.rate = sxy / sxx;
    f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

// ---- generating functions ----

IdentityReport generating_identity_check(const MemoryKernel& kern, const DepthWeights& dw,
                                         const std::vector<double>& zs, double tol) {
    double zmax = 0;
    for (double z : zs) {
        if (!(z >= 0)) throw ParameterError("generating functions are checked on z >= 0");
        zmax = std::max(zmax, z);
    }
    for (int N = 128;; N *= 2) {
        auto ms = mass_series(kern, dw, N);
        const std::vector<double>* all[] = {&ms.mu, &ms.nu, &ms.rho_l, &ms.rho_r, &ms.single};
        bool ok = true;
        for (const auto* s : all) {
            double r = tail_ratio(*s);
            for (double z : {zmax, 1.0}) {
                if (z * r >= 1) {
                    if (z == 1.0 && s != &ms.nu) continue;
                    throw ParameterError("z = " + std::to_string(z) + " is outside the certified radius");
                }
                if (z == 1.0 && s != &ms.nu) continue;
                double tail = r == 0 ? 0 : std::fabs((*s)[N]) * std::pow(z, N) * z * r / (1 - z * r);
                if (tail > tol) ok = false;
            }
        }
        if (!ok) {
            if (N >= 8192) throw ParameterError("series truncation cannot be certified on this grid");
            continue;
        }
        auto eval = [&](const std::vector<double>& s, double z) {
            double v = 0;
            for (int i = N; i >= 0; --i) v = v * z + s[i];
            return v;
        };
        IdentityReport rep;
        rep.terms = N;
        rep.B_at_one = eval(ms.nu, 1.0);
        for (double z : zs) {
            double B = eval(ms.nu, z);
            if (B >= 1) throw ParameterError("B(z) >= 1 inside the grid");
            double cl = eval(ms.rho_l, z), cr = eval(ms.rho_r, z);
            double lhs = eval(ms.mu, z);
            double g = eval(ms.single, z) + cl * cr;  // no middle cluster
            double rhs = g - cl * cr + cl * cr / (1 - B);
            rep.z.push_back(z);
            rep.lhs.push_back(lhs);
            rep.rhs.push_back(rhs);
            rep.residual.push_back(std::fabs(lhs - rhs));
            rep.max_residual = std::max(rep.max_residual, rep.residual.back());
        }
        return rep;
    }
}

// ---- push-forward ----

namespace {

std::vector<int> vplus(std::vector<int> a, const std::vector<int>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

std::vector<int> flip(std::vector<int> v) {
    for (std::size_t i = 1; i < v.size(); ++i) v[i] = -v[i];
    return v;
}

}  // namespace

PushForward pushforward(const MemoryKernel& kern, const DepthWeights& dw, const FactorizedLaw& law) {
    int A = kern.A(), L = static_cast<int>(kern.left.size()), R = static_cast<int>(kern.right.size());
    auto V = [&](const std::string& s) -> const std::vector<int>& {
        auto it = kern.displacement.find(s);
        if (it == kern.displacement.end()) throw ParameterError("kernel " + kern.name + ": no displacement for " + s);
        return it->second;
    };
    std::vector<std::vector<int>> vl, vleft, vright;
    for (const auto& s : kern.letters) vl.push_back(V(s));
    for (const auto& s : kern.left) vleft.push_back(V(s));
    for (const auto& s : kern.right) vright.push_back(V(s));
    PushForward pf;
    pf.d = static_cast<int>(vl[0].size());
    for (const auto* g : {&vl, &vleft, &vright})
        for (const auto& v : *g)
            if (static_cast<int>(v.size()) != pf.d) throw ParameterError("displacements of mixed dimension");

    std::map<int, double> by_par;
    for (int len = 0; len <= law.cap; ++len)
        for (long c = 0; c < ipow(A, len); ++c) {
            Word x = word_decode(c, len, A);
            std::vector<int> v(pf.d, 0);
            for (int s : x) v = vplus(v, vl[s]);
            if (len > 0 && law.p[len][c] != 0) {
                pf.p_hat[v] += law.p[len][c];
                pf.p_mass += law.p[len][c];
                by_par[v[0]] += law.p[len][c];
            }
            for (int b = 0; b < L; ++b)
                if (law.rho_l[b][len][c] != 0) pf.rho_l_hat[vplus(v, vleft[b])] += law.rho_l[b][len][c];
            for (int b = 0; b < R; ++b)
                if (law.rho_r[b][len][c] != 0) pf.rho_r_hat[vplus(v, vright[b])] += law.rho_r[b][len][c];
        }

    // (P2)
    pf.p2_directed = true;
    for (const auto* g : {&vl, &vleft, &vright})
        for (const auto& v : *g)
            if (v[0] <= 0) pf.p2_directed = false;

    // (P1): geometric rate of the step mass per unit of e_1 displacement. With
    // directed letters every word reaching X = l has at most l letters.
    std::vector<double> xs, ys;
    for (auto [l, mass] : by_par)
        if (l >= 2 && l <= law.cap && mass > 0) {
            xs.push_back(l);
            ys.push_back(std::log(mass));
        }
    if (xs.size() >= 2) {
        double n = static_cast<double>(xs.size()), mx = 0, my = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i] / n;
            my += ys[i] / n;
        }
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        pf.tail_rate = std::exp(sxy / sxx);
    }
    pf.p1_tails = pf.tail_rate < 1;

    // (P3), (P4): uniform floors a_0(s) > 0 on the required letters.
    auto floor_of = [&](int s) { return dw.a[0][s]; };
    std::vector<int> e1(pf.d, 0);
    e1[0] = 1;
    for (int s = 0; s < A; ++s)
        if (vl[s] == e1 && floor_of(s) > 0) pf.p3_aperiodic = true;
    if (pf.d == 1) {
        pf.p4_irreducible = true;
    } else {
        std::set<int> rs;
        for (int s = 0; s < A; ++s) rs.insert(vl[s][0]);
        for (int r : rs) {
            if (r <= 0) continue;
            bool all = true;
            for (int i = 1; i < pf.d && all; ++i) {
                std::vector<int> want(pf.d, 0);
                want[0] = r;
                want[i] = 1;
                bool found = false;
                for (int s = 0; s < A; ++s)
                    if (vl[s] == want && floor_of(s) > 0) found = true;
                all = found;
            }
            if (all) pf.p4_irreducible = true;
        }
    }

    // (P5): the perp flip permutes each symbol class and leaves Psi invariant.
    auto partner = [&](const std::vector<std::vector<int>>& g) {
        std::vector<int> sigma(g.size(), -1);
        for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t j = 0; j < g.size(); ++j)
                if (g[j] == flip(g[i])) sigma[i] = static_cast<int>(j);
        return sigma;
    };
    auto sl = partner(vl), sleft = partner(vleft), sright = partner(vright);
    bool perm = true;
    for (const auto* s : {&sl, &sleft, &sright})
        for (int v : *s)
            if (v < 0) perm = false;
    if (perm) {
        pf.p5_symmetric = true;
        for (const auto& [key, row] : kern.table) {
            Word fk;
            for (int v : key) fk.push_back(v < A ? sl[v] : A + sleft[v - A]);
            const auto& frow = kern.table.at(fk);
            for (int t = 0; t < kern.targets(); ++t) {
                int ft = t < A ? sl[t] : A + sright[t - A];
                if (std::fabs(frow[ft] - row[t]) > 1e-15 * std::max(1.0, row[t])) pf.p5_symmetric = false;
            }
        }
        for (int b = 0; b < L; ++b)
            if (kern.left_weight[sleft[b]] != kern.left_weight[b]) pf.p5_symmetric = false;
    }
    for (const auto& [v, w] : pf.p_hat) {
        auto it = pf.p_hat.find(flip(v));
        double o = it == pf.p_hat.end() ? 0.0 : it->second;
        pf.symmetry_defect = std::max(pf.symmetry_defect, std::fabs(w - o));
    }
    return pf;
}

// ---- cut statistics ----

double cut_floor(const MemoryKernel& kern, const DepthWeights& dw, int n) {
    // key: (i, j, I_{j+1..n+1}); value: (mass with no stick from [i, j]
    // crossing i - 1/2, total mass)
    std::map<std::vector<int>, std::pair<double, double>> acc;
    for_each_stick(kern, dw, n, [&](int, const Word&, int, const std::vector<int>& I, double w) {
        for (int i = 1; i <= n + 1; ++i) {
            bool ok = true;
            for (int j = i; j <= n + 1; ++j) {
                ok = ok && I[j] <= j - i;
                std::vector<int> key{i, j};
                key.insert(key.end(), I.begin() + j + 1, I.end());
                auto& e = acc[key];
                if (ok) e.first += w;
                e.second += w;
            }
        }
    });
    double f = 1;
    for (const auto& [k, e] : acc)
        if (e.second > 0) f = std::min(f, e.first / e.second);
    return f;
}

std::vector<double> no_cut_curve(const MemoryKernel& kern, const DepthWeights& dw, int n) {
    // mass by the last cut among the edges 0..n-1 (-1 if none)
    std::vector<double> by_last(n + 1, 0.0);
    double total = 0;
    for_each_stick(kern, dw, n, [&](int, const Word&, int, const std::vector<int>& I, double w) {
        auto s = make_sticks(I);
        int last = -1;
        for (int k = 0; k < n; ++k)
            if (s.cut[k]) last = k;
        by_last[last + 1] += w;
        total += w;
    });
    std::vector<double> curve;
    for (int l = 1; l <= n; ++l) {
        double m = 0;
        for (int last = -1; last < n - l; ++last) m += by_last[last + 1];
        curve.push_back(m / total);
    }
    return curve;
}

}  // namespace fkdl
