#include "fkdl/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include <openssl/evp.h>

namespace fkdl {

const char* const kExperiments[] = {"verify",        "xi-scan",      "cone-density", "interface",
                                    "pinning-curve", "renewal-demo", "local-time",   nullptr};

bool is_experiment(const std::string& kind) {
    for (int i = 0; kExperiments[i]; ++i)
        if (kind == kExperiments[i]) return true;
    return false;
}

namespace {

using json = nlohmann::json;

const double kBetaC2 = std::log(1 + std::sqrt(2.0));

json range(int a, int b) {
    json j = json::array();
    for (int i = a; i <= b; ++i) j.push_back(i);
    return j;
}

// Defaults per experiment; the weight keys are handled separately.
std::map<std::string, json> schema(const std::string& kind) {
    std::map<std::string, json> s{{"chain.seed", 1}, {"chain.workers", 0}, {"output.csv", true}};
    auto add = [&](std::initializer_list<std::pair<const std::string, json>> kv) { s.insert(kv); };
    if (kind == "verify") {
        add({{"verify.sweeps", 100000},
             {"verify.burn_in", 1000},
             {"verify.thin", 1},
             {"verify.q", {1.0, 1.5, 2.0, 3.0}},
             {"verify.sigmas", 4.0},
             {"verify.kernels", ""},
             {"verify.renewal_trials", 200000}});
    } else if (kind == "xi-scan") {
        add({{"model.d", 2},
             {"model.q", 2.0},
             {"xi.half_length", 128},
             {"xi.half_width", 16},
             {"xi.ns", range(4, 16)},
             {"xi.end_margin", 16},
             {"xi.method", "prefactor-fit"},
             {"xi.n_min", 4},
             {"xi.n_max", 16},
             {"xi.inverse_n", false},
             {"chain.sweeps", 60000},
             {"chain.burn_in", 6000},
             {"chain.dynamics", "edwards-sokal"}});
    } else if (kind == "cone-density") {
        add({{"model.d", 2},
             {"model.q", 2.0},
             {"model.n", 64},
             {"cone.margin", 8},
             {"cone.half_width", 12},
             {"chain.sweeps", 8000},
             {"chain.burn_in", 800},
             {"chain.thin", 4}});
    } else if (kind == "interface") {
        add({{"model.q", 2},
             {"interface.ns", {32, 64, 128}},
             {"interface.heat_bath", false},
             {"interface.check", true},
             {"interface.profiles", false},
             {"chain.sweeps", 20000},
             {"chain.burn_in", 2000},
             {"chain.thin", 20}});
    } else if (kind == "pinning-curve") {
        add({{"pinning.d", 3},
             {"pinning.C1", 1.0},
             {"pinning.lambda_min", 0.01},
             {"pinning.lambda_max", 1.0},
             {"pinning.points", 17},
             {"pinning.fit", true}});
    } else if (kind == "renewal-demo") {
        add({{"renewal.kernel", "memory1"},
             {"renewal.cap", 12},
             {"renewal.n_min", 4},
             {"renewal.n_max", 12},
             {"renewal.z", {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}}});
    } else if (kind == "local-time") {
        add({{"local_time.k", 1},
             {"local_time.lazy", 0.5},
             {"local_time.n", 400},
             {"local_time.trials", 100000},
             {"local_time.deltas", {0.15, 0.2, 0.25}},
             {"renewal.law", {0.5, 0.5}},
             {"renewal.ns", {10, 50, 100}},
             {"renewal.trials", 100000}});
    } else {
        throw ConfigError("unknown experiment '" + kind + "'");
    }
    return s;
}

// Default (beta, J) for experiments with model weights.
bool default_weights(const std::string& kind, json& beta, json& J) {
    if (kind == "xi-scan") {
        beta = 0.75 * kBetaC2;
        J = {0.0, 0.5, 1.0, 1.5, 2.0, 3.0};
    } else if (kind == "cone-density") {
        beta = 0.75 * kBetaC2;
        J = {1.0, 3.0};
    } else if (kind == "interface") {
        beta = 1.0;
        J = {0.5, 1.0};
    } else {
        return false;
    }
    return true;
}

void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it->is_object())
            flatten(*it, key, out);
        else
            out[key] = *it;
    }
}

bool same_type(const json& def, const json& v) {
    if (def.is_boolean()) return v.is_boolean();
    if (def.is_number()) return v.is_number();
    if (def.is_string()) return v.is_string();
    if (def.is_array()) {
        if (v.is_number()) return true;
        if (!v.is_array()) return false;
        for (const auto& e : v)
            if (!e.is_number()) return false;
        return true;
    }
    return false;
}

std::vector<double> as_list(const json& v) {
    std::vector<double> out;
    if (v.is_array())
        for (const auto& e : v) out.push_back(e.get<double>());
    else
        out.push_back(v.get<double>());
    return out;
}

json from_list(const std::vector<double>& v, bool scalar) {
    if (scalar) return v.front();
    return json(v);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& kind, const json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    c.kind_ = kind;
    auto sch = schema(kind);
    std::map<std::string, json> in;
    flatten(doc, "", in);
    if (auto it = in.find("experiment"); it != in.end()) {
        if (!it->second.is_string() || it->second.get<std::string>() != kind)
            throw ConfigError("experiment: config is for '" + it->second.dump() + "', not '" + kind + "'");
        in.erase(it);
    }
    json beta, J;
    bool weighted = default_weights(kind, beta, J);
    static const std::set<std::string> kWeightKeys{"model.beta", "model.J", "model.x", "model.xp"};
    std::vector<std::string> beta_style, x_style;
    for (const auto& [k, v] : in) {
        if (weighted && kWeightKeys.count(k)) {
            if (!(v.is_number() || (v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) {
                                        return e.is_number();
                                    }))))
                throw ConfigError(k + ": expected a number or a list of numbers");
            (k == "model.beta" || k == "model.J" ? beta_style : x_style).push_back(k);
            continue;
        }
        auto s = sch.find(k);
        if (s == sch.end()) throw ConfigError(k + ": unknown key for experiment '" + kind + "'");
        if (!same_type(s->second, v)) throw ConfigError(k + ": expected " + std::string(s->second.type_name()));
    }
    if (!beta_style.empty() && !x_style.empty()) {
        std::string msg = "conflicting keys";
        for (const auto& k : beta_style) msg += " " + k;
        msg += " and";
        for (const auto& k : x_style) msg += " " + k;
        throw ConfigError(msg + ": give either (model.x, model.xp) or (model.beta, model.J)");
    }
    for (auto& [k, def] : sch) c.values_[k] = in.count(k) ? in.at(k) : def;
    if (weighted) {
        if (!x_style.empty()) {
            if (!in.count("model.x")) throw ConfigError("model.x: required when model.xp is given");
            if (!in.at("model.x").is_number()) throw ConfigError("model.x: expected a number");
            double x = in.at("model.x").get<double>();
            if (!(x > 0)) throw ConfigError("model.x: must be > 0");
            c.values_["model.x"] = x;
            c.values_["model.xp"] = in.count("model.xp") ? in.at("model.xp") : json(x);
        } else {
            if (in.count("model.beta")) beta = in.at("model.beta");
            if (in.count("model.J")) J = in.at("model.J");
            if (!beta.is_number()) throw ConfigError("model.beta: expected a number");
            double b = beta.get<double>();
            if (!(b > 0)) throw ConfigError("model.beta: must be > 0");
            std::vector<double> xp;
            for (double j : as_list(J)) {
                if (j < 0) throw ConfigError("model.J: must be >= 0");
                xp.push_back(std::expm1(b * j));
            }
            c.values_["model.x"] = std::expm1(b);
            c.values_["model.xp"] = from_list(xp, J.is_number());
        }
        for (double xp : as_list(c.values_["model.xp"]))
            if (xp < 0) throw ConfigError("model.xp: must be >= 0");
    }
    return c;
}

RunConfig RunConfig::load(const std::string& kind, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    json doc;
    try {
        doc = json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse(kind, doc);
}

double RunConfig::num(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end() || !it->second.is_number()) throw ConfigError(key + ": not a number");
    return it->second.get<double>();
}

long RunConfig::integer(const std::string& key) const {
    double v = num(key);
    if (v != std::floor(v)) throw ConfigError(key + ": expected an integer");
    return static_cast<long>(v);
}

bool RunConfig::flag(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end() || !it->second.is_boolean()) throw ConfigError(key + ": not a boolean");
    return it->second.get<bool>();
}

std::string RunConfig::str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end() || !it->second.is_string()) throw ConfigError(key + ": not a string");
    return it->second.get<std::string>();
}

std::vector<double> RunConfig::list(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key + ": missing");
    return as_list(it->second);
}

std::vector<int> RunConfig::int_list(const std::string& key) const {
    std::vector<int> out;
    for (double v : list(key)) {
        if (v != std::floor(v)) throw ConfigError(key + ": expected integers");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

void RunConfig::set(const std::string& key, const json& v) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key + ": unknown key for experiment '" + kind_ + "'");
    if (!same_type(it->second, v)) throw ConfigError(key + ": expected " + std::string(it->second.type_name()));
    it->second = v;
}

std::string RunConfig::canonical() const {
    json j = json::object();
    j["experiment"] = kind_;
    // numbers are written as doubles so 2 and 2.0 hash alike
    auto norm = [](const json& v) {
        if (v.is_number()) return json(v.get<double>());
        if (!v.is_array()) return v;
        json a = json::array();
        for (const auto& e : v) a.push_back(e.is_number() ? json(e.get<double>()) : e);
        return a;
    };
    // weights are rounded so beta/J and x/x' inputs agree past libm ulps
    auto round12 = [](double d) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.12g", d);
        return std::strtod(buf, nullptr);
    };
    auto weight = [&](const json& v) {
        if (v.is_number()) return json(round12(v.get<double>()));
        json a = json::array();
        for (const auto& e : v) a.push_back(round12(e.get<double>()));
        return a;
    };
    for (const auto& [k, v] : values_) j[k] = (k == "model.x" || k == "model.xp") ? weight(v) : norm(v);
    return j.dump();
}

std::string RunConfig::digest() const { return sha256_hex(canonical()); }

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

}  // namespace fkdl
