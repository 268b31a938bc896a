#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace fkdl {

// Validation failure; the message names the offending key paths.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

extern const char* const kExperiments[];
bool is_experiment(const std::string& kind);

// Flat configuration with dotted keys. Nested JSON objects are flattened, so
// {"model": {"q": 2}} and {"model.q": 2} are the same file. Unknown keys are
// errors. (model.beta, model.J) inputs are converted to (model.x, model.xp)
// with x = e^beta - 1 and x' = e^{beta J} - 1; supplying both styles is an
// error naming the keys involved.
class RunConfig {
public:
    static RunConfig parse(const std::string& kind, const nlohmann::json& doc);
    static RunConfig load(const std::string& kind, const std::string& path);
    static RunConfig defaults(const std::string& kind) { return parse(kind, nlohmann::json::object()); }

    const std::string& kind() const { return kind_; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    double num(const std::string& key) const;
    long integer(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::string str(const std::string& key) const;
    // A scalar is returned as a one-element list.
    std::vector<double> list(const std::string& key) const;
    std::vector<int> int_list(const std::string& key) const;
    void set(const std::string& key, const nlohmann::json& v);

    // Canonical form: sorted keys, beta/J replaced by x/x', compact dump.
    std::string canonical() const;
    // SHA-256 of the canonical form, hex encoded.
    std::string digest() const;
    const std::map<std::string, nlohmann::json>& values() const { return values_; }

private:
    std::string kind_;
    std::map<std::string, nlohmann::json> values_;
};

std::string sha256_hex(const std::string& data);

}  // namespace fkdl
