#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

// Flat `key = value` run configuration. Every CLI run is fully specified
// by one config file plus a command and a seed; unknown keys are rejected.

namespace mdiq {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::map<std::string, std::string> values;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_string(const std::string& text);

    bool has(const std::string& key) const { return values.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& dflt) const;
    double get_double(const std::string& key, double dflt) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t dflt) const;
    std::size_t get_size(const std::string& key, std::size_t dflt) const;
    bool get_bool(const std::string& key, bool dflt) const;

    // ConfigError naming the first unknown key.
    void require_known(const std::set<std::string>& allowed) const;

    // sorted "key=value" lines; hashing input
    std::string canonical_text() const;
};

std::uint64_t fnv1a64(const std::string& bytes);

// 16 hex digits over the canonical config text.
std::string config_hash_hex(const RunConfig& cfg);

} // namespace mdiq
