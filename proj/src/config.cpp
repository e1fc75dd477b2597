#include "mdiq/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mdiq {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

RunConfig RunConfig::from_string(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              " has no '=': " + t);
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) +
                              " has an empty key");
        if (cfg.values.count(key))
            throw ConfigError("duplicate config key '" + key + "'");
        cfg.values[key] = value;
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_string(ss.str());
}

std::string RunConfig::get_string(const std::string& key,
                                  const std::string& dflt) const {
    const auto it = values.find(key);
    return it == values.end() ? dflt : it->second;
}

double RunConfig::get_double(const std::string& key, double dflt) const {
    const auto it = values.find(key);
    if (it == values.end()) return dflt;
    const std::string& s = it->second;
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("config key '" + key + "' is not a number: " + s);
    return v;
}

std::uint64_t RunConfig::get_u64(const std::string& key,
                                 std::uint64_t dflt) const {
    const auto it = values.find(key);
    if (it == values.end()) return dflt;
    const std::string& s = it->second;
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("config key '" + key + "' is not an unsigned integer: " + s);
    return v;
}

std::size_t RunConfig::get_size(const std::string& key, std::size_t dflt) const {
    return static_cast<std::size_t>(get_u64(key, dflt));
}

bool RunConfig::get_bool(const std::string& key, bool dflt) const {
    const auto it = values.find(key);
    if (it == values.end()) return dflt;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config key '" + key + "' is not a boolean: " + it->second);
}

void RunConfig::require_known(const std::set<std::string>& allowed) const {
    for (const auto& [key, value] : values)
        if (!allowed.count(key))
            throw ConfigError("unknown config key '" + key + "'");
}

std::string RunConfig::canonical_text() const {
    std::string out;
    for (const auto& [key, value] : values) // std::map iterates sorted
        out += key + "=" + value + "\n";
    return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string config_hash_hex(const RunConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(cfg.canonical_text())));
    return buf;
}

} // namespace mdiq
