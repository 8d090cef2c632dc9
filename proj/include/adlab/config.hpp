#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace adlab {

struct ConfigKey {
    std::string key;  // section.name
    std::string default_value;
    std::string doc;
};

/// Every recognised key with its default and meaning.
const std::vector<ConfigKey>& config_schema();

/// Flat key=value configuration with [section] headers. A key `name` inside
/// section `[s]` is stored as `s.name`. Unknown keys are a ConfigError.
class Config {
public:
    /// All schema keys at their defaults.
    static Config defaults();
    /// Defaults overlaid with the file contents. Throws ConfigError.
    static Config parse(std::istream& in, const std::string& source = "<config>");
    static Config load(const std::string& path);

    /// Applies one "section.key=value" override and records it.
    void apply_override(const std::string& assignment);
    void set(const std::string& key, const std::string& value);

    const std::string& get(const std::string& key) const;
    double get_real(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_reals(const std::string& key) const;
    std::vector<std::size_t> get_sizes(const std::string& key) const;

    const std::vector<std::string>& overrides() const noexcept { return overrides_; }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    /// Canonical sectioned text; parse(dump()) reproduces the same values.
    std::string dump() const;

private:
    std::map<std::string, std::string> values_;
    std::vector<std::string> overrides_;
};

/// Splits "a,b , c" on commas and trims whitespace.
std::vector<std::string> split_list(const std::string& text);

}  // namespace adlab
