#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dlev {

enum class ConfigType { Int, Real, Bool, String, RealList, IntList };

struct ConfigKey {
    std::string key; // "section.name"
    ConfigType type;
    std::string default_value;
    std::string description;
    // Numeric range, applied to every list element too.
    double lo = -1e300;
    double hi = 1e300;
    bool lo_open = false;
    std::vector<std::string> choices; // String keys only; empty = free text
};

// Every recognised key with its default, in output order.
const std::vector<ConfigKey>& config_schema();

// Resolved key-value configuration. Values are kept as text and parsed on access.
class RunConfig {
  public:
    RunConfig(); // all defaults

    // Applies an INI file; returns one message per problem (unknown key, bad section).
    std::vector<std::string> apply_file(const std::filesystem::path& path);
    // Returns a message when the key is unknown.
    std::optional<std::string> set(const std::string& key, const std::string& value);

    // Type and range violations of the current values, one message each.
    std::vector<std::string> violations() const;

    const std::string& raw(const std::string& key) const;
    long long get_int(const std::string& key) const;
    double get_real(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    const std::string& get_string(const std::string& key) const;
    std::vector<double> get_real_list(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;
    std::uint64_t seed() const;

    // Sectioned INI text of every key in schema order.
    std::string to_ini() const;
    // FNV-1a 64 of to_ini().
    std::uint64_t hash() const;

  private:
    std::map<std::string, std::string> values_;
};

// defaults < file < overrides. Throws UsageError listing every violation.
RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         const std::vector<std::pair<std::string, std::string>>& overrides);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

} // namespace dlev
