// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "lumen/optimize.hpp"
#include "lumen/synthgen.hpp"

namespace lumen::inline LUMEN_ABI {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Value of a `key = value` line: number, bool, quoted string or
/// bracketed (possibly nested) array.
struct ConfigValue {
    enum class Kind { Number, Bool, String, Array };
    Kind kind = Kind::Number;
    double number = 0;
    bool boolean = false;
    std::string text;
    std::vector<ConfigValue> items;
};

/// Minimal TOML subset: `[section.sub]` headers, `key = value` lines and
/// `#` comments. Keys are addressed as "section.sub.key".
class ConfigFile {
public:
    static ConfigFile parse(const std::string& text, const std::string& origin = "config");
    static ConfigFile load(const std::filesystem::path& path);

    bool has(const std::string& key) const;
    const ConfigValue& at(const std::string& key) const;

    double number(const std::string& key) const;
    std::int64_t integer(const std::string& key) const;
    bool boolean(const std::string& key) const;
    std::string string(const std::string& key) const;
    std::vector<double> numbers(const std::string& key) const;
    Vec3 vec3(const std::string& key) const;

    /// Throws for keys under `prefix` that were never read.
    void reject_unused(const std::string& prefix) const;
    /// Throws for keys outside the given top-level sections.
    void reject_sections(const std::set<std::string>& sections) const;

    std::vector<std::string> keys() const;

private:
    std::string origin_;
    std::map<std::string, ConfigValue> values_;
    std::map<std::string, int> lines_;
    mutable std::set<std::string> used_;
    [[noreturn]] void fail(const std::string& key, const std::string& message) const;
};

/// [train], [train.lr], [train.weights] and [train.densify] keys.
void apply_train_config(const ConfigFile& file, TrainConfig& config);

/// [tube], [tube.light] and [tube.trajectory] keys.
void apply_tube_config(const ConfigFile& file, TubeSpec& spec);

struct GenConfig {
    TubeSpec tube;
    std::size_t points = 12000;
    std::uint64_t seed = 0;
};

/// [gen] keys plus the tube sections.
GenConfig gen_config_from(const ConfigFile& file);

}  // namespace lumen::inline LUMEN_ABI
