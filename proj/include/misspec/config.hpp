#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace misspec {

/// Parse or lookup failure; `line` is 0 when not tied to a source line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& source, std::size_t line, const std::string& msg);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Scalar config value. Integers keep their exact text so 64-bit seeds survive.
struct ConfigScalar {
    std::variant<bool, std::int64_t, double, std::string> value;
    std::string text;  // as written, for integer round-trips
};

struct ConfigValue {
    std::variant<ConfigScalar, std::vector<ConfigScalar>> value;
    std::size_t line = 0;
    bool is_array() const noexcept { return value.index() == 1; }
};

/// One [section] of key = value pairs.
class ConfigTable {
public:
    ConfigTable() = default;
    ConfigTable(std::string source, std::string name) : source_(std::move(source)), name_(std::move(name)) {}

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    const std::string& name() const noexcept { return name_; }

    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;

    /// Numeric list. Accepts a scalar, an array, or a range string
    /// "start:stop:step" (several separated by commas), stop inclusive.
    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

    /// Rejects keys outside `allowed`, reporting the offending line.
    void require_known(const std::vector<std::string>& allowed) const;

    void set(const std::string& key, ConfigValue v) { entries_[key] = std::move(v); }
    const std::map<std::string, ConfigValue>& entries() const noexcept { return entries_; }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const;

private:
    const ConfigValue& at(const std::string& key) const;
    const ConfigScalar& scalar(const std::string& key) const;

    std::string source_;
    std::string name_;
    std::map<std::string, ConfigValue> entries_;
};

class Config {
public:
    static Config parse(const std::string& text, const std::string& source = "<config>");
    static Config load(const std::filesystem::path& path);

    bool has_section(const std::string& name) const { return sections_.count(name) != 0; }
    /// Empty table when the section is absent.
    const ConfigTable& section(const std::string& name) const;

private:
    std::string source_;
    std::map<std::string, ConfigTable> sections_;
};

/// Builder for the resolved config embedded in manifests. Keys are written in
/// insertion order so the text is stable.
class ConfigWriter {
public:
    void section(const std::string& name);
    void put(const std::string& key, double v);
    void put(const std::string& key, std::int64_t v);
    void put_u64(const std::string& key, std::uint64_t v);
    void put(const std::string& key, bool v);
    void put(const std::string& key, const std::string& v);
    void put(const std::string& key, const std::vector<double>& v);
    const std::string& text() const noexcept { return text_; }

private:
    std::string text_;
};

}  // namespace misspec
