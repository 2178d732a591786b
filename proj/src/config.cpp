#include "misspec/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "misspec/csv.hpp"
#include "misspec/errors.hpp"

namespace misspec {

ConfigError::ConfigError(const std::string& source, std::size_t line, const std::string& msg)
    : std::runtime_error(line ? source + ":" + std::to_string(line) + ": " + msg : source + ": " + msg),
      line_(line) {}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool is_bare_key(std::string_view k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    return true;
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
        if (line[i] == '#' && !in_str) return line.substr(0, i);
    }
    return line;
}

struct Cursor {
    std::string_view s;
    std::size_t pos = 0;
    const std::string& source;
    std::size_t line;

    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(source, line, msg); }
    void skip_ws() {
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    }
    bool done() {
        skip_ws();
        return pos >= s.size();
    }
};

ConfigScalar parse_scalar(Cursor& c) {
    c.skip_ws();
    if (c.pos >= c.s.size()) c.fail("missing value");
    if (c.s[c.pos] == '"') {
        std::string out;
        ++c.pos;
        while (true) {
            if (c.pos >= c.s.size()) c.fail("unterminated string");
            const char ch = c.s[c.pos++];
            if (ch == '"') break;
            if (ch == '\\') {
                if (c.pos >= c.s.size()) c.fail("unterminated escape");
                const char e = c.s[c.pos++];
                switch (e) {
                    case '"': out.push_back('"'); break;
                    case '\\': out.push_back('\\'); break;
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    default: c.fail(std::string("unsupported escape \\") + e);
                }
            } else {
                out.push_back(ch);
            }
        }
        return {out, out};
    }
    const std::size_t start = c.pos;
    while (c.pos < c.s.size() && c.s[c.pos] != ',' && c.s[c.pos] != ']' && c.s[c.pos] != ' ' &&
           c.s[c.pos] != '\t')
        ++c.pos;
    std::string tok(c.s.substr(start, c.pos - start));
    if (tok == "true") return {true, tok};
    if (tok == "false") return {false, tok};
    std::string clean;
    for (char ch : tok)
        if (ch != '_') clean.push_back(ch);
    std::string_view num = clean;
    if (!num.empty() && num.front() == '+') num.remove_prefix(1);
    if (num.find_first_of(".eE") == std::string_view::npos && num != "inf" && num != "nan") {
        std::int64_t i = 0;
        const auto r = std::from_chars(num.data(), num.data() + num.size(), i);
        if (r.ec == std::errc() && r.ptr == num.data() + num.size()) return {i, clean};
        std::uint64_t u = 0;
        const auto ru = std::from_chars(num.data(), num.data() + num.size(), u);
        if (ru.ec == std::errc() && ru.ptr == num.data() + num.size())
            return {static_cast<double>(u), clean};
    }
    double d = 0.0;
    const auto r = std::from_chars(num.data(), num.data() + num.size(), d);
    if (r.ec != std::errc() || r.ptr != num.data() + num.size() || num.empty())
        c.fail("cannot parse value '" + tok + "'");
    if (!std::isfinite(d)) c.fail("non-finite value '" + tok + "'");
    return {d, clean};
}

ConfigValue parse_value(Cursor& c) {
    ConfigValue v;
    v.line = c.line;
    c.skip_ws();
    if (c.pos < c.s.size() && c.s[c.pos] == '[') {
        ++c.pos;
        std::vector<ConfigScalar> items;
        c.skip_ws();
        if (c.pos < c.s.size() && c.s[c.pos] == ']') {
            ++c.pos;
        } else {
            while (true) {
                items.push_back(parse_scalar(c));
                c.skip_ws();
                if (c.pos >= c.s.size()) c.fail("unterminated array");
                if (c.s[c.pos] == ',') {
                    ++c.pos;
                    c.skip_ws();
                    if (c.pos < c.s.size() && c.s[c.pos] == ']') {
                        ++c.pos;
                        break;
                    }
                    continue;
                }
                if (c.s[c.pos] == ']') {
                    ++c.pos;
                    break;
                }
                c.fail("expected ',' or ']' in array");
            }
        }
        v.value = std::move(items);
    } else {
        v.value = parse_scalar(c);
    }
    if (!c.done()) c.fail("unexpected trailing text");
    return v;
}

std::string describe(const ConfigScalar& s) {
    switch (s.value.index()) {
        case 0: return "boolean";
        case 1: return "integer";
        case 2: return "float";
        default: return "string";
    }
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& source) {
    Config cfg;
    cfg.source_ = source;
    std::string current;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t> section_line;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(source, line_no, "malformed section header");
            const std::string name(trim(line.substr(1, line.size() - 2)));
            if (!is_bare_key(name)) throw ConfigError(source, line_no, "invalid section name '" + name + "'");
            if (section_line.count(name))
                throw ConfigError(source, line_no, "section [" + name + "] repeated (first on line " +
                                                       std::to_string(section_line[name]) + ")");
            section_line[name] = line_no;
            current = name;
            cfg.sections_.emplace(name, ConfigTable(source, name));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(source, line_no, "expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        if (!is_bare_key(key)) throw ConfigError(source, line_no, "invalid key '" + key + "'");
        if (current.empty()) throw ConfigError(source, line_no, "key '" + key + "' outside any [section]");
        ConfigTable& table = cfg.sections_.at(current);
        if (table.has(key))
            throw ConfigError(source, line_no, "duplicate key '" + key + "' (first on line " +
                                                   std::to_string(table.entries().at(key).line) + ")");
        Cursor c{line.substr(eq + 1), 0, source, line_no};
        table.set(key, parse_value(c));
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

const ConfigTable& Config::section(const std::string& name) const {
    static const ConfigTable empty;
    const auto it = sections_.find(name);
    return it == sections_.end() ? empty : it->second;
}

void ConfigTable::fail(const std::string& key, const std::string& msg) const {
    const auto it = entries_.find(key);
    const std::size_t line = it == entries_.end() ? 0 : it->second.line;
    throw ConfigError(source_.empty() ? "<config>" : source_, line, "[" + name_ + "] " + key + ": " + msg);
}

const ConfigValue& ConfigTable::at(const std::string& key) const { return entries_.at(key); }

const ConfigScalar& ConfigTable::scalar(const std::string& key) const {
    const ConfigValue& v = at(key);
    if (v.is_array()) fail(key, "expected a single value, found an array");
    return std::get<ConfigScalar>(v.value);
}

std::int64_t ConfigTable::get_int(const std::string& key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    const ConfigScalar& s = scalar(key);
    if (const auto* i = std::get_if<std::int64_t>(&s.value)) return *i;
    fail(key, "expected an integer, found " + describe(s));
}

std::uint64_t ConfigTable::get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const ConfigScalar& s = scalar(key);
    if (s.value.index() == 1 || s.value.index() == 2) {
        std::uint64_t u = 0;
        const auto r = std::from_chars(s.text.data(), s.text.data() + s.text.size(), u);
        if (r.ec == std::errc() && r.ptr == s.text.data() + s.text.size()) return u;
    }
    fail(key, "expected an unsigned 64-bit integer, found '" + s.text + "'");
}

double ConfigTable::get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const ConfigScalar& s = scalar(key);
    if (const auto* i = std::get_if<std::int64_t>(&s.value)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&s.value)) return *d;
    fail(key, "expected a number, found " + describe(s));
}

bool ConfigTable::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const ConfigScalar& s = scalar(key);
    if (const auto* b = std::get_if<bool>(&s.value)) return *b;
    fail(key, "expected true or false, found " + describe(s));
}

std::string ConfigTable::get_string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const ConfigScalar& s = scalar(key);
    if (const auto* str = std::get_if<std::string>(&s.value)) return *str;
    fail(key, "expected a string, found " + describe(s));
}

std::vector<double> ConfigTable::get_list(const std::string& key, const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    const ConfigValue& v = at(key);
    auto number = [&](const ConfigScalar& s) {
        if (const auto* i = std::get_if<std::int64_t>(&s.value)) return static_cast<double>(*i);
        if (const auto* d = std::get_if<double>(&s.value)) return *d;
        fail(key, "expected numbers, found " + describe(s));
    };
    std::vector<double> out;
    if (v.is_array()) {
        for (const ConfigScalar& s : std::get<1>(v.value)) out.push_back(number(s));
        return out;
    }
    const ConfigScalar& s = std::get<ConfigScalar>(v.value);
    const auto* str = std::get_if<std::string>(&s.value);
    if (!str) return {number(s)};
    // Range string, e.g. "1:100:1, 110:500:10".
    std::stringstream parts(*str);
    std::string part;
    while (std::getline(parts, part, ',')) {
        std::vector<double> f;
        std::stringstream fields(part);
        std::string field;
        while (std::getline(fields, field, ':')) {
            const std::string_view t = trim(field);
            double d = 0.0;
            const auto r = std::from_chars(t.data(), t.data() + t.size(), d);
            if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
                fail(key, "bad range component '" + std::string(t) + "'");
            f.push_back(d);
        }
        if (f.size() == 1) {
            out.push_back(f[0]);
            continue;
        }
        if (f.size() != 3 || !(f[2] > 0.0) || f[1] < f[0])
            fail(key, "range must be start:stop:step with step > 0 and stop >= start");
        const auto count = static_cast<long long>(std::floor((f[1] - f[0]) / f[2] + 1e-9));
        for (long long k = 0; k <= count; ++k) out.push_back(f[0] + static_cast<double>(k) * f[2]);
    }
    return out;
}

void ConfigTable::require_known(const std::vector<std::string>& allowed) const {
    for (const auto& [key, value] : entries_) {
        bool ok = false;
        for (const auto& a : allowed) ok = ok || a == key;
        if (!ok) fail(key, "unknown key");
    }
}

void ConfigWriter::section(const std::string& name) {
    if (!text_.empty()) text_ += "\n";
    text_ += "[" + name + "]\n";
}

void ConfigWriter::put(const std::string& key, double v) {
    std::string t = format_number(v);
    if (t.find_first_of(".eEn") == std::string::npos) t += ".0";
    text_ += key + " = " + t + "\n";
}

void ConfigWriter::put(const std::string& key, std::int64_t v) { text_ += key + " = " + std::to_string(v) + "\n"; }

void ConfigWriter::put_u64(const std::string& key, std::uint64_t v) {
    text_ += key + " = " + std::to_string(v) + "\n";
}

void ConfigWriter::put(const std::string& key, bool v) { text_ += key + " = " + (v ? "true" : "false") + "\n"; }

void ConfigWriter::put(const std::string& key, const std::string& v) {
    std::string esc;
    for (char c : v) {
        if (c == '"' || c == '\\') esc.push_back('\\');
        esc.push_back(c);
    }
    text_ += key + " = \"" + esc + "\"\n";
}

void ConfigWriter::put(const std::string& key, const std::vector<double>& v) {
    text_ += key + " = [";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) text_ += ", ";
        std::string t = format_number(v[i]);
        text_ += t;
    }
    text_ += "]\n";
}

}  // namespace misspec
