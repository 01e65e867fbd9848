#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "common.hpp"
#include "io.hpp"

namespace tscausal {

// Parser for the TOML subset the pipeline config uses: [table] headers
// (dotted allowed), bare keys, basic strings, integers, floats, booleans and
// flat arrays, with # comments. Keys flatten to "table.key". Every read is
// tracked so a config loader can reject keys it never consumed.
struct TomlValue {
    enum class Kind { string, integer, floating, boolean, array };
    Kind kind = Kind::string;
    std::string str;
    long long int_v = 0;
    double float_v = 0.0;
    bool bool_v = false;
    std::vector<TomlValue> array_v;
    int line = 0;

    double as_double() const {
        if (kind == Kind::integer) return static_cast<double>(int_v);
        if (kind == Kind::floating) return float_v;
        throw ConfigError("config line " + std::to_string(line) + ": expected a number");
    }
};

namespace detail {

inline bool toml_bare_key_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
}

class TomlParser {
public:
    TomlParser(const std::string& text, std::map<std::string, TomlValue>& out) : text_(text), out_(out) {}

    void run() {
        std::size_t pos = 0;
        int line_no = 0;
        std::string prefix;
        while (pos <= text_.size()) {
            std::size_t eol = text_.find('\n', pos);
            if (eol == std::string::npos) eol = text_.size();
            std::string line = text_.substr(pos, eol - pos);
            pos = eol + 1;
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            strip_comment(line);
            const std::string t = trim(line);
            if (t.empty()) {
                if (pos > text_.size()) break;
                continue;
            }
            if (t.front() == '[') {
                if (t.back() != ']') fail(line_no, "unterminated table header");
                prefix = trim(t.substr(1, t.size() - 2));
                if (prefix.empty()) fail(line_no, "empty table name");
                for (char c : prefix) {
                    if (!toml_bare_key_char(c) && c != '.') fail(line_no, "invalid table name");
                }
            } else {
                parse_key_value(t, prefix, line_no);
            }
            if (pos > text_.size()) break;
        }
    }

private:
    [[noreturn]] void fail(int line, const std::string& msg) const {
        throw ConfigError("config line " + std::to_string(line) + ": " + msg);
    }

    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
        while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
        return s.substr(b, e - b);
    }

    static void strip_comment(std::string& line) {
        bool in_str = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
            if (line[i] == '#' && !in_str) {
                line.resize(i);
                return;
            }
        }
    }

    void parse_key_value(const std::string& t, const std::string& prefix, int line_no) {
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) fail(line_no, "expected key = value");
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) fail(line_no, "empty key");
        for (char c : key) {
            if (!toml_bare_key_char(c)) fail(line_no, "invalid key character");
        }
        std::string rest = trim(t.substr(eq + 1));
        if (rest.empty()) fail(line_no, "missing value");
        std::size_t cursor = 0;
        TomlValue v = parse_value(rest, cursor, line_no);
        if (cursor != rest.size()) fail(line_no, "trailing characters after value");
        v.line = line_no;
        const std::string full = prefix.empty() ? key : prefix + "." + key;
        if (out_.count(full)) fail(line_no, "duplicate key: " + full);
        out_[full] = std::move(v);
    }

    TomlValue parse_value(const std::string& s, std::size_t& i, int line_no) {
        skip_ws(s, i);
        if (i >= s.size()) fail(line_no, "missing value");
        TomlValue v;
        if (s[i] == '"') {
            v.kind = TomlValue::Kind::string;
            v.str = parse_string(s, i, line_no);
        } else if (s[i] == '[') {
            v.kind = TomlValue::Kind::array;
            ++i;
            skip_ws(s, i);
            while (i < s.size() && s[i] != ']') {
                v.array_v.push_back(parse_value(s, i, line_no));
                skip_ws(s, i);
                if (i < s.size() && s[i] == ',') {
                    ++i;
                    skip_ws(s, i);
                }
            }
            if (i >= s.size()) fail(line_no, "unterminated array");
            ++i;
        } else {
            std::size_t end = i;
            while (end < s.size() && s[end] != ',' && s[end] != ']' && s[end] != ' ' && s[end] != '\t') ++end;
            const std::string tok = s.substr(i, end - i);
            i = end;
            if (tok == "true" || tok == "false") {
                v.kind = TomlValue::Kind::boolean;
                v.bool_v = (tok == "true");
            } else if (tok.find_first_of(".eE") != std::string::npos && tok.find_first_of("0123456789") != std::string::npos) {
                v.kind = TomlValue::Kind::floating;
                const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v.float_v);
                if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size()) fail(line_no, "invalid float: " + tok);
            } else {
                v.kind = TomlValue::Kind::integer;
                const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v.int_v);
                if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size()) fail(line_no, "invalid value: " + tok);
            }
        }
        skip_ws(s, i);
        return v;
    }

    static void skip_ws(const std::string& s, std::size_t& i) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    }

    std::string parse_string(const std::string& s, std::size_t& i, int line_no) {
        std::string out;
        ++i;  // opening quote
        while (i < s.size() && s[i] != '"') {
            if (s[i] == '\\') {
                ++i;
                if (i >= s.size()) fail(line_no, "dangling escape");
                switch (s[i]) {
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case 'r': out += '\r'; break;
                    default: fail(line_no, "unsupported escape sequence");
                }
            } else {
                out += s[i];
            }
            ++i;
        }
        if (i >= s.size()) fail(line_no, "unterminated string");
        ++i;  // closing quote
        return out;
    }

    const std::string& text_;
    std::map<std::string, TomlValue>& out_;
};

}  // namespace detail

class TomlDoc {
public:
    TomlDoc() = default;

    static TomlDoc parse_string(const std::string& text) {
        TomlDoc doc;
        detail::TomlParser(text, doc.values_).run();
        return doc;
    }

    static TomlDoc parse_file(const std::string& path) { return parse_string(read_file(path)); }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto* v = find(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::string) type_error(key, *v, "a string");
        return v->str;
    }

    double get_double(const std::string& key, double fallback) const {
        const auto* v = find(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::integer && v->kind != TomlValue::Kind::floating) {
            type_error(key, *v, "a number");
        }
        return v->as_double();
    }

    long long get_int(const std::string& key, long long fallback) const {
        const auto* v = find(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::integer) type_error(key, *v, "an integer");
        return v->int_v;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const auto* v = find(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::boolean) type_error(key, *v, "a boolean");
        return v->bool_v;
    }

    std::vector<std::string> get_string_array(const std::string& key, std::vector<std::string> fallback) const {
        const auto* v = find(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::array) type_error(key, *v, "an array");
        std::vector<std::string> out;
        for (const auto& e : v->array_v) {
            if (e.kind != TomlValue::Kind::string) type_error(key, *v, "an array of strings");
            out.push_back(e.str);
        }
        return out;
    }

    // Keys never read by any accessor; a loader treats these as schema errors.
    std::vector<std::string> unconsumed() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_) {
            if (!consumed_.count(k)) out.push_back(k);
        }
        return out;
    }

private:
    const TomlValue* find(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return nullptr;
        consumed_.insert(key);
        return &it->second;
    }

    [[noreturn]] static void type_error(const std::string& key, const TomlValue& v, const std::string& want) {
        throw ConfigError("config line " + std::to_string(v.line) + ": key '" + key + "' must be " + want);
    }

    std::map<std::string, TomlValue> values_;
    mutable std::set<std::string> consumed_;
};

}  // namespace tscausal
