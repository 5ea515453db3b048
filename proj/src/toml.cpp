#include "fdlab/toml.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fdlab/errors.hpp"

namespace fdlab::toml {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
    throw ConfigError("line " + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Drop a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            in_string = true;
        } else if (c == '#') {
            return s.substr(0, i);
        }
    }
    return s;
}

bool valid_bare_key(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
            return false;
    return true;
}

// Parses one scalar or array token; `src` must be fully consumed.
Value parse_value(const std::string& src, int line);

std::string parse_quoted(const std::string& src, int line) {
    std::string out;
    for (std::size_t i = 1; i < src.size(); ++i) {
        char c = src[i];
        if (c == '"') {
            if (i + 1 != src.size()) fail(line, "trailing characters after string");
            return out;
        }
        if (c == '\\') {
            if (++i == src.size()) fail(line, "dangling escape in string");
            switch (src[i]) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                default: fail(line, std::string("unsupported escape \\") + src[i]);
            }
        } else {
            out += c;
        }
    }
    fail(line, "unterminated string");
}

Value parse_array(const std::string& src, int line) {
    if (src.back() != ']') fail(line, "unterminated array");
    Value v;
    v.kind = Value::Kind::kArray;
    std::string inner = trim(src.substr(1, src.size() - 2));
    if (inner.empty()) return v;
    // Split on top-level commas (quoted strings may contain commas).
    std::vector<std::string> parts;
    std::string cur;
    bool in_string = false;
    for (std::size_t i = 0; i < inner.size(); ++i) {
        char c = inner[i];
        if (in_string) {
            cur += c;
            if (c == '\\' && i + 1 < inner.size()) cur += inner[++i];
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            cur += c;
            in_string = true;
        } else if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    for (const auto& part : parts) {
        std::string item = trim(part);
        if (item.empty()) fail(line, "empty array element");
        Value elem = parse_value(item, line);
        if (elem.kind == Value::Kind::kArray) fail(line, "nested arrays are not supported");
        v.array.push_back(std::move(elem));
    }
    return v;
}

Value parse_value(const std::string& src, int line) {
    if (src.empty()) fail(line, "missing value");
    Value v;
    if (src.front() == '"') {
        v.kind = Value::Kind::kString;
        v.str = parse_quoted(src, line);
        return v;
    }
    if (src.front() == '[') return parse_array(src, line);
    if (src == "true" || src == "false") {
        v.kind = Value::Kind::kBool;
        v.boolean = src == "true";
        return v;
    }
    bool looks_float = src.find_first_of(".eE") != std::string::npos;
    const char* begin = src.c_str();
    char* end = nullptr;
    if (!looks_float) {
        long long n = std::strtoll(begin, &end, 10);
        if (end == begin + src.size()) {
            v.kind = Value::Kind::kInt;
            v.integer = n;
            return v;
        }
    }
    double d = std::strtod(begin, &end);
    if (end == begin + src.size()) {
        v.kind = Value::Kind::kFloat;
        v.real = d;
        return v;
    }
    fail(line, "cannot parse value '" + src + "'");
}

const char* kind_name(Value::Kind k) {
    switch (k) {
        case Value::Kind::kString: return "string";
        case Value::Kind::kBool: return "boolean";
        case Value::Kind::kInt: return "integer";
        case Value::Kind::kFloat: return "float";
        case Value::Kind::kArray: return "array";
    }
    return "?";
}

[[noreturn]] void type_fail(const std::string& key, const Entry& entry, const char* wanted) {
    throw ConfigError("key '" + key + "' (line " + std::to_string(entry.line) + "): expected " +
                      wanted + ", got " + kind_name(entry.value.kind));
}

}  // namespace

double Value::as_number() const {
    if (kind == Kind::kInt) return static_cast<double>(integer);
    if (kind == Kind::kFloat) return real;
    throw ConfigError(std::string("expected a number, got ") + kind_name(kind));
}

bool Document::contains(const std::string& key) const { return entries_.count(key) != 0; }

const Entry& Document::at(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
}

long long Document::get_int(const std::string& key) const {
    const Entry& e = at(key);
    if (e.value.kind != Value::Kind::kInt) type_fail(key, e, "integer");
    return e.value.integer;
}

double Document::get_double(const std::string& key) const {
    const Entry& e = at(key);
    if (!e.value.is_number()) type_fail(key, e, "number");
    return e.value.as_number();
}

bool Document::get_bool(const std::string& key) const {
    const Entry& e = at(key);
    if (e.value.kind != Value::Kind::kBool) type_fail(key, e, "boolean");
    return e.value.boolean;
}

std::string Document::get_string(const std::string& key) const {
    const Entry& e = at(key);
    if (e.value.kind != Value::Kind::kString) type_fail(key, e, "string");
    return e.value.str;
}

std::vector<double> Document::get_double_array(const std::string& key) const {
    const Entry& e = at(key);
    if (e.value.kind != Value::Kind::kArray) type_fail(key, e, "array of numbers");
    std::vector<double> out;
    for (const auto& item : e.value.array) {
        if (!item.is_number()) type_fail(key, e, "array of numbers");
        out.push_back(item.as_number());
    }
    return out;
}

std::vector<std::string> Document::get_string_array(const std::string& key) const {
    const Entry& e = at(key);
    if (e.value.kind != Value::Kind::kArray) type_fail(key, e, "array of strings");
    std::vector<std::string> out;
    for (const auto& item : e.value.array) {
        if (item.kind != Value::Kind::kString) type_fail(key, e, "array of strings");
        out.push_back(item.str);
    }
    return out;
}

std::vector<std::string> Document::keys() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [key, entry] : entries_) out.push_back(key);
    return out;
}

void Document::insert(const std::string& key, Value value, int line) {
    auto [it, inserted] = entries_.emplace(key, Entry{std::move(value), line});
    if (!inserted)
        fail(line, "duplicate key '" + key + "' (first defined on line " +
                       std::to_string(it->second.line) + ")");
}

Document parse(const std::string& text) {
    Document doc;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(line_no, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!valid_bare_key(section)) fail(line_no, "invalid section name '" + section + "'");
            continue;
        }
        std::size_t eq = std::string::npos;
        bool in_string = false;
        for (std::size_t i = 0; i < line.size() && eq == std::string::npos; ++i) {
            char c = line[i];
            if (in_string) {
                if (c == '\\') ++i;
                else if (c == '"') in_string = false;
            } else if (c == '"') {
                in_string = true;
            } else if (c == '=') {
                eq = i;
            }
        }
        if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        if (!valid_bare_key(key) || key.find('.') != std::string::npos)
            fail(line_no, "invalid key '" + key + "'");
        Value value = parse_value(trim(line.substr(eq + 1)), line_no);
        doc.insert(section.empty() ? key : section + "." + key, std::move(value), line_no);
    }
    return doc;
}

Document parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

}  // namespace fdlab::toml
