#pragma once

#include <map>
#include <string>
#include <vector>

namespace fdlab::toml {

// Minimal TOML subset: top-level and one-level [section] tables, bare keys,
// and values that are quoted strings, booleans, integers, floats, or
// single-line arrays of those. Comments start with '#'. This covers the
// experiment-config grammar; anything outside it is rejected with a
// line-numbered error rather than silently misread.
struct Value {
    enum class Kind { kString, kBool, kInt, kFloat, kArray };
    Kind kind = Kind::kString;
    std::string str;
    bool boolean = false;
    long long integer = 0;
    double real = 0.0;
    std::vector<Value> array;

    bool is_number() const { return kind == Kind::kInt || kind == Kind::kFloat; }
    double as_number() const;  // kInt or kFloat, else throws ConfigError
};

struct Entry {
    Value value;
    int line = 0;  // 1-based source line, for error messages
};

class Document {
  public:
    bool contains(const std::string& dotted_key) const;
    const Entry& at(const std::string& dotted_key) const;

    // Typed accessors; a missing key or wrong type throws ConfigError
    // naming the key and (when present) the source line.
    long long get_int(const std::string& key) const;
    double get_double(const std::string& key) const;  // accepts integers too
    bool get_bool(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    std::vector<double> get_double_array(const std::string& key) const;
    std::vector<std::string> get_string_array(const std::string& key) const;

    // All keys in "section.key" form ("" section prefix omitted).
    std::vector<std::string> keys() const;

    void insert(const std::string& dotted_key, Value value, int line);

  private:
    std::map<std::string, Entry> entries_;
};

Document parse(const std::string& text);
Document parse_file(const std::string& path);

}  // namespace fdlab::toml
