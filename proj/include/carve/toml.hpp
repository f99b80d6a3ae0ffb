#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

// Minimal TOML subset for pipeline configs: [section] headers, bare keys,
// `key = value` lines with string / integer / float / boolean / single-line
// array values, and # comments. Dotted keys, nested tables, dates and
// multi-line strings are out of scope. Parse errors throw io_error with the
// source name and 1-based line number.

namespace carve::toml {

struct Value {
    enum class Kind { boolean, integer, real, string, array };
    Kind kind = Kind::integer;
    bool b = false;
    std::int64_t i = 0;
    double d = 0;
    std::string s;
    std::vector<Value> items;
    int line = 0;  // for error messages
};

class Table {
  public:
    // Keys are "section.key" ("key" alone for the top level).
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    // Typed lookups with defaults. A lookup with the wrong value type
    // throws io_error naming the key. get_double accepts integer values,
    // get_uint rejects negatives.
    bool get_bool(const std::string& key, bool def) const;
    std::int64_t get_int(const std::string& key, std::int64_t def) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t def) const;
    double get_double(const std::string& key, double def) const;
    std::string get_string(const std::string& key, const std::string& def) const;
    std::vector<std::string> get_string_array(const std::string& key) const;

    // All keys, sorted; used to reject unknown configuration keys.
    std::vector<std::string> keys() const;

    void set(const std::string& key, Value v) { values_[key] = std::move(v); }
    const Value* find(const std::string& key) const;

  private:
    std::map<std::string, Value> values_;
};

Table parse_string(const std::string& text, const std::string& source_name);
Table parse_file(const std::string& path);

}  // namespace carve::toml
