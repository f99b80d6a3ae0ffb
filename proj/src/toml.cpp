#include "carve/toml.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "carve/error.hpp"

namespace carve::toml {
namespace {

struct Cursor {
    const std::string& text;
    const std::string& name;
    std::size_t pos = 0;
    int line = 1;

    [[noreturn]] void fail(const std::string& msg) const {
        throw io_error(name + ":" + std::to_string(line) + ": " + msg);
    }
};

bool is_bare(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

void skip_inline_ws(Cursor& c) {
    while (c.pos < c.text.size() &&
           (c.text[c.pos] == ' ' || c.text[c.pos] == '\t')) {
        ++c.pos;
    }
}

std::string parse_bare_key(Cursor& c) {
    const std::size_t start = c.pos;
    while (c.pos < c.text.size() && is_bare(c.text[c.pos])) ++c.pos;
    if (c.pos == start) c.fail("expected a key");
    return c.text.substr(start, c.pos - start);
}

std::string parse_basic_string(Cursor& c) {
    ++c.pos;  // opening quote
    std::string out;
    while (true) {
        if (c.pos >= c.text.size() || c.text[c.pos] == '\n') {
            c.fail("unterminated string");
        }
        const char ch = c.text[c.pos++];
        if (ch == '"') return out;
        if (ch != '\\') {
            out.push_back(ch);
            continue;
        }
        if (c.pos >= c.text.size()) c.fail("unterminated escape");
        const char esc = c.text[c.pos++];
        switch (esc) {
            case '"': out.push_back('"'); break;
            case '\\': out.push_back('\\'); break;
            case 'n': out.push_back('\n'); break;
            case 't': out.push_back('\t'); break;
            case 'r': out.push_back('\r'); break;
            default:
                c.fail(std::string("unsupported escape '\\") + esc + "'");
        }
    }
}

Value parse_value(Cursor& c);

Value parse_scalar(Cursor& c) {
    Value v;
    v.line = c.line;
    const char first = c.text[c.pos];
    if (first == '"') {
        v.kind = Value::Kind::string;
        v.s = parse_basic_string(c);
        return v;
    }
    const std::size_t start = c.pos;
    while (c.pos < c.text.size()) {
        const char ch = c.text[c.pos];
        if (ch == '\n' || ch == '#' || ch == ',' || ch == ']' || ch == ' ' ||
            ch == '\t') {
            break;
        }
        ++c.pos;
    }
    const std::string tok = c.text.substr(start, c.pos - start);
    if (tok.empty()) c.fail("expected a value");
    if (tok == "true" || tok == "false") {
        v.kind = Value::Kind::boolean;
        v.b = tok == "true";
        return v;
    }
    const bool looks_real =
        tok.find_first_of(".eE") != std::string::npos &&
        tok.find_first_not_of("+-0123456789.eE") == std::string::npos;
    errno = 0;
    char* end = nullptr;
    if (!looks_real) {
        const long long iv = std::strtoll(tok.c_str(), &end, 10);
        if (errno == 0 && end == tok.c_str() + tok.size()) {
            v.kind = Value::Kind::integer;
            v.i = iv;
            return v;
        }
    }
    errno = 0;
    const double dv = std::strtod(tok.c_str(), &end);
    if (errno != 0 || end != tok.c_str() + tok.size()) {
        c.fail("cannot parse value '" + tok + "'");
    }
    v.kind = Value::Kind::real;
    v.d = dv;
    return v;
}

Value parse_value(Cursor& c) {
    if (c.text[c.pos] != '[') return parse_scalar(c);
    Value v;
    v.kind = Value::Kind::array;
    v.line = c.line;
    ++c.pos;  // '['
    skip_inline_ws(c);
    while (true) {
        if (c.pos >= c.text.size() || c.text[c.pos] == '\n') {
            c.fail("unterminated array (arrays must be single-line)");
        }
        if (c.text[c.pos] == ']') {
            ++c.pos;
            return v;
        }
        v.items.push_back(parse_value(c));
        skip_inline_ws(c);
        if (c.pos < c.text.size() && c.text[c.pos] == ',') {
            ++c.pos;
            skip_inline_ws(c);
        }
    }
}

[[noreturn]] void type_fail(const std::string& key, const Value& v,
                            const char* want) {
    throw io_error("config key '" + key + "' (line " + std::to_string(v.line) +
                   ") is not " + want);
}

}  // namespace

const Value* Table::find(const std::string& key) const {
    auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
}

bool Table::get_bool(const std::string& key, bool def) const {
    const Value* v = find(key);
    if (!v) return def;
    if (v->kind != Value::Kind::boolean) type_fail(key, *v, "a boolean");
    return v->b;
}

std::int64_t Table::get_int(const std::string& key, std::int64_t def) const {
    const Value* v = find(key);
    if (!v) return def;
    if (v->kind != Value::Kind::integer) type_fail(key, *v, "an integer");
    return v->i;
}

std::uint64_t Table::get_uint(const std::string& key, std::uint64_t def) const {
    const Value* v = find(key);
    if (!v) return def;
    if (v->kind != Value::Kind::integer || v->i < 0) {
        type_fail(key, *v, "a non-negative integer");
    }
    return static_cast<std::uint64_t>(v->i);
}

double Table::get_double(const std::string& key, double def) const {
    const Value* v = find(key);
    if (!v) return def;
    if (v->kind == Value::Kind::integer) return static_cast<double>(v->i);
    if (v->kind != Value::Kind::real) type_fail(key, *v, "a number");
    return v->d;
}

std::string Table::get_string(const std::string& key,
                              const std::string& def) const {
    const Value* v = find(key);
    if (!v) return def;
    if (v->kind != Value::Kind::string) type_fail(key, *v, "a string");
    return v->s;
}

std::vector<std::string> Table::get_string_array(const std::string& key) const {
    const Value* v = find(key);
    if (!v) return {};
    if (v->kind == Value::Kind::string) return {v->s};
    if (v->kind != Value::Kind::array) type_fail(key, *v, "a string array");
    std::vector<std::string> out;
    for (const Value& item : v->items) {
        if (item.kind != Value::Kind::string) {
            type_fail(key, item, "a string array");
        }
        out.push_back(item.s);
    }
    return out;
}

std::vector<std::string> Table::keys() const {
    std::vector<std::string> out;
    out.reserve(values_.size());
    for (const auto& [k, v] : values_) out.push_back(k);
    return out;
}

Table parse_string(const std::string& text, const std::string& source_name) {
    Table table;
    Cursor c{text, source_name};
    std::string section;
    while (c.pos < text.size()) {
        skip_inline_ws(c);
        if (c.pos >= text.size()) break;
        const char ch = text[c.pos];
        if (ch == '\n') {
            ++c.pos;
            ++c.line;
            continue;
        }
        if (ch == '#') {
            while (c.pos < text.size() && text[c.pos] != '\n') ++c.pos;
            continue;
        }
        if (ch == '[') {
            ++c.pos;
            skip_inline_ws(c);
            section = parse_bare_key(c);
            skip_inline_ws(c);
            if (c.pos >= text.size() || text[c.pos] != ']') {
                c.fail("expected ']' after section name");
            }
            ++c.pos;
        } else {
            const std::string key = parse_bare_key(c);
            skip_inline_ws(c);
            if (c.pos >= text.size() || text[c.pos] != '=') {
                c.fail("expected '=' after key '" + key + "'");
            }
            ++c.pos;
            skip_inline_ws(c);
            if (c.pos >= text.size() || text[c.pos] == '\n' ||
                text[c.pos] == '#') {
                c.fail("missing value for key '" + key + "'");
            }
            Value v = parse_value(c);
            const std::string full = section.empty() ? key : section + "." + key;
            if (table.has(full)) c.fail("duplicate key '" + full + "'");
            table.set(full, std::move(v));
        }
        // Only whitespace or a comment may follow on the line.
        skip_inline_ws(c);
        if (c.pos < text.size() && text[c.pos] == '#') {
            while (c.pos < text.size() && text[c.pos] != '\n') ++c.pos;
        }
        if (c.pos < text.size()) {
            if (text[c.pos] != '\n') c.fail("unexpected trailing characters");
            ++c.pos;
            ++c.line;
        }
    }
    return table;
}

Table parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

}  // namespace carve::toml
