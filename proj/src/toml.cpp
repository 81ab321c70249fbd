#include "ktc/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>

#include "ktc/error.hpp"

namespace ktc::toml {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Strips a trailing comment that is not inside a string literal.
std::string_view strip_comment(std::string_view s) {
    bool in_string = false;
    for (size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
        if (c == '#' && !in_string) return s.substr(0, i);
    }
    return s;
}

std::string parse_string_literal(std::string_view raw, size_t line_no) {
    if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"')
        raise(Errc::FormatError,
              "toml line " + std::to_string(line_no) + ": bad string literal");
    std::string out;
    for (size_t i = 1; i + 1 < raw.size(); ++i) {
        char c = raw[i];
        if (c == '\\' && i + 2 < raw.size()) {
            const char e = raw[++i];
            switch (e) {
            case 'n': c = '\n'; break;
            case 't': c = '\t'; break;
            case 'r': c = '\r'; break;
            case '"': c = '"'; break;
            case '\\': c = '\\'; break;
            default:
                raise(Errc::FormatError, "toml line " + std::to_string(line_no) +
                                             ": unsupported escape \\" + std::string(1, e));
            }
        }
        out.push_back(c);
    }
    return out;
}

Value parse_scalar(std::string_view raw, size_t line_no) {
    raw = trim(raw);
    if (raw.empty())
        raise(Errc::FormatError, "toml line " + std::to_string(line_no) + ": empty value");
    if (raw.front() == '"') return parse_string_literal(raw, line_no);
    if (raw == "true") return true;
    if (raw == "false") return false;

    const bool looks_float = raw.find_first_of(".eE") != std::string_view::npos &&
                             raw.find("0x") == std::string_view::npos;
    if (!looks_float) {
        int64_t iv = 0;
        const auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), iv);
        if (ec == std::errc() && p == raw.data() + raw.size()) return iv;
    }
    {
        double dv = 0.0;
        const auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), dv);
        if (ec == std::errc() && p == raw.data() + raw.size()) return dv;
    }
    raise(Errc::FormatError,
          "toml line " + std::to_string(line_no) + ": cannot parse value '" +
              std::string(raw) + "'");
}

Value parse_array(std::string_view raw, size_t line_no) {
    raw = trim(raw);
    raw.remove_prefix(1);
    raw.remove_suffix(1);
    std::vector<std::string> strings;
    std::vector<int64_t> ints;
    bool saw_string = false, saw_int = false;
    size_t start = 0;
    bool in_string = false;
    const auto flush = [&](size_t end) {
        const std::string_view item = trim(raw.substr(start, end - start));
        if (item.empty()) return;
        const Value v = parse_scalar(item, line_no);
        if (std::holds_alternative<std::string>(v)) {
            saw_string = true;
            strings.push_back(std::get<std::string>(v));
        } else if (std::holds_alternative<int64_t>(v)) {
            saw_int = true;
            ints.push_back(std::get<int64_t>(v));
        } else {
            raise(Errc::FormatError,
                  "toml line " + std::to_string(line_no) + ": unsupported array element");
        }
    };
    for (size_t i = 0; i < raw.size(); ++i) {
        const char c = raw[i];
        if (c == '"' && (i == 0 || raw[i - 1] != '\\')) in_string = !in_string;
        if (c == ',' && !in_string) {
            flush(i);
            start = i + 1;
        }
    }
    flush(raw.size());
    if (saw_string && saw_int)
        raise(Errc::FormatError,
              "toml line " + std::to_string(line_no) + ": mixed array types");
    if (saw_string) return strings;
    return ints;
}

} // namespace

const Value& Table::require(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) raise(Errc::InvalidConfig, "missing config key: " + key);
    return it->second;
}

std::string Table::get_string(const std::string& key) const {
    const Value& v = require(key);
    if (!std::holds_alternative<std::string>(v))
        raise(Errc::InvalidConfig, "config key is not a string: " + key);
    return std::get<std::string>(v);
}

std::string Table::get_string(const std::string& key, const std::string& fallback) const {
    return contains(key) ? get_string(key) : fallback;
}

int64_t Table::get_int(const std::string& key) const {
    const Value& v = require(key);
    if (!std::holds_alternative<int64_t>(v))
        raise(Errc::InvalidConfig, "config key is not an integer: " + key);
    return std::get<int64_t>(v);
}

int64_t Table::get_int(const std::string& key, int64_t fallback) const {
    return contains(key) ? get_int(key) : fallback;
}

double Table::get_double(const std::string& key) const {
    const Value& v = require(key);
    if (std::holds_alternative<double>(v)) return std::get<double>(v);
    if (std::holds_alternative<int64_t>(v))
        return static_cast<double>(std::get<int64_t>(v));
    raise(Errc::InvalidConfig, "config key is not a number: " + key);
}

double Table::get_double(const std::string& key, double fallback) const {
    return contains(key) ? get_double(key) : fallback;
}

bool Table::get_bool(const std::string& key, bool fallback) const {
    if (!contains(key)) return fallback;
    const Value& v = require(key);
    if (!std::holds_alternative<bool>(v))
        raise(Errc::InvalidConfig, "config key is not a boolean: " + key);
    return std::get<bool>(v);
}

std::vector<int64_t> Table::get_int_array(const std::string& key) const {
    const Value& v = require(key);
    if (std::holds_alternative<std::vector<int64_t>>(v))
        return std::get<std::vector<int64_t>>(v);
    if (std::holds_alternative<int64_t>(v)) return {std::get<int64_t>(v)};
    raise(Errc::InvalidConfig, "config key is not an integer array: " + key);
}

Table parse(const std::string& text) {
    Table table;
    std::string section;
    size_t line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        const size_t eol = std::min(text.find('\n', pos), text.size());
        std::string_view line(text.data() + pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                raise(Errc::FormatError,
                      "toml line " + std::to_string(line_no) + ": unterminated section");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (section.empty())
                raise(Errc::FormatError,
                      "toml line " + std::to_string(line_no) + ": empty section name");
            continue;
        }

        const size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            raise(Errc::FormatError,
                  "toml line " + std::to_string(line_no) + ": expected key = value");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view raw = trim(line.substr(eq + 1));
        if (key.empty())
            raise(Errc::FormatError, "toml line " + std::to_string(line_no) + ": empty key");

        const std::string full_key =
            section.empty() ? std::string(key) : section + "." + std::string(key);
        if (!raw.empty() && raw.front() == '[' && raw.back() == ']')
            table.set(full_key, parse_array(raw, line_no));
        else
            table.set(full_key, parse_scalar(raw, line_no));
    }
    return table;
}

Table parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::IoError, "cannot open config file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text);
}

} // namespace ktc::toml
