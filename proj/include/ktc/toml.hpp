#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace ktc::toml {

using Value = std::variant<std::string, int64_t, double, bool, std::vector<std::string>,
                           std::vector<int64_t>>;

/// Flat view of a TOML subset: bare keys, [section] headers (prefixing keys
/// as "section.key"), strings, integers, floats, booleans and homogeneous
/// arrays of strings or integers. Comments and blank lines are skipped.
class Table {
public:
    bool contains(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& key) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<int64_t> get_int_array(const std::string& key) const;

    void set(const std::string& key, Value v) { values_[key] = std::move(v); }
    const std::map<std::string, Value>& entries() const { return values_; }

private:
    const Value& require(const std::string& key) const;
    std::map<std::string, Value> values_;
};

Table parse(const std::string& text);
Table parse_file(const std::filesystem::path& path);

} // namespace ktc::toml
