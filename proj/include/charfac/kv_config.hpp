#pragma once

#include "charfac/common.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace charfac {

/// Flat `key = value` document. `#` starts a comment; blank lines ignored.
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<config>");
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.contains(key); }
    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    long long get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    const std::map<std::string, std::string>& entries() const { return values_; }
    std::string to_string() const;

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
};

}  // namespace charfac
