#pragma once

#include <map>
#include <string>
#include <vector>

namespace carnot {

/// Sectioned `key = value` text. '#' starts a comment; keys before any section header go to "".
/// Malformed lines and missing or non-numeric values raise ConfigParseError.
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    /// Whitespace- or comma-separated numbers.
    std::vector<double> get_list(const std::string& section, const std::string& key) const;
    std::vector<double> get_list(const std::string& section, const std::string& key,
                                 const std::vector<double>& fallback) const;

    void set(const std::string& section, const std::string& key, const std::string& value);
    const std::map<std::string, std::map<std::string, std::string>>& sections() const { return data_; }

    /// Canonical text: sections and keys in sorted order.
    std::string canonical() const;

private:
    std::map<std::string, std::map<std::string, std::string>> data_;
};

std::vector<double> parse_number_list(const std::string& text);

}  // namespace carnot
