#include "carnot/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "carnot/error.hpp"

namespace carnot {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& tok, const std::string& where) {
    double v = 0.0;
    auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (r.ec != std::errc() || r.ptr != tok.data() + tok.size())
        throw Error(ErrorKind::ConfigParseError, where + ": '" + tok + "' is not a number");
    return v;
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
    std::string s = text;
    for (char& c : s)
        if (c == ',') c = ' ';
    std::istringstream in(s);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(to_double(tok, "list"));
    return out;
}

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw Error(ErrorKind::ConfigParseError, "line " + std::to_string(line_no) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            cfg.data_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorKind::ConfigParseError, "line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw Error(ErrorKind::ConfigParseError, "line " + std::to_string(line_no) + ": empty key");
        cfg.data_[section][key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::ConfigParseError, "cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

bool Config::has(const std::string& section, const std::string& key) const {
    auto it = data_.find(section);
    return it != data_.end() && it->second.count(key) > 0;
}

std::string Config::get(const std::string& section, const std::string& key) const {
    if (!has(section, key)) throw Error(ErrorKind::ConfigParseError, "missing [" + section + "] " + key);
    return data_.at(section).at(key);
}

std::string Config::get(const std::string& section, const std::string& key, const std::string& fallback) const {
    return has(section, key) ? data_.at(section).at(key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key) const {
    return to_double(get(section, key), "[" + section + "] " + key);
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

int Config::get_int(const std::string& section, const std::string& key, int fallback) const {
    if (!has(section, key)) return fallback;
    const double v = get_double(section, key);
    if (v != static_cast<int>(v))
        throw Error(ErrorKind::ConfigParseError, "[" + section + "] " + key + " must be an integer");
    return static_cast<int>(v);
}

std::vector<double> Config::get_list(const std::string& section, const std::string& key) const {
    try {
        return parse_number_list(get(section, key));
    } catch (const Error& e) {
        throw Error(ErrorKind::ConfigParseError, "[" + section + "] " + key + ": " + e.what());
    }
}

std::vector<double> Config::get_list(const std::string& section, const std::string& key,
                                     const std::vector<double>& fallback) const {
    return has(section, key) ? get_list(section, key) : fallback;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    data_[section][key] = value;
}

std::string Config::canonical() const {
    std::string out;
    for (const auto& [sec, kv] : data_) {
        out += "[" + sec + "]\n";
        for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    }
    return out;
}

}  // namespace carnot
