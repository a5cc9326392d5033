#include "cloc/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "cloc/errors.hpp"

namespace cloc {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Splits "12.5 rad/s" into (12.5, "rad/s"); the unit may be empty.
std::pair<double, std::string> split_quantity(const std::string& text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr == t.data()) throw ConfigError("not a number: '" + t + "'");
    if (!std::isfinite(v)) throw ConfigError("non-finite value: '" + t + "'");
    return {v, trim(std::string(ptr, t.data() + t.size()))};
}

}  // namespace

double parse_frequency(const std::string& text) {
    const auto [v, unit] = split_quantity(text);
    if (unit == "Hz") return 2.0 * std::numbers::pi * v;
    if (unit == "rad/s") return v;
    if (unit.empty()) throw ConfigError("frequency '" + trim(text) + "' needs a unit suffix (Hz or rad/s)");
    throw ConfigError("unknown frequency unit '" + unit + "' (use Hz or rad/s)");
}

double parse_duration(const std::string& text) {
    const auto [v, unit] = split_quantity(text);
    if (unit == "s") return v;
    if (unit == "ms") return 1e-3 * v;
    if (unit == "us") return 1e-6 * v;
    if (unit.empty()) throw ConfigError("duration '" + trim(text) + "' needs a unit suffix (s, ms or us)");
    throw ConfigError("unknown duration unit '" + unit + "'");
}

Config Config::parse(std::istream& in, const std::string& source) {
    Config cfg;
    cfg.source_ = source;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = source + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) throw ConfigError(where + ": empty key or value");
        if (!cfg.entries_.emplace(key, value).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    return parse(in, path.string());
}

bool Config::has(const std::string& key) const { return entries_.contains(key); }

const std::string& Config::raw(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(source_ + ": missing required key '" + key + "'");
    return it->second;
}

double Config::frequency(const std::string& key) const {
    try {
        return parse_frequency(raw(key));
    } catch (const ConfigError& e) {
        throw ConfigError(source_ + ": " + key + ": " + e.what());
    }
}

double Config::duration(const std::string& key) const {
    try {
        return parse_duration(raw(key));
    } catch (const ConfigError& e) {
        throw ConfigError(source_ + ": " + key + ": " + e.what());
    }
}

double Config::angle_deg(const std::string& key) const {
    const auto [v, unit] = split_quantity(raw(key));
    if (unit == "deg") return v;
    if (unit == "rad") return v * 180.0 / std::numbers::pi;
    throw ConfigError(source_ + ": " + key + ": angle needs a unit suffix (deg or rad)");
}

double Config::number(const std::string& key) const {
    const auto [v, unit] = split_quantity(raw(key));
    if (!unit.empty()) throw ConfigError(source_ + ": " + key + ": dimensionless value must not carry a unit");
    return v;
}

int Config::integer(const std::string& key) const {
    const double v = number(key);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(source_ + ": " + key + ": expected an integer");
    return static_cast<int>(v);
}

bool Config::boolean(const std::string& key) const {
    const std::string& v = raw(key);
    if (v == "true" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "no" || v == "off") return false;
    throw ConfigError(source_ + ": " + key + ": expected true or false");
}

std::string Config::text(const std::string& key) const { return raw(key); }

std::vector<double> Config::frequency_list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(raw(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(parse_frequency(item));
        } catch (const ConfigError& e) {
            throw ConfigError(source_ + ": " + key + ": " + e.what());
        }
    }
    if (out.empty()) throw ConfigError(source_ + ": " + key + ": empty list");
    return out;
}

void Config::set(const std::string& key, const std::string& value) { entries_[key] = value; }

void Config::restrict_to(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : entries_)
        if (!allowed.contains(k)) throw ConfigError(source_ + ": unknown key '" + k + "'");
}

}  // namespace cloc
