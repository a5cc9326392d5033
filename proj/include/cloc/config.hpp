#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cloc {

// Flat "key = value" text. '#' starts a comment. Physical quantities carry a
// unit suffix: frequencies Hz or rad/s, durations s or ms, angles deg or rad.
// Every key must be consumed by the command; leftovers are rejected.
class Config {
public:
    static Config parse(std::istream& in, const std::string& source = "<config>");
    static Config load(const std::filesystem::path& path);

    bool has(const std::string& key) const;

    double frequency(const std::string& key) const;  // rad/s
    double duration(const std::string& key) const;   // s
    double angle_deg(const std::string& key) const;
    double number(const std::string& key) const;
    int integer(const std::string& key) const;
    bool boolean(const std::string& key) const;
    std::string text(const std::string& key) const;
    std::vector<double> frequency_list(const std::string& key) const;  // rad/s

    // Overrides or adds a key (used for command-line flags).
    void set(const std::string& key, const std::string& value);

    // Throws ConfigError naming any key outside `allowed`.
    void restrict_to(const std::set<std::string>& allowed) const;

    // Keys in sorted order with their raw text, for CSV headers.
    const std::map<std::string, std::string>& entries() const { return entries_; }
    const std::string& source() const { return source_; }

private:
    const std::string& raw(const std::string& key) const;

    std::string source_;
    std::map<std::string, std::string> entries_;
};

// Parses "<number> <unit>" with the unit required; exposed for flag parsing.
double parse_frequency(const std::string& text);  // rad/s
double parse_duration(const std::string& text);   // s

}  // namespace cloc
