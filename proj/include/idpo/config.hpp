// Plain-text key=value config. '#' starts a comment, sections are spelled
// with dotted keys (schedule.T=80). CLI flags override file values.

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "idpo/errors.hpp"

namespace idpo {

class Config {
public:
    Config() = default;

    static Config from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        Config cfg;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("expected key=value, got '" + trimmed + "'", line_no);
            }
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty()) throw ConfigError("empty key", line_no);
            cfg.values_[key] = value;
        }
        return cfg;
    }

    // "key=value" from the command line
    void apply_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("override must look like key=value, got '" + assignment + "'");
        }
        values_[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    long get_long(const std::string& key, long fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse<long>(key, it->second);
    }

    int get_int(const std::string& key, int fallback) const {
        return static_cast<int>(get_long(key, fallback));
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse<std::uint64_t>(key, it->second);
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse<double>(key, it->second);
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    template <typename T>
    static T parse(const std::string& key, const std::string& text) {
        std::istringstream in(text);
        T v{};
        in >> v;
        if (in.fail() || !in.eof()) {
            throw ConfigError("cannot parse value '" + text + "' for key '" + key + "'");
        }
        return v;
    }

    static std::string trim(const std::string& s) {
        const auto begin = s.find_first_not_of(" \t\r\n");
        if (begin == std::string::npos) return "";
        const auto end = s.find_last_not_of(" \t\r\n");
        return s.substr(begin, end - begin + 1);
    }

    std::map<std::string, std::string> values_;
};

} // namespace idpo
