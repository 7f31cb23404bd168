#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "unigen/errors.hpp"
#include "unigen/sample_record.hpp"
#include "unigen/sha256.hpp"

namespace unigen {

// Flat key-value configuration document. Lines are `key = value`, `#` starts
// a comment. The digest of the canonicalized text stamps every pipeline
// artifact.
class Config {
public:
    Config() = default;

    static Config from_text(const std::string& text) {
        Config c;
        std::istringstream in(text);
        std::string line;
        long line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string t = trim_copy(line);
            if (t.empty() || t[0] == '#') continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ParseError("config line has no '=': " + t, line_no);
            const std::string key = trim_copy(t.substr(0, eq));
            const std::string value = trim_copy(t.substr(eq + 1));
            if (key.empty()) throw ParseError("config line has empty key", line_no);
            c.values_[key] = value;
        }
        return c;
    }

    static Config from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open config: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return from_text(buf.str());
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config key: " + key);
        return it->second;
    }

    std::string get_or(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse_double(key, it->second);
    }

    long get_int(const std::string& key, long fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        char* end = nullptr;
        const long v = std::strtol(it->second.c_str(), &end, 10);
        if (end == it->second.c_str() || *end != '\0')
            throw ConfigError("config key " + key + " is not an integer: " + it->second);
        return v;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
        if (it->second == "false" || it->second == "0" || it->second == "no") return false;
        throw ConfigError("config key " + key + " is not a boolean: " + it->second);
    }

    std::vector<std::string> get_list(const std::string& key) const {
        std::vector<std::string> out;
        const auto it = values_.find(key);
        if (it == values_.end()) return out;
        std::istringstream in(it->second);
        std::string item;
        while (std::getline(in, item, ',')) {
            const std::string t = trim_copy(item);
            if (!t.empty()) out.push_back(t);
        }
        return out;
    }

    // Keys sharing a dotted prefix, e.g. prefix "template.domain." yields
    // {movie: ..., tweet: ...}.
    std::map<std::string, std::string> with_prefix(const std::string& prefix) const {
        std::map<std::string, std::string> out;
        for (const auto& [k, v] : values_)
            if (k.rfind(prefix, 0) == 0 && k.size() > prefix.size())
                out[k.substr(prefix.size())] = v;
        return out;
    }

    // Sorted `key=value` lines; the stable text whose digest keys artifacts.
    std::string canonical_text() const {
        std::ostringstream os;
        for (const auto& [k, v] : values_) os << k << '=' << v << '\n';
        return os.str();
    }

    std::string hash() const { return Sha256::hex_digest(canonical_text()); }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static double parse_double(const std::string& key, const std::string& s) {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0')
            throw ConfigError("config key " + key + " is not a number: " + s);
        return v;
    }

    std::map<std::string, std::string> values_;
};

} // namespace unigen
