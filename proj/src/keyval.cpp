#include "mwion/keyval.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mwion/errors.hpp"

namespace mwion {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

KeyValueFile KeyValueFile::parse_string(const std::string& text) {
    KeyValueFile out;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("unterminated section header", lineno);
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno);
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError("empty key", lineno);
        if (!section.empty()) key = section + "." + key;
        out.entries_[key] = val;
    }
    return out;
}

bool KeyValueFile::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KeyValueFile::get_string(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing required key: " + key);
    return it->second;
}

double KeyValueFile::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': not a number: '" + v + "'");
    }
}

long long KeyValueFile::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ConfigError("key '" + key + "': not an integer: '" + v + "'");
    return out;
}

bool KeyValueFile::get_bool(const std::string& key) const {
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("key '" + key + "': not a boolean: '" + v + "'");
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}
double KeyValueFile::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}
long long KeyValueFile::get_int(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
}
bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

void KeyValueFile::require(const std::vector<std::string>& keys) const {
    std::string missing;
    for (const auto& k : keys) {
        if (!has(k)) {
            if (!missing.empty()) missing += ", ";
            missing += k;
        }
    }
    if (!missing.empty()) throw ConfigError("missing required keys: " + missing);
}

} // namespace mwion
