#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mwion {

// Minimal "key = value" configuration files with optional [sections].
// '#' starts a comment; keys inside a section are addressed as "section.key".
class KeyValueFile {
  public:
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    long long get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Collects every missing key instead of failing on the first one, so a
    // bad config reports the full list at once.
    void require(const std::vector<std::string>& keys) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

  private:
    std::map<std::string, std::string> entries_;
};

} // namespace mwion
