#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace rln2 {

// Canonical key-value text: one "key=value" per line, keys sorted
// lexicographically, '\n' line endings. Used for metadata sidecars,
// checkpoint config blocks and report headers.
class KvText {
public:
    void set(const std::string& key, const std::string& value);
    void set_int(const std::string& key, std::int64_t value);
    void set_double(const std::string& key, double value);  // round-trip precision

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;  // throws DataError if missing
    std::string get_or(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key) const;

    std::string serialize() const;
    static KvText parse(const std::string& text);

    static KvText read_file(const std::string& path);
    void write_file(const std::string& path) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace rln2
