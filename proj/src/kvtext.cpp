#include "rln2/kvtext.hpp"

#include <fstream>
#include <sstream>

#include "rln2/common.hpp"

namespace rln2 {

void KvText::set(const std::string& key, const std::string& value) {
    if (key.find('=') != std::string::npos || key.find('\n') != std::string::npos)
        throw ValueError("kvtext: key contains '=' or newline: " + key);
    if (value.find('\n') != std::string::npos)
        throw ValueError("kvtext: value contains newline for key " + key);
    kv_[key] = value;
}

void KvText::set_int(const std::string& key, std::int64_t value) {
    set(key, std::to_string(value));
}

void KvText::set_double(const std::string& key, double value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    set(key, os.str());
}

bool KvText::has(const std::string& key) const { return kv_.count(key) != 0; }

const std::string& KvText::get(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw DataError("kvtext: missing key '" + key + "'");
    return it->second;
}

std::string KvText::get_or(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

std::int64_t KvText::get_int(const std::string& key) const { return std::stoll(get(key)); }

double KvText::get_double(const std::string& key) const { return std::stod(get(key)); }

std::string KvText::serialize() const {
    std::string out;
    for (const auto& [k, v] : kv_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

KvText KvText::parse(const std::string& text) {
    KvText kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto pos = line.find('=');
        if (pos == std::string::npos) throw DataError("kvtext: malformed line '" + line + "'");
        kv.kv_[line.substr(0, pos)] = line.substr(pos + 1);
    }
    return kv;
}

KvText KvText::read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("kvtext: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

void KvText::write_file(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("kvtext: cannot write " + path);
    f << serialize();
}

}  // namespace rln2
