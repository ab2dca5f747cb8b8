#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace permsec {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Flat key = value text, '#' comments, dotted keys for nesting
// (channel.kind = awgn). Order-preserving so an echoed file is stable.
class KvFile {
public:
    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    const std::vector<std::pair<std::string, std::string>>& items() const {
        return items_;
    }

    static KvFile load(const std::filesystem::path& path);
    static KvFile parse(const std::string& text);
    void save(const std::filesystem::path& path) const;
    std::string dump() const;

private:
    std::vector<std::pair<std::string, std::string>> items_;
};

} // namespace permsec
