#pragma once

#include "switchlab/core.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace switchlab {

/// Line-oriented key = value configuration.
///
///   # comment (also ';'); trailing comments allowed outside quotes
///   [section]            prefixes following keys with "section."
///   [section.sub]        dotted section names nest
///   key = value          keys: letters, digits, '_', '-', '.'
///   key = "quoted # ok"  quotes keep '#', ';' and surrounding spaces
///   list = 1, 2.5, 3     comma-separated lists
///
/// Keys are unique after prefixing. Every error carries line and column.
class Config {
public:
    struct Entry {
        std::string value;
        int line = 0;        // 0 for overrides
        int column = 0;      // of the value
        int key_column = 0;  // of the key
    };

    static Config parse(std::string_view text, std::string source = "<string>");
    static Config load(const std::filesystem::path& path);

    const std::string& source() const { return source_; }
    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    std::string str(const std::string& key) const;
    std::string str(const std::string& key, const std::string& fallback) const;
    double num(const std::string& key) const;
    double num(const std::string& key, double fallback) const;
    long integer(const std::string& key) const;
    long integer(const std::string& key, long fallback) const;
    bool flag(const std::string& key, bool fallback) const;
    std::vector<double> nums(const std::string& key) const;
    std::vector<double> nums(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> strs(const std::string& key) const;
    /// Value restricted to one of `allowed`.
    std::string choice(const std::string& key, const std::vector<std::string>& allowed) const;
    std::string choice(const std::string& key, const std::vector<std::string>& allowed,
                       const std::string& fallback) const;

    /// Keys starting with prefix + "." (prefix itself excluded).
    std::vector<std::string> keys_under(const std::string& prefix) const;

    /// Replaces or adds a value (sweeps, command-line seeds).
    void set(const std::string& key, const std::string& value);
    /// Marks a key as read without reading it.
    void touch(const std::string& key) const { used_.insert(key); }
    bool was_read(const std::string& key) const { return used_.count(key) > 0; }
    /// Throws ConfigError naming the first key nobody read.
    void reject_unused() const;

    /// Sorted "key = value" lines; the basis of the content hash.
    std::string canonical() const;
    /// git blob SHA-1 of canonical().
    std::string content_hash() const;

    [[noreturn]] void fail(const std::string& key, const std::string& what) const;

private:
    const Entry& get(const std::string& key) const;

    std::string source_;
    std::map<std::string, Entry> entries_;
    mutable std::set<std::string> used_;
};

/// Parses a comma-separated list of numbers (command-line --values).
std::vector<double> parse_number_list(const std::string& text, const std::string& what);

/// git-style object hash: SHA-1 of "blob <size>\0" + content, lower-case hex.
std::string git_blob_hash(std::string_view content);

}  // namespace switchlab
