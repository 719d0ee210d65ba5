#include "switchlab/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace switchlab {

namespace {

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

bool key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

bool valid_key(std::string_view k) {
    if (k.empty() || k.front() == '.' || k.back() == '.') return false;
    if (k.find("..") != std::string_view::npos) return false;
    return std::all_of(k.begin(), k.end(), key_char);
}

std::string located(const std::string& source, int line, int column, const std::string& what) {
    if (line == 0) return source + ": " + what;
    return source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what;
}

bool parse_double(std::string_view s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    const char* b = t.data();
    const char* e = b + t.size();
    if (*b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(v);
    while (std::getline(is, cur, ',')) out.push_back(trim(cur));
    if (!v.empty() && v.back() == ',') out.push_back("");
    return out;
}

}  // namespace

Config Config::parse(std::string_view text, std::string source) {
    Config cfg;
    cfg.source_ = std::move(source);
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        pos = end + 1;

        // Strip comments outside quotes.
        bool quoted = false;
        std::size_t cut = line.size();
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            else if (!quoted && (line[i] == '#' || line[i] == ';')) {
                cut = i;
                break;
            }
        }
        if (quoted) throw ConfigError(located(cfg.source_, line_no, static_cast<int>(line.size()), "unterminated quote"));
        line = line.substr(0, cut);
        std::size_t first = 0;
        while (first < line.size() && std::isspace(static_cast<unsigned char>(line[first]))) ++first;
        if (first == line.size()) continue;
        const int col0 = static_cast<int>(first) + 1;

        if (line[first] == '[') {
            const std::size_t close = line.find(']', first);
            if (close == std::string_view::npos)
                throw ConfigError(located(cfg.source_, line_no, col0, "missing ']' in section header"));
            if (!trim(line.substr(close + 1)).empty())
                throw ConfigError(located(cfg.source_, line_no, static_cast<int>(close) + 2,
                                          "text after section header"));
            section = trim(line.substr(first + 1, close - first - 1));
            if (!section.empty() && !valid_key(section))
                throw ConfigError(located(cfg.source_, line_no, col0 + 1, "bad section name '" + section + "'"));
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(located(cfg.source_, line_no, col0, "expected 'key = value'"));
        const std::string key = trim(line.substr(0, eq));
        if (!valid_key(key)) throw ConfigError(located(cfg.source_, line_no, col0, "bad key '" + key + "'"));
        const std::string full = section.empty() ? key : section + "." + key;

        std::size_t vstart = eq + 1;
        while (vstart < line.size() && std::isspace(static_cast<unsigned char>(line[vstart]))) ++vstart;
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        else if (value.find('"') != std::string::npos)
            throw ConfigError(located(cfg.source_, line_no, static_cast<int>(vstart) + 1,
                                      "quotes must enclose the whole value"));

        Entry e{value, line_no, static_cast<int>(vstart) + 1, col0};
        if (!cfg.entries_.emplace(full, e).second)
            throw ConfigError(located(cfg.source_, line_no, col0, "duplicate key '" + full + "'"));
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void Config::fail(const std::string& key, const std::string& what) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(located(source_, 0, 0, key + ": " + what));
    throw ConfigError(located(source_, it->second.line, it->second.column, key + ": " + what));
}

const Config::Entry& Config::get(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(located(source_, 0, 0, "missing key '" + key + "'"));
    used_.insert(key);
    return it->second;
}

std::string Config::str(const std::string& key) const { return get(key).value; }

std::string Config::str(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
}

double Config::num(const std::string& key) const {
    double v = 0.0;
    if (!parse_double(get(key).value, v)) fail(key, "expected a number, got '" + get(key).value + "'");
    return v;
}

double Config::num(const std::string& key, double fallback) const { return has(key) ? num(key) : fallback; }

long Config::integer(const std::string& key) const {
    const std::string t = trim(get(key).value);
    long v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || p != t.data() + t.size())
        fail(key, "expected an integer, got '" + t + "'");
    return v;
}

long Config::integer(const std::string& key, long fallback) const { return has(key) ? integer(key) : fallback; }

bool Config::flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = choice(key, {"true", "false", "yes", "no", "1", "0"});
    return v == "true" || v == "yes" || v == "1";
}

std::vector<double> Config::nums(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(get(key).value)) {
        double v = 0.0;
        if (!parse_double(item, v)) fail(key, "expected a list of numbers, got item '" + item + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<double> Config::nums(const std::string& key, const std::vector<double>& fallback) const {
    return has(key) ? nums(key) : fallback;
}

std::vector<std::string> Config::strs(const std::string& key) const {
    auto out = split_list(get(key).value);
    for (const auto& s : out)
        if (s.empty()) fail(key, "empty list item");
    return out;
}

std::string Config::choice(const std::string& key, const std::vector<std::string>& allowed) const {
    const std::string v = str(key);
    if (std::find(allowed.begin(), allowed.end(), v) != allowed.end()) return v;
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    fail(key, "unknown value '" + v + "' (expected one of: " + list + ")");
}

std::string Config::choice(const std::string& key, const std::vector<std::string>& allowed,
                           const std::string& fallback) const {
    return has(key) ? choice(key, allowed) : fallback;
}

std::vector<std::string> Config::keys_under(const std::string& prefix) const {
    std::vector<std::string> out;
    const std::string p = prefix + ".";
    for (auto it = entries_.lower_bound(p); it != entries_.end() && it->first.rfind(p, 0) == 0; ++it)
        out.push_back(it->first);
    return out;
}

void Config::set(const std::string& key, const std::string& value) {
    if (!valid_key(key)) throw ConfigError(located(source_, 0, 0, "bad key '" + key + "'"));
    entries_[key] = Entry{value, 0, 0, 0};
}

void Config::reject_unused() const {
    const Entry* worst = nullptr;
    std::string name;
    for (const auto& [k, e] : entries_)
        if (!used_.count(k) && (!worst || e.line < worst->line)) {
            worst = &e;
            name = k;
        }
    if (worst) throw ConfigError(located(source_, worst->line, worst->key_column, "unknown key '" + name + "'"));
}

std::string Config::canonical() const {
    std::string out;
    for (const auto& [k, e] : entries_) out += k + " = " + e.value + "\n";
    return out;
}

std::string Config::content_hash() const { return git_blob_hash(canonical()); }

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    if (trim(text).empty()) throw ConfigError(what + ": empty value list");
    for (const auto& item : split_list(text)) {
        double v = 0.0;
        if (!parse_double(item, v)) throw ConfigError(what + ": not a number: '" + item + "'");
        out.push_back(v);
    }
    return out;
}

std::string git_blob_hash(std::string_view content) {
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
    EVP_DigestUpdate(ctx, header.data(), header.size());
    EVP_DigestUpdate(ctx, content.data(), content.size());
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

}  // namespace switchlab
