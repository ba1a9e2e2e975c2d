#include "ragforge/util.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ragforge/errors.hpp"

namespace ragforge::util {

std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out.push_back(' ');
        in_space = false;
        out.push_back(c);
    }
    return out;
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    std::string h = to_lower(std::string(haystack));
    std::string n = to_lower(std::string(needle));
    return h.find(n) != std::string::npos;
}

std::string truncate_text(const std::string& s, std::size_t max_bytes) {
    if (s.size() <= max_bytes) return s;
    return s.substr(0, max_bytes) + "...";
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

std::string format_index(std::size_t value, int width) {
    std::ostringstream os;
    std::string digits = std::to_string(value);
    while (static_cast<int>(digits.size()) < width) digits.insert(digits.begin(), '0');
    return digits;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void atomic_write_file(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path dir = path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open temp file for write: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error("short write: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<Json> read_jsonl_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path.string());
    std::vector<Json> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) {
            throw ParseError(path.filename().string() + ": blank line " + std::to_string(line_no));
        }
        try {
            rows.push_back(Json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.filename().string() + ": bad JSON on line " +
                             std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

std::string dump_jsonl(const std::vector<Json>& rows) {
    std::string out;
    for (const Json& row : rows) {
        out += row.dump();
        out.push_back('\n');
    }
    return out;
}

void write_jsonl_file(const std::filesystem::path& path, const std::vector<Json>& rows) {
    atomic_write_file(path, dump_jsonl(rows));
}

std::vector<std::string> read_line_list(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        out.push_back(t);
    }
    return out;
}

void log_event(std::string_view name, const Json& fields) {
    Json row = Json::object();
    row["event"] = std::string(name);
    for (auto it = fields.begin(); it != fields.end(); ++it) row[it.key()] = it.value();
    std::cerr << row.dump() << "\n";
}

}  // namespace ragforge::util
