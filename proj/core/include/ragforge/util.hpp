#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ragforge {

// Every persisted structure goes through ordered_json so that field order --
// and therefore the serialized bytes -- never depend on hash seeds.
using Json = nlohmann::ordered_json;

namespace util {

std::string to_lower(std::string s);
std::string trim(std::string_view s);

// Squeezes runs of whitespace (space, tab, newline, CR) to single spaces
// and trims the ends.
std::string collapse_whitespace(std::string_view s);

bool contains_ci(std::string_view haystack, std::string_view needle);

// Byte-wise truncation with a fixed "..." marker once the cap is exceeded.
// Caps are generous (thousands of bytes), so mid-UTF-8 cuts are accepted.
std::string truncate_text(const std::string& s, std::size_t max_bytes);

// FNV-1a, 64 bit. Used for feature hashing and config fingerprints; never
// for anything security-sensitive.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

// Fixed-width decimal, zero padded: format_index(7, 4) == "0007".
std::string format_index(std::size_t value, int width);

std::string read_file(const std::filesystem::path& path);

// Writes via a sibling temp file + rename so readers never observe a
// half-written artifact.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

// One JSON value per line. Blank lines are not allowed; a malformed line
// raises ParseError naming its 1-based line number.
std::vector<Json> read_jsonl_file(const std::filesystem::path& path);
void write_jsonl_file(const std::filesystem::path& path, const std::vector<Json>& rows);

std::string dump_jsonl(const std::vector<Json>& rows);

// Non-blank, non-comment ('#') lines, trimmed.
std::vector<std::string> read_line_list(const std::filesystem::path& path);

// Structured one-line JSON event on stderr: {"event": <name>, ...fields}.
void log_event(std::string_view name, const Json& fields = Json::object());

}  // namespace util
}  // namespace ragforge
