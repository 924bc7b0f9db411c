#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace nemo {

/// Ordered key=value pairs as read from a config file. `#` starts a comment;
/// blank lines are skipped; later duplicates overwrite earlier ones.
using KeyValues = std::map<std::string, std::string, std::less<>>;

KeyValues parse_key_values(std::string_view text, const std::string& origin = "<config>");
KeyValues read_key_values(const std::string& path);

// Typed value parsers; throw ConfigError naming the key on malformed input.
double parse_double(std::string_view key, std::string_view value);
std::int64_t parse_int(std::string_view key, std::string_view value);
std::uint64_t parse_uint(std::string_view key, std::string_view value);
bool parse_bool(std::string_view key, std::string_view value);
std::vector<std::uint64_t> parse_uint_list(std::string_view key, std::string_view value);
std::vector<std::string> split_list(std::string_view value, char sep = ',');

std::string trim(std::string_view s);

}  // namespace nemo
