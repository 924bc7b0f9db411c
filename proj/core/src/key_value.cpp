#include "nemo/key_value.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "nemo/errors.hpp"

namespace nemo {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

KeyValues parse_key_values(std::string_view text, const std::string& origin) {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value, got '" + t + "'");
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    out[std::move(key)] = trim(std::string_view(t).substr(eq + 1));
  }
  return out;
}

KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path);
}

namespace {

template <class T>
T parse_number(std::string_view key, std::string_view value, const char* kind) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw ConfigError("config key '" + std::string(key) + "': expected " + kind + ", got '" + std::string(value) + "'");
  }
  return out;
}

}  // namespace

double parse_double(std::string_view key, std::string_view value) {
  return parse_number<double>(key, value, "a real number");
}

std::int64_t parse_int(std::string_view key, std::string_view value) {
  return parse_number<std::int64_t>(key, value, "an integer");
}

std::uint64_t parse_uint(std::string_view key, std::string_view value) {
  return parse_number<std::uint64_t>(key, value, "a non-negative integer");
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected a boolean, got '" + std::string(value) + "'");
}

std::vector<std::string> split_list(std::string_view value, char sep) {
  std::vector<std::string> out;
  while (true) {
    const auto pos = value.find(sep);
    std::string item = trim(value.substr(0, pos));
    if (!item.empty()) out.push_back(std::move(item));
    if (pos == std::string_view::npos) break;
    value = value.substr(pos + 1);
  }
  return out;
}

std::vector<std::uint64_t> parse_uint_list(std::string_view key, std::string_view value) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(value)) out.push_back(parse_uint(key, item));
  if (out.empty()) throw ConfigError("config key '" + std::string(key) + "': empty list");
  return out;
}

}  // namespace nemo
