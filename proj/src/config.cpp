#include "ddmna/config.hpp"

#include "ddmna/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace ddmna {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

} // namespace

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.emplace_back(trim(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(std::string_view text, std::string_view field) {
  const auto t = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(value))
    throw ConfigError(std::string(field) + ": expected a number, got '" + std::string(t) + "'");
  return value;
}

std::pair<double, double> parse_range(std::string_view text, std::string_view field) {
  const auto parts = split(text, ':');
  if (parts.size() != 2) throw ConfigError(std::string(field) + ": expected lo:hi, got '" + std::string(text) + "'");
  return {parse_number(parts[0], field), parse_number(parts[1], field)};
}

std::vector<double> parse_number_list(std::string_view text, std::string_view field) {
  std::vector<double> out;
  if (text.find(':') != std::string_view::npos) {
    const auto [lo, hi] = parse_range(text, field);
    if (!(lo > 0.0) || !(hi >= lo)) throw ConfigError(std::string(field) + ": decade range needs 0 < lo <= hi");
    const int first = static_cast<int>(std::lround(std::log10(lo)));
    const int last = static_cast<int>(std::lround(std::log10(hi)));
    for (int e = first; e <= last; ++e) out.push_back(std::pow(10.0, e));
    return out;
  }
  for (const auto& part : split(text, ','))
    if (!part.empty()) out.push_back(parse_number(part, field));
  if (out.empty()) throw ConfigError(std::string(field) + ": empty list");
  return out;
}

ConfigFile ConfigFile::parse(std::istream& in, const std::string& origin) {
  ConfigFile cfg;
  std::string section;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s = raw;
    if (const auto c = s.find_first_of("#;"); c != std::string_view::npos) s = s.substr(0, c);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(origin + ":" + std::to_string(line) + ": unterminated section header");
      section = std::string(trim(s.substr(1, s.size() - 2)));
      if (section.empty()) throw ConfigError(origin + ":" + std::to_string(line) + ": empty section name");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ConfigError(origin + ":" + std::to_string(line) + ": expected key = value");
    const std::string key = lower(trim(s.substr(0, eq)));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line) + ": missing key");
    cfg.entries_[section.empty() ? key : section + "." + key] = std::string(trim(s.substr(eq + 1)));
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse(in, path);
}

std::optional<std::string> ConfigFile::get(std::string_view key) const {
  const auto it = entries_.find(std::string(key));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string ConfigFile::text(std::string_view key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double ConfigFile::number(std::string_view key, double fallback) const {
  const auto v = get(key);
  return v ? parse_number(*v, key) : fallback;
}

long ConfigFile::integer(std::string_view key, long fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  const double x = parse_number(*v, key);
  if (x != std::floor(x) || std::abs(x) > 9e15) throw ConfigError(std::string(key) + ": expected an integer");
  return static_cast<long>(x);
}

bool ConfigFile::flag(std::string_view key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  const auto s = lower(*v);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + *v + "'");
}

std::vector<std::string> ConfigFile::sections(std::string_view prefix) const {
  std::set<std::string> names;
  for (const auto& [key, value] : entries_) {
    const auto dot = key.rfind('.');
    if (dot == std::string::npos) continue;
    const auto section = key.substr(0, dot);
    if (section.rfind(prefix, 0) == 0) names.insert(section);
  }
  return {names.begin(), names.end()};
}

void ConfigFile::write(std::ostream& out) const {
  std::string current = "\x01";
  for (const auto& [key, value] : entries_) {
    const auto dot = key.rfind('.');
    const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
    if (section != current) {
      if (current != "\x01") out << '\n';
      if (!section.empty()) out << '[' << section << "]\n";
      current = section;
    }
    out << (dot == std::string::npos ? key : key.substr(dot + 1)) << " = " << value << '\n';
  }
}

} // namespace ddmna
