#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ddmna {

/// Flat key-value file with [section] headers. Keys are stored as "section.key".
/// '#' and ';' start comments; blank lines are ignored.
class ConfigFile {
public:
  static ConfigFile parse(std::istream& in, const std::string& origin = "<config>");
  static ConfigFile load(const std::string& path);

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  bool has(std::string_view key) const { return entries_.count(std::string(key)) > 0; }
  std::optional<std::string> get(std::string_view key) const;

  std::string text(std::string_view key, const std::string& fallback) const;
  double number(std::string_view key, double fallback) const;
  long integer(std::string_view key, long fallback) const;
  bool flag(std::string_view key, bool fallback) const;

  /// Section names that start with `prefix` (e.g. "data." gives every dataset section).
  std::vector<std::string> sections(std::string_view prefix) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Writes the entries back in file form, grouped by section.
  void write(std::ostream& out) const;

private:
  std::map<std::string, std::string> entries_;
};

/// Parses "1e3", "2.5k"-free plain numbers; throws ConfigError naming `field` on failure.
double parse_number(std::string_view text, std::string_view field);

/// "lo:hi" into two numbers.
std::pair<double, double> parse_range(std::string_view text, std::string_view field);

/// "1e2:1e6" expands to the decades in between; "100,1000" is a plain list.
std::vector<double> parse_number_list(std::string_view text, std::string_view field);

std::vector<std::string> split(std::string_view text, char sep);

} // namespace ddmna
