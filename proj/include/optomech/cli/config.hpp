#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace optomech::cli {

/// Flat sectioned key = value file. Comments start with '#' or ';'.
/// Every lookup is recorded so the run can be echoed as an effective config,
/// and keys nobody asked for are reported with their line number.
class Config {
 public:
  Config() = default;

  static Config parse(std::string_view text, std::string origin = "<config>");
  static Config load(const std::filesystem::path& path);

  /// Directory that relative paths in the file are resolved against.
  const std::filesystem::path& base_dir() const { return base_dir_; }
  void set_base_dir(std::filesystem::path dir) { base_dir_ = std::move(dir); }

  bool has(const std::string& section, const std::string& key) const;
  /// Command-line override; behaves as if the value were in the file.
  void set(const std::string& section, const std::string& key, const std::string& value);

  double number(const std::string& section, const std::string& key, double fallback);
  std::optional<double> optional_number(const std::string& section, const std::string& key);
  std::uint64_t unsigned_integer(const std::string& section, const std::string& key, std::uint64_t fallback);
  bool boolean(const std::string& section, const std::string& key, bool fallback);
  std::string text(const std::string& section, const std::string& key, const std::string& fallback);
  std::optional<std::string> optional_text(const std::string& section, const std::string& key);
  /// Comma-separated numbers.
  std::vector<double> numbers(const std::string& section, const std::string& key, const std::vector<double>& fallback);
  /// Comma-separated "a:b" pairs.
  std::vector<std::pair<double, double>> pairs(const std::string& section, const std::string& key,
                                               const std::vector<std::pair<double, double>>& fallback);
  /// Path resolved against base_dir(); absolute in the echo.
  std::optional<std::filesystem::path> optional_path(const std::string& section, const std::string& key);

  /// Throws ConfigError naming the first key that was never read.
  void check_unused() const;

  /// Every value read (including defaults) in INI form.
  std::string effective() const;

  /// "origin:line: section.key" for messages.
  std::string where(const std::string& section, const std::string& key) const;

 private:
  struct Entry {
    std::string value;
    int line = 0;  // 0 for overrides
    bool used = false;
  };
  using Key = std::pair<std::string, std::string>;

  Entry* find(const std::string& section, const std::string& key);
  void record(const std::string& section, const std::string& key, const std::string& value);

  std::string origin_ = "<config>";
  std::filesystem::path base_dir_ = ".";
  std::map<Key, Entry> entries_;
  std::vector<Key> order_;  // file order, for stable diagnostics
  std::vector<std::pair<Key, std::string>> effective_;
};

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double value);

}  // namespace optomech::cli
