#include "optomech/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "optomech/errors.hpp"

namespace optomech::cli {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::optional<double> parse_double(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

Config Config::parse(std::string_view text, std::string origin) {
  Config cfg;
  cfg.origin_ = std::move(origin);
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    const std::string line = trim(text.substr(pos, eol - pos));
    ++line_no;
    pos = eol + 1;
    const auto fail = [&](const std::string& msg) {
      throw ConfigError(cfg.origin_ + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (line.empty() || line[0] == '#' || line[0] == ';') {
      if (eol == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty()) fail("empty section name");
    } else {
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail("expected 'key = value'");
      if (section.empty()) fail("key outside of any section");
      const std::string key = trim(std::string_view(line).substr(0, eq));
      if (key.empty()) fail("empty key");
      const Key k{section, key};
      if (cfg.entries_.count(k)) fail("duplicate key " + section + "." + key);
      cfg.entries_[k] = Entry{trim(std::string_view(line).substr(eq + 1)), line_no, false};
      cfg.order_.push_back(k);
    }
    if (eol == text.size()) break;
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  Config cfg = parse(ss.str(), path.string());
  cfg.base_dir_ = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return cfg;
}

bool Config::has(const std::string& section, const std::string& key) const {
  return entries_.count({section, key}) != 0;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  const Key k{section, key};
  auto it = entries_.find(k);
  if (it == entries_.end()) {
    entries_[k] = Entry{value, 0, false};
    order_.push_back(k);
  } else {
    it->second.value = value;
    it->second.line = 0;
  }
}

Config::Entry* Config::find(const std::string& section, const std::string& key) {
  auto it = entries_.find({section, key});
  if (it == entries_.end()) return nullptr;
  it->second.used = true;
  return &it->second;
}

void Config::record(const std::string& section, const std::string& key, const std::string& value) {
  const Key k{section, key};
  for (auto& [existing, v] : effective_) {
    if (existing == k) {
      v = value;
      return;
    }
  }
  effective_.emplace_back(k, value);
}

std::string Config::where(const std::string& section, const std::string& key) const {
  const auto it = entries_.find({section, key});
  std::string loc = origin_;
  if (it != entries_.end() && it->second.line > 0) loc += ":" + std::to_string(it->second.line);
  if (it != entries_.end() && it->second.line == 0) loc = "command line";
  return loc + ": " + section + "." + key;
}

double Config::number(const std::string& section, const std::string& key, double fallback) {
  const auto v = optional_number(section, key);
  if (!v) record(section, key, format_double(fallback));
  return v.value_or(fallback);
}

std::optional<double> Config::optional_number(const std::string& section, const std::string& key) {
  Entry* e = find(section, key);
  if (!e) return std::nullopt;
  const auto v = parse_double(e->value);
  if (!v) throw ConfigError(where(section, key) + ": expected a number, got '" + e->value + "'");
  record(section, key, format_double(*v));
  return v;
}

std::uint64_t Config::unsigned_integer(const std::string& section, const std::string& key, std::uint64_t fallback) {
  Entry* e = find(section, key);
  if (!e) {
    record(section, key, std::to_string(fallback));
    return fallback;
  }
  const std::string t = trim(e->value);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(where(section, key) + ": expected a non-negative integer, got '" + e->value + "'");
  }
  record(section, key, std::to_string(v));
  return v;
}

bool Config::boolean(const std::string& section, const std::string& key, bool fallback) {
  Entry* e = find(section, key);
  bool v = fallback;
  if (e) {
    std::string t = trim(e->value);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t == "true" || t == "yes" || t == "1" || t == "on") {
      v = true;
    } else if (t == "false" || t == "no" || t == "0" || t == "off") {
      v = false;
    } else {
      throw ConfigError(where(section, key) + ": expected true or false, got '" + e->value + "'");
    }
  }
  record(section, key, v ? "true" : "false");
  return v;
}

std::string Config::text(const std::string& section, const std::string& key, const std::string& fallback) {
  const auto v = optional_text(section, key);
  if (!v) record(section, key, fallback);
  return v.value_or(fallback);
}

std::optional<std::string> Config::optional_text(const std::string& section, const std::string& key) {
  Entry* e = find(section, key);
  if (!e) return std::nullopt;
  record(section, key, e->value);
  return e->value;
}

std::vector<double> Config::numbers(const std::string& section, const std::string& key,
                                    const std::vector<double>& fallback) {
  Entry* e = find(section, key);
  std::vector<double> out;
  if (!e) {
    out = fallback;
  } else if (!trim(e->value).empty()) {
    for (const std::string& item : split(e->value, ',')) {
      const auto v = parse_double(item);
      if (!v) throw ConfigError(where(section, key) + ": expected comma-separated numbers, got '" + item + "'");
      out.push_back(*v);
    }
  }
  std::string echo;
  for (std::size_t i = 0; i < out.size(); ++i) echo += (i ? ", " : "") + format_double(out[i]);
  record(section, key, echo);
  return out;
}

std::vector<std::pair<double, double>> Config::pairs(const std::string& section, const std::string& key,
                                                     const std::vector<std::pair<double, double>>& fallback) {
  Entry* e = find(section, key);
  std::vector<std::pair<double, double>> out;
  if (!e) {
    out = fallback;
  } else if (!trim(e->value).empty()) {
    for (const std::string& item : split(e->value, ',')) {
      const auto parts = split(item, ':');
      const auto a = parts.size() == 2 ? parse_double(parts[0]) : std::nullopt;
      const auto b = parts.size() == 2 ? parse_double(parts[1]) : std::nullopt;
      if (!a || !b) throw ConfigError(where(section, key) + ": expected 'a:b' pairs, got '" + item + "'");
      out.emplace_back(*a, *b);
    }
  }
  std::string echo;
  for (std::size_t i = 0; i < out.size(); ++i) {
    echo += (i ? ", " : "") + format_double(out[i].first) + ":" + format_double(out[i].second);
  }
  record(section, key, echo);
  return out;
}

std::optional<std::filesystem::path> Config::optional_path(const std::string& section, const std::string& key) {
  Entry* e = find(section, key);
  if (!e) return std::nullopt;
  std::filesystem::path p(e->value);
  if (p.is_relative() && e->line > 0) p = base_dir_ / p;
  p = std::filesystem::absolute(p).lexically_normal();
  record(section, key, p.string());
  return p;
}

void Config::check_unused() const {
  for (const Key& k : order_) {
    const Entry& e = entries_.at(k);
    if (!e.used) throw ConfigError(where(k.first, k.second) + ": unknown key");
  }
}

std::string Config::effective() const {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> by_section;
  std::vector<std::string> sections;
  for (const auto& [k, v] : effective_) {
    if (!by_section.count(k.first)) sections.push_back(k.first);
    by_section[k.first].emplace_back(k.second, v);
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (i) os << '\n';
    os << '[' << sections[i] << "]\n";
    for (const auto& [key, value] : by_section[sections[i]]) os << key << " = " << value << '\n';
  }
  return os.str();
}

}  // namespace optomech::cli
