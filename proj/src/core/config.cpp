#include "config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace bariflex {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

bool parse_number(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ptr != end || s.empty()) return false;
  if (ec == std::errc()) return true;
  // from_chars rejects subnormals as out of range; those are representable.
  if (ec == std::errc::result_out_of_range) {
    const double v = std::strtod(std::string(s).c_str(), nullptr);
    if (std::isfinite(v) && v != 0.0) {
      out = v;
      return true;
    }
  }
  return false;
}

std::string format_number(double value) {
  // Shortest representation that parses back to the same double.
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << text;
}

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    if (kv.entries_.count(key)) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    kv.entries_[key] = Entry{value, line_no};
    kv.order_.push_back(key);
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::string& path) { return parse(read_text_file(path), path); }

void KeyValueFile::fail(const std::string& key, const std::string& what) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(origin_ + ": missing key '" + key + "'");
  throw ConfigError(origin_ + ":" + std::to_string(it->second.line) + ": key '" + key + "': " + what);
}

const std::string& KeyValueFile::text(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) fail(key, "missing");
  return it->second.value;
}

double KeyValueFile::number(const std::string& key) const {
  double v = 0.0;
  if (!parse_number(text(key), v)) fail(key, "not a number: '" + text(key) + "'");
  return v;
}

double KeyValueFile::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

long KeyValueFile::integer(const std::string& key) const {
  const std::string& s = text(key);
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(key, "not an integer: '" + s + "'");
  return v;
}

std::vector<double> KeyValueFile::numbers(const std::string& key) const {
  std::vector<double> out;
  std::istringstream in(text(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    double v = 0.0;
    if (!parse_number(trim(item), v)) fail(key, "not a number list: '" + text(key) + "'");
    out.push_back(v);
  }
  return out;
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
  if (!entries_.count(key)) order_.push_back(key);
  entries_[key].value = value;
}

void KeyValueFile::set(const std::string& key, double value) { set(key, format_number(value)); }

void KeyValueFile::set(const std::string& key, const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ", ";
    s += format_number(values[i]);
  }
  set(key, s);
}

std::string KeyValueFile::dump() const {
  std::string out;
  for (const auto& key : order_) {
    out += key + " = " + entries_.at(key).value + "\n";
  }
  return out;
}

}  // namespace bariflex
