#pragma once

#include <map>
#include <string>
#include <vector>

namespace bariflex {

/// Flat `key = value` document. Blank lines and `#` comments are ignored;
/// every lookup failure reports the file name and the offending line.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueFile load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& text(const std::string& key) const;
  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  long integer(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, const std::vector<double>& values);

  /// Serialise in insertion order; numbers round-trip exactly.
  std::string dump() const;
  const std::string& origin() const { return origin_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::string origin_;
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;

  [[noreturn]] void fail(const std::string& key, const std::string& what) const;
};

std::string format_number(double value);
/// Whole-string decimal parse; false on trailing text, overflow or empty input.
bool parse_number(const std::string& s, double& out);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace bariflex
