#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "swinlstm/errors.hpp"

namespace swinlstm {

// Reader for key=value configuration text: one pair per line, '#' starts a
// comment, blank lines are skipped. Reading is two-phase so a user sees
// every problem at once: getters record issues and remember which keys they
// consumed, and finish() throws one ConfigError listing malformed lines,
// bad values, and keys nobody asked for.
class KvReader {
 public:
  explicit KvReader(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, std::string def);
  std::int64_t get_int(const std::string& key, std::int64_t def);
  double get_double(const std::string& key, double def);
  bool get_bool(const std::string& key, bool def);
  std::vector<int> get_int_list(const std::string& key, std::vector<int> def);
  // The value must be one of the listed options.
  std::string get_choice(const std::string& key, std::string def,
                         std::initializer_list<const char*> options);

  void note(std::string issue) { issues_.push_back(std::move(issue)); }
  bool clean() const;
  void finish() const;

 private:
  const std::string* lookup(const std::string& key);

  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
  std::vector<std::string> issues_;
};

}  // namespace swinlstm
