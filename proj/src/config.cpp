#include "swinlstm/config.hpp"

#include <cstdlib>
#include <sstream>

namespace swinlstm {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KvReader::KvReader(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  for (int num = 1; std::getline(in, line); ++num) {
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string body = trim(line);
    if (body.empty()) continue;
    std::size_t eq = body.find('=');
    if (eq == std::string::npos) {
      issues_.push_back("line " + std::to_string(num) + ": expected key=value, got '" + body + "'");
      continue;
    }
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty()) {
      issues_.push_back("line " + std::to_string(num) + ": empty key");
      continue;
    }
    if (values_.count(key) != 0) {
      issues_.push_back("line " + std::to_string(num) + ": duplicate key '" + key + "'");
      continue;
    }
    values_.emplace(std::move(key), std::move(value));
  }
}

const std::string* KvReader::lookup(const std::string& key) {
  consumed_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string KvReader::get_string(const std::string& key, std::string def) {
  const std::string* v = lookup(key);
  return v == nullptr ? def : *v;
}

std::int64_t KvReader::get_int(const std::string& key, std::int64_t def) {
  const std::string* v = lookup(key);
  if (v == nullptr) return def;
  const char* s = v->c_str();
  char* end = nullptr;
  long long parsed = std::strtoll(s, &end, 10);
  if (end == s || *end != '\0') {
    issues_.push_back(key + ": expected an integer, got '" + *v + "'");
    return def;
  }
  return parsed;
}

double KvReader::get_double(const std::string& key, double def) {
  const std::string* v = lookup(key);
  if (v == nullptr) return def;
  const char* s = v->c_str();
  char* end = nullptr;
  double parsed = std::strtod(s, &end);
  if (end == s || *end != '\0') {
    issues_.push_back(key + ": expected a number, got '" + *v + "'");
    return def;
  }
  return parsed;
}

bool KvReader::get_bool(const std::string& key, bool def) {
  const std::string* v = lookup(key);
  if (v == nullptr) return def;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  issues_.push_back(key + ": expected true or false, got '" + *v + "'");
  return def;
}

std::vector<int> KvReader::get_int_list(const std::string& key, std::vector<int> def) {
  const std::string* v = lookup(key);
  if (v == nullptr) return def;
  std::vector<int> out;
  std::string item;
  std::istringstream in(*v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    const char* s = item.c_str();
    char* end = nullptr;
    long long parsed = std::strtoll(s, &end, 10);
    if (item.empty() || end == s || *end != '\0') {
      issues_.push_back(key + ": expected comma-separated integers, got '" + *v + "'");
      return def;
    }
    out.push_back(static_cast<int>(parsed));
  }
  if (out.empty()) {
    issues_.push_back(key + ": expected comma-separated integers, got '" + *v + "'");
    return def;
  }
  return out;
}

std::string KvReader::get_choice(const std::string& key, std::string def,
                                 std::initializer_list<const char*> options) {
  const std::string* v = lookup(key);
  if (v == nullptr) return def;
  std::string allowed;
  for (const char* opt : options) {
    if (*v == opt) return *v;
    if (!allowed.empty()) allowed += ", ";
    allowed += opt;
  }
  issues_.push_back(key + ": expected one of {" + allowed + "}, got '" + *v + "'");
  return def;
}

bool KvReader::clean() const {
  if (!issues_.empty()) return false;
  for (const auto& kv : values_)
    if (consumed_.count(kv.first) == 0) return false;
  return true;
}

void KvReader::finish() const {
  std::vector<std::string> all = issues_;
  for (const auto& kv : values_)
    if (consumed_.count(kv.first) == 0) all.push_back("unknown key '" + kv.first + "'");
  if (!all.empty()) throw ConfigError(all);
}

}  // namespace swinlstm
