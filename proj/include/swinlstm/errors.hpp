#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace swinlstm {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shape mismatch in a tensor op; carries the op name and both shape strings.
struct ShapeError : Error {
  ShapeError(std::string op_, std::string lhs_, std::string rhs_)
      : Error(op_ + ": incompatible shapes " + lhs_ + " and " + rhs_),
        op(std::move(op_)),
        lhs(std::move(lhs_)),
        rhs(std::move(rhs_)) {}
  std::string op, lhs, rhs;
};

struct NonFiniteError : Error {
  explicit NonFiniteError(std::string where_)
      : Error("non-finite value in " + where_), where(std::move(where_)) {}
  std::string where;
};

// Invalid or inconsistent configuration; collects every issue found so a
// user sees all problems at once.
struct ConfigError : Error {
  explicit ConfigError(std::vector<std::string> issues_)
      : Error(join(issues_)), issues(std::move(issues_)) {}
  explicit ConfigError(const std::string& issue)
      : ConfigError(std::vector<std::string>{issue}) {}
  std::vector<std::string> issues;

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "config error:";
    for (const auto& i : v) {
      s += "\n  - ";
      s += i;
    }
    return s;
  }
};

struct IoError : Error {
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what) {}
};

struct CheckpointError : Error {
  enum class Kind { bad_magic, version_mismatch, config_mismatch, shape_mismatch, truncated };
  CheckpointError(Kind kind_, const std::string& detail)
      : Error("checkpoint: " + detail), kind(kind_) {}
  Kind kind;
};

struct DataFileError : Error {
  enum class Kind { bad_magic, bad_header, truncated };
  DataFileError(Kind kind_, const std::string& detail)
      : Error("data file: " + detail), kind(kind_) {}
  Kind kind;
};

}  // namespace swinlstm
