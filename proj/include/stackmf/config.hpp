#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace stackmf {

/// A scenario file is YAML. Nested mappings are flattened into dotted section
/// names (`cost: {leader: ...}` becomes section "cost.leader"); sequences become
/// arrays; unquoted scalars are numbers or true/false when they parse as such.
struct ConfigValue {
  enum class Kind { kNumber, kString, kBool, kArray };
  Kind kind = Kind::kNumber;
  double number = 0.0;
  std::string text;
  bool boolean = false;
  std::vector<ConfigValue> items;
  int line = 0;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Table key is the section name ("" for top-level keys).
using ConfigTable = std::map<std::string, std::map<std::string, ConfigValue>>;

ConfigTable parse_config(const std::string& text);

}  // namespace stackmf
