#include "stackmf/config.hpp"

#include <yaml-cpp/yaml.h>

#include "stackmf/format.hpp"

namespace stackmf {

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& msg) {
  throw ParseError("line " + std::to_string(node.Mark().line + 1) + ": " + msg);
}

ConfigValue convert(const YAML::Node& node) {
  ConfigValue v;
  v.line = node.Mark().line + 1;
  switch (node.Type()) {
    case YAML::NodeType::Sequence:
      v.kind = ConfigValue::Kind::kArray;
      for (const auto& item : node) v.items.push_back(convert(item));
      return v;
    case YAML::NodeType::Scalar: {
      const std::string& s = node.Scalar();
      // Quoted scalars are always strings.
      if (node.Tag() == "!") {
        v.kind = ConfigValue::Kind::kString;
        v.text = s;
      } else if (s == "true" || s == "false") {
        v.kind = ConfigValue::Kind::kBool;
        v.boolean = s == "true";
      } else {
        try {
          v.number = parse_double(s);
          v.kind = ConfigValue::Kind::kNumber;
        } catch (const std::invalid_argument&) {
          v.kind = ConfigValue::Kind::kString;
          v.text = s;
        }
      }
      return v;
    }
    case YAML::NodeType::Map:
      fail(node, "unexpected mapping");
    default:
      fail(node, "missing value");
  }
}

// Nested mappings become dotted section names; a mapping holding only
// mappings ("cost") does not appear itself.
void add_section(ConfigTable& table, const std::string& name, const YAML::Node& map) {
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    if (kv.second.IsMap()) {
      add_section(table, name + "." + key, kv.second);
      continue;
    }
    auto& sec = table[name];
    if (sec.count(key)) fail(kv.first, "duplicate key '" + key + "'");
    sec[key] = convert(kv.second);
  }
}

}  // namespace

ConfigTable parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ParseError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  ConfigTable table;
  table[""];
  if (root.IsNull()) return table;
  if (!root.IsMap()) fail(root, "top level must be a mapping");
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    if (kv.second.IsMap()) {
      add_section(table, key, kv.second);
    } else {
      if (table[""].count(key)) fail(kv.first, "duplicate key '" + key + "'");
      table[""][key] = convert(kv.second);
    }
  }
  return table;
}

}  // namespace stackmf
