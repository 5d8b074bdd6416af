#include "dfa/schema.hpp"

#include "dfa/common.hpp"
#include "run_config_schema.inc"

namespace dfa {

namespace {

using Json = nlohmann::json;

bool has_type(const Json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "number") return v.is_number();
  if (type == "integer")
    return v.is_number_integer() ||
           (v.is_number_float() && v.get<double>() == std::floor(v.get<double>()));
  throw ConfigError("schema", "unsupported schema type '" + type + "'");
}

void fail(const std::string& where, const std::string& what) {
  throw ConfigError("schema", (where.empty() ? std::string("config") : where) + ": " + what);
}

void validate_at(const Json& v, const Json& s, const std::string& where) {
  if (s.contains("type")) {
    const Json& t = s["type"];
    bool ok = false;
    if (t.is_string()) {
      ok = has_type(v, t.get<std::string>());
    } else {
      for (const auto& alt : t) ok = ok || has_type(v, alt.get<std::string>());
    }
    if (!ok) fail(where, "expected type " + t.dump() + ", got " + v.dump());
  }
  if (s.contains("enum")) {
    bool ok = false;
    for (const auto& e : s["enum"]) ok = ok || e == v;
    if (!ok) fail(where, v.dump() + " is not one of " + s["enum"].dump());
  }
  if (v.is_number()) {
    const double x = v.get<double>();
    if (s.contains("minimum") && x < s["minimum"].get<double>())
      fail(where, "must be >= " + s["minimum"].dump());
    if (s.contains("maximum") && x > s["maximum"].get<double>())
      fail(where, "must be <= " + s["maximum"].dump());
    if (s.contains("exclusiveMinimum") && x <= s["exclusiveMinimum"].get<double>())
      fail(where, "must be > " + s["exclusiveMinimum"].dump());
    if (s.contains("exclusiveMaximum") && x >= s["exclusiveMaximum"].get<double>())
      fail(where, "must be < " + s["exclusiveMaximum"].dump());
  }
  if (v.is_object()) {
    const Json empty = Json::object();
    const Json& props = s.contains("properties") ? s["properties"] : empty;
    if (s.contains("required"))
      for (const auto& r : s["required"])
        if (!v.contains(r.get<std::string>()))
          fail(where, "missing required key '" + r.get<std::string>() + "'");
    for (const auto& [key, value] : v.items()) {
      const std::string path = where.empty() ? key : where + "." + key;
      if (props.contains(key)) {
        validate_at(value, props[key], path);
      } else if (s.contains("additionalProperties") && s["additionalProperties"] == false) {
        throw ConfigError("schema", "unknown config key '" + path + "'");
      }
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>())
      fail(where, "needs at least " + s["minItems"].dump() + " items");
    if (s.contains("items"))
      for (std::size_t i = 0; i < v.size(); ++i)
        validate_at(v[i], s["items"], where + "[" + std::to_string(i) + "]");
  }
}

}  // namespace

void validate_json(const nlohmann::json& doc, const nlohmann::json& schema) {
  validate_at(doc, schema, "");
}

const nlohmann::json& run_config_schema() {
  static const nlohmann::json schema = nlohmann::json::parse(kRunConfigSchema);
  return schema;
}

}  // namespace dfa
