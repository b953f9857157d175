#include "runvar/schema.hpp"

#include <algorithm>

namespace runvar {

namespace {

using nlohmann::json;

bool matches(const json& v, FieldType type) {
  switch (type) {
    case FieldType::String: return v.is_string();
    case FieldType::Boolean: return v.is_boolean();
    case FieldType::Number: return v.is_number();
    case FieldType::StringArray:
      return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); });
  }
  return false;
}

std::string_view type_name(FieldType type) {
  switch (type) {
    case FieldType::String: return "string";
    case FieldType::Boolean: return "boolean";
    case FieldType::Number: return "number";
    case FieldType::StringArray: return "array of strings";
  }
  return "?";
}

std::optional<SchemaIssue> check_object(const json& obj, const SchemaDescriptor& schema,
                                        const std::string& prefix,
                                        std::optional<std::size_t> element) {
  auto issue = [&](std::string path, std::string msg) {
    return SchemaIssue{std::move(path), std::move(msg), element};
  };
  if (!obj.is_object()) return issue(prefix.empty() ? "$" : prefix, "expected an object");
  for (const auto& f : schema.fields) {
    const std::string path = prefix.empty() ? f.name : prefix + "." + f.name;
    auto it = obj.find(f.name);
    if (it == obj.end()) {
      if (f.required) return issue(path, "missing required field");
      continue;
    }
    if (!matches(*it, f.type)) {
      if (f.type == FieldType::StringArray && it->is_array()) {
        for (std::size_t i = 0; i < it->size(); ++i) {
          if (!(*it)[i].is_string()) {
            return issue(path + "[" + std::to_string(i) + "]", "expected string");
          }
        }
      }
      return issue(path, "expected " + std::string(type_name(f.type)));
    }
  }
  for (const auto& [key, _] : obj.items()) {
    const bool known = std::any_of(schema.fields.begin(), schema.fields.end(),
                                   [&](const FieldSpec& f) { return f.name == key; });
    if (!known) return issue(prefix.empty() ? key : prefix + "." + key, "unknown field");
  }
  return std::nullopt;
}

}  // namespace

std::optional<SchemaIssue> find_schema_issue(const nlohmann::json& value,
                                             const SchemaDescriptor& schema) {
  switch (schema.shape) {
    case SchemaShape::Object:
      return check_object(value, schema, "", std::nullopt);
    case SchemaShape::ObjectArray:
      if (!value.is_array()) return SchemaIssue{"$", "expected an array", std::nullopt};
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (auto issue = check_object(value[i], schema, "[" + std::to_string(i) + "]", i)) {
          return issue;
        }
      }
      return std::nullopt;
    case SchemaShape::StringArray:
      if (!value.is_array()) return SchemaIssue{"$", "expected an array", std::nullopt};
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (!value[i].is_string()) {
          return SchemaIssue{"[" + std::to_string(i) + "]", "expected string", i};
        }
      }
      return std::nullopt;
  }
  return std::nullopt;
}

const SchemaDescriptor& claims_schema() {
  static const SchemaDescriptor schema{
      "claims", "1", SchemaShape::ObjectArray,
      {{"claim", FieldType::String, true},
       {"context", FieldType::String, false},
       {"source", FieldType::String, false}}};
  return schema;
}

const SchemaDescriptor& atomic_facts_schema() {
  static const SchemaDescriptor schema{"atomic_facts", "1", SchemaShape::StringArray, {}};
  return schema;
}

const SchemaDescriptor& answer_schema() {
  static const SchemaDescriptor schema{
      "answer", "1", SchemaShape::Object,
      {{"question", FieldType::String, false},
       {"answer", FieldType::String, true},
       {"supporting_context", FieldType::String, false}}};
  return schema;
}

}  // namespace runvar
