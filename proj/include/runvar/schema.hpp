#pragma once

// Closed, versioned schemas for structured text produced by a judge or an
// agent stage. Unknown fields are always rejected.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace runvar {

enum class FieldType { String, StringArray, Boolean, Number };

struct FieldSpec {
  std::string name;
  FieldType type = FieldType::String;
  bool required = true;
};

enum class SchemaShape {
  Object,       // a single object with `fields`
  ObjectArray,  // an array of objects, each with `fields`
  StringArray,  // an array of strings; `fields` unused
};

struct SchemaDescriptor {
  std::string name;
  std::string version;
  SchemaShape shape = SchemaShape::Object;
  std::vector<FieldSpec> fields;
};

struct SchemaIssue {
  std::string path;     // e.g. "[2].claim" or "open_questions[0]"
  std::string message;
  std::optional<std::size_t> element;  // top-level array element, when the shape is an array
};

/// First violation of `schema` in `value`, or nullopt when it conforms.
std::optional<SchemaIssue> find_schema_issue(const nlohmann::json& value,
                                             const SchemaDescriptor& schema);

/// Payload of the claim extraction prompt: [{claim, context, source}].
const SchemaDescriptor& claims_schema();
/// Payload of the atomic decomposition prompt: ["fact", ...].
const SchemaDescriptor& atomic_facts_schema();
/// Payload of the answer extraction prompt: {question?, answer, supporting_context?}.
const SchemaDescriptor& answer_schema();

}  // namespace runvar
