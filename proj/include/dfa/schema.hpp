#pragma once

#include <nlohmann/json.hpp>

#include <string>

namespace dfa {

// Validates `doc` against a JSON schema using the keywords type, properties,
// required, additionalProperties (boolean), enum, minimum, maximum,
// exclusiveMinimum, exclusiveMaximum, items and minItems. Throws ConfigError
// naming the offending location.
void validate_json(const nlohmann::json& doc, const nlohmann::json& schema);

// The run-configuration schema shipped in schemas/run_config.schema.json.
const nlohmann::json& run_config_schema();

}  // namespace dfa
