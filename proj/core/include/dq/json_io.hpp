#pragma once

// nlohmann::json conversions for configuration types. Missing keys keep their
// defaults, so partial config files are valid.

#include <nlohmann/json.hpp>

#include "dq/data.hpp"
#include "dq/grouping.hpp"
#include "dq/model.hpp"
#include "dq/synthgen.hpp"

namespace dq {

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

void to_json(nlohmann::json& j, const GenConfig& c);
void from_json(const nlohmann::json& j, GenConfig& c);

void to_json(nlohmann::json& j, const Schema& s);
void from_json(const nlohmann::json& j, Schema& s);

void to_json(nlohmann::json& j, const DurationGroups& g);
void from_json(const nlohmann::json& j, DurationGroups& g);

}  // namespace dq
