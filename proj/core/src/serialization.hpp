#pragma once

// JSON mappings shared by checkpoint and config handling. Internal.

#include "json.hpp"
#include "phyulstm/training.hpp"

namespace phyulstm::detail {

using json = nlohmann::json;

json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const json& j, ModelSpec base = {});

json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const json& j, TrainConfig base = {});

json to_json(const Normalizer& n);
Normalizer normalizer_from_json(const json& j);

}  // namespace phyulstm::detail
