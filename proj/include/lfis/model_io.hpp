#pragma once

#include <string>

#include <json.hpp>

#include "lfis/model.hpp"

namespace lfis {

// Model file format: {"M", "q", "coupling_scale", "edges" [[i,j,J]...],
// "domain", "builder", "seed", "dims"}. Round-trips energies bit-exactly
// (couplings are serialized with full round-trip precision).
nlohmann::ordered_json model_to_json(const PairwiseModel& model);
PairwiseModel model_from_json(const nlohmann::json& j);

void save_model(const PairwiseModel& model, const std::string& path);
PairwiseModel load_model(const std::string& path);

} // namespace lfis
