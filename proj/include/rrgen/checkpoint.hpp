#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rrgen/tensor.hpp"

namespace rrgen {

// Checkpoint envelope: <prefix>.json manifest (names, shapes, byte offsets,
// free-form "config") plus <prefix>.bin little-endian float64 blob.
// Save then load round-trips bit-exact.
void save_checkpoint(const std::string& prefix,
                     const std::vector<Parameter>& params,
                     const nlohmann::json& config = nlohmann::json::object());

// Fills params in place by name; throws on missing name or shape mismatch.
nlohmann::json load_checkpoint(const std::string& prefix,
                               std::vector<Parameter>& params);

// Manifest config only, without touching parameters.
nlohmann::json read_checkpoint_config(const std::string& prefix);

bool checkpoint_exists(const std::string& prefix);

}  // namespace rrgen
