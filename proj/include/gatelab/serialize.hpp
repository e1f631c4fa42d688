// SPDX-License-Identifier: Apache-2.0

#ifndef GATELAB_SERIALIZE_HPP
#define GATELAB_SERIALIZE_HPP

#include <filesystem>
#include <string>

#include <json.hpp>

#include "gatelab/models.hpp"
#include "gatelab/optim.hpp"

namespace gatelab {

/// Shortest round-trip decimal form of a double ("nan"/"inf" spelled out).
std::string format_double(double v);

/// Params as a flat JSON object {name -> {shape, data}} plus the activation
/// tag. Doubles survive the round trip bit-exactly.
nlohmann::json params_to_json(const Params& p);
Params params_from_json(const nlohmann::json& j);

struct Checkpoint {
  std::size_t iteration = 0;
  ModelKind kind;
  Params params;
  bool has_adam = false;
  AdamState adam;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

/// Write via a temporary file and rename, so concurrent readers never see a
/// half-written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace gatelab

#endif  // GATELAB_SERIALIZE_HPP
