#pragma once

#include "hybridfilt/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace hybridfilt {

// Version of the built-in field families understood by this build.
inline constexpr int kFieldFamilyVersion = 1;
inline constexpr int kModelFormatVersion = 1;

// A model together with the configuration it was built from.
struct ModelConfig {
  ModelSpec spec;
  nlohmann::json source;
  std::uint64_t hash = 0;
};

/*!
 * Builds a model from its JSON description.
 *
 * Base rates and drift basis functions are chosen from the built-in
 * families: constant, affine, quadratic (scalar only; vector fields use
 * per-component scalars) and tabulated (piecewise linear in one coordinate,
 * flat outside the grid). Any family accepts an optional "clip": [lo, hi]
 * and a declared "bound".
 */
ModelConfig model_from_json(const nlohmann::json& j);
ModelConfig load_model(const std::filesystem::path& file);

// Accepts either [..] or {"theta": [..]}.
Vector theta_from_json(const nlohmann::json& j);
Vector load_theta(const std::filesystem::path& file);
nlohmann::json theta_to_json(const Vector& theta);

// FNV-1a over the canonical dump.
std::uint64_t hash_json(const nlohmann::json& j);
std::uint64_t hash_bytes(std::string_view bytes);
std::string hex64(std::uint64_t value);

nlohmann::json read_json_file(const std::filesystem::path& file);

}  // namespace hybridfilt
