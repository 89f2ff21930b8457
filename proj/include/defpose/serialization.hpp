#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>

#include <json.hpp>

#include "defpose/consensus.hpp"
#include "defpose/error.hpp"
#include "defpose/geometry.hpp"
#include "defpose/lattice.hpp"
#include "defpose/protocol.hpp"
#include "defpose/seed_losses.hpp"

namespace defpose {

using Json = nlohmann::json;

/// Parses a JSON document; syntax errors become ParseError.
Json parse_json(std::string_view text, const std::string& where);
Json read_json(const std::filesystem::path& path);
/// Pretty-printed with two-space indent and a trailing newline. Numbers
/// use the shortest round-trip representation.
std::string format_json(const Json& j);
void write_json(const Json& j, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

/// 16 numbers, row-major 4×4.
Json pose_to_json(const Pose& p);
Pose pose_from_json(const Json& j);

Json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const Json& j);

Json intrinsics_to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const Json& j);

Json crop_to_json(const CropGeometry& c);
CropGeometry crop_from_json(const Json& j);

/// Lattice offsets together with the box and blend they apply to.
struct DeformationRecord {
  LatticeDeformation deformation;
  Aabb box;
  LatticeBlend blend = LatticeBlend::Quintic;
};

Json deformation_to_json(const DeformationRecord& d);
DeformationRecord deformation_from_json(const Json& j);

Json protocol_spec_to_json(const ProtocolSpec& s);
/// Missing keys keep their defaults.
ProtocolSpec protocol_spec_from_json(const Json& j);
Json placements_to_json(const ProtocolSpec& spec, const std::vector<CameraPlacement>& placements);

/// Overrides the fields named in `j`; unknown keys throw InvalidArgument.
void apply_json(OptimizerConfig& cfg, const Json& j);
void apply_json(InlierConfig& cfg, const Json& j);
void apply_json(losses::SeedLossWeights& w, const Json& j);
Json optimizer_config_to_json(const OptimizerConfig& cfg);

Json loss_breakdown_to_json(const losses::SeedLossBreakdown& b);

/// Calls `setters[key](value)` for every key of the object `j`. Unknown keys
/// throw InvalidArgument; type errors inside a setter become ParseError.
void apply_fields(const Json& j, const std::map<std::string, std::function<void(const Json&)>>& setters,
                  const std::string& where);

/// Typed field access that reports the offending key as ParseError.
template <typename T>
T get_field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw Error(ErrorKind::ParseError, where, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::ParseError, where, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace defpose
