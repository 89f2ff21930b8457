#include "defpose/serialization.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace defpose {

namespace {

std::vector<double> numbers(const Json& j, std::size_t count, const std::string& where, const char* what) {
  if (!j.is_array() || j.size() != count)
    throw Error(ErrorKind::ParseError, where, std::string(what) + " must be an array of " + std::to_string(count) + " numbers");
  std::vector<double> out;
  out.reserve(count);
  for (const auto& v : j) {
    if (!v.is_number()) throw Error(ErrorKind::ParseError, where, std::string(what) + " must contain only numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

void apply_fields(const Json& j, const std::map<std::string, std::function<void(const Json&)>>& setters,
                  const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::ParseError, where, "configuration must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw Error(ErrorKind::InvalidArgument, where, "unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::ParseError, where, "key '" + key + "' has the wrong type");
    }
  }
}

Json parse_json(std::string_view text, const std::string& where) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ParseError, where, e.what());
  }
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "io.read_json", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), "io.read_json");
}

std::string format_json(const Json& j) { return j.dump(2) + "\n"; }

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "io.write", "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "io.write", "failed writing " + path.string());
}

void write_json(const Json& j, const std::filesystem::path& path) { write_text(format_json(j), path); }

Json pose_to_json(const Pose& p) {
  const Mat4 m = p.matrix();
  Json out = Json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out.push_back(m(r, c));
  return out;
}

Pose pose_from_json(const Json& j) {
  const auto v = numbers(j, 16, "io.pose", "pose");
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = v[static_cast<std::size_t>(4 * r + c)];
  return Pose::from_matrix(m, 1e-6);
}

Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const Json& j) {
  const auto v = numbers(j, 3, "io.vec3", "vector");
  return {v[0], v[1], v[2]};
}

Json intrinsics_to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from_json(const Json& j) {
  const std::string where = "io.intrinsics";
  CameraIntrinsics k;
  k.fx = get_field<double>(j, "fx", where);
  k.fy = get_field<double>(j, "fy", where);
  k.cx = get_field<double>(j, "cx", where);
  k.cy = get_field<double>(j, "cy", where);
  k.width = get_field<int>(j, "width", where);
  k.height = get_field<int>(j, "height", where);
  k.validate();
  return k;
}

Json crop_to_json(const CropGeometry& c) {
  return {{"center_x", c.center_x}, {"center_y", c.center_y}, {"crop_w", c.crop_w},
          {"crop_h", c.crop_h},     {"image_w", c.image_w},   {"image_h", c.image_h}};
}

CropGeometry crop_from_json(const Json& j) {
  const std::string where = "io.crop";
  CropGeometry c;
  c.center_x = get_field<double>(j, "center_x", where);
  c.center_y = get_field<double>(j, "center_y", where);
  c.crop_w = get_field<double>(j, "crop_w", where);
  c.crop_h = get_field<double>(j, "crop_h", where);
  c.image_w = get_field<double>(j, "image_w", where);
  c.image_h = get_field<double>(j, "image_h", where);
  c.validate();
  return c;
}

Json deformation_to_json(const DeformationRecord& d) {
  return {{"offsets", d.deformation.offsets},
          {"box", {{"min", vec3_to_json(d.box.min)}, {"max", vec3_to_json(d.box.max)}}},
          {"blend", std::string(to_string(d.blend))}};
}

DeformationRecord deformation_from_json(const Json& j) {
  const std::string where = "io.deformation";
  if (!j.is_object() || !j.contains("offsets")) throw Error(ErrorKind::ParseError, where, "missing field 'offsets'");
  DeformationRecord d;
  const auto v = numbers(j.at("offsets"), 24, where, "offsets");
  std::copy(v.begin(), v.end(), d.deformation.offsets.begin());
  const Json box = get_field<Json>(j, "box", where);
  d.box.min = vec3_from_json(get_field<Json>(box, "min", where));
  d.box.max = vec3_from_json(get_field<Json>(box, "max", where));
  if (j.contains("blend")) d.blend = parse_lattice_blend(get_field<std::string>(j, "blend", where));
  return d;
}

Json protocol_spec_to_json(const ProtocolSpec& s) {
  return {{"scene_center", vec3_to_json(s.scene_center)},
          {"radii", s.radii},
          {"lateral_elevations", s.lateral_elevations},
          {"azimuth_count", s.azimuth_count},
          {"arc_span", s.arc_span},
          {"topdown_elevation", s.topdown_elevation},
          {"topdown_count", s.topdown_count},
          {"topdown_span", s.topdown_span}};
}

ProtocolSpec protocol_spec_from_json(const Json& j) {
  ProtocolSpec s;
  apply_fields(j,
               {{"scene_center", [&](const Json& v) { s.scene_center = vec3_from_json(v); }},
                {"radii", [&](const Json& v) { s.radii = v.get<std::vector<double>>(); }},
                {"lateral_elevations", [&](const Json& v) { s.lateral_elevations = v.get<std::vector<double>>(); }},
                {"azimuth_count", [&](const Json& v) { s.azimuth_count = v.get<int>(); }},
                {"arc_span", [&](const Json& v) { s.arc_span = v.get<double>(); }},
                {"topdown_elevation", [&](const Json& v) { s.topdown_elevation = v.get<double>(); }},
                {"topdown_count", [&](const Json& v) { s.topdown_count = v.get<int>(); }},
                {"topdown_span", [&](const Json& v) { s.topdown_span = v.get<double>(); }}},
               "protocol.spec");
  return s;
}

Json placements_to_json(const ProtocolSpec& spec, const std::vector<CameraPlacement>& placements) {
  Json list = Json::array();
  for (const auto& p : placements) {
    list.push_back({{"extrinsic", pose_to_json(p.extrinsic)},
                    {"radius_index", p.radius_index},
                    {"elevation_index", p.elevation_index},
                    {"azimuth_index", p.azimuth_index},
                    {"topdown", p.topdown},
                    {"radius", p.radius},
                    {"elevation_deg", p.elevation},
                    {"azimuth_deg", p.azimuth}});
  }
  return {{"spec", protocol_spec_to_json(spec)}, {"count", placements.size()}, {"placements", std::move(list)}};
}

void apply_json(OptimizerConfig& cfg, const Json& j) {
  apply_fields(j,
               {{"lambda", [&](const Json& v) { cfg.lambda = v.get<double>(); }},
                {"w_vgg", [&](const Json& v) { cfg.w_vgg = v.get<double>(); }},
                {"w_dice", [&](const Json& v) { cfg.w_dice = v.get<double>(); }},
                {"w_dt", [&](const Json& v) { cfg.w_dt = v.get<double>(); }},
                {"w_r", [&](const Json& v) { cfg.w_r = v.get<double>(); }},
                {"w_t", [&](const Json& v) { cfg.w_t = v.get<double>(); }},
                {"max_iterations", [&](const Json& v) { cfg.max_iterations = v.get<int>(); }},
                {"step_rotation", [&](const Json& v) { cfg.step_rotation = v.get<double>(); }},
                {"step_translation", [&](const Json& v) { cfg.step_translation = v.get<double>(); }},
                {"backtracking_tries", [&](const Json& v) { cfg.backtracking_tries = v.get<int>(); }},
                {"tolerance", [&](const Json& v) { cfg.tolerance = v.get<double>(); }},
                {"fd_eps_rotation", [&](const Json& v) { cfg.fd_eps_rotation = v.get<double>(); }},
                {"fd_eps_translation", [&](const Json& v) { cfg.fd_eps_translation = v.get<double>(); }},
                {"threads", [&](const Json& v) { cfg.threads = v.get<unsigned>(); }}},
               "consensus.config");
}

void apply_json(InlierConfig& cfg, const Json& j) {
  apply_fields(j,
               {{"translation_threshold", [&](const Json& v) { cfg.translation_threshold = v.get<double>(); }},
                {"rotation_threshold", [&](const Json& v) { cfg.rotation_threshold = v.get<double>(); }}},
               "consensus.inlier_config");
}

void apply_json(losses::SeedLossWeights& w, const Json& j) {
  apply_fields(j,
               {{"rot", [&](const Json& v) { w.rot = v.get<double>(); }},
                {"t", [&](const Json& v) { w.t = v.get<double>(); }},
                {"def", [&](const Json& v) { w.def = v.get<double>(); }},
                {"reg", [&](const Json& v) { w.reg = v.get<double>(); }},
                {"v3d", [&](const Json& v) { w.v3d = v.get<double>(); }},
                {"p2d", [&](const Json& v) { w.p2d = v.get<double>(); }}},
               "losses.weights");
}

Json optimizer_config_to_json(const OptimizerConfig& cfg) {
  return {{"lambda", cfg.lambda},
          {"w_vgg", cfg.w_vgg},
          {"w_dice", cfg.w_dice},
          {"w_dt", cfg.w_dt},
          {"w_r", cfg.w_r},
          {"w_t", cfg.w_t},
          {"max_iterations", cfg.max_iterations},
          {"step_rotation", cfg.step_rotation},
          {"step_translation", cfg.step_translation},
          {"backtracking_tries", cfg.backtracking_tries},
          {"tolerance", cfg.tolerance},
          {"fd_eps_rotation", cfg.fd_eps_rotation},
          {"fd_eps_translation", cfg.fd_eps_translation}};
}

Json loss_breakdown_to_json(const losses::SeedLossBreakdown& b) {
  return {{"rot", b.rot}, {"t", b.t}, {"def", b.def}, {"reg", b.reg},
          {"v3d", b.v3d}, {"p2d", b.p2d}, {"total", b.total}};
}

}  // namespace defpose
