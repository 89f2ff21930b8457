#include "defpose/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "defpose/error.hpp"
#include "defpose/random.hpp"

namespace defpose {

namespace {

[[noreturn]] void invalid_mesh(const std::string& msg) { throw Error(ErrorKind::InvalidMesh, "mesh.trimesh", msg); }

}  // namespace

TriMesh::TriMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (!vertices_[i].allFinite()) invalid_mesh("vertex " + std::to_string(i) + " is not finite");
  }
  for (std::size_t i = 0; i < triangles_.size(); ++i) {
    const auto& t = triangles_[i];
    for (auto idx : t) {
      if (idx >= vertices_.size()) invalid_mesh("triangle " + std::to_string(i) + " references a missing vertex");
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) invalid_mesh("triangle " + std::to_string(i) + " repeats a vertex");
  }
}

TriMesh TriMesh::with_vertices(std::vector<Vec3> vertices) const {
  if (vertices.size() != vertices_.size()) invalid_mesh("vertex count changed");
  TriMesh out;
  out.vertices_ = std::move(vertices);
  out.triangles_ = triangles_;
  for (const auto& v : out.vertices_) {
    if (!v.allFinite()) invalid_mesh("non-finite vertex");
  }
  return out;
}

TriMesh TriMesh::transformed(const Pose& pose) const {
  std::vector<Vec3> v;
  v.reserve(vertices_.size());
  for (const auto& p : vertices_) v.push_back(pose.apply(p));
  return with_vertices(std::move(v));
}

double TriMesh::surface_area() const {
  double area = 0.0;
  for (const auto& t : triangles_) {
    area += 0.5 * (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]).norm();
  }
  return area;
}

bool Aabb::contains(const Vec3& p, double slack) const {
  return (p.array() >= min.array() - slack).all() && (p.array() <= max.array() + slack).all();
}

Aabb bounding_box(std::span<const Vec3> points) {
  if (points.empty()) throw Error(ErrorKind::EmptyMesh, "mesh.bounding_box", "no vertices");
  Aabb box{points.front(), points.front()};
  for (const auto& p : points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

Aabb bounding_box(const TriMesh& mesh) { return bounding_box(std::span<const Vec3>(mesh.vertices())); }

// ---------------------------------------------------------------------------
// ASCII parsing

namespace {

class LineReader {
 public:
  explicit LineReader(std::string_view text, const char* where) : text_(text), where_(where) {}

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    const auto end = text_.find('\n', pos_);
    line = text_.substr(pos_, end == std::string_view::npos ? std::string_view::npos : end - pos_);
    pos_ = end == std::string_view::npos ? text_.size() : end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no_;
    return true;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::ParseError, where_, "line " + std::to_string(line_no_) + ": " + msg);
  }

  std::size_t line_no() const { return line_no_; }

 private:
  std::string_view text_;
  const char* where_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_long(std::string_view s, long long& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

TriMesh build_checked(std::vector<Vec3> v, std::vector<Triangle> t, const char* where) {
  try {
    return TriMesh(std::move(v), std::move(t));
  } catch (const Error& e) {
    throw Error(ErrorKind::ParseError, where, e.what());
  }
}

}  // namespace

TriMesh parse_obj(std::string_view text) {
  LineReader reader(text, "mesh.load_mesh");
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::string_view line;
  while (reader.next(line)) {
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].starts_with('#')) continue;
    if (tok[0] == "v") {
      if (tok.size() < 4) reader.fail("vertex record needs three coordinates");
      Vec3 p;
      for (int k = 0; k < 3; ++k) {
        if (!parse_double(tok[1 + k], p[k])) reader.fail("malformed coordinate '" + std::string(tok[1 + k]) + "'");
      }
      vertices.push_back(p);
    } else if (tok[0] == "f") {
      if (tok.size() != 4) reader.fail("only triangular faces are supported");
      Triangle tri{};
      for (int k = 0; k < 3; ++k) {
        const auto ref = tok[1 + k].substr(0, tok[1 + k].find('/'));
        long long idx = 0;
        if (!parse_long(ref, idx) || idx == 0) reader.fail("malformed face index '" + std::string(tok[1 + k]) + "'");
        const long long n = static_cast<long long>(vertices.size());
        const long long zero_based = idx > 0 ? idx - 1 : n + idx;
        if (zero_based < 0 || zero_based >= n) reader.fail("face index out of range");
        tri[k] = static_cast<std::uint32_t>(zero_based);
      }
      triangles.push_back(tri);
    }
    // vt, vn, o, g, s, usemtl, mtllib: ignored
  }
  return build_checked(std::move(vertices), std::move(triangles), "mesh.load_mesh");
}

TriMesh parse_ply(std::string_view text) {
  LineReader reader(text, "mesh.load_mesh");
  std::string_view line;
  if (!reader.next(line) || split_ws(line) != std::vector<std::string_view>{"ply"}) reader.fail("missing 'ply' magic");

  struct Property {
    std::string name;
    bool is_list = false;
  };
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> props;
  };
  std::vector<Element> elements;
  bool saw_format = false;
  bool saw_end = false;
  while (reader.next(line)) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3) reader.fail("malformed format line");
      if (tok[1] != "ascii") reader.fail("binary PLY is not supported; convert to ASCII");
      if (tok[2] != "1.0") reader.fail("unsupported PLY version");
      saw_format = true;
    } else if (tok[0] == "element") {
      long long count = 0;
      if (tok.size() != 3 || !parse_long(tok[2], count) || count < 0) reader.fail("malformed element line");
      elements.push_back({std::string(tok[1]), static_cast<std::size_t>(count), {}});
    } else if (tok[0] == "property") {
      if (elements.empty()) reader.fail("property before any element");
      if (tok.size() >= 2 && tok[1] == "list") {
        if (tok.size() != 5) reader.fail("malformed list property");
        elements.back().props.push_back({std::string(tok[4]), true});
      } else {
        if (tok.size() != 3) reader.fail("malformed property");
        elements.back().props.push_back({std::string(tok[2]), false});
      }
    } else if (tok[0] == "end_header") {
      saw_end = true;
      break;
    } else {
      reader.fail("unknown header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!saw_format) reader.fail("missing format line");
  if (!saw_end) reader.fail("header is not terminated by end_header");

  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  for (const auto& el : elements) {
    int ix = -1, iy = -1, iz = -1, ilist = -1;
    for (int p = 0; p < static_cast<int>(el.props.size()); ++p) {
      const auto& name = el.props[p].name;
      if (el.name == "vertex") {
        if (el.props[p].is_list) reader.fail("list properties on vertices are not supported");
        if (name == "x") ix = p;
        if (name == "y") iy = p;
        if (name == "z") iz = p;
      } else if (el.name == "face" && el.props[p].is_list && (name == "vertex_indices" || name == "vertex_index")) {
        ilist = p;
      }
    }
    if (el.name == "vertex" && (ix < 0 || iy < 0 || iz < 0)) reader.fail("vertex element lacks x/y/z");
    if (el.name == "face" && ilist < 0) reader.fail("face element lacks vertex_indices");

    for (std::size_t row = 0; row < el.count; ++row) {
      if (!reader.next(line)) reader.fail("unexpected end of file in element '" + el.name + "'");
      const auto tok = split_ws(line);
      std::size_t cursor = 0;
      Vec3 p = Vec3::Zero();
      for (int prop = 0; prop < static_cast<int>(el.props.size()); ++prop) {
        if (cursor >= tok.size()) reader.fail("too few values");
        if (el.props[prop].is_list) {
          long long n = 0;
          if (!parse_long(tok[cursor], n) || n < 0) reader.fail("malformed list length");
          ++cursor;
          if (cursor + static_cast<std::size_t>(n) > tok.size()) reader.fail("list shorter than its length");
          if (prop == ilist) {
            if (n != 3) reader.fail("only triangular faces are supported");
            Triangle tri{};
            for (int k = 0; k < 3; ++k) {
              long long idx = 0;
              if (!parse_long(tok[cursor + k], idx) || idx < 0) reader.fail("malformed face index");
              tri[k] = static_cast<std::uint32_t>(idx);
            }
            triangles.push_back(tri);
          }
          cursor += static_cast<std::size_t>(n);
        } else {
          double value = 0.0;
          if (!parse_double(tok[cursor], value)) reader.fail("malformed number '" + std::string(tok[cursor]) + "'");
          if (prop == ix) p.x() = value;
          if (prop == iy) p.y() = value;
          if (prop == iz) p.z() = value;
          ++cursor;
        }
      }
      if (cursor != tok.size()) reader.fail("trailing values");
      if (el.name == "vertex") vertices.push_back(p);
    }
  }
  return build_checked(std::move(vertices), std::move(triangles), "mesh.load_mesh");
}

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  out.append(buf, ptr);
}

}  // namespace

std::string format_obj(const TriMesh& mesh) {
  std::string out;
  for (const auto& v : mesh.vertices()) {
    out += "v";
    for (int k = 0; k < 3; ++k) {
      out += ' ';
      append_number(out, v[k]);
    }
    out += '\n';
  }
  for (const auto& t : mesh.triangles()) {
    out += "f " + std::to_string(t[0] + 1) + ' ' + std::to_string(t[1] + 1) + ' ' + std::to_string(t[2] + 1) + '\n';
  }
  return out;
}

std::string format_ply(const TriMesh& mesh) {
  std::string out = "ply\nformat ascii 1.0\n";
  out += "element vertex " + std::to_string(mesh.vertices().size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  out += "element face " + std::to_string(mesh.triangles().size()) + "\n";
  out += "property list uchar int vertex_indices\nend_header\n";
  for (const auto& v : mesh.vertices()) {
    for (int k = 0; k < 3; ++k) {
      if (k) out += ' ';
      append_number(out, v[k]);
    }
    out += '\n';
  }
  for (const auto& t : mesh.triangles()) {
    out += "3 " + std::to_string(t[0]) + ' ' + std::to_string(t[1]) + ' ' + std::to_string(t[2]) + '\n';
  }
  return out;
}

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

TriMesh load_mesh(const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  if (ext != ".obj" && ext != ".ply") {
    throw Error(ErrorKind::IoError, "mesh.load_mesh", "unsupported extension '" + ext + "' (expected .obj or .ply)");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "mesh.load_mesh", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  return ext == ".obj" ? parse_obj(text) : parse_ply(text);
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  if (ext != ".obj" && ext != ".ply") {
    throw Error(ErrorKind::IoError, "mesh.save_mesh", "unsupported extension '" + ext + "' (expected .obj or .ply)");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "mesh.save_mesh", "cannot write " + path.string());
  out << (ext == ".obj" ? format_obj(mesh) : format_ply(mesh));
  if (!out) throw Error(ErrorKind::IoError, "mesh.save_mesh", "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

struct AreaTable {
  std::vector<double> cumulative;
  double total = 0.0;
};

AreaTable area_table(const TriMesh& mesh) {
  AreaTable table;
  table.cumulative.reserve(mesh.triangles().size());
  const auto& v = mesh.vertices();
  for (const auto& t : mesh.triangles()) {
    table.total += 0.5 * (v[t[1]] - v[t[0]]).cross(v[t[2]] - v[t[0]]).norm();
    table.cumulative.push_back(table.total);
  }
  if (!(table.total >= 1e-15)) throw Error(ErrorKind::DegenerateMesh, "mesh.sample_surface", "total surface area is zero");
  return table;
}

std::size_t pick_triangle(const AreaTable& table, double u) {
  const double target = u * table.total;
  auto it = std::upper_bound(table.cumulative.begin(), table.cumulative.end(), target);
  if (it == table.cumulative.end()) --it;
  return static_cast<std::size_t>(it - table.cumulative.begin());
}

template <typename Visit>
void draw_samples(const TriMesh& mesh, std::size_t n, std::uint64_t seed, Visit&& visit) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "mesh.sample_surface", "sample count must be at least 1");
  const auto table = area_table(mesh);
  Rng rng(seed);
  const auto& v = mesh.vertices();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t tri = pick_triangle(table, rng.uniform01());
    const double r1 = std::sqrt(rng.uniform01());
    const double r2 = rng.uniform01();
    const auto& t = mesh.triangles()[tri];
    visit(tri, (1.0 - r1) * v[t[0]] + r1 * (1.0 - r2) * v[t[1]] + r1 * r2 * v[t[2]]);
  }
}

}  // namespace

std::vector<Vec3> sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  std::vector<Vec3> out;
  out.reserve(n);
  draw_samples(mesh, n, seed, [&](std::size_t, const Vec3& p) { out.push_back(p); });
  return out;
}

std::vector<std::size_t> sample_surface_triangles(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> out;
  out.reserve(n);
  draw_samples(mesh, n, seed, [&](std::size_t tri, const Vec3&) { out.push_back(tri); });
  return out;
}

// ---------------------------------------------------------------------------
// Primitives

namespace primitives {

TriMesh cube(double edge) {
  const double h = 0.5 * edge;
  std::vector<Vec3> v;
  for (int ix = 0; ix < 2; ++ix)
    for (int iy = 0; iy < 2; ++iy)
      for (int iz = 0; iz < 2; ++iz) v.emplace_back(ix ? h : -h, iy ? h : -h, iz ? h : -h);
  // Index = 4·ix + 2·iy + iz; faces wound outward.
  std::vector<Triangle> t = {
      {0, 1, 3}, {0, 3, 2},  // x = -h
      {4, 6, 7}, {4, 7, 5},  // x = +h
      {0, 4, 5}, {0, 5, 1},  // y = -h
      {2, 3, 7}, {2, 7, 6},  // y = +h
      {0, 2, 6}, {0, 6, 4},  // z = -h
      {1, 5, 7}, {1, 7, 3},  // z = +h
  };
  return TriMesh(std::move(v), std::move(t));
}

namespace {

/// Closed surface of revolution around z with pole vertices. `ring(i)`
/// returns, for ring i in [1, rings-1], a function of the azimuth.
template <typename RingPoint>
TriMesh revolve(int rings, int segments, const Vec3& bottom, const Vec3& top, RingPoint&& ring_point) {
  std::vector<Vec3> v;
  std::vector<Triangle> t;
  v.push_back(bottom);
  for (int i = 1; i < rings; ++i) {
    for (int j = 0; j < segments; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / segments;
      v.push_back(ring_point(i, phi));
    }
  }
  v.push_back(top);
  const auto idx = [&](int i, int j) { return static_cast<std::uint32_t>(1 + (i - 1) * segments + (j % segments)); };
  const auto top_index = static_cast<std::uint32_t>(v.size() - 1);
  for (int j = 0; j < segments; ++j) t.push_back({0, idx(1, j + 1), idx(1, j)});
  for (int i = 1; i + 1 < rings; ++i) {
    for (int j = 0; j < segments; ++j) {
      t.push_back({idx(i, j), idx(i, j + 1), idx(i + 1, j + 1)});
      t.push_back({idx(i, j), idx(i + 1, j + 1), idx(i + 1, j)});
    }
  }
  for (int j = 0; j < segments; ++j) t.push_back({idx(rings - 1, j), idx(rings - 1, j + 1), top_index});
  return TriMesh(std::move(v), std::move(t));
}

}  // namespace

TriMesh uv_sphere(double radius, int rings, int segments) {
  if (rings < 2 || segments < 3) throw Error(ErrorKind::InvalidArgument, "mesh.uv_sphere", "need rings >= 2 and segments >= 3");
  return revolve(rings, segments, Vec3(0, 0, -radius), Vec3(0, 0, radius), [&](int i, double phi) {
    const double theta = std::numbers::pi * i / rings;
    return Vec3(radius * std::sin(theta) * std::cos(phi), radius * std::sin(theta) * std::sin(phi),
                -radius * std::cos(theta));
  });
}

TriMesh produce(double length, int rings, int segments) {
  if (rings < 2 || segments < 3) throw Error(ErrorKind::InvalidArgument, "mesh.produce", "need rings >= 2 and segments >= 3");
  // s runs from the blossom end (0) to the stem (1).
  const auto radius = [&](double s) { return length * std::sin(std::numbers::pi * s) * (0.36 - 0.18 * s); };
  const auto bend = [&](double s) { return 0.12 * length * s * s; };
  const auto z = [&](double s) { return length * (s - 0.5); };
  return revolve(rings, segments, Vec3(bend(0), 0, z(0)), Vec3(bend(1), 0, z(1)), [&](int i, double phi) {
    const double s = static_cast<double>(i) / rings;
    const double r = radius(s);
    return Vec3(bend(s) + r * std::cos(phi), 0.85 * r * std::sin(phi), z(s));
  });
}

TriMesh ridged_produce(double length, int rings, int segments) {
  if (rings < 2 || segments < 3)
    throw Error(ErrorKind::InvalidArgument, "mesh.ridged_produce", "need rings >= 2 and segments >= 3");
  const auto radius = [&](double s) { return length * std::sin(std::numbers::pi * s) * (0.36 - 0.18 * s); };
  const auto bend = [&](double s) { return 0.12 * length * s * s; };
  const auto z = [&](double s) { return length * (s - 0.5); };
  return revolve(rings, segments, Vec3(bend(0), 0, z(0)), Vec3(bend(1), 0, z(1)), [&](int i, double phi) {
    const double s = static_cast<double>(i) / rings;
    const double bulge = 0.3 * std::exp(-8.0 * (1.0 - std::cos(phi - 1.0))) * std::sin(std::numbers::pi * s);
    const double r = radius(s) * (1.0 + 0.12 * std::cos(3.0 * phi) + bulge);
    return Vec3(bend(s) + r * std::cos(phi), 0.85 * r * std::sin(phi), z(s));
  });
}

}  // namespace primitives

}  // namespace defpose
