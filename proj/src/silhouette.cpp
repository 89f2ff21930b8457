#include "defpose/silhouette.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>

#include "defpose/error.hpp"

namespace defpose {

FeatureMap IdentityExtractor::features(const Image& image, std::size_t) const {
  return {image.width, image.height, image.channels, image.data};
}

// ---------------------------------------------------------------------------
// Rasterization

namespace {

constexpr int kSub = 4;
constexpr double kNearPlane = 1e-6;

struct Coverage {
  int width;
  int height;
  std::vector<std::uint16_t> bits;

  void fill_triangle(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double area2 = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    if (!(std::abs(area2) > 1e-18)) return;
    const double sign = area2 > 0.0 ? 1.0 : -1.0;
    const double min_x = std::min({a.x(), b.x(), c.x()});
    const double max_x = std::max({a.x(), b.x(), c.x()});
    const double min_y = std::min({a.y(), b.y(), c.y()});
    const double max_y = std::max({a.y(), b.y(), c.y()});
    // Sub-sample i sits at (i + 0.5) / kSub.
    const double lim_x = static_cast<double>(width * kSub - 1);
    const double lim_y = static_cast<double>(height * kSub - 1);
    const double fx0 = std::ceil(min_x * kSub - 0.5), fx1 = std::floor(max_x * kSub - 0.5);
    const double fy0 = std::ceil(min_y * kSub - 0.5), fy1 = std::floor(max_y * kSub - 0.5);
    if (fx1 < 0.0 || fy1 < 0.0 || fx0 > lim_x || fy0 > lim_y) return;
    const int sx0 = static_cast<int>(std::max(fx0, 0.0)), sx1 = static_cast<int>(std::min(fx1, lim_x));
    const int sy0 = static_cast<int>(std::max(fy0, 0.0)), sy1 = static_cast<int>(std::min(fy1, lim_y));

    // Edge function (q − p) × (s − p) for each edge, split into a row term
    // and a column term so each sample costs three products.
    const std::array<Vec2, 3> p{a, b, c};
    const std::array<Vec2, 3> q{b, c, a};
    for (int sy = sy0; sy <= sy1; ++sy) {
      const double y = (sy + 0.5) / kSub;
      std::array<double, 3> row;
      for (int e = 0; e < 3; ++e) row[e] = (q[e].x() - p[e].x()) * (y - p[e].y());
      const std::size_t row_base = static_cast<std::size_t>(sy / kSub) * width;
      const int bit_row = (sy % kSub) * kSub;
      // Conservative sample span from the three edge lines, widened by one
      // sample; the exact inclusive test below decides membership.
      double lo = sx0, hi = sx1;
      for (int e = 0; e < 3; ++e) {
        const double slope = sign * (q[e].y() - p[e].y());
        const double offset = sign * row[e];
        if (slope == 0.0) {
          if (offset < 0.0) hi = lo - 1.0;
          continue;
        }
        const double bound = (p[e].x() + offset / slope) * kSub - 0.5;
        if (slope > 0.0) hi = std::min(hi, std::floor(bound) + 1.0);
        else lo = std::max(lo, std::ceil(bound) - 1.0);
      }
      for (int sx = static_cast<int>(lo); sx <= static_cast<int>(hi); ++sx) {
        const double x = (sx + 0.5) / kSub;
        bool inside = true;
        for (int e = 0; e < 3 && inside; ++e) inside = sign * (row[e] - (q[e].y() - p[e].y()) * (x - p[e].x())) >= 0.0;
        if (inside) bits[row_base + sx / kSub] |= static_cast<std::uint16_t>(1u << (bit_row + sx % kSub));
      }
    }
  }
};

/// Sutherland-Hodgman against z ≥ kNearPlane. Returns up to 4 vertices.
int clip_near(const std::array<Vec3, 3>& in, std::array<Vec3, 4>& out) {
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const Vec3& cur = in[i];
    const Vec3& nxt = in[(i + 1) % 3];
    const bool cur_in = cur.z() >= kNearPlane;
    const bool nxt_in = nxt.z() >= kNearPlane;
    if (cur_in) out[n++] = cur;
    if (cur_in != nxt_in) {
      const double s = (kNearPlane - cur.z()) / (nxt.z() - cur.z());
      Vec3 p = cur + s * (nxt - cur);
      p.z() = kNearPlane;
      out[n++] = p;
    }
  }
  return n;
}

}  // namespace

Mask rasterize_silhouette(const TriMesh& mesh, const Pose& pose, const CameraIntrinsics& k) {
  k.validate();
  if (mesh.empty() || mesh.triangles().empty()) {
    throw Error(ErrorKind::EmptyMesh, "silhouette.rasterize_silhouette", "mesh has no triangles");
  }
  std::vector<Vec3> cam;
  cam.reserve(mesh.vertices().size());
  bool any_front = false;
  for (const auto& v : mesh.vertices()) {
    cam.push_back(pose.apply(v));
    any_front = any_front || cam.back().z() > kNearPlane;
  }
  if (!any_front) {
    throw Error(ErrorKind::FullyBehindCamera, "silhouette.rasterize_silhouette", "no vertex is in front of the camera");
  }

  Coverage cov{k.width, k.height, std::vector<std::uint16_t>(static_cast<std::size_t>(k.width) * k.height, 0)};
  const auto to_pixel = [&](const Vec3& p) { return Vec2(k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy); };
  std::array<Vec3, 4> poly;
  std::array<Vec2, 4> px;
  for (const auto& t : mesh.triangles()) {
    const std::array<Vec3, 3> tri{cam[t[0]], cam[t[1]], cam[t[2]]};
    const int n = clip_near(tri, poly);
    if (n < 3) continue;
    for (int i = 0; i < n; ++i) px[i] = to_pixel(poly[i]);
    for (int i = 1; i + 1 < n; ++i) cov.fill_triangle(px[0], px[i], px[i + 1]);
  }

  Mask mask(k.width, k.height);
  for (std::size_t i = 0; i < cov.bits.size(); ++i) {
    if (cov.bits[i] != 0) mask.values[i] = std::popcount(cov.bits[i]) / static_cast<double>(kSub * kSub);
  }
  return mask;
}

Mask binarize(const Mask& mask) {
  Mask out = mask;
  for (auto& v : out.values) v = v >= 0.5 ? 1.0 : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Losses

namespace {

template <typename A, typename B>
void require_same_shape(const Raster<A>& a, const Raster<B>& b, const char* where) {
  if (!a.same_shape(b)) {
    throw Error(ErrorKind::DimensionMismatch, where,
                std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                    std::to_string(b.height));
  }
}

}  // namespace

double dice_loss(const Mask& rendered, const Mask& observed) {
  require_same_shape(rendered, observed, "silhouette.dice_loss");
  double inter = 0.0, sum_r = 0.0, sum_o = 0.0;
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    inter += rendered.values[i] * observed.values[i];
    sum_r += rendered.values[i];
    sum_o += observed.values[i];
  }
  return 1.0 - 2.0 * inter / (sum_r + sum_o + kLossEpsilon);
}

std::vector<bool> boundary_pixels(const Mask& mask) {
  const int w = mask.width, h = mask.height;
  std::vector<bool> out(mask.size(), false);
  const auto fg = [&](int x, int y) { return mask.at(x, y) >= 0.5; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!fg(x, y)) continue;
      const bool edge = (x > 0 && !fg(x - 1, y)) || (x + 1 < w && !fg(x + 1, y)) || (y > 0 && !fg(x, y - 1)) ||
                        (y + 1 < h && !fg(x, y + 1));
      out[static_cast<std::size_t>(y) * w + x] = edge;
    }
  }
  return out;
}

namespace {

constexpr std::int64_t kNoSite = std::numeric_limits<std::int64_t>::max();

/// Lower envelope of parabolas (q − v)² + f[v] over the sites with finite f.
/// Writes the exact minimum for every q in [0, n).
void envelope_1d(const std::vector<std::int64_t>& f, std::vector<std::int64_t>& out) {
  const auto n = static_cast<std::int64_t>(f.size());
  std::vector<std::int64_t> v;
  v.reserve(f.size());
  // z[k] = z_num[k] / z_den[k] separates the regions of v[k] and v[k+1].
  std::vector<std::int64_t> z_num, z_den;
  const auto intersect = [&](std::int64_t a, std::int64_t b, std::int64_t& num, std::int64_t& den) {
    num = (f[b] + b * b) - (f[a] + a * a);
    den = 2 * (b - a);
  };
  for (std::int64_t q = 0; q < n; ++q) {
    if (f[q] == kNoSite) continue;
    while (!v.empty()) {
      std::int64_t num = 0, den = 0;
      intersect(v.back(), q, num, den);
      // Drop v.back() when its region is empty: s ≤ z[k].
      if (v.size() >= 2 && num * z_den.back() <= z_num.back() * den) {
        v.pop_back();
        z_num.pop_back();
        z_den.pop_back();
        continue;
      }
      z_num.push_back(num);
      z_den.push_back(den);
      break;
    }
    v.push_back(q);
  }
  // z_num/z_den has v.size()-1 entries when v is non-empty.
  std::size_t k = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    // Advance while q > z[k] (z[k] is the boundary between v[k] and v[k+1]).
    while (k + 1 < v.size() && q * z_den[k] > z_num[k]) ++k;
    const std::int64_t d = q - v[k];
    out[q] = d * d + f[v[k]];
  }
}

}  // namespace

DistanceField distance_transform(const Mask& mask) {
  const int w = mask.width, h = mask.height;
  const auto boundary = boundary_pixels(mask);
  if (std::none_of(boundary.begin(), boundary.end(), [](bool b) { return b; })) {
    throw Error(ErrorKind::NoBoundary, "silhouette.distance_transform", "mask has no foreground/background boundary");
  }
  // Pass 1: per column, squared distance to the nearest boundary pixel in
  // that column (kNoSite if none).
  std::vector<std::int64_t> col_sq(static_cast<std::size_t>(w) * h, kNoSite);
  for (int x = 0; x < w; ++x) {
    std::int64_t last = -1;
    for (int y = 0; y < h; ++y) {
      if (boundary[static_cast<std::size_t>(y) * w + x]) last = y;
      if (last >= 0) col_sq[static_cast<std::size_t>(y) * w + x] = (y - last) * (y - last);
    }
    last = -1;
    for (int y = h - 1; y >= 0; --y) {
      if (boundary[static_cast<std::size_t>(y) * w + x]) last = y;
      if (last >= 0) {
        auto& cell = col_sq[static_cast<std::size_t>(y) * w + x];
        cell = std::min(cell, (last - y) * (last - y));
      }
    }
  }
  // Pass 2: per row, lower envelope over columns that contain a site.
  DistanceField field(w, h);
  std::vector<std::int64_t> row(w), out(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) row[x] = col_sq[static_cast<std::size_t>(y) * w + x];
    envelope_1d(row, out);
    for (int x = 0; x < w; ++x) field.at(x, y) = std::sqrt(static_cast<double>(out[x]));
  }
  return field;
}

Mask gradient_magnitude(const Mask& alpha) {
  const int w = alpha.width, h = alpha.height;
  Mask g(w, h);
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      const double gx = 0.5 * (alpha.at(xp, y) - alpha.at(xm, y));
      const double gy = 0.5 * (alpha.at(x, yp) - alpha.at(x, ym));
      g.at(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return g;
}

double dt_loss(const Mask& rendered, const DistanceField& gt_field, bool* blank) {
  require_same_shape(rendered, gt_field, "silhouette.dt_loss");
  // Same arithmetic as gradient_magnitude, fused to avoid a full-size buffer.
  const int w = rendered.width, h = rendered.height;
  double num = 0.0, den = 0.0;
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      const double gx = 0.5 * (rendered.at(xp, y) - rendered.at(xm, y));
      const double gy = 0.5 * (rendered.at(x, yp) - rendered.at(x, ym));
      if (gx == 0.0 && gy == 0.0) continue;
      const double g = std::sqrt(gx * gx + gy * gy);
      num += g * gt_field.at(x, y);
      den += g;
    }
  }
  if (blank) *blank = den == 0.0;
  return num / (den + kLossEpsilon);
}

double perceptual_loss(const PerceptualExtractor* extractor, const Image& rendered, const Image& observed,
                       const Mask& mask) {
  const char* where = "silhouette.perceptual_loss";
  if (!extractor) throw Error(ErrorKind::ExtractorUnavailable, where, "no perceptual feature extractor is configured");
  if (rendered.width != observed.width || rendered.height != observed.height || rendered.channels != observed.channels ||
      !mask.same_shape(rendered.width, rendered.height)) {
    throw Error(ErrorKind::DimensionMismatch, where, "rendered image, observed image and mask must share dimensions");
  }
  Image masked = observed;
  for (int y = 0; y < observed.height; ++y)
    for (int x = 0; x < observed.width; ++x)
      for (int c = 0; c < observed.channels; ++c) masked.at(x, y, c) *= mask.at(x, y);

  double total = 0.0;
  for (std::size_t layer = 0; layer < extractor->layer_count(); ++layer) {
    const FeatureMap a = extractor->features(rendered, layer);
    const FeatureMap b = extractor->features(masked, layer);
    if (a.data.size() != b.data.size() || a.width != b.width || a.height != b.height) {
      throw Error(ErrorKind::DimensionMismatch, where, "extractor returned differently shaped feature maps");
    }
    double l1 = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) l1 += std::abs(a.data[i] - b.data[i]);
    total += l1 / (static_cast<double>(a.width) * a.height);
  }
  return total;
}

// ---------------------------------------------------------------------------
// PGM

Mask parse_pgm(std::string_view bytes) {
  const char* where = "silhouette.read_pgm";
  std::size_t pos = 0;
  const auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto read_int = [&]() -> long {
    skip_space();
    long v = 0;
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) v = v * 10 + (bytes[pos++] - '0');
    if (pos == start) throw Error(ErrorKind::ParseError, where, "malformed PGM header");
    return v;
  };
  if (bytes.size() < 2 || bytes.substr(0, 2) != "P5") throw Error(ErrorKind::ParseError, where, "not a binary PGM (P5)");
  pos = 2;
  const long w = read_int(), h = read_int(), maxval = read_int();
  if (w < 1 || h < 1) throw Error(ErrorKind::ParseError, where, "empty image");
  if (maxval != 255) throw Error(ErrorKind::ParseError, where, "only 8-bit PGM (maxval 255) is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw Error(ErrorKind::ParseError, where, "malformed PGM header");
  }
  ++pos;
  const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - pos < n) throw Error(ErrorKind::ParseError, where, "truncated pixel data");
  Mask mask(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < n; ++i) mask.values[i] = static_cast<unsigned char>(bytes[pos + i]) >= 128 ? 1.0 : 0.0;
  return mask;
}

Mask read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "silhouette.read_pgm", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_pgm(ss.str());
}

std::string format_pgm(const Mask& mask) {
  std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
  out.reserve(out.size() + mask.size());
  for (double v : mask.values) {
    const double c = std::clamp(v, 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * c))));
  }
  return out;
}

void write_pgm(const Mask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "silhouette.write_pgm", "cannot write " + path.string());
  out << format_pgm(mask);
  if (!out) throw Error(ErrorKind::IoError, "silhouette.write_pgm", "write failed for " + path.string());
}

}  // namespace defpose
