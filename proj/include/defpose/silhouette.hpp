#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <vector>

#include "defpose/geometry.hpp"
#include "defpose/mesh.hpp"

namespace defpose {

/// Row-major single-channel raster, value(x, y) at index y·width + x.
template <typename Tag>
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Raster() = default;
  Raster(int w, int h, double fill = 0.0) : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return values.size(); }
  bool same_shape(int w, int h) const { return width == w && height == h; }
  template <typename Other>
  bool same_shape(const Raster<Other>& o) const { return width == o.width && height == o.height; }
};

struct MaskTag {};
struct DistanceTag {};

/// Soft or binary silhouette, values in [0, 1].
using Mask = Raster<MaskTag>;
/// Per-pixel distance in pixels to the nearest boundary pixel of a mask.
using DistanceField = Raster<DistanceTag>;

/// Interleaved multi-channel image, channel c of pixel (x, y) at
/// (y·width + x)·channels + c.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  double at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

struct FeatureMap {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;
};

/// Injection point for the perceptual term. Implementations must be
/// deterministic and return same-shape maps for same-shape inputs.
class PerceptualExtractor {
 public:
  virtual ~PerceptualExtractor() = default;
  virtual std::size_t layer_count() const = 0;
  virtual FeatureMap features(const Image& image, std::size_t layer) const = 0;
};

/// One layer whose features are the raw pixels.
class IdentityExtractor final : public PerceptualExtractor {
 public:
  std::size_t layer_count() const override { return 1; }
  FeatureMap features(const Image& image, std::size_t layer) const override;
};

/// Silhouette coverage of `mesh` placed by `pose` (object to camera).
/// Each pixel takes the fraction of its 4×4 sub-pixel sample grid, at
/// offsets (i + 0.5)/4, covered by any projected triangle. Pixel (x, y)
/// spans [x, x+1) × [y, y+1) in projected coordinates. Triangles are clipped
/// at z = 1e-6 m; there is no depth ordering. Throws FullyBehindCamera when
/// no vertex is in front of the camera.
Mask rasterize_silhouette(const TriMesh& mesh, const Pose& pose, const CameraIntrinsics& k);

/// Mask with values ≥ 0.5 mapped to 1 and the rest to 0.
Mask binarize(const Mask& mask);

inline constexpr double kLossEpsilon = 1e-7;

/// 1 − 2Σα̂M / (Σα̂ + ΣM + ε). Throws DimensionMismatch.
double dice_loss(const Mask& rendered, const Mask& observed);

/// Foreground pixels (value ≥ 0.5) that have at least one in-image
/// background 4-neighbor.
std::vector<bool> boundary_pixels(const Mask& mask);

/// Exact Euclidean distance to the nearest boundary pixel, computed with
/// the separable lower-envelope transform in integer arithmetic. Throws
/// NoBoundary when the binarized mask has no boundary pixel.
DistanceField distance_transform(const Mask& mask);

/// Central-difference gradient magnitude of α̂; border pixels reuse the edge
/// value for the missing neighbor.
Mask gradient_magnitude(const Mask& alpha);

/// Σ‖∇α̂‖·D / (Σ‖∇α̂‖ + ε). A blank render evaluates to 0 and sets `*blank`
/// when the pointer is given. Throws DimensionMismatch.
double dt_loss(const Mask& rendered, const DistanceField& gt_field, bool* blank = nullptr);

/// Σ_ℓ (1/|Ω_ℓ|)·‖φ_ℓ(rendered) − φ_ℓ(mask ⊙ observed)‖₁ where |Ω_ℓ| is
/// the spatial size of layer ℓ. Throws ExtractorUnavailable for a null
/// extractor and DimensionMismatch for differently sized inputs.
double perceptual_loss(const PerceptualExtractor* extractor, const Image& rendered, const Image& observed,
                       const Mask& mask);

/// 8-bit binary PGM (P5). Values ≥ 128 read as foreground (1), others 0.
Mask read_pgm(const std::filesystem::path& path);
Mask parse_pgm(std::string_view bytes);
/// Binary masks are written as 0/255, soft masks as round(255·v).
void write_pgm(const Mask& mask, const std::filesystem::path& path);
std::string format_pgm(const Mask& mask);

}  // namespace defpose
