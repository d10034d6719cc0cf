#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wetpred::texture {

/// 8-bit grayscale raster, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);
  GrayImage(int width, int height, std::vector<std::uint8_t> pixels);

  std::uint8_t at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
  std::uint8_t& at(int row, int col) {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
};

template <typename T, typename Tag>
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<T> values;

  Raster() = default;
  Raster(int w, int h, T fill = T{})
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
  const T& at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * width + col];
  }
  std::size_t size() const { return values.size(); }
};

using IntensityPlane = Raster<double, struct IntensityTag>;
/// Signed filter response.
using FilteredMap = Raster<double, struct FilteredTag>;
/// Windowed sum of absolute filter responses; never negative.
using EnergyMap = Raster<double, struct EnergyTag>;
/// 1 = foreground.
using BinaryMask = Raster<std::uint8_t, struct MaskTag>;
/// 0 = background, components numbered 1..count in raster order of first pixel.
using LabelMap = Raster<int, struct LabelTag>;

enum class MaskName { Level, Edge, Spot, Wave, Ripple };

std::string_view mask_label(MaskName name); // "L5L5", "E5E5", ...

struct MaskVector {
  MaskName name;
  std::array<int, 5> coeffs;
};

using MaskBank = std::vector<MaskVector>;

/// L5 E5 S5 W5 R5 with E5 = [-1 -2 0 3 1]; this edge vector is not zero-sum.
MaskBank default_mask_bank();
/// Same bank with the textbook zero-sum edge vector E5 = [-1 -2 0 2 1].
MaskBank classic_laws_bank();

struct Kernel2D {
  std::array<std::array<int, 5>, 5> values{};
  int sum() const;
};

/// values[i][j] = a[i] * b[j]
Kernel2D build_kernel(const MaskVector& a, const MaskVector& b);

enum class BorderPolicy { Reflect, Zero };
enum class Connectivity { Four = 4, Eight = 8 };

IntensityPlane to_plane(const GrayImage& img);

/// Subtracts the mean over a (2h+1)^2 window clipped to the image.
IntensityPlane subtract_local_mean(const IntensityPlane& plane, int half_window);

/// True 2D convolution, out(r,c) = sum_ij k[i][j] * in(r-(i-2), c-(j-2)).
/// Reflect mirrors about the edge including the edge pixel (..c b a | a b c..).
/// Throws ImageTooSmall when either side is below 5.
FilteredMap convolve(const IntensityPlane& plane, const Kernel2D& k,
                     BorderPolicy border = BorderPolicy::Reflect);
FilteredMap convolve(const GrayImage& img, const Kernel2D& k,
                     BorderPolicy border = BorderPolicy::Reflect);

/// E(r,c) = sum of |F| over rows r-h..r+h and cols c-h..c+h; the window is
/// clipped to the image rather than padded.
EnergyMap energy_map(const FilteredMap& filtered, int half_window = 7);

/// Upper edge of Otsu bin k when [lo, hi] is split into `bins` equal bins:
/// lo + (k + 1) * ((hi - lo) / bins). A value v belongs to bin
/// #{k < bins-1 : otsu_cut(lo, hi, bins, k) < v}, so "v > cut k" holds
/// exactly when v sits in a bin above k.
double otsu_cut(double lo, double hi, int bins, int k);

/// Otsu threshold over `bins` linear bins spanning [min, max] of the map,
/// using bin indices as grey levels. Returns the cut maximizing
/// between-class variance, lowest cut on ties, or nullopt when the map is
/// constant (degenerate).
std::optional<double> otsu_threshold(const EnergyMap& energy, int bins = 256);

/// Foreground where value > threshold.
BinaryMask segment(const EnergyMap& energy, double threshold);

struct ComponentSet {
  LabelMap labels;
  std::vector<std::size_t> areas; // areas[i] belongs to label i + 1
  std::size_t count() const { return areas.size(); }
};

ComponentSet label_components(const BinaryMask& mask,
                              Connectivity connectivity = Connectivity::Eight);

struct MaskFeatures {
  MaskName mask = MaskName::Level;
  std::size_t texture_count = 0; // T_n, foreground pixels
  double mean_feature_area = 0;  // A_n, mean component area (pixels x area_scale)
  double mean_energy = 0;        // E_n, mean energy over foreground pixels
};

/// `area_scale` converts pixel areas to physical units; 1 keeps pixels.
MaskFeatures texture_features(const EnergyMap& energy, const BinaryMask& mask,
                              const ComponentSet& components, MaskName name,
                              double area_scale = 1.0);

struct ExtractOptions {
  BorderPolicy border = BorderPolicy::Reflect;
  int half_window = 7;
  int bins = 256;
  Connectivity connectivity = Connectivity::Eight;
  bool normalize_contrast = false;
  double area_scale = 1.0;
};

struct TextureFeatureVector {
  std::vector<MaskFeatures> masks;

  /// "<label>_count", "<label>_area", "<label>_energy" per mask.
  std::vector<std::string> column_names() const;
  std::vector<double> values() const;
};

/// Runs convolve -> energy_map -> otsu_threshold -> segment ->
/// label_components -> texture_features for every mask (kernel v x v).
/// A degenerate energy map yields zeroed features for that mask.
TextureFeatureVector extract_all(const GrayImage& img, const MaskBank& bank,
                                 const ExtractOptions& options = {});

} // namespace wetpred::texture
