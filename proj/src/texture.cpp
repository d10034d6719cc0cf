#include "wetpred/texture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>

#include "wetpred/error.hpp"

namespace wetpred::texture {

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : GrayImage(width, height,
                std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                              std::max(height, 0),
                                          fill)) {}

GrayImage::GrayImage(int w, int h, std::vector<std::uint8_t> px)
    : width(w), height(h), pixels(std::move(px)) {
  if (width < 1 || height < 1)
    throw DataError("image dimensions must be positive");
  if (pixels.size() != static_cast<std::size_t>(width) * height)
    throw DataError("pixel count does not match image dimensions");
}

std::string_view mask_label(MaskName name) {
  switch (name) {
  case MaskName::Level: return "L5L5";
  case MaskName::Edge: return "E5E5";
  case MaskName::Spot: return "S5S5";
  case MaskName::Wave: return "W5W5";
  case MaskName::Ripple: return "R5R5";
  }
  return "?";
}

MaskBank default_mask_bank() {
  return {
      {MaskName::Level, {1, 4, 6, 4, 1}},
      {MaskName::Edge, {-1, -2, 0, 3, 1}},
      {MaskName::Spot, {-1, 0, 2, 0, -1}},
      {MaskName::Wave, {-1, 2, 0, -2, 1}},
      {MaskName::Ripple, {1, -4, 6, -4, 1}},
  };
}

MaskBank classic_laws_bank() {
  auto bank = default_mask_bank();
  bank[1].coeffs = {-1, -2, 0, 2, 1};
  return bank;
}

int Kernel2D::sum() const {
  int s = 0;
  for (const auto& row : values)
    for (int v : row) s += v;
  return s;
}

Kernel2D build_kernel(const MaskVector& a, const MaskVector& b) {
  Kernel2D k;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) k.values[i][j] = a.coeffs[i] * b.coeffs[j];
  return k;
}

IntensityPlane to_plane(const GrayImage& img) {
  IntensityPlane plane(img.width, img.height);
  std::transform(img.pixels.begin(), img.pixels.end(), plane.values.begin(),
                 [](std::uint8_t p) { return static_cast<double>(p); });
  return plane;
}

namespace {

// Direct sums over the clipped window along rows, then columns. No running
// sums, so no cancellation.
template <typename In, typename Out, typename Fn>
void clipped_box_sum(const In& in, Out& out, int half, Fn&& value_of) {
  const int w = in.width;
  const int h = in.height;
  std::vector<double> rows(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double s = 0;
      const int c0 = std::max(0, c - half);
      const int c1 = std::min(w - 1, c + half);
      for (int j = c0; j <= c1; ++j) s += value_of(in.at(r, j));
      rows[static_cast<std::size_t>(r) * w + c] = s;
    }
  }
  for (int r = 0; r < h; ++r) {
    const int r0 = std::max(0, r - half);
    const int r1 = std::min(h - 1, r + half);
    for (int c = 0; c < w; ++c) {
      double s = 0;
      for (int i = r0; i <= r1; ++i) s += rows[static_cast<std::size_t>(i) * w + c];
      out.at(r, c) = s;
    }
  }
}

int reflect(int idx, int n) {
  if (idx < 0) return -idx - 1;
  if (idx >= n) return 2 * n - idx - 1;
  return idx;
}

} // namespace

IntensityPlane subtract_local_mean(const IntensityPlane& plane, int half_window) {
  if (half_window < 0) throw DataError("half_window must be non-negative");
  IntensityPlane sums(plane.width, plane.height);
  clipped_box_sum(plane, sums, half_window, [](double v) { return v; });
  IntensityPlane out(plane.width, plane.height);
  for (int r = 0; r < plane.height; ++r) {
    const int rows = std::min(plane.height - 1, r + half_window) - std::max(0, r - half_window) + 1;
    for (int c = 0; c < plane.width; ++c) {
      const int cols =
          std::min(plane.width - 1, c + half_window) - std::max(0, c - half_window) + 1;
      out.at(r, c) = plane.at(r, c) - sums.at(r, c) / (rows * cols);
    }
  }
  return out;
}

FilteredMap convolve(const IntensityPlane& plane, const Kernel2D& k, BorderPolicy border) {
  const int w = plane.width;
  const int h = plane.height;
  if (w < 5 || h < 5)
    throw ImageTooSmall("image is " + std::to_string(w) + "x" + std::to_string(h) +
                        ", need at least 5x5");
  FilteredMap out(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const bool interior = r >= 2 && r < h - 2 && c >= 2 && c < w - 2;
      double acc = 0;
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
          int rr = r - (i - 2);
          int cc = c - (j - 2);
          if (!interior) {
            if (border == BorderPolicy::Zero) {
              if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
            } else {
              rr = reflect(rr, h);
              cc = reflect(cc, w);
            }
          }
          acc += k.values[i][j] * plane.at(rr, cc);
        }
      }
      out.at(r, c) = acc;
    }
  }
  return out;
}

FilteredMap convolve(const GrayImage& img, const Kernel2D& k, BorderPolicy border) {
  return convolve(to_plane(img), k, border);
}

EnergyMap energy_map(const FilteredMap& filtered, int half_window) {
  if (half_window < 0) throw DataError("half_window must be non-negative");
  EnergyMap out(filtered.width, filtered.height);
  clipped_box_sum(filtered, out, half_window, [](double v) { return std::abs(v); });
  return out;
}

double otsu_cut(double lo, double hi, int bins, int k) {
  return lo + static_cast<double>(k + 1) * ((hi - lo) / bins);
}

std::optional<double> otsu_threshold(const EnergyMap& energy, int bins) {
  if (energy.values.empty()) throw DataError("energy map is empty");
  if (bins < 2) throw DataError("otsu needs at least 2 bins");
  const auto [lo_it, hi_it] = std::minmax_element(energy.values.begin(), energy.values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) return std::nullopt;

  std::vector<double> cuts(static_cast<std::size_t>(bins - 1));
  for (int k = 0; k < bins - 1; ++k) cuts[k] = otsu_cut(lo, hi, bins, k);

  std::vector<std::int64_t> hist(static_cast<std::size_t>(bins), 0);
  for (double v : energy.values) {
    const auto b = std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin();
    ++hist[static_cast<std::size_t>(b)];
  }

  // Counts and level sums are integers, so the cumulative statistics are
  // exact and ties compare exactly.
  const double n = static_cast<double>(energy.values.size());
  double total_sum = 0;
  for (int b = 0; b < bins; ++b) total_sum += static_cast<double>(b) * hist[b];

  double c0 = 0;
  double s0 = 0;
  double best = -1;
  int best_k = -1;
  for (int k = 0; k < bins - 1; ++k) {
    c0 += static_cast<double>(hist[k]);
    s0 += static_cast<double>(k) * hist[k];
    const double c1 = n - c0;
    if (c0 == 0 || c1 == 0) continue;
    const double w0 = c0 / n;
    const double w1 = c1 / n;
    const double mu0 = s0 / c0;
    const double mu1 = (total_sum - s0) / c1;
    const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (var > best) {
      best = var;
      best_k = k;
    }
  }
  return cuts[static_cast<std::size_t>(best_k)];
}

BinaryMask segment(const EnergyMap& energy, double threshold) {
  BinaryMask mask(energy.width, energy.height);
  for (std::size_t i = 0; i < energy.values.size(); ++i)
    mask.values[i] = energy.values[i] > threshold ? 1 : 0;
  return mask;
}

ComponentSet label_components(const BinaryMask& mask, Connectivity connectivity) {
  const int w = mask.width;
  const int h = mask.height;
  ComponentSet set{LabelMap(w, h, 0), {}};
  static constexpr int kDr[8] = {-1, 1, 0, 0, -1, -1, 1, 1};
  static constexpr int kDc[8] = {0, 0, -1, 1, -1, 1, -1, 1};
  const int neighbours = connectivity == Connectivity::Four ? 4 : 8;

  std::deque<std::pair<int, int>> queue;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask.at(r, c) || set.labels.at(r, c)) continue;
      const int label = static_cast<int>(set.areas.size()) + 1;
      std::size_t area = 0;
      set.labels.at(r, c) = label;
      queue.emplace_back(r, c);
      while (!queue.empty()) {
        const auto [pr, pc] = queue.front();
        queue.pop_front();
        ++area;
        for (int d = 0; d < neighbours; ++d) {
          const int nr = pr + kDr[d];
          const int nc = pc + kDc[d];
          if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
          if (!mask.at(nr, nc) || set.labels.at(nr, nc)) continue;
          set.labels.at(nr, nc) = label;
          queue.emplace_back(nr, nc);
        }
      }
      set.areas.push_back(area);
    }
  }
  return set;
}

MaskFeatures texture_features(const EnergyMap& energy, const BinaryMask& mask,
                              const ComponentSet& components, MaskName name,
                              double area_scale) {
  if (energy.width != mask.width || energy.height != mask.height ||
      components.labels.width != mask.width || components.labels.height != mask.height)
    throw DimensionMismatch("energy map, mask and labels differ in size");

  MaskFeatures f;
  f.mask = name;
  double energy_sum = 0;
  for (std::size_t i = 0; i < mask.values.size(); ++i) {
    if (mask.values[i]) {
      ++f.texture_count;
      energy_sum += energy.values[i];
    }
  }
  if (f.texture_count == 0) return f;
  f.mean_energy = energy_sum / static_cast<double>(f.texture_count);
  if (components.count() > 0)
    f.mean_feature_area = area_scale * static_cast<double>(f.texture_count) /
                          static_cast<double>(components.count());
  return f;
}

std::vector<std::string> TextureFeatureVector::column_names() const {
  std::vector<std::string> names;
  names.reserve(masks.size() * 3);
  for (const auto& m : masks) {
    const std::string label(mask_label(m.mask));
    names.push_back(label + "_count");
    names.push_back(label + "_area");
    names.push_back(label + "_energy");
  }
  return names;
}

std::vector<double> TextureFeatureVector::values() const {
  std::vector<double> out;
  out.reserve(masks.size() * 3);
  for (const auto& m : masks) {
    out.push_back(static_cast<double>(m.texture_count));
    out.push_back(m.mean_feature_area);
    out.push_back(m.mean_energy);
  }
  return out;
}

TextureFeatureVector extract_all(const GrayImage& img, const MaskBank& bank,
                                 const ExtractOptions& options) {
  IntensityPlane plane = to_plane(img);
  if (img.width < 5 || img.height < 5)
    throw ImageTooSmall("image is " + std::to_string(img.width) + "x" +
                        std::to_string(img.height) + ", need at least 5x5");
  if (options.normalize_contrast) plane = subtract_local_mean(plane, options.half_window);

  TextureFeatureVector out;
  out.masks.reserve(bank.size());
  for (const auto& vec : bank) {
    const auto filtered = convolve(plane, build_kernel(vec, vec), options.border);
    const auto energy = energy_map(filtered, options.half_window);
    const auto threshold = otsu_threshold(energy, options.bins);
    if (!threshold) {
      out.masks.push_back(MaskFeatures{vec.name, 0, 0, 0});
      continue;
    }
    const auto mask = segment(energy, *threshold);
    const auto components = label_components(mask, options.connectivity);
    out.masks.push_back(texture_features(energy, mask, components, vec.name, options.area_scale));
  }
  return out;
}

} // namespace wetpred::texture
