#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "wetpred/error.hpp"
#include "wetpred/io.hpp"
#include "wetpred/rng.hpp"

namespace wetpred::io {

namespace {

constexpr std::array<const char*, 5> kMasks{"L5L5", "E5E5", "S5S5", "W5W5", "R5R5"};
constexpr std::array<const char*, 5> kGroups{"ch2", "cf2", "cf3", "cn", "co"};
// Group dipole moments (debye) and molecular volumes (cubic angstrom).
constexpr std::array<double, 5> kDipole{0.3, 1.9, 2.3, 3.9, 2.7};
constexpr std::array<double, 5> kVolume{26.7, 38.0, 42.6, 30.4, 26.0};
// Per-mask texture statistics: logit offset and slope of the foreground
// fraction against log roughness, and a base energy level.
constexpr std::array<double, 5> kFgOffset{0.4, -0.8, -1.2, -1.4, -1.0};
constexpr std::array<double, 5> kFgSlope{0.1, 0.5, 0.6, 0.4, 0.7};
constexpr std::array<double, 5> kEnergy{4000.0, 120.0, 40.0, 30.0, 40.0};
constexpr double kPixels = 512.0 * 512.0;

constexpr std::size_t kRoughness = 0;
constexpr std::size_t kTextureBegin = 1;
constexpr std::size_t kChemBegin = 16;
// Within a chemistry group: area, area_fraction, polarity, volume.
constexpr std::size_t fraction_col(std::size_t g) { return kChemBegin + 4 * g + 1; }
constexpr std::size_t kR5Energy = kTextureBegin + 3 * 4 + 2;

std::vector<std::string> build_columns() {
  std::vector<std::string> cols{"roughness_sa_nm"};
  for (const char* m : kMasks)
    for (const char* stat : {"_count", "_area", "_energy"}) cols.push_back(std::string(m) + stat);
  for (const char* g : kGroups)
    for (const char* what : {"_area", "_area_fraction", "_polarity", "_volume"})
      cols.push_back(std::string(g) + what);
  return cols;
}

} // namespace

const std::vector<std::string>& synthetic_columns() {
  static const std::vector<std::string> cols = build_columns();
  return cols;
}

double synthetic_contact_angle(std::span<const double> row) {
  if (row.size() != synthetic_columns().size())
    throw DimensionMismatch("synthetic rows have " + std::to_string(synthetic_columns().size()) +
                            " columns, got " + std::to_string(row.size()));
  constexpr double kDeg = 180.0 / 3.14159265358979323846;
  const double f_cf2 = row[fraction_col(1)];
  const double f_cf3 = row[fraction_col(2)];
  const double f_cn = row[fraction_col(3)];
  const double f_co = row[fraction_col(4)];
  const double theta0 = 90.0 + 70.0 * std::tanh(2.5 * (f_cf2 + 0.6 * f_cf3 - 1.2 * f_cn - 0.3 * f_co + 0.1));
  const double r = 1.0 + 0.5 * std::tanh(std::log(row[kRoughness] / 200.0));
  const double c = std::tanh(r * std::atanh(0.98 * std::cos(theta0 / kDeg)));
  const double theta = std::acos(c) * kDeg + 4.0 * std::tanh(std::log(row[kR5Energy] / 40.0));
  return std::clamp(theta, 0.0, 180.0);
}

Dataset generate_synthetic(std::size_t n, double noise_sd, std::uint64_t seed) {
  if (n == 0) throw EmptyData("synthetic dataset needs at least one row");
  if (!(noise_sd >= 0) || !std::isfinite(noise_sd))
    throw OutOfRange("noise standard deviation must be finite and >= 0");
  const auto& cols = synthetic_columns();
  Dataset data;
  data.columns = cols;
  data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  data.target.resize(static_cast<Eigen::Index>(n));
  data.ids.reserve(n);
  std::vector<double> row(cols.size());
  for (std::size_t i = 0; i < n; ++i) {
    // Each row has its own stream, so a row does not depend on n.
    Rng rng(derive_seed(seed, i));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    const double sa = std::clamp(200.0 * std::exp(0.8 * normal(rng)), 5.0, 5000.0);
    const double log_rough = std::log(sa / 200.0);
    row[kRoughness] = sa;
    for (std::size_t m = 0; m < kMasks.size(); ++m) {
      const double logit = kFgOffset[m] + kFgSlope[m] * log_rough + 0.3 * normal(rng);
      const double count = std::round(kPixels / (1.0 + std::exp(-logit)));
      const double components = 1.0 + std::floor(std::exp(3.0 + 0.3 * log_rough + 0.5 * normal(rng)));
      const double energy = kEnergy[m] * std::pow(sa / 200.0, 0.6) * std::exp(0.2 * normal(rng));
      row[kTextureBegin + 3 * m] = count;
      row[kTextureBegin + 3 * m + 1] = count / components;
      row[kTextureBegin + 3 * m + 2] = energy;
    }

    // Latent fluorination, nitrogen and oxidation levels couple the groups.
    const double fluor = uniform(rng);
    const double nitro = uniform(rng);
    const double oxid = uniform(rng);
    const std::array<double, 5> shape{2.0, 0.3 + 3.0 * fluor, 0.2 + 1.5 * fluor,
                                      0.3 + 3.0 * nitro, 0.3 + 1.5 * oxid};
    std::array<double, 5> raw{};
    double sum = 0;
    for (std::size_t g = 0; g < raw.size(); ++g) {
      std::gamma_distribution<double> gamma(shape[g], 1.0);
      raw[g] = gamma(rng) + 1e-9;
      sum += raw[g];
    }
    const double total_area = 5000.0 * std::exp(0.3 * normal(rng));
    for (std::size_t g = 0; g < raw.size(); ++g) {
      const double frac = raw[g] / sum;
      row[kChemBegin + 4 * g] = frac * total_area;
      row[kChemBegin + 4 * g + 1] = frac;
      row[kChemBegin + 4 * g + 2] = kDipole[g] * frac;
      row[kChemBegin + 4 * g + 3] = kVolume[g] * frac;
    }

    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < row.size(); ++j) data.features(r, static_cast<Eigen::Index>(j)) = row[j];
    const double clean = synthetic_contact_angle(row);
    const double noisy = noise_sd > 0 ? clean + noise_sd * normal(rng) : clean;
    data.target(r) = std::clamp(noisy, 0.0, 180.0);
    data.ids.push_back("s" + std::to_string(i + 1));
  }
  return data;
}

} // namespace wetpred::io
