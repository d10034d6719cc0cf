#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wetpred/dataset.hpp"
#include "wetpred/ensemble.hpp"
#include "wetpred/texture.hpp"

namespace wetpred::io {

namespace fs = std::filesystem;

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

/// Whole file as bytes. Throws FileNotReadable.
std::string read_file(const fs::path& path);

/// Writes to a sibling temp file, then renames it over `path`.
void write_file_atomic(const fs::path& path, std::string_view contents);

/// FNV-1a 64.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

// ---------------------------------------------------------------------------
// CSV

struct CsvOptions {
  std::string target_name = "contact_angle";
  std::string id_name = "id";
  /// When false a file without the target column loads with an empty target.
  bool require_target = true;
};

/// Header row, then one row per sample. The id column (if present) becomes
/// Dataset::ids, the target column Dataset::target, every other column a
/// feature in file order. Without an id column, ids are the 1-based row
/// numbers. Cells must be finite decimals; targets must lie in [0, 180].
Dataset parse_csv(std::string_view text, const CsvOptions& options = {});
Dataset load_csv(const fs::path& path, const CsvOptions& options = {});

/// id first, features in order, target last (when present).
std::string format_csv(const Dataset& data);
void save_csv(const Dataset& data, const fs::path& path);

// ---------------------------------------------------------------------------
// Portable graymap

/// P2 (ASCII) or P5 (binary), maxval 255.
texture::GrayImage parse_pgm(std::string_view bytes);
texture::GrayImage load_image(const fs::path& path);

std::string format_pgm(const texture::GrayImage& img, bool binary = true);
void save_image(const texture::GrayImage& img, const fs::path& path, bool binary = true);

// ---------------------------------------------------------------------------
// Model artifact

inline constexpr std::string_view kArtifactFormat = "wetpred-model";
inline constexpr int kArtifactVersion = 1;

struct ModelArtifact {
  int version = kArtifactVersion;
  ensemble::Ensemble model;
  std::string config_digest; // hex FNV-1a of the canonical training config
};

std::string serialize_pipeline_config(const ensemble::PipelineConfig& cfg);
std::string config_digest(const ensemble::PipelineConfig& cfg);

std::string serialize_model(const ModelArtifact& artifact);
/// Throws VersionMismatch for another version tag, CorruptArtifact for
/// anything unparsable or inconsistent.
ModelArtifact parse_model(std::string_view text);

void save_model(const ModelArtifact& artifact, const fs::path& path);
ModelArtifact load_model(const fs::path& path);

// ---------------------------------------------------------------------------
// Synthetic surfaces

/// The 36 synthetic columns: roughness, 15 texture statistics, and area,
/// area fraction, polarity and volume for each of CH2, CF2, CF3, CN, CO.
const std::vector<std::string>& synthetic_columns();

/// Noise-free contact angle (degrees) of one synthetic row, columns in
/// synthetic_columns() order. Writing f for area fractions and Sa for
/// roughness in nm:
///   theta0 = 90 + 70 tanh(2.5 (f_CF2 + 0.6 f_CF3 - 1.2 f_CN - 0.3 f_CO + 0.1))
///   r      = 1 + 0.5 tanh(ln(Sa / 200))
///   cos t  = tanh(r atanh(0.98 cos theta0))
///   theta  = acos(cos t) + 4 tanh(ln(R5R5_energy / 40))
/// clamped to [0, 180].
double synthetic_contact_angle(std::span<const double> row);

/// Pure function of (n, noise_sd, seed). Targets are the oracle plus
/// N(0, noise_sd^2), clamped to [0, 180].
Dataset generate_synthetic(std::size_t n, double noise_sd, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Reports. CSV files carry a header; .dat chart files are whitespace columns
// with a leading '#' header line.

std::string format_importance_csv(const forest::ImportanceReport& rep);
std::string format_importance_chart(const forest::ImportanceReport& rep);
std::string format_correlation_csv(const Matrix& corr, std::span<const std::string> names);
std::string format_training_report(const ensemble::Ensemble& ens);
std::string format_predictions(const Dataset& data, const Vector& predictions);
std::string format_cv_folds(std::span<const ensemble::CVReport> reports);
std::string format_cv_summary(std::span<const ensemble::CVReport> reports);
std::string format_cv_chart(std::span<const ensemble::CVReport> reports);

} // namespace wetpred::io
