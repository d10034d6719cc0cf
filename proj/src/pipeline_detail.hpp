#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wetpred/ensemble.hpp"

namespace wetpred::ensemble::detail {

inline constexpr std::uint64_t kSelectStream = 11;
inline constexpr std::uint64_t kValidationStream = 12;
inline constexpr std::uint64_t kModelStream = 13;
inline constexpr std::uint64_t kSingleStream = 14;
inline constexpr std::uint64_t kForestStream = 15;

/// Columns kept by the selection step, fitted on `rows` only.
std::vector<std::string> select_columns(const Dataset& data, std::span<const std::size_t> rows,
                                        const PipelineConfig& cfg, std::uint64_t seed,
                                        std::size_t jobs, forest::ImportanceReport* report);

struct PreparedRows {
  preprocess::TransformParams transform;
  std::vector<std::size_t> fit_rows; // training rows minus validation
  std::vector<std::size_t> val_rows;
  nn::Split fit;
  nn::Split val;
  nn::Split all_train; // fit + val, in the original training order
  Matrix test_x;
};

/// Fits the transform on the selected columns of `train_rows`, maps train and
/// test rows into model space, and carves a seeded validation subset out of
/// the training rows.
PreparedRows prepare_model_space(const Dataset& data, std::span<const std::size_t> train_rows,
                                 std::span<const std::size_t> test_rows,
                                 const std::vector<std::string>& selected,
                                 double validation_fraction, std::uint64_t seed);

} // namespace wetpred::ensemble::detail
