#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wetpred/linalg.hpp"

namespace wetpred {

/// Feature matrix with named columns, per-row ids, and (optionally) the
/// contact-angle target in degrees.
struct Dataset {
  std::vector<std::string> ids;
  std::vector<std::string> columns;
  Matrix features;
  Vector target; // empty when the dataset carries no target
  std::string target_name = "contact_angle";
  std::string id_name = "id";

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
  bool has_target() const { return target.size() > 0; }

  /// Throws DataError when shapes disagree or column names repeat.
  void validate() const;

  std::optional<std::size_t> column_index(const std::string& name) const;

  /// Column indices of `names`; throws SchemaMismatch for a missing name.
  std::vector<std::size_t> column_indices(std::span<const std::string> names) const;

  Dataset subset_rows(std::span<const std::size_t> rows) const;
};

} // namespace wetpred
