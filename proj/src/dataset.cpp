#include "wetpred/dataset.hpp"

#include <algorithm>
#include <unordered_set>

#include "wetpred/error.hpp"

namespace wetpred {

void Dataset::validate() const {
  if (static_cast<std::size_t>(features.cols()) != columns.size())
    throw DataError("feature matrix width does not match column names");
  if (ids.size() != rows()) throw DataError("id count does not match row count");
  if (has_target() && static_cast<std::size_t>(target.size()) != rows())
    throw DataError("target length does not match row count");
  std::unordered_set<std::string> seen;
  for (const auto& c : columns)
    if (!seen.insert(c).second) throw DataError("duplicate column name '" + c + "'");
}

std::optional<std::size_t> Dataset::column_index(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) return std::nullopt;
  return static_cast<std::size_t>(it - columns.begin());
}

std::vector<std::size_t> Dataset::column_indices(std::span<const std::string> names) const {
  std::vector<std::size_t> out;
  out.reserve(names.size());
  for (const auto& n : names) {
    const auto idx = column_index(n);
    if (!idx) throw SchemaMismatch("column '" + n + "' not present");
    out.push_back(*idx);
  }
  return out;
}

Dataset Dataset::subset_rows(std::span<const std::size_t> rows) const {
  Dataset out;
  out.columns = columns;
  out.target_name = target_name;
  out.id_name = id_name;
  out.features = take_rows(features, rows);
  if (has_target()) out.target = take_rows(target, rows);
  out.ids.reserve(rows.size());
  for (auto r : rows) out.ids.push_back(ids[r]);
  return out;
}

} // namespace wetpred
