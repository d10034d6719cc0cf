#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wetpred/ensemble.hpp"
#include "wetpred/texture.hpp"

namespace wetpred::cli {

/// Bad flags, unknown config keys or unparsable values. Exit code 2.
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Group { General, Data, Extract, Selection, Model, Baseline, CV, Synth };

struct Key {
  std::string name;
  std::string default_value;
  std::string help;
  Group group;
  bool boolean = false;
};

/// Every configurable key with its default, in a fixed order.
const std::vector<Key>& keys();
const Key* find_key(std::string_view name);

/// Resolved key -> value strings. Precedence: CLI > config file > default.
class Settings {
public:
  void set(const std::string& key, std::string value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& str(const std::string& key) const;
  std::size_t size(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  /// Comma-separated unsigned integers; empty string gives an empty list.
  std::vector<std::size_t> sizes(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

private:
  std::map<std::string, std::string> values_;
};

/// `key = value` lines; '#' starts a comment. Throws UsageError on unknown
/// keys or lines without '='.
std::map<std::string, std::string> parse_config(std::string_view text);

/// Defaults of the given groups, overlaid with `file` then `cli` (both
/// filtered to those groups).
Settings resolve(const std::vector<Group>& groups, const std::map<std::string, std::string>& file,
                 const std::map<std::string, std::string>& cli);

ensemble::PipelineConfig pipeline_config(const Settings& s);
texture::ExtractOptions extract_options(const Settings& s);

} // namespace wetpred::cli
