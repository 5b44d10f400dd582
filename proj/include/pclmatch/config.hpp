#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pclmatch/trainer.hpp"

namespace pclmatch {

// Flat "key = value" text with dotted sections; '#' lines are comments.
using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

ConfigEntries parse_config_text(std::string_view text, const std::string& source_name);
ConfigEntries parse_config_file(const std::filesystem::path& path);

// Merged view of everything a run needs. Unknown keys are rejected; value
// errors name the offending field.
struct RunConfig {
  std::uint64_t seed = 42;
  std::string out_dir;
  std::string train_path;
  std::string dev_path;
  std::string test_path;
  std::string lexicon_path;
  TrainConfig train;

  // Applies one "key = value" assignment.
  void set(const std::string& key, const std::string& value);
  void apply(const ConfigEntries& entries);

  // All keys in canonical order; from_entries(to_entries()) reproduces the
  // config exactly.
  ConfigEntries to_entries() const;
  static RunConfig from_entries(const ConfigEntries& entries);

  static const std::vector<std::string>& known_keys();

  void validate() const;
  std::string render() const;  // config-file text
  void write(const std::filesystem::path& path) const;
};

}  // namespace pclmatch
