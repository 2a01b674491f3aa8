#pragma once

#include "qdacode/corpus.hpp"
#include "qdacode/llm.hpp"
#include "qdacode/prompt.hpp"
#include "qdacode/runner.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qdacode {

/// The JSON config file. Relative paths are resolved against the file's
/// directory and must exist when the config is loaded.
struct AppConfig {
  std::filesystem::path source;
  std::string test_case;
  std::vector<std::filesystem::path> corpus;
  std::filesystem::path codebook;
  /// Exactly two human annotation files; consensus of the pair is gold.
  std::vector<std::filesystem::path> annotations;
  std::optional<std::filesystem::path> templates;
  /// Default script for mock models that do not name their own.
  std::optional<std::filesystem::path> mock_script;
  std::vector<ModelConfig> models;

  int n_runs = 1;
  std::uint64_t seed = 0;
  int parallelism = 1;
  std::size_t exemplar_count = 3;
  bool labeled_examples = false;
  std::optional<bool> consistency_mode;

  std::filesystem::path output_dir;
  bool cache = true;
  std::filesystem::path cache_path;

  std::filesystem::path store_dir() const { return output_dir / "store"; }
  std::filesystem::path reports_dir() const { return output_dir / "reports"; }
};

AppConfig load_app_config(const std::filesystem::path& path);
AppConfig parse_app_config(std::string_view json_text, const std::filesystem::path& base_dir);

/// Loaded and cross-checked inputs of one test case.
struct Workspace {
  Corpus corpus;
  Codebook codebook;
  AnnotationSet first;
  AnnotationSet second;
  AnnotationSet gold;
  ExemplarSplit split;
  TemplateSet templates;
};

Workspace load_workspace(const AppConfig& config);

}  // namespace qdacode
