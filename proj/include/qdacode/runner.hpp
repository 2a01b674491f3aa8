#pragma once

#include "qdacode/corpus.hpp"
#include "qdacode/llm.hpp"
#include "qdacode/prompt.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

namespace qdacode {

struct ExperimentSpec {
  std::vector<ModelConfig> models;
  std::vector<Condition> conditions;
  std::string test_case;
  int n_runs = 1;
  std::uint64_t seed = 0;
  int parallelism = 1;
  /// Put the run index into cache keys so repeated runs reach the model.
  /// Defaults to on whenever n_runs > 1.
  std::optional<bool> consistency_mode;
  /// Response cache for live models; empty disables caching.
  std::filesystem::path cache_path;

  bool consistency() const { return consistency_mode.value_or(n_runs > 1); }
  void validate() const;
};

/// Everything a run reads, bundled so the manifest can hash it.
struct ExperimentInputs {
  const Corpus& corpus;
  const Codebook& codebook;
  const AnnotationSet& gold;
  const ExemplarPool& pool;
  const std::set<std::string>& evaluation_ids;
  const TemplateSet& templates = TemplateSet::builtin();
  RenderOptions render{};
};

/// One model response for one requirement under one condition and run. The
/// record is the trace link from a label back to its requirement.
struct RunRecord {
  std::string requirement_id;
  std::string model_id;
  Condition condition;
  int run_index = 0;
  std::string raw_text;
  std::string extracted_label;
  std::string normalized_label;
  bool matched_codebook = false;
  /// Set for failed completions; the label fields are then empty.
  std::optional<std::string> error;
  std::string backend;
  int attempt_count = 0;
  std::string prompt_sha256;
  std::vector<std::string> exemplar_ids;
  std::string timestamp;
  std::int64_t latency_ms = 0;

  bool ok() const { return !error.has_value(); }
};

nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

using RecordKey = std::tuple<std::string, std::string, Condition, int>;  // model, requirement, condition, run
RecordKey key_of(const RunRecord& r);

/// Line-delimited JSON run records plus a manifest sidecar in one directory.
class RunStore {
public:
  static constexpr const char* kRecordsFile = "runs.jsonl";
  static constexpr const char* kManifestFile = "manifest.json";

  /// Loads an existing store, or an empty one when the directory has none.
  static RunStore open(const std::filesystem::path& dir);
  /// In-memory store (nothing is written).
  static RunStore in_memory(nlohmann::json manifest = {});

  bool exists_on_disk() const;
  const std::filesystem::path& dir() const { return dir_; }
  const nlohmann::json& manifest() const { return manifest_; }
  const std::vector<RunRecord>& records() const { return records_; }
  bool contains(const RecordKey& key) const { return index_.contains(key); }

  void write_manifest(nlohmann::json manifest);
  /// Appends and flushes one record. Throws StoreConflict on duplicates.
  void append(RunRecord record);

  /// Sorted distinct values, for report layout.
  std::vector<std::string> model_ids() const;
  std::vector<Condition> conditions() const;
  std::vector<int> run_indexes(const std::string& model_id, const Condition& condition) const;
  std::vector<const RunRecord*> slice(const std::string& model_id, const Condition& condition,
                                      std::optional<int> run_index = std::nullopt) const;
  /// SHA-256 of the manifest's canonical serialization.
  std::string manifest_hash() const;

private:
  std::filesystem::path dir_;
  nlohmann::json manifest_;
  std::vector<RunRecord> records_;
  std::map<RecordKey, std::size_t> index_;
};

/// Content hashes of the inputs, stored in the manifest and checked on resume.
nlohmann::json input_hashes(const ExperimentInputs& inputs);
nlohmann::json build_manifest(const ExperimentSpec& spec, const ExperimentInputs& inputs);

using BackendFactory = std::function<std::shared_ptr<CompletionBackend>(const ModelConfig&)>;

struct RunOptions {
  bool resume = false;
  BackendFactory backend_factory = make_backend;
  Sleeper sleeper{};
  /// Clock for record timestamps; tests pin it.
  std::function<std::string()> now{};
};

struct RunSummary {
  std::size_t planned = 0;
  std::size_t skipped = 0;
  std::size_t written = 0;
  std::size_t errors = 0;
  std::size_t transport_errors = 0;
};

/// Runs every (model, condition, run, evaluation requirement) not yet in the
/// store, in that nesting order. Failed completions become error records.
RunSummary run_experiment(const ExperimentSpec& spec, const ExperimentInputs& inputs, RunStore& store,
                          const RunOptions& options = {});

struct SliceAnnotations {
  AnnotationSet set;
  std::size_t error_count = 0;
};

/// Normalized labels for one (model, condition, run) slice; error records
/// are left out and counted.
SliceAnnotations annotations_for(const RunStore& store, const std::string& model_id, const Condition& condition,
                                 int run_index);

}  // namespace qdacode
