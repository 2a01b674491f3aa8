#include "qdacode/runner.hpp"

#include "qdacode/error.hpp"
#include "qdacode/hash.hpp"
#include "qdacode/text.hpp"

#include <algorithm>
#include <ctime>
#include <deque>
#include <fstream>
#include <future>
#include <set>

#include <fmt/format.h>

namespace qdacode {

using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                     tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
}

}  // namespace

void ExperimentSpec::validate() const {
  if (models.empty()) {
    throw InputError("experiment: no models configured");
  }
  if (conditions.empty()) {
    throw InputError("experiment: no conditions selected");
  }
  if (n_runs < 1) {
    throw InputError("experiment: n_runs must be >= 1");
  }
  if (parallelism < 1) {
    throw InputError("experiment: parallelism must be >= 1");
  }
  std::set<std::string> ids;
  for (const auto& m : models) {
    m.validate();
    if (!ids.insert(m.model_id).second) {
      throw InputError(fmt::format("experiment: model '{}' listed twice", m.model_id));
    }
  }
}

// ---------------------------------------------------------------------------
// Records

json to_json(const RunRecord& r) {
  json j;
  j["requirement_id"] = r.requirement_id;
  j["model_id"] = r.model_id;
  j["shot"] = to_string(r.condition.shot);
  j["length"] = to_string(r.condition.length);
  j["context"] = to_string(r.condition.context);
  j["run_index"] = r.run_index;
  j["raw_text"] = r.raw_text;
  j["extracted_label"] = r.extracted_label;
  j["normalized_label"] = r.normalized_label;
  j["matched_codebook"] = r.matched_codebook;
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  j["backend"] = r.backend;
  j["attempt_count"] = r.attempt_count;
  j["prompt_sha256"] = r.prompt_sha256;
  j["exemplar_ids"] = r.exemplar_ids;
  j["timestamp"] = r.timestamp;
  j["latency_ms"] = r.latency_ms;
  return j;
}

RunRecord run_record_from_json(const json& j) {
  RunRecord r;
  r.requirement_id = j.at("requirement_id").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  r.condition = {parse_shot(j.at("shot").get<std::string>()), parse_length(j.at("length").get<std::string>()),
                 parse_context(j.at("context").get<std::string>())};
  r.run_index = j.at("run_index").get<int>();
  r.raw_text = j.value("raw_text", std::string{});
  r.extracted_label = j.value("extracted_label", std::string{});
  r.normalized_label = j.value("normalized_label", std::string{});
  r.matched_codebook = j.value("matched_codebook", false);
  if (j.contains("error") && !j.at("error").is_null()) {
    r.error = j.at("error").get<std::string>();
  }
  r.backend = j.value("backend", std::string{});
  r.attempt_count = j.value("attempt_count", 0);
  r.prompt_sha256 = j.value("prompt_sha256", std::string{});
  r.exemplar_ids = j.value("exemplar_ids", std::vector<std::string>{});
  r.timestamp = j.value("timestamp", std::string{});
  r.latency_ms = j.value("latency_ms", std::int64_t{0});
  return r;
}

RecordKey key_of(const RunRecord& r) { return {r.model_id, r.requirement_id, r.condition, r.run_index}; }

// ---------------------------------------------------------------------------
// Store

RunStore RunStore::in_memory(json manifest) {
  RunStore s;
  s.manifest_ = std::move(manifest);
  return s;
}

RunStore RunStore::open(const std::filesystem::path& dir) {
  RunStore s;
  s.dir_ = dir;
  const auto manifest_path = dir / kManifestFile;
  if (std::filesystem::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    try {
      s.manifest_ = json::parse(in);
    } catch (const json::exception& e) {
      throw StoreConflict(fmt::format("{}: unreadable manifest: {}", manifest_path.string(), e.what()));
    }
  }

  const auto records_path = dir / kRecordsFile;
  if (!std::filesystem::exists(records_path)) {
    return s;
  }
  std::ifstream in(records_path, std::ios::binary);
  std::string line;
  std::size_t line_no = 0;
  std::uintmax_t good_bytes = 0;
  bool torn = false;
  while (std::getline(in, line)) {
    ++line_no;
    const bool complete = !in.eof();
    if (text::trim(line).empty()) {
      good_bytes += line.size() + (complete ? 1 : 0);
      continue;
    }
    if (!complete) {
      // A final line without its newline was cut off mid-write.
      torn = true;
      break;
    }
    try {
      auto rec = run_record_from_json(json::parse(line));
      const auto key = key_of(rec);
      if (s.index_.contains(key)) {
        throw StoreConflict(fmt::format("{}:{}: duplicate record", records_path.string(), line_no));
      }
      s.index_.emplace(key, s.records_.size());
      s.records_.push_back(std::move(rec));
      good_bytes += line.size() + 1;
    } catch (const json::exception& e) {
      throw StoreConflict(fmt::format("{}:{}: corrupt record: {}", records_path.string(), line_no, e.what()));
    }
  }
  in.close();
  if (torn) {
    std::filesystem::resize_file(records_path, good_bytes);
  }
  return s;
}

bool RunStore::exists_on_disk() const {
  return !dir_.empty() && std::filesystem::exists(dir_ / kManifestFile);
}

void RunStore::write_manifest(json manifest) {
  manifest_ = std::move(manifest);
  if (dir_.empty()) {
    return;
  }
  std::filesystem::create_directories(dir_);
  std::ofstream out(dir_ / kManifestFile, std::ios::trunc);
  out << manifest_.dump(2) << '\n';
}

void RunStore::append(RunRecord record) {
  const auto key = key_of(record);
  if (index_.contains(key)) {
    throw StoreConflict(fmt::format("record for {} / {} / {} / run {} already stored", record.model_id,
                                    record.requirement_id, to_string(record.condition), record.run_index));
  }
  if (!dir_.empty()) {
    std::filesystem::create_directories(dir_);
    std::ofstream out(dir_ / kRecordsFile, std::ios::app | std::ios::binary);
    out << to_json(record).dump() << '\n';
    out.flush();
    if (!out) {
      throw StoreConflict(fmt::format("cannot append to {}", (dir_ / kRecordsFile).string()));
    }
  }
  index_.emplace(key, records_.size());
  records_.push_back(std::move(record));
}

std::vector<std::string> RunStore::model_ids() const {
  std::set<std::string> s;
  for (const auto& r : records_) s.insert(r.model_id);
  return {s.begin(), s.end()};
}

std::vector<Condition> RunStore::conditions() const {
  std::set<Condition> s;
  for (const auto& r : records_) s.insert(r.condition);
  return {s.begin(), s.end()};
}

std::vector<int> RunStore::run_indexes(const std::string& model_id, const Condition& condition) const {
  std::set<int> s;
  for (const auto& r : records_) {
    if (r.model_id == model_id && r.condition == condition) s.insert(r.run_index);
  }
  return {s.begin(), s.end()};
}

std::vector<const RunRecord*> RunStore::slice(const std::string& model_id, const Condition& condition,
                                              std::optional<int> run_index) const {
  std::vector<const RunRecord*> out;
  for (const auto& r : records_) {
    if (r.model_id == model_id && r.condition == condition && (!run_index || r.run_index == *run_index)) {
      out.push_back(&r);
    }
  }
  return out;
}

std::string RunStore::manifest_hash() const { return sha256_hex(manifest_.dump()); }

// ---------------------------------------------------------------------------
// Manifest

json input_hashes(const ExperimentInputs& in) {
  json pool = json::array();
  for (const auto& e : in.pool.exemplars) {
    pool.push_back({e.requirement_id, e.text, e.label});
  }
  json j;
  j["corpus_sha256"] = sha256_hex(serialize_corpus(in.corpus));
  j["codebook_sha256"] = sha256_hex(serialize_codebook(in.codebook));
  j["gold_sha256"] = sha256_hex(serialize_annotations(in.gold));
  j["exemplars_sha256"] = sha256_hex(json{{"seed", in.pool.seed}, {"exemplars", pool}}.dump());
  j["evaluation_sha256"] = sha256_hex(json(in.evaluation_ids).dump());
  j["templates_sha256"] = sha256_hex(in.templates.serialize());
  j["labeled_examples"] = in.render.labeled_examples;
  return j;
}

json build_manifest(const ExperimentSpec& spec, const ExperimentInputs& inputs) {
  json models = json::array();
  for (const auto& m : spec.models) models.push_back(to_json(m));
  json conditions = json::array();
  for (const auto& c : spec.conditions) conditions.push_back(to_string(c));
  json j;
  j["format"] = "qdacode-runstore/1";
  j["test_case"] = spec.test_case;
  j["inputs"] = input_hashes(inputs);
  j["spec"] = {{"models", models},   {"conditions", conditions},
               {"n_runs", spec.n_runs}, {"seed", spec.seed},
               {"consistency_mode", spec.consistency()}};
  return j;
}

// ---------------------------------------------------------------------------
// Execution

namespace {

struct Task {
  LlmClient* client;
  const RenderedPrompt* prompt;
  int run_index;
};

RunRecord execute(const Task& task, const Codebook& codebook, bool consistency,
                  const std::function<std::string()>& now) {
  RunRecord rec;
  rec.requirement_id = task.prompt->requirement_id;
  rec.model_id = task.client->config().model_id;
  rec.condition = task.prompt->condition;
  rec.run_index = task.run_index;
  rec.prompt_sha256 = sha256_hex(task.prompt->text);
  rec.exemplar_ids = task.prompt->exemplar_ids;
  try {
    auto res = task.client->complete(*task.prompt, task.run_index, consistency);
    rec.raw_text = std::move(res.raw_text);
    rec.backend = std::string(to_string(res.backend));
    rec.attempt_count = res.attempt_count;
    rec.latency_ms = res.latency.count();
    rec.extracted_label = extract_label(rec.raw_text);
    const auto norm = normalize_label(rec.extracted_label, codebook);
    rec.normalized_label = norm.label;
    rec.matched_codebook = norm.matched;
  } catch (const TransportError& e) {
    rec.error = e.what();
    rec.extracted_label.clear();
    rec.normalized_label.clear();
    rec.matched_codebook = false;
  }
  rec.timestamp = now ? now() : utc_now();
  return rec;
}

}  // namespace

RunSummary run_experiment(const ExperimentSpec& spec, const ExperimentInputs& inputs, RunStore& store,
                          const RunOptions& options) {
  spec.validate();
  if (inputs.evaluation_ids.empty()) {
    throw InputError("experiment: evaluation set is empty");
  }
  std::size_t max_shots = 0;
  for (const auto& c : spec.conditions) max_shots = std::max(max_shots, exemplar_count(c.shot));
  if (inputs.pool.exemplars.size() < max_shots) {
    throw InputError(fmt::format("experiment: exemplar pool has {} entries, conditions need {}",
                                 inputs.pool.exemplars.size(), max_shots));
  }

  const auto manifest = build_manifest(spec, inputs);
  const bool has_state = store.exists_on_disk() || !store.records().empty();
  if (has_state && !store.manifest().is_null() && (options.resume || !store.records().empty())) {
    if (!options.resume && !store.records().empty()) {
      throw StoreConflict(fmt::format("run store '{}' already holds {} records; resume it or pick another directory",
                                      store.dir().string(), store.records().size()));
    }
    if (store.manifest().value("inputs", json{}) != manifest["inputs"]) {
      throw StoreConflict("corpus changed under store");
    }
    if (!options.resume) {
      store.write_manifest(manifest);
    }
  } else {
    store.write_manifest(manifest);
  }

  std::unique_ptr<ResponseCache> cache;
  const bool any_live =
      std::any_of(spec.models.begin(), spec.models.end(), [](const auto& m) { return m.backend == BackendKind::Live; });
  if (any_live && !spec.cache_path.empty()) {
    cache = std::make_unique<ResponseCache>(spec.cache_path);
  }

  std::vector<std::unique_ptr<LlmClient>> clients;
  for (const auto& m : spec.models) {
    clients.push_back(std::make_unique<LlmClient>(m, options.backend_factory(m),
                                                  m.backend == BackendKind::Live ? cache.get() : nullptr,
                                                  options.sleeper));
  }

  // Prompts depend on condition and requirement only.
  std::map<std::pair<Condition, std::string>, RenderedPrompt> prompts;
  for (const auto& c : spec.conditions) {
    for (const auto& id : inputs.evaluation_ids) {
      prompts.emplace(std::pair{c, id}, render_prompt(c, find_statement(inputs.corpus, id), inputs.codebook,
                                                      inputs.pool, inputs.templates, inputs.render));
    }
  }

  RunSummary summary;
  const bool consistency = spec.consistency();
  std::deque<std::future<RunRecord>> inflight;
  const auto commit = [&](RunRecord rec) {
    if (!rec.ok()) {
      ++summary.errors;
      ++summary.transport_errors;
    }
    store.append(std::move(rec));
    ++summary.written;
  };

  for (std::size_t m = 0; m < spec.models.size(); ++m) {
    for (const auto& c : spec.conditions) {
      for (int run = 0; run < spec.n_runs; ++run) {
        for (const auto& id : inputs.evaluation_ids) {
          ++summary.planned;
          if (store.contains({spec.models[m].model_id, id, c, run})) {
            ++summary.skipped;
            continue;
          }
          const Task task{clients[m].get(), &prompts.at({c, id}), run};
          if (spec.parallelism == 1) {
            commit(execute(task, inputs.codebook, consistency, options.now));
            continue;
          }
          inflight.push_back(std::async(std::launch::async, [&, task] {
            return execute(task, inputs.codebook, consistency, options.now);
          }));
          if (inflight.size() >= static_cast<std::size_t>(spec.parallelism)) {
            commit(inflight.front().get());
            inflight.pop_front();
          }
        }
      }
    }
  }
  while (!inflight.empty()) {
    commit(inflight.front().get());
    inflight.pop_front();
  }
  return summary;
}

SliceAnnotations annotations_for(const RunStore& store, const std::string& model_id, const Condition& condition,
                                 int run_index) {
  const auto records = store.slice(model_id, condition, run_index);
  if (records.empty()) {
    throw MetricError(fmt::format("no records for {} {} run {}", model_id, to_string(condition), run_index));
  }
  SliceAnnotations out;
  out.set.annotator = fmt::format("{} {} run {}", model_id, to_string(condition), run_index);
  out.set.kind = AnnotationKind::Model;
  for (const auto* r : records) {
    if (r->ok()) {
      out.set.entries.emplace(r->requirement_id, r->normalized_label);
    } else {
      ++out.error_count;
    }
  }
  return out;
}

}  // namespace qdacode
