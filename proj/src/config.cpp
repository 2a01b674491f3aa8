#include "qdacode/config.hpp"

#include "qdacode/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace qdacode {

using nlohmann::json;

namespace {

std::filesystem::path existing(const std::filesystem::path& base, const std::string& rel, std::string_view what) {
  auto p = std::filesystem::absolute(base / rel).lexically_normal();
  if (!std::filesystem::exists(p)) {
    throw InputError(fmt::format("{} not found: {}", what, p.string()));
  }
  return p;
}

}  // namespace

AppConfig parse_app_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(fmt::format("config: {}", e.what()));
  }

  AppConfig c;
  try {
    c.test_case = j.at("test_case").get<std::string>();
    for (const auto& p : j.at("corpus")) {
      c.corpus.push_back(existing(base_dir, p.get<std::string>(), "corpus file"));
    }
    if (c.corpus.empty()) {
      throw InputError("config: corpus lists no files");
    }
    c.codebook = existing(base_dir, j.at("codebook").get<std::string>(), "codebook");
    for (const auto& p : j.at("annotations")) {
      c.annotations.push_back(existing(base_dir, p.get<std::string>(), "annotation file"));
    }
    if (c.annotations.size() != 2) {
      throw InputError(fmt::format("config: expected 2 annotation files, got {}", c.annotations.size()));
    }
    if (j.contains("templates")) {
      c.templates = existing(base_dir, j.at("templates").get<std::string>(), "template file");
    }
    if (j.contains("mock_script")) {
      c.mock_script = existing(base_dir, j.at("mock_script").get<std::string>(), "mock script");
    }

    std::set<std::string> seen;
    for (auto m : j.at("models")) {
      if (c.mock_script && m.value("backend", std::string{}) == "mock" && !m.contains("mock_script")) {
        m["mock_script"] = c.mock_script->string();
      }
      auto model = model_config_from_json(m, base_dir);
      if (model.backend == BackendKind::Mock && !std::filesystem::exists(model.mock_script)) {
        throw InputError(fmt::format("mock script not found: {}", model.mock_script.string()));
      }
      if (!seen.insert(model.model_id).second) {
        throw InputError(fmt::format("config: model '{}' listed twice", model.model_id));
      }
      c.models.push_back(std::move(model));
    }
    if (c.models.empty()) {
      throw InputError("config: no models");
    }

    const auto e = j.value("experiment", json::object());
    c.n_runs = e.value("n_runs", c.n_runs);
    c.seed = e.value("seed", c.seed);
    c.parallelism = e.value("parallelism", c.parallelism);
    c.exemplar_count = e.value("exemplar_count", c.exemplar_count);
    c.labeled_examples = e.value("labeled_examples", c.labeled_examples);
    if (e.contains("consistency_mode")) {
      c.consistency_mode = e.at("consistency_mode").get<bool>();
    }

    c.output_dir = std::filesystem::absolute(base_dir / j.value("output_dir", std::string("out"))).lexically_normal();
    c.cache = j.value("cache", c.cache);
    c.cache_path = j.contains("cache_path") ? std::filesystem::absolute(base_dir / j.at("cache_path").get<std::string>()).lexically_normal()
                                            : c.output_dir / "cache.jsonl";
  } catch (const json::exception& e) {
    throw InputError(fmt::format("config: {}", e.what()));
  }
  return c;
}

AppConfig load_app_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError(fmt::format("config not found: {}", path.string()));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  auto c = parse_app_config(ss.str(), base);
  c.source = path;
  return c;
}

Workspace load_workspace(const AppConfig& config) {
  Workspace w;
  std::set<std::string> ids;
  for (const auto& p : config.corpus) {
    for (auto& s : ingest_corpus(p, config.test_case)) {
      if (!ids.insert(s.id).second) {
        throw InputError(fmt::format("{}: duplicate id '{}' across corpus files", p.string(), s.id));
      }
      w.corpus.push_back(std::move(s));
    }
  }
  w.codebook = load_codebook(config.codebook);
  if (w.codebook.test_case != config.test_case) {
    throw InputError(fmt::format("codebook is for '{}', config names '{}'", w.codebook.test_case, config.test_case));
  }
  w.first = load_annotations(config.annotations[0], config.annotations[0].stem().string(), AnnotationKind::Human,
                             w.corpus, &w.codebook);
  w.second = load_annotations(config.annotations[1], config.annotations[1].stem().string(), AnnotationKind::Human,
                              w.corpus, &w.codebook);
  w.gold = build_consensus(w.first, w.second);
  w.split = split_exemplars(w.gold, w.corpus, config.exemplar_count, config.seed);
  w.templates = config.templates ? TemplateSet::load(*config.templates) : TemplateSet::builtin();
  return w;
}

}  // namespace qdacode
