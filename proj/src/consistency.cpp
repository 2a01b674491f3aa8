#include "qdacode/consistency.hpp"

#include <set>

#include <fmt/format.h>

namespace qdacode {

namespace {

std::set<std::string> slice_items(const RunStore& store, const std::string& model_id, const Condition& condition,
                                  const AnnotationSet& gold) {
  std::set<std::string> items;
  for (const auto* r : store.slice(model_id, condition)) {
    if (gold.entries.contains(r->requirement_id)) {
      items.insert(r->requirement_id);
    }
  }
  return items;
}

AnnotationSet restrict_to(const AnnotationSet& set, const std::set<std::string>& ids) {
  AnnotationSet out;
  out.annotator = set.annotator;
  out.kind = set.kind;
  for (const auto& id : ids) {
    out.entries.emplace(id, set.entries.at(id));
  }
  return out;
}

}  // namespace

AnnotationSet scored_annotations(const RunStore& store, const std::string& model_id, const Condition& condition,
                                 int run_index, const AnnotationSet& gold) {
  auto slice = annotations_for(store, model_id, condition, run_index).set;
  AnnotationSet out;
  out.annotator = slice.annotator;
  out.kind = AnnotationKind::Model;
  for (const auto& id : slice_items(store, model_id, condition, gold)) {
    const auto it = slice.entries.find(id);
    out.entries.emplace(id, it != slice.entries.end() ? it->second : std::string(kMissingLabel));
  }
  if (out.entries.empty()) {
    throw MetricError(fmt::format("{} has no records for gold items", slice.annotator));
  }
  return out;
}

ConsistencyResult consistency_analysis(const RunStore& store, const std::string& model_id,
                                       const Condition& condition, const AnnotationSet& gold, RunScore score) {
  const auto runs = store.run_indexes(model_id, condition);
  if (runs.size() < 2) {
    throw MetricError(fmt::format("consistency of {} {} needs at least two runs, store has {}", model_id,
                                  to_string(condition), runs.size()));
  }
  const auto items = slice_items(store, model_id, condition, gold);
  const auto truth = restrict_to(gold, items);

  ConsistencyResult res;
  res.n_runs = static_cast<int>(runs.size());
  res.items.assign(items.begin(), items.end());
  res.correctness.resize(static_cast<Eigen::Index>(items.size()), static_cast<Eigen::Index>(runs.size()));

  for (std::size_t c = 0; c < runs.size(); ++c) {
    const auto labels = scored_annotations(store, model_id, condition, runs[c], gold);
    Eigen::Index r = 0;
    for (const auto& id : items) {
      res.correctness(r++, static_cast<Eigen::Index>(c)) = labels.entries.at(id) == truth.entries.at(id) ? 1.0 : 0.0;
    }
    if (score == RunScore::Kappa) {
      res.per_run_scores.push_back(cohen_kappa(labels, truth).kappa);
    } else {
      res.per_run_scores.push_back(res.correctness.col(static_cast<Eigen::Index>(c)).mean());
    }
  }
  res.sd = sd_across_runs(res.per_run_scores);
  res.icc = icc_consistency(res.correctness);
  return res;
}

}  // namespace qdacode
