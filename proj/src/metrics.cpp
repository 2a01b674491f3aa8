#include "qdacode/metrics.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

namespace qdacode {

Eigen::Index ContingencyTable::index_of(std::string_view label) const {
  const auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it == labels.end() || *it != label) {
    return -1;
  }
  return static_cast<Eigen::Index>(it - labels.begin());
}

namespace {

ContingencyTable tabulate(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::set<std::string> space;
  for (const auto& [x, y] : pairs) {
    space.insert(x);
    space.insert(y);
  }
  ContingencyTable t;
  t.labels.assign(space.begin(), space.end());
  const auto k = static_cast<Eigen::Index>(t.labels.size());
  t.counts = CountMatrix::Zero(k, k);
  for (const auto& [x, y] : pairs) {
    ++t.counts(t.index_of(x), t.index_of(y));
  }
  return t;
}

}  // namespace

ContingencyTable contingency_table(const AnnotationSet& a, const AnnotationSet& b) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& [id, la] : a.entries) {
    if (auto it = b.entries.find(id); it != b.entries.end()) {
      pairs.emplace_back(la, it->second);
    }
  }
  if (pairs.empty()) {
    throw MetricError(fmt::format("'{}' and '{}' share no requirement ids", a.annotator, b.annotator));
  }
  return tabulate(pairs);
}

AgreementResult<double> cohen_kappa(const AnnotationSet& a, const AnnotationSet& b) {
  const auto table = contingency_table(a, b);
  return kappa_from_table(table.counts.cast<double>());
}

double sd_across_runs(std::span<const double> scores) {
  const Eigen::Map<const Eigen::VectorXd> v(scores.data(), static_cast<Eigen::Index>(scores.size()));
  return sample_sd(v);
}

ClassificationReport classification_report(const AnnotationSet& pred, const AnnotationSet& gold,
                                           const Codebook& codebook) {
  if (gold.entries.empty()) {
    throw MetricError("classification report needs a non-empty gold set");
  }
  ClassificationReport rep;
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(gold.size());
  for (const auto& [id, truth] : gold.entries) {
    if (auto it = pred.entries.find(id); it != pred.entries.end()) {
      pairs.emplace_back(truth, it->second);
    } else {
      pairs.emplace_back(truth, std::string(kMissingLabel));
      ++rep.missing;
    }
  }
  rep.confusion = tabulate(pairs);

  const auto& c = rep.confusion.counts;
  const double n = static_cast<double>(c.sum());
  const double correct = static_cast<double>(c.trace());
  rep.accuracy = correct / n;

  const auto metrics = per_class_metrics(c);
  std::size_t gold_classes = 0;
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    const auto& label = rep.confusion.labels[i];
    rep.per_class.emplace(label, metrics[i]);
    if (metrics[i].support > 0) {
      ++gold_classes;
      rep.macro_precision += metrics[i].precision;
      rep.macro_recall += metrics[i].recall;
      rep.macro_f1 += metrics[i].f1;
    }
    if (c.col(static_cast<Eigen::Index>(i)).sum() > 0 && label != kMissingLabel && !codebook.contains(label)) {
      rep.out_of_codebook.push_back(label);
    }
  }
  rep.macro_precision /= static_cast<double>(gold_classes);
  rep.macro_recall /= static_cast<double>(gold_classes);
  rep.macro_f1 /= static_cast<double>(gold_classes);

  // Single-label multiclass: every item is exactly one prediction and one
  // truth, so pooled precision and recall both reduce to accuracy.
  std::int64_t tp = 0, predicted = 0, actual = 0;
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    tp += c(j, j);
    predicted += c.col(j).sum();
    actual += c.row(j).sum();
  }
  rep.micro_precision = static_cast<double>(tp) / static_cast<double>(predicted);
  rep.micro_recall = static_cast<double>(tp) / static_cast<double>(actual);
  if (std::abs(rep.micro_precision - rep.accuracy) > 1e-12 || std::abs(rep.micro_recall - rep.accuracy) > 1e-12) {
    throw std::logic_error("micro precision/recall diverged from accuracy");
  }
  return rep;
}

}  // namespace qdacode
