#pragma once

#include "qdacode/metrics.hpp"
#include "qdacode/runner.hpp"

#include <string>
#include <vector>

namespace qdacode {

/// Which per-run score the run-to-run SD is taken over.
enum class RunScore { Kappa, Accuracy };

struct ConsistencyResult {
  double sd = 0.0;
  double icc = 0.0;
  int n_runs = 0;
  std::vector<double> per_run_scores;
  /// Items x runs; 1 where the run's label equals gold.
  Eigen::MatrixXd correctness;
  std::vector<std::string> items;
};

/// One run's labels over the gold items it was asked about. Items whose
/// record failed (or is absent) carry kMissingLabel, so they count as
/// disagreements rather than disappearing.
AnnotationSet scored_annotations(const RunStore& store, const std::string& model_id, const Condition& condition,
                                 int run_index, const AnnotationSet& gold);

/// SD of per-run scores against gold plus ICC(2,k) of the correctness matrix.
ConsistencyResult consistency_analysis(const RunStore& store, const std::string& model_id,
                                       const Condition& condition, const AnnotationSet& gold,
                                       RunScore score = RunScore::Kappa);

}  // namespace qdacode
