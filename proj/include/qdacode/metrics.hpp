#pragma once

#include "qdacode/corpus.hpp"
#include "qdacode/error.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

namespace qdacode {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Label assigned to an item whose prediction is absent (error record or
/// never produced). Never equal to a real label.
inline constexpr std::string_view kMissingLabel = "<missing>";

/// counts(i, j) = number of items rater A labelled labels[i] and rater B
/// labelled labels[j]. The label space is the sorted union of both raters.
struct ContingencyTable {
  std::vector<std::string> labels;
  CountMatrix counts;

  std::int64_t n() const { return counts.sum(); }
  Eigen::Index index_of(std::string_view label) const;
};

/// Pairs the two sets on their shared ids. Throws MetricError when there
/// are none.
ContingencyTable contingency_table(const AnnotationSet& a, const AnnotationSet& b);

template <typename Scalar = double>
struct AgreementResult {
  Scalar kappa{};
  Scalar observed{};
  Scalar expected{};
  std::int64_t n = 0;
};

/// Cohen's kappa from a square table of counts (or proportions).
/// p_e = 1 is only admissible together with p_o = 1 and gives kappa = 1.
template <typename Derived>
AgreementResult<typename Derived::Scalar> kappa_from_table(const Eigen::MatrixBase<Derived>& counts) {
  using Scalar = typename Derived::Scalar;
  static_assert(std::is_floating_point_v<Scalar>, "cast integer counts first");
  if (counts.rows() != counts.cols()) {
    throw MetricError("contingency table must be square");
  }
  const Scalar total = counts.sum();
  if (!(total > Scalar(0))) {
    throw MetricError("contingency table is empty");
  }
  AgreementResult<Scalar> r;
  r.n = static_cast<std::int64_t>(std::llround(static_cast<double>(total)));
  r.observed = counts.trace() / total;
  const auto row_marginal = counts.rowwise().sum() / total;
  const auto col_marginal = counts.colwise().sum().transpose() / total;
  r.expected = row_marginal.dot(col_marginal);
  if (r.expected == Scalar(1)) {
    if (r.observed != Scalar(1)) {
      throw MetricError("degenerate marginals");
    }
    r.kappa = Scalar(1);
    return r;
  }
  r.kappa = (r.observed - r.expected) / (Scalar(1) - r.expected);
  return r;
}

/// Kappa between two annotation sets, restricted to their shared ids.
AgreementResult<double> cohen_kappa(const AnnotationSet& a, const AnnotationSet& b);

/// Sample standard deviation (n - 1 denominator).
template <typename Derived>
typename Derived::Scalar sample_sd(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() < 2) {
    throw MetricError("standard deviation needs at least two scores");
  }
  const Scalar mean = v.mean();
  return std::sqrt((v.derived().array() - mean).square().sum() / Scalar(v.size() - 1));
}

double sd_across_runs(std::span<const double> scores);

/// Mean squares of the two-way (items x runs) ANOVA without replication.
template <typename Scalar>
struct MeanSquares {
  Scalar rows{};     // between items
  Scalar cols{};     // between runs
  Scalar residual{};
};

template <typename Derived>
MeanSquares<typename Derived::Scalar> two_way_mean_squares(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const auto n = x.rows();
  const auto k = x.cols();
  const Scalar grand = x.mean();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row_means = x.rowwise().mean();
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> col_means = x.colwise().mean();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> resid =
      ((x.colwise() - row_means).rowwise() - col_means).array() + grand;

  MeanSquares<Scalar> ms;
  ms.rows = Scalar(k) * (row_means.array() - grand).square().sum() / Scalar(n - 1);
  ms.cols = Scalar(n) * (col_means.array() - grand).square().sum() / Scalar(k - 1);
  ms.residual = resid.squaredNorm() / Scalar((n - 1) * (k - 1));
  return ms;
}

/// ICC(2,k): two-way random effects, absolute agreement, average of k runs.
/// Rows are items, columns are runs. When every run gives the same column
/// the value is 1 by definition, which also covers the all-equal matrix.
template <typename Derived>
typename Derived::Scalar icc_consistency(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.rows() < 2 || x.cols() < 2) {
    throw MetricError("ICC needs at least two items and two runs");
  }
  if (!x.allFinite()) {
    throw MetricError("ICC input has missing cells");
  }
  if ((x.colwise() - x.col(0)).cwiseAbs().maxCoeff() == Scalar(0)) {
    return Scalar(1);
  }
  const auto ms = two_way_mean_squares(x);
  const Scalar n = Scalar(x.rows());
  const Scalar denom = ms.rows + (ms.cols - ms.residual) / n;
  // Cancellation leaves rounding noise where the exact value is zero.
  const Scalar scale = ms.rows + (ms.cols + ms.residual) / n;
  if (!(std::abs(denom) > Scalar(64) * std::numeric_limits<Scalar>::epsilon() * scale)) {
    throw MetricError("degenerate ICC");
  }
  return (ms.rows - ms.residual) / denom;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
};

struct ClassificationReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  /// Every label in the confusion table, including predicted-only ones.
  std::map<std::string, ClassMetrics> per_class;
  /// Rows are gold labels, columns predictions.
  ContingencyTable confusion;
  /// Predicted labels that are not codebook labels.
  std::vector<std::string> out_of_codebook;
  /// Gold items with no prediction; counted under kMissingLabel.
  std::int64_t missing = 0;
};

/// Multi-class report over the gold ids. Macro averages run over classes
/// with gold support; predictions outside the codebook are misses.
ClassificationReport classification_report(const AnnotationSet& pred, const AnnotationSet& gold,
                                           const Codebook& codebook);

/// Per-class precision/recall/F1 derived from a confusion matrix whose rows are
/// the truth and columns the predictions.
template <typename Derived>
std::vector<ClassMetrics> per_class_metrics(const Eigen::MatrixBase<Derived>& confusion) {
  const auto tp = confusion.diagonal();
  const auto predicted = confusion.colwise().sum();
  const auto support = confusion.rowwise().sum();
  std::vector<ClassMetrics> out(static_cast<std::size_t>(confusion.rows()));
  for (Eigen::Index i = 0; i < confusion.rows(); ++i) {
    auto& m = out[static_cast<std::size_t>(i)];
    const auto t = static_cast<double>(tp(i));
    m.support = static_cast<std::int64_t>(support(i));
    m.precision = predicted(i) > 0 ? t / static_cast<double>(predicted(i)) : 0.0;
    m.recall = support(i) > 0 ? t / static_cast<double>(support(i)) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  }
  return out;
}

}  // namespace qdacode
