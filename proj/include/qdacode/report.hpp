#pragma once

#include "qdacode/consistency.hpp"
#include "qdacode/corpus.hpp"
#include "qdacode/runner.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace qdacode {

/// A text cell or a number (absent numbers render as "NA").
using Cell = std::variant<std::string, std::optional<double>>;

struct ReportTable {
  std::string name;
  std::string title;
  std::string note;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct TraceRow {
  std::string model_id;
  std::string condition;
  std::string run;
  std::string label;
  std::vector<std::string> requirement_ids;
};

struct DomainClass {
  std::string source;
  std::string name;
  std::size_t trace_links = 0;
  bool mapped = true;
};

struct ReportBundle {
  std::string manifest_hash;
  ReportTable kappa_by_shot;
  ReportTable kappa_by_length;
  ReportTable kappa_by_context;
  ReportTable consistency;
  ReportTable performance;
  std::vector<TraceRow> trace_matrix;
  std::string domain_model;
  std::vector<DomainClass> domain_skeleton;
  std::vector<std::string> warnings;
};

struct ReportOptions {
  /// Each kappa table varies one axis of this condition and holds the other
  /// two fixed; consistency uses it as is.
  Condition anchor{ShotType::Few, PromptLength::Long, ContextLevel::Full};
  RunScore sd_score = RunScore::Kappa;
};

/// Report artifact names accepted by write_reports' filter.
const std::vector<std::string>& report_names();

ReportBundle build_reports(const RunStore& store, const AnnotationSet& gold, const Codebook& codebook,
                           const ReportOptions& options = {});

/// One `class <Label>` block per codebook label in use, listing its trace
/// links; labels outside the codebook go to an UNMAPPED section.
std::string export_domain_skeleton(const AnnotationSet& annotations, const Codebook& codebook,
                                   std::vector<DomainClass>* classes = nullptr);

/// Fixed three-decimal rendering; "NA" for absent values.
std::string format_number(std::optional<double> v);
std::string to_csv(const ReportTable& table, const std::string& manifest_hash);
std::string to_markdown(const ReportTable& table, const std::string& manifest_hash);
std::string trace_matrix_csv(const std::vector<TraceRow>& rows, const std::string& manifest_hash);

/// Writes the selected artifacts (all when `only` is empty) plus
/// warnings.log. Returns the written paths.
std::vector<std::filesystem::path> write_reports(const ReportBundle& bundle, const std::filesystem::path& dir,
                                                 const std::set<std::string>& only = {});

}  // namespace qdacode
