#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace qdacode {

/// One atomic requirement sentence, the unit of annotation.
struct RequirementStatement {
  std::string id;
  std::string text;
  std::string test_case;
  std::string source_doc;

  friend bool operator==(const RequirementStatement&, const RequirementStatement&) = default;
};

using Corpus = std::vector<RequirementStatement>;

/// Canonical label set for one test case plus the system descriptions used as
/// prompt context.
struct Codebook {
  std::string test_case;
  /// Display name substituted for {system_type}, e.g. "Library Management".
  std::string system_type;
  std::vector<std::string> labels;
  /// raw string -> canonical label
  std::map<std::string, std::string> synonyms;
  std::string brief_description;
  std::string full_description;

  /// Throws InputError when an invariant does not hold.
  void validate() const;
  bool contains(std::string_view label) const;
};

enum class AnnotationKind { Human, Model, Consensus };

std::string_view to_string(AnnotationKind kind);

/// Single-label assignment of requirement ids to labels by one annotator.
struct AnnotationSet {
  std::string annotator;
  AnnotationKind kind = AnnotationKind::Human;
  std::map<std::string, std::string> entries;

  std::set<std::string> ids() const;
  std::size_t size() const { return entries.size(); }
};

struct Exemplar {
  std::string requirement_id;
  std::string text;
  std::string label;

  friend bool operator==(const Exemplar&, const Exemplar&) = default;
};

struct ExemplarPool {
  std::vector<Exemplar> exemplars;
  std::uint64_t seed = 0;

  std::set<std::string> ids() const;
};

struct NormalizedLabel {
  std::string label;
  bool matched = false;

  friend bool operator==(const NormalizedLabel&, const NormalizedLabel&) = default;
};

/// Reads a tab-separated corpus file with an `id` (optional) and `text`
/// column. The source document is the file stem; missing ids become
/// `<stem>:<row>` with 1-based data-row numbering.
Corpus ingest_corpus(const std::filesystem::path& path, std::string_view test_case);
Corpus parse_corpus(std::string_view content, std::string_view source_doc, std::string_view test_case);
std::string serialize_corpus(const Corpus& corpus);

Codebook load_codebook(const std::filesystem::path& path);
Codebook parse_codebook(std::string_view json_text);
std::string serialize_codebook(const Codebook& codebook);

/// Reads a `requirement_id<TAB>label` file. Labels pass through
/// normalize_label when a codebook is supplied. With a non-empty corpus every
/// id must be present in it.
AnnotationSet load_annotations(const std::filesystem::path& path, std::string annotator,
                               AnnotationKind kind, const Corpus& corpus,
                               const Codebook* codebook);
AnnotationSet parse_annotations(std::string_view content, std::string_view origin,
                                std::string annotator, AnnotationKind kind,
                                const Corpus& corpus, const Codebook* codebook);
std::string serialize_annotations(const AnnotationSet& set);

/// Folds case, width, punctuation and whitespace, then maps onto a canonical
/// codebook label directly or through the synonym map. Unmatched input comes
/// back in folded form with matched = false.
NormalizedLabel normalize_label(std::string_view raw, const Codebook& codebook);

/// Items on which both human annotators agree.
AnnotationSet build_consensus(const AnnotationSet& a, const AnnotationSet& b);

struct ExemplarSplit {
  ExemplarPool pool;
  std::set<std::string> evaluation_ids;
};

/// Seeded, label-stratified choice of `k` exemplars from gold. Labels are
/// visited round-robin in lexicographic order; each label bucket is shuffled
/// with the seed first.
ExemplarSplit split_exemplars(const AnnotationSet& gold, const Corpus& corpus, std::size_t k,
                              std::uint64_t seed);

const RequirementStatement& find_statement(const Corpus& corpus, std::string_view id);

}  // namespace qdacode
