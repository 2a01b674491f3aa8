#include "qdacode/corpus.hpp"

#include "qdacode/error.hpp"
#include "qdacode/text.hpp"

#include <algorithm>
#include <limits>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace qdacode {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError(fmt::format("cannot open '{}'", path.string()));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Row {
  std::size_t line_no;
  std::vector<std::string> fields;
};

// Splits tab-separated content into rows, skipping blank lines.
std::vector<Row> read_rows(std::string_view content) {
  std::vector<Row> rows;
  std::size_t line_no = 0;
  for (auto& line : text::split(content, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) {
      line.erase(0, 3);
    }
    if (text::trim(line).empty()) {
      continue;
    }
    rows.push_back({line_no, text::split(line, '\t')});
  }
  return rows;
}

std::ptrdiff_t column_of(const std::vector<std::string>& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (text::fold_label(header[i]) == name) {
      return static_cast<std::ptrdiff_t>(i);
    }
  }
  return -1;
}

// Unbiased draw in [0, bound] from raw 64-bit engine output. Avoids
// std::uniform_int_distribution, whose algorithm differs between standard
// libraries.
std::uint64_t draw_upto(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t range = bound + 1;
  if (range == 0) {
    return rng();
  }
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % range);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % range;
}

template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(draw_upto(rng, i - 1));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Codebook

void Codebook::validate() const {
  if (labels.empty()) {
    throw InputError(fmt::format("codebook '{}': no labels", test_case));
  }
  std::set<std::string> folded;
  for (const auto& l : labels) {
    const auto f = text::fold_label(l);
    if (!text::is_single_token(f)) {
      throw InputError(fmt::format("codebook '{}': label '{}' is not a single token", test_case, l));
    }
    if (!folded.insert(f).second) {
      throw InputError(fmt::format("codebook '{}': duplicate label '{}'", test_case, l));
    }
  }
  for (const auto& [raw, canonical] : synonyms) {
    if (std::find(labels.begin(), labels.end(), canonical) == labels.end()) {
      throw InputError(fmt::format("codebook '{}': synonym '{}' maps to unknown label '{}'",
                                   test_case, raw, canonical));
    }
  }
  if (text::trim(brief_description).empty() || text::trim(full_description).empty()) {
    throw InputError(fmt::format("codebook '{}': brief and full descriptions are required", test_case));
  }
}

bool Codebook::contains(std::string_view label) const {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

Codebook parse_codebook(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("codebook: {}", e.what()));
  }
  Codebook cb;
  try {
    cb.test_case = j.at("test_case").get<std::string>();
    cb.system_type = j.value("system_type", cb.test_case);
    cb.labels = j.at("labels").get<std::vector<std::string>>();
    cb.synonyms = j.value("synonyms", std::map<std::string, std::string>{});
    cb.brief_description = j.value("brief_description", std::string{});
    cb.full_description = j.value("full_description", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("codebook: {}", e.what()));
  }
  cb.validate();
  return cb;
}

Codebook load_codebook(const std::filesystem::path& path) {
  try {
    return parse_codebook(read_file(path));
  } catch (const InputError& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string serialize_codebook(const Codebook& cb) {
  nlohmann::ordered_json j;
  j["test_case"] = cb.test_case;
  j["system_type"] = cb.system_type;
  j["labels"] = cb.labels;
  j["synonyms"] = cb.synonyms;
  j["brief_description"] = cb.brief_description;
  j["full_description"] = cb.full_description;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Corpus

Corpus parse_corpus(std::string_view content, std::string_view source_doc, std::string_view test_case) {
  const auto rows = read_rows(content);
  if (rows.size() <= 1) {
    throw InputError(fmt::format("{}: empty corpus", source_doc));
  }
  const auto& header = rows.front().fields;
  const auto id_col = column_of(header, "id");
  const auto text_col = column_of(header, "text");
  if (text_col < 0) {
    throw InputError(fmt::format("{}:{}: header has no 'text' column", source_doc, rows.front().line_no));
  }

  Corpus corpus;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != header.size()) {
      throw InputError(fmt::format("{}:{}: malformed record, expected {} fields, found {}", source_doc,
                                   row.line_no, header.size(), row.fields.size()));
    }
    RequirementStatement st;
    st.test_case = std::string(test_case);
    st.source_doc = std::string(source_doc);
    st.text = text::trim(text::unescape_field(row.fields[static_cast<std::size_t>(text_col)]));
    if (st.text.empty()) {
      throw InputError(fmt::format("{}:{}: empty requirement text", source_doc, row.line_no));
    }
    if (id_col >= 0) {
      st.id = text::trim(text::unescape_field(row.fields[static_cast<std::size_t>(id_col)]));
    }
    if (st.id.empty()) {
      st.id = fmt::format("{}:{}", source_doc, r);
    }
    if (!seen.insert(st.id).second) {
      throw InputError(fmt::format("{}:{}: duplicate id '{}'", source_doc, row.line_no, st.id));
    }
    corpus.push_back(std::move(st));
  }
  return corpus;
}

Corpus ingest_corpus(const std::filesystem::path& path, std::string_view test_case) {
  return parse_corpus(read_file(path), path.stem().string(), test_case);
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out = "id\ttext\n";
  for (const auto& st : corpus) {
    out += text::escape_field(st.id);
    out += '\t';
    out += text::escape_field(st.text);
    out += '\n';
  }
  return out;
}

const RequirementStatement& find_statement(const Corpus& corpus, std::string_view id) {
  const auto it = std::find_if(corpus.begin(), corpus.end(), [&](const auto& s) { return s.id == id; });
  if (it == corpus.end()) {
    throw InputError(fmt::format("unknown requirement id '{}'", id));
  }
  return *it;
}

// ---------------------------------------------------------------------------
// Annotations

std::string_view to_string(AnnotationKind kind) {
  switch (kind) {
    case AnnotationKind::Human: return "human";
    case AnnotationKind::Model: return "model";
    case AnnotationKind::Consensus: return "consensus";
  }
  return "?";
}

std::set<std::string> AnnotationSet::ids() const {
  std::set<std::string> out;
  for (const auto& [id, _] : entries) {
    out.insert(id);
  }
  return out;
}

std::set<std::string> ExemplarPool::ids() const {
  std::set<std::string> out;
  for (const auto& e : exemplars) {
    out.insert(e.requirement_id);
  }
  return out;
}

AnnotationSet parse_annotations(std::string_view content, std::string_view origin, std::string annotator,
                                AnnotationKind kind, const Corpus& corpus, const Codebook* codebook) {
  const auto rows = read_rows(content);
  if (rows.size() <= 1) {
    throw InputError(fmt::format("{}: empty annotation file", origin));
  }
  const auto& header = rows.front().fields;
  const auto id_col = column_of(header, "requirement_id");
  const auto label_col = column_of(header, "label");
  if (id_col < 0 || label_col < 0) {
    throw InputError(fmt::format("{}:{}: header needs 'requirement_id' and 'label' columns", origin,
                                 rows.front().line_no));
  }
  std::set<std::string> known;
  for (const auto& st : corpus) {
    known.insert(st.id);
  }

  AnnotationSet set;
  set.annotator = std::move(annotator);
  set.kind = kind;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != header.size()) {
      throw InputError(fmt::format("{}:{}: malformed record, expected {} fields, found {}", origin,
                                   row.line_no, header.size(), row.fields.size()));
    }
    auto id = text::trim(text::unescape_field(row.fields[static_cast<std::size_t>(id_col)]));
    auto raw = text::trim(text::unescape_field(row.fields[static_cast<std::size_t>(label_col)]));
    if (id.empty() || raw.empty()) {
      throw InputError(fmt::format("{}:{}: empty requirement id or label", origin, row.line_no));
    }
    if (!known.empty() && !known.contains(id)) {
      throw InputError(fmt::format("{}:{}: requirement '{}' is not in the corpus", origin, row.line_no, id));
    }
    auto label = codebook ? normalize_label(raw, *codebook).label : raw;
    if (!set.entries.emplace(id, std::move(label)).second) {
      throw InputError(fmt::format("{}:{}: requirement '{}' labelled twice", origin, row.line_no, id));
    }
  }
  return set;
}

AnnotationSet load_annotations(const std::filesystem::path& path, std::string annotator, AnnotationKind kind,
                               const Corpus& corpus, const Codebook* codebook) {
  return parse_annotations(read_file(path), path.string(), std::move(annotator), kind, corpus, codebook);
}

std::string serialize_annotations(const AnnotationSet& set) {
  std::string out = "requirement_id\tlabel\n";
  for (const auto& [id, label] : set.entries) {
    out += text::escape_field(id);
    out += '\t';
    out += text::escape_field(label);
    out += '\n';
  }
  return out;
}

NormalizedLabel normalize_label(std::string_view raw, const Codebook& codebook) {
  auto folded = text::fold_label(raw);
  for (const auto& label : codebook.labels) {
    if (text::fold_label(label) == folded) {
      return {label, true};
    }
  }
  for (const auto& [syn, canonical] : codebook.synonyms) {
    if (text::fold_label(syn) == folded) {
      return {canonical, true};
    }
  }
  return {std::move(folded), false};
}

AnnotationSet build_consensus(const AnnotationSet& a, const AnnotationSet& b) {
  if (a.kind != AnnotationKind::Human || b.kind != AnnotationKind::Human) {
    throw InputError("consensus needs two human annotation sets");
  }
  AnnotationSet out;
  out.kind = AnnotationKind::Consensus;
  out.annotator = a.annotator < b.annotator ? fmt::format("consensus({},{})", a.annotator, b.annotator)
                                            : fmt::format("consensus({},{})", b.annotator, a.annotator);
  std::size_t shared = 0;
  for (const auto& [id, la] : a.entries) {
    const auto it = b.entries.find(id);
    if (it == b.entries.end()) {
      continue;
    }
    ++shared;
    const auto& lb = it->second;
    if (text::fold_label(la) == text::fold_label(lb)) {
      out.entries.emplace(id, std::min(la, lb));
    }
  }
  if (shared == 0) {
    throw InputError(fmt::format("annotation sets '{}' and '{}' share no requirements", a.annotator, b.annotator));
  }
  return out;
}

ExemplarSplit split_exemplars(const AnnotationSet& gold, const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  if (k > gold.size()) {
    throw InputError(fmt::format("cannot draw {} exemplars from {} gold items", k, gold.size()));
  }
  std::map<std::string, std::vector<std::string>> buckets;
  for (const auto& [id, label] : gold.entries) {
    buckets[label].push_back(id);
  }
  std::mt19937_64 rng(seed);
  for (auto& [_, ids] : buckets) {
    seeded_shuffle(ids, rng);
  }

  ExemplarSplit split;
  split.pool.seed = seed;
  for (std::size_t round = 0; split.pool.exemplars.size() < k; ++round) {
    for (const auto& [label, ids] : buckets) {
      if (split.pool.exemplars.size() == k) {
        break;
      }
      if (round < ids.size()) {
        const auto& st = find_statement(corpus, ids[round]);
        split.pool.exemplars.push_back({st.id, st.text, label});
      }
    }
  }
  const auto taken = split.pool.ids();
  for (const auto& [id, _] : gold.entries) {
    if (!taken.contains(id)) {
      split.evaluation_ids.insert(id);
    }
  }
  return split;
}

}  // namespace qdacode
