#include "qdacode/report.hpp"

#include "qdacode/error.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>

#include <fmt/format.h>

namespace qdacode {

namespace {

constexpr std::string_view kErrorLabel = "<error>";

class Warnings {
public:
  void add(std::string msg) { set_.insert(std::move(msg)); }
  std::vector<std::string> list() const { return {set_.begin(), set_.end()}; }

private:
  std::set<std::string> set_;
};

struct Context {
  const RunStore& store;
  const AnnotationSet& gold;
  const Codebook& codebook;
  std::vector<std::string> models;
  std::set<Condition> present;
  Warnings warnings;
};

std::optional<double> mean(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

AnnotationSet gold_for(const AnnotationSet& gold, const AnnotationSet& pred) {
  AnnotationSet out;
  out.annotator = gold.annotator;
  out.kind = gold.kind;
  for (const auto& [id, _] : pred.entries) {
    out.entries.emplace(id, gold.entries.at(id));
  }
  return out;
}

void note_errors(Context& ctx, const std::string& model, const Condition& c, int run) {
  const auto s = annotations_for(ctx.store, model, c, run);
  if (s.error_count > 0) {
    const auto total = s.error_count + s.set.size();
    ctx.warnings.add(fmt::format("{} {} run {}: {} of {} records are errors (error rate {:.3f})", model,
                                 to_string(c), run, s.error_count, total,
                                 static_cast<double>(s.error_count) / static_cast<double>(total)));
  }
}

// Mean over runs of kappa against gold; nullopt when the slice is missing.
std::optional<double> mean_kappa(Context& ctx, const std::string& model, const Condition& c) {
  const auto runs = ctx.store.run_indexes(model, c);
  if (runs.empty()) {
    ctx.warnings.add(fmt::format("no records for model {} under {}", model, to_string(c)));
    return std::nullopt;
  }
  std::vector<double> scores;
  for (int run : runs) {
    note_errors(ctx, model, c, run);
    try {
      const auto pred = scored_annotations(ctx.store, model, c, run, ctx.gold);
      scores.push_back(cohen_kappa(pred, gold_for(ctx.gold, pred)).kappa);
    } catch (const MetricError& e) {
      ctx.warnings.add(fmt::format("{} {} run {}: {}", model, to_string(c), run, e.what()));
      return std::nullopt;
    }
  }
  return mean(scores);
}

bool check_present(Context& ctx, const Condition& c) {
  if (ctx.present.contains(c)) {
    return true;
  }
  ctx.warnings.add(fmt::format("condition {} absent from store; row omitted", to_string(c)));
  return false;
}

template <typename Axis>
ReportTable kappa_table(Context& ctx, std::string name, std::string title, std::string axis_name,
                        const std::vector<Axis>& values, const std::function<Condition(Axis)>& cond_of,
                        const std::function<std::string(Axis)>& row_label) {
  ReportTable t;
  t.name = std::move(name);
  t.title = std::move(title);
  t.note = "Cohen's kappa against consensus gold, mean over runs.";
  t.columns.push_back(std::move(axis_name));
  t.columns.insert(t.columns.end(), ctx.models.begin(), ctx.models.end());
  for (auto v : values) {
    const auto c = cond_of(v);
    if (!check_present(ctx, c)) {
      continue;
    }
    std::vector<Cell> row{row_label(v)};
    for (const auto& m : ctx.models) {
      row.emplace_back(mean_kappa(ctx, m, c));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

ReportTable consistency_table(Context& ctx, const Condition& anchor, RunScore score) {
  ReportTable t;
  t.name = "consistency";
  t.title = fmt::format("Consistency across runs ({})", to_string(anchor));
  t.note = fmt::format("SD: sample standard deviation of per-run {}. ICC: ICC(2,k) on per-item correctness.",
                       score == RunScore::Kappa ? "kappa" : "accuracy");
  t.columns.push_back("metric");
  t.columns.insert(t.columns.end(), ctx.models.begin(), ctx.models.end());
  if (!check_present(ctx, anchor)) {
    return t;
  }
  std::vector<Cell> sd{std::string("SD")}, icc{std::string("ICC")}, runs{std::string("runs")};
  for (const auto& m : ctx.models) {
    const auto n = ctx.store.run_indexes(m, anchor).size();
    runs.emplace_back(std::to_string(n));
    try {
      const auto r = consistency_analysis(ctx.store, m, anchor, ctx.gold, score);
      sd.emplace_back(r.sd);
      icc.emplace_back(r.icc);
    } catch (const MetricError& e) {
      ctx.warnings.add(fmt::format("consistency for {}: {}", m, e.what()));
      sd.emplace_back(std::nullopt);
      icc.emplace_back(std::nullopt);
    }
  }
  t.rows = {std::move(sd), std::move(icc), std::move(runs)};
  return t;
}

ReportTable performance_table(Context& ctx, const Condition& anchor) {
  ReportTable t;
  t.name = "performance";
  t.title = fmt::format("Classification performance ({} prompts, {} context)", to_string(anchor.length),
                        to_string(anchor.context));
  t.note = "Precision, recall and F1 are macro averages over gold classes; all values are means over runs.";
  t.columns = {"setting", "model", "accuracy", "precision", "recall", "f1"};
  for (auto shot : {ShotType::Zero, ShotType::One, ShotType::Few}) {
    const Condition c{shot, anchor.length, anchor.context};
    if (!check_present(ctx, c)) {
      continue;
    }
    for (const auto& m : ctx.models) {
      std::vector<Cell> row{fmt::format("{}-shot", to_string(shot)), m};
      const auto runs = ctx.store.run_indexes(m, c);
      if (runs.empty()) {
        ctx.warnings.add(fmt::format("no records for model {} under {}", m, to_string(c)));
        row.insert(row.end(), 4, Cell(std::optional<double>{}));
        t.rows.push_back(std::move(row));
        continue;
      }
      std::vector<double> acc, p, r, f;
      for (int run : runs) {
        note_errors(ctx, m, c, run);
        const auto pred = scored_annotations(ctx.store, m, c, run, ctx.gold);
        const auto rep = classification_report(pred, gold_for(ctx.gold, pred), ctx.codebook);
        acc.push_back(rep.accuracy);
        p.push_back(rep.macro_precision);
        r.push_back(rep.macro_recall);
        f.push_back(rep.macro_f1);
      }
      row.emplace_back(mean(acc));
      row.emplace_back(mean(p));
      row.emplace_back(mean(r));
      row.emplace_back(mean(f));
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

std::vector<TraceRow> trace_rows(const Context& ctx) {
  std::vector<TraceRow> rows;
  const auto group = [&](const std::string& model, const std::string& cond, const std::string& run,
                         const std::map<std::string, std::vector<std::string>>& by_label) {
    for (const auto& [label, ids] : by_label) {
      rows.push_back({model, cond, run, label, ids});
    }
  };

  std::map<std::string, std::vector<std::string>> gold_groups;
  for (const auto& [id, label] : ctx.gold.entries) gold_groups[label].push_back(id);
  group("consensus", "", "", gold_groups);

  for (const auto& m : ctx.models) {
    for (const auto& c : ctx.present) {
      for (int run : ctx.store.run_indexes(m, c)) {
        std::map<std::string, std::vector<std::string>> by_label;
        for (const auto* r : ctx.store.slice(m, c, run)) {
          by_label[r->ok() ? r->normalized_label : std::string(kErrorLabel)].push_back(r->requirement_id);
        }
        for (auto& [_, ids] : by_label) std::sort(ids.begin(), ids.end());
        group(m, to_string(c), std::to_string(run), by_label);
      }
    }
  }
  return rows;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) {
    return std::string(s);
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string cell_text(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  return format_number(std::get<std::optional<double>>(c));
}

void write_file(const std::filesystem::path& path, const std::string& content,
                std::vector<std::filesystem::path>& written) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) {
    throw InputError(fmt::format("cannot write '{}'", path.string()));
  }
  written.push_back(path);
}

}  // namespace

const std::vector<std::string>& report_names() {
  static const std::vector<std::string> names{"kappa_by_shot", "kappa_by_length", "kappa_by_context", "consistency",
                                              "performance",   "trace_matrix",    "domain_model"};
  return names;
}

std::string format_number(std::optional<double> v) {
  if (!v) return "NA";
  auto s = fmt::format("{:.3f}", *v);
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string export_domain_skeleton(const AnnotationSet& annotations, const Codebook& codebook,
                                   std::vector<DomainClass>* classes) {
  std::map<std::string, std::vector<std::string>> mapped, unmapped;
  for (const auto& [id, label] : annotations.entries) {
    (codebook.contains(label) ? mapped : unmapped)[label].push_back(id);
  }
  std::string out = fmt::format("// domain model skeleton: {}\n", annotations.annotator);
  for (const auto& [label, ids] : mapped) {
    out += fmt::format("\nclass {} {{\n", label);
    for (const auto& id : ids) out += fmt::format("  // trace: {}\n", id);
    out += "}\n";
    if (classes) classes->push_back({annotations.annotator, label, ids.size(), true});
  }
  if (!unmapped.empty()) {
    out += "\n// UNMAPPED\n";
    for (const auto& [label, ids] : unmapped) {
      out += fmt::format("// label: {}\n", label);
      for (const auto& id : ids) out += fmt::format("//   trace: {}\n", id);
      if (classes) classes->push_back({annotations.annotator, label, ids.size(), false});
    }
  }
  return out;
}

ReportBundle build_reports(const RunStore& store, const AnnotationSet& gold, const Codebook& codebook,
                           const ReportOptions& options) {
  Context ctx{store, gold, codebook, store.model_ids(), {}, {}};
  for (const auto& c : store.conditions()) ctx.present.insert(c);
  const auto& a = options.anchor;

  ReportBundle b;
  b.manifest_hash = store.manifest_hash();
  b.kappa_by_shot = kappa_table<ShotType>(
      ctx, "kappa_by_shot", fmt::format("Kappa by shot type ({} prompts, {} context)", to_string(a.length),
                                        to_string(a.context)),
      "shot", {ShotType::Zero, ShotType::One, ShotType::Few},
      [&](ShotType s) { return Condition{s, a.length, a.context}; },
      [](ShotType s) { return fmt::format("{}-shot", to_string(s)); });
  b.kappa_by_length = kappa_table<PromptLength>(
      ctx, "kappa_by_length", fmt::format("Kappa by prompt length ({}-shot, {} context)", to_string(a.shot),
                                          to_string(a.context)),
      "length", {PromptLength::Short, PromptLength::Medium, PromptLength::Long},
      [&](PromptLength l) { return Condition{a.shot, l, a.context}; },
      [](PromptLength l) { return std::string(to_string(l)); });
  b.kappa_by_context = kappa_table<ContextLevel>(
      ctx, "kappa_by_context", fmt::format("Kappa by context level ({}-shot, {} prompts)", to_string(a.shot),
                                           to_string(a.length)),
      "context", {ContextLevel::None, ContextLevel::Some, ContextLevel::Full},
      [&](ContextLevel c) { return Condition{a.shot, a.length, c}; },
      [](ContextLevel c) { return std::string(to_string(c)); });
  b.consistency = consistency_table(ctx, a, options.sd_score);
  b.performance = performance_table(ctx, a);
  b.trace_matrix = trace_rows(ctx);

  b.domain_model = export_domain_skeleton(gold, codebook, &b.domain_skeleton);
  for (const auto& m : ctx.models) {
    const auto runs = store.run_indexes(m, a);
    if (runs.empty()) {
      continue;
    }
    auto labels = annotations_for(store, m, a, runs.front()).set;
    if (labels.entries.empty()) {
      continue;
    }
    b.domain_model += "\n" + export_domain_skeleton(labels, codebook, &b.domain_skeleton);
  }
  b.warnings = ctx.warnings.list();
  return b;
}

std::string to_csv(const ReportTable& t, const std::string& manifest_hash) {
  std::string out = fmt::format("# manifest_sha256={}\n", manifest_hash);
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    out += (i ? "," : "") + csv_field(t.columns[i]);
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += (i ? "," : "") + csv_field(cell_text(row[i]));
    }
    out += '\n';
  }
  return out;
}

std::string to_markdown(const ReportTable& t, const std::string& manifest_hash) {
  std::string out = fmt::format("## {}\n\n", t.title);
  if (!t.note.empty()) out += t.note + "\n\n";
  out += "|";
  for (const auto& c : t.columns) out += fmt::format(" {} |", c);
  out += "\n|";
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
  out += '\n';
  for (const auto& row : t.rows) {
    out += "|";
    for (const auto& c : row) out += fmt::format(" {} |", cell_text(c));
    out += '\n';
  }
  out += fmt::format("\nmanifest sha256: `{}`\n", manifest_hash);
  return out;
}

std::string trace_matrix_csv(const std::vector<TraceRow>& rows, const std::string& manifest_hash) {
  std::string out = fmt::format("# manifest_sha256={}\nmodel,condition,run,label,count,requirement_ids\n", manifest_hash);
  for (const auto& r : rows) {
    std::string ids;
    for (std::size_t i = 0; i < r.requirement_ids.size(); ++i) ids += (i ? ";" : "") + r.requirement_ids[i];
    out += fmt::format("{},{},{},{},{},{}\n", csv_field(r.model_id), csv_field(r.condition), csv_field(r.run),
                       csv_field(r.label), r.requirement_ids.size(), csv_field(ids));
  }
  return out;
}

std::vector<std::filesystem::path> write_reports(const ReportBundle& b, const std::filesystem::path& dir,
                                                 const std::set<std::string>& only) {
  for (const auto& name : only) {
    if (std::find(report_names().begin(), report_names().end(), name) == report_names().end()) {
      throw InputError(fmt::format("unknown report '{}'", name));
    }
  }
  const auto wanted = [&](const std::string& name) { return only.empty() || only.contains(name); };
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto* t : {&b.kappa_by_shot, &b.kappa_by_length, &b.kappa_by_context, &b.consistency, &b.performance}) {
    if (!wanted(t->name)) continue;
    write_file(dir / (t->name + ".csv"), to_csv(*t, b.manifest_hash), written);
    write_file(dir / (t->name + ".md"), to_markdown(*t, b.manifest_hash), written);
  }
  if (wanted("trace_matrix")) {
    write_file(dir / "trace_matrix.csv", trace_matrix_csv(b.trace_matrix, b.manifest_hash), written);
  }
  if (wanted("domain_model")) {
    write_file(dir / "domain_model.txt", b.domain_model, written);
  }
  std::string log;
  for (const auto& w : b.warnings) log += "warning: " + w + "\n";
  write_file(dir / "warnings.log", log, written);
  return written;
}

}  // namespace qdacode
