#include "qdacode/cli.hpp"

#include "qdacode/config.hpp"
#include "qdacode/consistency.hpp"
#include "qdacode/error.hpp"
#include "qdacode/metrics.hpp"
#include "qdacode/report.hpp"
#include "qdacode/runner.hpp"
#include "qdacode/text.hpp"

#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>

namespace qdacode {

namespace {

struct GridArgs {
  std::string models;
  std::string shots;
  std::string lengths;
  std::string contexts;
  int runs = 0;
  int parallelism = 0;
  bool resume = false;
};

void add_grid_options(CLI::App* cmd, GridArgs& g) {
  cmd->add_option("--models", g.models, "Comma-separated model ids to run (default: all)");
  cmd->add_option("--shots", g.shots, "Comma-separated shot types: zero,one,few");
  cmd->add_option("--lengths", g.lengths, "Comma-separated prompt lengths: short,medium,long");
  cmd->add_option("--contexts", g.contexts, "Comma-separated context levels: none,some,full");
  cmd->add_option("--parallelism", g.parallelism, "In-flight requests (overrides config)")->check(CLI::PositiveNumber);
  cmd->add_flag("--resume", g.resume, "Continue an existing store, skipping finished records");
}

std::vector<ModelConfig> select_models(const AppConfig& cfg, const std::string& filter) {
  if (filter.empty()) {
    return cfg.models;
  }
  std::vector<ModelConfig> out;
  for (const auto& want : text::split(filter, ',')) {
    const auto id = text::trim(want);
    const auto it = std::find_if(cfg.models.begin(), cfg.models.end(), [&](const auto& m) { return m.model_id == id; });
    if (it == cfg.models.end()) {
      throw InputError(fmt::format("--models: no model '{}' in config", id));
    }
    out.push_back(*it);
  }
  return out;
}

int do_ingest(const std::string& config_path, std::ostream& out) {
  const auto cfg = load_app_config(config_path);
  const auto ws = load_workspace(cfg);
  out << fmt::format("{}: {} statements, {} gold labels\n", cfg.test_case, ws.corpus.size(), ws.gold.size());
  out << fmt::format("  codebook: {} labels\n", ws.codebook.labels.size());
  out << fmt::format("  exemplars: {}, evaluation set: {}\n", ws.split.pool.exemplars.size(),
                     ws.split.evaluation_ids.size());
  return 0;
}

int do_agreement(const std::string& config_path, const std::vector<std::string>& files,
                 const std::string& codebook_path, std::ostream& out) {
  AnnotationSet a, b;
  if (files.empty()) {
    if (config_path.empty()) {
      throw InputError("agreement: give two annotation files or --config");
    }
    const auto ws = load_workspace(load_app_config(config_path));
    a = ws.first;
    b = ws.second;
  } else {
    if (files.size() != 2) {
      throw InputError(fmt::format("agreement: expected 2 annotation files, got {}", files.size()));
    }
    std::optional<Codebook> cb;
    if (!codebook_path.empty()) cb = load_codebook(codebook_path);
    const Corpus none;
    for (int i = 0; i < 2; ++i) {
      const std::filesystem::path p = files[static_cast<std::size_t>(i)];
      (i == 0 ? a : b) = load_annotations(p, p.stem().string(), AnnotationKind::Human, none, cb ? &*cb : nullptr);
    }
  }
  const auto r = cohen_kappa(a, b);
  out << fmt::format("annotators: {} vs {}\n", a.annotator, b.annotator);
  out << fmt::format("kappa: {:.10f}\n", r.kappa);
  out << fmt::format("p_o: {:.10f}\n", r.observed);
  out << fmt::format("p_e: {:.10f}\n", r.expected);
  out << fmt::format("n: {}\n", r.n);
  return 0;
}

int do_run(const std::string& config_path, const GridArgs& g, std::ostream& out, std::ostream& err) {
  const auto cfg = load_app_config(config_path);
  const auto ws = load_workspace(cfg);

  ExperimentSpec spec;
  spec.models = select_models(cfg, g.models);
  spec.conditions = condition_grid(parse_grid_filter(g.shots, g.lengths, g.contexts));
  spec.test_case = cfg.test_case;
  spec.n_runs = g.runs > 0 ? g.runs : cfg.n_runs;
  spec.seed = cfg.seed;
  spec.parallelism = g.parallelism > 0 ? g.parallelism : cfg.parallelism;
  spec.consistency_mode = cfg.consistency_mode;
  if (cfg.cache) spec.cache_path = cfg.cache_path;

  const ExperimentInputs inputs{ws.corpus, ws.codebook, ws.gold, ws.split.pool, ws.split.evaluation_ids,
                                ws.templates, RenderOptions{cfg.labeled_examples}};
  auto store = RunStore::open(cfg.store_dir());
  RunOptions options;
  options.resume = g.resume;
  const auto s = run_experiment(spec, inputs, store, options);

  out << fmt::format("{} conditions x {} models x {} runs x {} requirements\n", spec.conditions.size(),
                     spec.models.size(), spec.n_runs, ws.split.evaluation_ids.size());
  out << fmt::format("planned {}, skipped {}, written {}, errors {}\n", s.planned, s.skipped, s.written, s.errors);
  out << fmt::format("store: {}\n", cfg.store_dir().string());
  if (s.transport_errors > 0) {
    err << fmt::format("error: {} requests failed after retries; see error records in the store\n",
                       s.transport_errors);
    return 5;
  }
  return 0;
}

int do_report(const std::string& config_path, const std::string& only, const std::string& anchor,
              std::ostream& out) {
  const auto cfg = load_app_config(config_path);
  const auto ws = load_workspace(cfg);
  if (!RunStore::open(cfg.store_dir()).exists_on_disk()) {
    throw InputError(fmt::format("no run store at {}; run the experiment first", cfg.store_dir().string()));
  }
  const auto store = RunStore::open(cfg.store_dir());

  std::set<std::string> wanted;
  for (const auto& name : text::split(only, ',')) {
    const auto n = text::trim(name);
    if (n.empty()) continue;
    if (n == "kappa") {
      wanted.insert({"kappa_by_shot", "kappa_by_length", "kappa_by_context"});
    } else {
      wanted.insert(std::string(n));
    }
  }
  ReportOptions options;
  if (!anchor.empty()) options.anchor = parse_condition(anchor);

  const auto bundle = build_reports(store, ws.gold, ws.codebook, options);
  const auto written = write_reports(bundle, cfg.reports_dir(), wanted);
  for (const auto& p : written) out << p.string() << '\n';
  if (!bundle.warnings.empty()) {
    out << fmt::format("{} warnings, see warnings.log\n", bundle.warnings.size());
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"LLM-assisted qualitative coding of requirement statements", "qdacode"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string config;
  GridArgs grid;
  std::vector<std::string> files;
  std::string codebook, only, anchor;

  auto* ingest = app.add_subcommand("ingest", "Validate corpus, codebook and annotations; print counts");
  ingest->add_option("-c,--config", config, "Config file")->required();

  auto* agreement = app.add_subcommand("agreement", "Cohen's kappa between two annotation files");
  agreement->add_option("files", files, "Two annotation files (requirement_id<TAB>label)");
  agreement->add_option("--codebook", codebook, "Normalize labels against this codebook");
  agreement->add_option("-c,--config", config, "Use the annotation files of this config");

  auto* run = app.add_subcommand("run", "Run the prompt grid against the configured models");
  run->add_option("-c,--config", config, "Config file")->required();
  run->add_option("--runs", grid.runs, "Repetitions per condition (overrides config)")->check(CLI::PositiveNumber);
  add_grid_options(run, grid);

  auto* report = app.add_subcommand("report", "Write report tables from the run store");
  report->add_option("-c,--config", config, "Config file")->required();
  report->add_option("--only", only, "Comma-separated subset of: kappa," + fmt::format("{}", fmt::join(report_names(), ",")));
  report->add_option("--anchor", anchor, "Condition the tables are built around (default few/long/full)");

  auto* consistency = app.add_subcommand("consistency", "Repeat runs, then report run-to-run SD and ICC");
  consistency->add_option("-c,--config", config, "Config file")->required();
  consistency->add_option("--runs", grid.runs, "Repetitions per condition")->required()->check(CLI::Range(2, 1000));
  consistency->add_option("--anchor", anchor, "Condition to analyse (default few/long/full)");
  add_grid_options(consistency, grid);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest) return do_ingest(config, out);
    if (*agreement) return do_agreement(config, files, codebook, out);
    if (*run) return do_run(config, grid, out, err);
    if (*report) return do_report(config, only, anchor, out);
    if (*consistency) {
      if (grid.shots.empty() && grid.lengths.empty() && grid.contexts.empty()) {
        const auto a = anchor.empty() ? ReportOptions{}.anchor : parse_condition(anchor);
        grid.shots = to_string(a.shot);
        grid.lengths = to_string(a.length);
        grid.contexts = to_string(a.context);
      }
      const int rc = do_run(config, grid, out, err);
      if (rc != 0) return rc;
      return do_report(config, "consistency", anchor, out);
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const MetricError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const StoreConflict& e) {
    err << "error: " << e.what() << '\n';
    return 4;
  } catch (const TransportError& e) {
    err << "error: " << e.what() << '\n';
    return 5;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace qdacode
