#include "qdacode/cli.hpp"
#include "qdacode/runner.hpp"

#include "support.hpp"

#include <doctest.h>

#include <json.hpp>

#include <sstream>

using namespace qdacode;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "qdacode");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Config in a temp dir that points at the library fixtures.
json library_config(const testing::TempDir& dir) {
  const auto lib = testing::library_dir();
  return json{{"test_case", "library"},
              {"corpus", {(lib / "corpus.tsv").string()}},
              {"codebook", (lib / "codebook.json").string()},
              {"annotations", {(lib / "c1.tsv").string(), (lib / "c2.tsv").string()}},
              {"mock_script", (lib / "mock_responses.json").string()},
              {"models", {{{"model_id", "mock-gpt"}, {"backend", "mock"}}}},
              {"experiment", {{"n_runs", 1}, {"seed", 7}, {"exemplar_count", 6}}},
              {"output_dir", (dir / "out").string()},
              {"cache", false}};
}

std::string write_config(const testing::TempDir& dir, const json& j) {
  const auto p = dir / "config.json";
  testing::write(p, j.dump(2));
  return p.string();
}

// Five requirements, all agreed, three of them exemplars: two evaluated.
json tiny_config(const testing::TempDir& dir) {
  testing::write(dir / "corpus.tsv",
                 "id\ttext\nT1\tBorrow books.\nT2\tSearch the catalog.\nT3\tEmail reminders.\n"
                 "T4\tRenew a loan.\nT5\tAdd a title to the catalog.\n");
  const std::string labels = "requirement_id\tlabel\nT1\tLoan\nT2\tCatalog\nT3\tNotification\nT4\tLoan\nT5\tCatalog\n";
  testing::write(dir / "a.tsv", labels);
  testing::write(dir / "b.tsv", labels);
  testing::write(dir / "mock.json", R"({"responses":{},"default_response":"Loan"})");
  auto j = library_config(dir);
  j["corpus"] = {"corpus.tsv"};
  j["annotations"] = {"a.tsv", "b.tsv"};
  j["mock_script"] = "mock.json";
  j["experiment"]["exemplar_count"] = 3;
  j["output_dir"] = "out";
  return j;
}

std::size_t record_count(const std::filesystem::path& store) {
  return RunStore::open(store).records().size();
}

}  // namespace

TEST_CASE("ingest") {
  testing::TempDir dir;
  const auto r = cli({"ingest", "-c", write_config(dir, library_config(dir))});
  CHECK(r.code == 0);
  CHECK(r.out.starts_with("library: 20 statements, 16 gold labels\n"));
}

TEST_CASE("ingest with a missing codebook names the path") {
  testing::TempDir dir;
  auto j = library_config(dir);
  j["codebook"] = (dir / "nowhere.json").string();
  const auto r = cli({"ingest", "-c", write_config(dir, j)});
  CHECK(r.code == 2);
  CHECK(r.err.find((dir / "nowhere.json").string()) != std::string::npos);
}

TEST_CASE("ingest with duplicate ids") {
  testing::TempDir dir;
  testing::write(dir / "dup.tsv", "id\ttext\nL01\tA.\nL01\tB.\n");
  auto j = library_config(dir);
  j["corpus"] = {(dir / "dup.tsv").string()};
  const auto r = cli({"ingest", "-c", write_config(dir, j)});
  CHECK(r.code == 2);
  CHECK(r.err.find("duplicate id") != std::string::npos);
}

TEST_CASE("agreement") {
  const auto lib = testing::library_dir();
  const auto hand = cli({"agreement", (lib / "hand_a.tsv").string(), (lib / "hand_b.tsv").string()});
  CHECK(hand.code == 0);
  CHECK(hand.out.find("kappa: 0.6363636364") != std::string::npos);
  CHECK(hand.out.find("n: 4") != std::string::npos);

  const auto same = cli({"agreement", (lib / "hand_a.tsv").string(), (lib / "hand_a.tsv").string()});
  CHECK(same.out.find("kappa: 1.0000000000") != std::string::npos);

  testing::TempDir dir;
  testing::write(dir / "other.tsv", "requirement_id\tlabel\nZ1\tLoan\n");
  const auto disjoint = cli({"agreement", (lib / "hand_a.tsv").string(), (dir / "other.tsv").string()});
  CHECK(disjoint.code == 3);
}

TEST_CASE("run counts and filters") {
  testing::TempDir dir;
  const auto cfg = write_config(dir, tiny_config(dir));
  const auto r = cli({"run", "-c", cfg});
  CHECK(r.code == 0);
  CHECK(record_count(dir / "out" / "store") == 27 * 2);

  testing::TempDir dir2;
  const auto cfg2 = write_config(dir2, tiny_config(dir2));
  CHECK(cli({"run", "-c", cfg2, "--shots", "few", "--contexts", "full"}).code == 0);
  const auto store = RunStore::open(dir2 / "out" / "store");
  CHECK(store.conditions().size() == 3);
  CHECK(store.records().size() == 3 * 2);
}

TEST_CASE("rerun without --resume is refused; --resume completes") {
  testing::TempDir dir;
  const auto cfg = write_config(dir, tiny_config(dir));
  CHECK(cli({"run", "-c", cfg, "--shots", "zero"}).code == 0);
  CHECK(cli({"run", "-c", cfg}).code == 4);
  const auto r = cli({"run", "-c", cfg, "--resume"});
  CHECK(r.code == 0);
  CHECK(r.out.find("skipped 18") != std::string::npos);
  CHECK(record_count(dir / "out" / "store") == 54);
  // nothing left to do
  CHECK(cli({"run", "-c", cfg, "--resume"}).out.find("written 0") != std::string::npos);
}

TEST_CASE("resume after the inputs changed") {
  testing::TempDir dir;
  auto j = tiny_config(dir);
  const auto cfg = write_config(dir, j);
  CHECK(cli({"run", "-c", cfg, "--shots", "zero"}).code == 0);
  testing::write(dir / "corpus.tsv", testing::read(dir / "corpus.tsv") + "T6\tOne more.\n");
  const auto r = cli({"run", "-c", cfg, "--resume"});
  CHECK(r.code == 4);
  CHECK(r.err.find("corpus changed under store") != std::string::npos);
}

TEST_CASE("report") {
  testing::TempDir dir;
  const auto cfg = write_config(dir, tiny_config(dir));
  CHECK(cli({"report", "-c", cfg}).code == 2);  // no store yet
  CHECK(cli({"run", "-c", cfg}).code == 0);
  CHECK(cli({"report", "-c", cfg}).code == 0);
  const auto reports = dir / "out" / "reports";
  for (const auto* name : {"kappa_by_shot.csv", "kappa_by_shot.md", "kappa_by_length.csv", "kappa_by_length.md",
                           "kappa_by_context.csv", "kappa_by_context.md", "consistency.csv", "consistency.md",
                           "performance.csv", "performance.md", "trace_matrix.csv", "domain_model.txt",
                           "warnings.log"}) {
    CHECK_MESSAGE(std::filesystem::exists(reports / name), name);
  }
  const auto before = testing::read(reports / "performance.csv");
  CHECK(cli({"report", "-c", cfg}).code == 0);
  CHECK(testing::read(reports / "performance.csv") == before);
}

TEST_CASE("report --only") {
  testing::TempDir dir;
  const auto cfg = write_config(dir, tiny_config(dir));
  CHECK(cli({"run", "-c", cfg, "--runs", "2", "--shots", "few", "--lengths", "long", "--contexts", "full"}).code == 0);
  CHECK(cli({"report", "-c", cfg, "--only", "consistency"}).code == 0);
  std::set<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(dir / "out" / "reports"))
    names.insert(e.path().filename().string());
  CHECK(names == std::set<std::string>{"consistency.csv", "consistency.md", "warnings.log"});
  CHECK(cli({"report", "-c", cfg, "--only", "bogus"}).code == 2);
}

TEST_CASE("consistency subcommand") {
  testing::TempDir dir;
  const auto cfg = write_config(dir, tiny_config(dir));
  const auto r = cli({"consistency", "-c", cfg, "--runs", "3"});
  CHECK(r.code == 0);
  const auto csv = testing::read(dir / "out" / "reports" / "consistency.csv");
  CHECK(csv.find("SD,0.000\n") != std::string::npos);
  CHECK(csv.find("ICC,1.000\n") != std::string::npos);
  CHECK(csv.find("runs,3\n") != std::string::npos);
  CHECK(record_count(dir / "out" / "store") == 3 * 2);
}

TEST_CASE("exhausted transport exits 5 and keeps error records") {
  testing::TempDir dir;
  auto j = tiny_config(dir);
  // Port 9 (discard) on loopback is closed in the test environment.
  j["models"] = {{{"model_id", "remote"},
                  {"endpoint_url", "http://127.0.0.1:9/v1/chat/completions"},
                  {"max_retries", 0},
                  {"request_timeout_s", 2}}};
  const auto cfg = write_config(dir, j);
  const auto r = cli({"run", "-c", cfg, "--shots", "zero", "--lengths", "short", "--contexts", "none"});
  CHECK(r.code == 5);
  const auto store = RunStore::open(dir / "out" / "store");
  REQUIRE(store.records().size() == 2);
  CHECK_FALSE(store.records()[0].ok());
}

TEST_CASE("usage errors") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"run"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
  testing::TempDir dir;
  CHECK(cli({"run", "-c", (dir / "missing.json").string()}).code == 2);
  const auto cfg = write_config(dir, tiny_config(dir));
  CHECK(cli({"run", "-c", cfg, "--shots", "two"}).code == 2);
  CHECK(cli({"run", "-c", cfg, "--models", "nobody"}).code == 2);
}
