#include "qdacode/corpus.hpp"
#include "qdacode/error.hpp"

#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace qdacode;

namespace {

Codebook library_codebook() { return load_codebook(testing::library_dir() / "codebook.json"); }

AnnotationSet human(std::string name, std::map<std::string, std::string> entries) {
  AnnotationSet s;
  s.annotator = std::move(name);
  s.kind = AnnotationKind::Human;
  s.entries = std::move(entries);
  return s;
}

}  // namespace

TEST_CASE("corpus ids default to source document and row") {
  const auto c = parse_corpus("text\nfirst\nsecond\nthird\n", "doc1", "library");
  REQUIRE(c.size() == 3);
  CHECK(c[0].id == "doc1:1");
  CHECK(c[2].id == "doc1:3");
  CHECK(c[1].text == "second");
  CHECK(c[1].source_doc == "doc1");
  CHECK(c[1].test_case == "library");
}

TEST_CASE("corpus errors") {
  CHECK_THROWS_WITH_AS(parse_corpus("", "d", "t"), doctest::Contains("empty corpus"), InputError);
  CHECK_THROWS_WITH_AS(parse_corpus("id\ttext\n", "d", "t"), doctest::Contains("empty corpus"), InputError);
  CHECK_THROWS_WITH_AS(parse_corpus("id\ttext\na\tx\nb\t  \n", "d", "t"), doctest::Contains("d:3"), InputError);
  CHECK_THROWS_WITH_AS(parse_corpus("id\ttext\na\tx\na\ty\n", "d", "t"), doctest::Contains("duplicate id"),
                       InputError);
  CHECK_THROWS_WITH_AS(parse_corpus("id\ttext\na\tx\textra\n", "d", "t"), doctest::Contains("malformed record"),
                       InputError);
  CHECK_THROWS_AS(ingest_corpus("/nonexistent/file.tsv", "t"), InputError);
}

TEST_CASE("corpus serialize round-trips") {
  std::mt19937_64 rng(3);
  const std::string alphabet = "abc XYZ\t\n\\.,é";
  for (int trial = 0; trial < 200; ++trial) {
    Corpus c;
    const auto n = 1 + rng() % 6;
    for (std::size_t i = 0; i < n; ++i) {
      std::string t = "r";
      for (std::size_t j = 0; j < rng() % 15; ++j) t += alphabet[rng() % alphabet.size()];
      t += "x";
      c.push_back({"id" + std::to_string(i), t, "tc", "doc"});
    }
    // Texts are trimmed on ingest; the generator keeps non-blank ends.
    const auto back = parse_corpus(serialize_corpus(c), "doc", "tc");
    CHECK(back == c);
  }
}

TEST_CASE("library fixture corpus") {
  const auto c = ingest_corpus(testing::library_dir() / "corpus.tsv", "library");
  CHECK(c.size() == 20);
  CHECK(c.front().id == "L01");
  CHECK(c.front().source_doc == "corpus");
}

TEST_CASE("codebook validation") {
  const auto cb = library_codebook();
  CHECK(cb.labels.size() == 5);
  CHECK(cb.contains("Loan"));
  CHECK_FALSE(cb.contains("loan"));

  auto bad = cb;
  bad.labels.push_back("Access Control");
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = cb;
  bad.synonyms["Hold"] = "Booking";
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = cb;
  bad.full_description = " ";
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = cb;
  bad.labels.clear();
  CHECK_THROWS_AS(bad.validate(), InputError);

  CHECK(parse_codebook(serialize_codebook(cb)).labels == cb.labels);
}

TEST_CASE("normalize_label") {
  const auto cb = library_codebook();
  CHECK(normalize_label("  Loan.", cb) == NormalizedLabel{"Loan", true});
  CHECK(normalize_label("Lending", cb) == NormalizedLabel{"Loan", true});
  CHECK(normalize_label("LENDING!", cb) == NormalizedLabel{"Loan", true});
  CHECK(normalize_label("AccessControl", cb) == NormalizedLabel{"accesscontrol", false});
  CHECK(normalize_label("Access Control", cb) == NormalizedLabel{"access control", false});
}

TEST_CASE("normalize_label is idempotent") {
  const auto cb = library_codebook();
  std::mt19937_64 rng(5);
  const std::vector<std::string> parts{"Loan", "loan", " ", ".", "\"", "Lending", "User", "x", "Catalog!", "*"};
  for (int i = 0; i < 1000; ++i) {
    std::string raw;
    for (std::size_t j = 0; j < 1 + rng() % 4; ++j) raw += parts[rng() % parts.size()];
    const auto once = normalize_label(raw, cb);
    CHECK(normalize_label(once.label, cb) == once);
  }
}

TEST_CASE("build_consensus keeps agreed items only") {
  const auto a = human("C1", {{"r1", "Loan"}, {"r2", "Catalog"}});
  const auto b = human("C2", {{"r1", "Loan"}, {"r2", "Reservation"}});
  const auto c = build_consensus(a, b);
  CHECK(c.kind == AnnotationKind::Consensus);
  CHECK(c.entries == std::map<std::string, std::string>{{"r1", "Loan"}});

  CHECK(build_consensus(a, a).entries == a.entries);

  const auto x = human("C1", {{"1", "A"}, {"2", "B"}, {"3", "C"}, {"4", "D"}});
  const auto y = human("C2", {{"1", "A"}, {"2", "B"}, {"3", "C"}, {"4", "E"}});
  CHECK(build_consensus(x, y).size() == 3);

  CHECK_THROWS_AS(build_consensus(a, human("C3", {{"r9", "Loan"}})), InputError);
  auto model = b;
  model.kind = AnnotationKind::Model;
  CHECK_THROWS_AS(build_consensus(a, model), InputError);
}

TEST_CASE("build_consensus is symmetric") {
  std::mt19937_64 rng(17);
  const std::vector<std::string> labels{"Loan", "loan", "Catalog", "User", "user."};
  for (int trial = 0; trial < 300; ++trial) {
    AnnotationSet a = human("A", {}), b = human("B", {});
    for (int i = 0; i < 8; ++i) {
      const auto id = "r" + std::to_string(i);
      if (rng() % 4) a.entries[id] = labels[rng() % labels.size()];
      if (rng() % 4) b.entries[id] = labels[rng() % labels.size()];
    }
    a.entries["r0"] = "Loan";
    b.entries["r0"] = "Loan";
    CHECK(build_consensus(a, b).entries == build_consensus(b, a).entries);
  }
}

TEST_CASE("library fixture consensus") {
  const auto cb = library_codebook();
  const auto corpus = ingest_corpus(testing::library_dir() / "corpus.tsv", "library");
  const auto c1 = load_annotations(testing::library_dir() / "c1.tsv", "C1", AnnotationKind::Human, corpus, &cb);
  const auto c2 = load_annotations(testing::library_dir() / "c2.tsv", "C2", AnnotationKind::Human, corpus, &cb);
  CHECK(c1.entries.at("L02") == "Catalog");     // typed "catalog"
  CHECK(c2.entries.at("L17") == "Loan");        // typed "Lending"
  CHECK(c2.entries.at("L08") == "Reservation"); // typed with quotes
  CHECK(build_consensus(c1, c2).size() == 16);
}

TEST_CASE("annotation errors") {
  const Corpus corpus = parse_corpus("id\ttext\nr1\tx\n", "d", "t");
  CHECK_THROWS_WITH_AS(parse_annotations("requirement_id\tlabel\nr2\tLoan\n", "f", "A", AnnotationKind::Human,
                                         corpus, nullptr),
                       doctest::Contains("not in the corpus"), InputError);
  CHECK_THROWS_WITH_AS(parse_annotations("requirement_id\tlabel\nr1\tLoan\nr1\tUser\n", "f", "A",
                                         AnnotationKind::Human, corpus, nullptr),
                       doctest::Contains("labelled twice"), InputError);
  CHECK_THROWS_AS(parse_annotations("id\tlabel\nr1\tLoan\n", "f", "A", AnnotationKind::Human, corpus, nullptr),
                  InputError);
}

namespace {

struct Gold {
  Corpus corpus;
  AnnotationSet gold;
};

Gold make_gold(std::size_t n, std::size_t n_labels) {
  Gold g;
  g.gold.kind = AnnotationKind::Consensus;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = "g" + std::to_string(i);
    g.corpus.push_back({id, "text " + id, "t", "d"});
    g.gold.entries[id] = "L" + std::to_string(i % n_labels);
  }
  return g;
}

}  // namespace

TEST_CASE("split_exemplars") {
  const auto g = make_gold(10, 3);
  SUBCASE("deterministic for a seed") {
    const auto a = split_exemplars(g.gold, g.corpus, 3, 7);
    const auto b = split_exemplars(g.gold, g.corpus, 3, 7);
    CHECK(a.pool.exemplars == b.pool.exemplars);
    CHECK(a.evaluation_ids == b.evaluation_ids);
  }
  SUBCASE("one exemplar per label when k equals the label count") {
    const auto s = split_exemplars(g.gold, g.corpus, 3, 7);
    REQUIRE(s.pool.exemplars.size() == 3);
    CHECK(s.pool.exemplars[0].label == "L0");
    CHECK(s.pool.exemplars[1].label == "L1");
    CHECK(s.pool.exemplars[2].label == "L2");
  }
  SUBCASE("k = 0") {
    const auto s = split_exemplars(g.gold, g.corpus, 0, 7);
    CHECK(s.pool.exemplars.empty());
    CHECK(s.evaluation_ids == g.gold.ids());
  }
  SUBCASE("k too large") { CHECK_THROWS_AS(split_exemplars(g.gold, g.corpus, 11, 7), InputError); }
}

TEST_CASE("split_exemplars partitions gold for any seed and k") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const auto g = make_gold(1 + rng() % 15, 1 + rng() % 5);
    const auto k = rng() % (g.gold.size() + 1);
    const auto seed = rng();
    const auto s = split_exemplars(g.gold, g.corpus, k, seed);
    const auto ex = s.pool.ids();
    CHECK(ex.size() == k);
    for (const auto& id : ex) CHECK_FALSE(s.evaluation_ids.contains(id));
    auto all = ex;
    all.insert(s.evaluation_ids.begin(), s.evaluation_ids.end());
    CHECK(all == g.gold.ids());
    for (const auto& e : s.pool.exemplars) CHECK(g.gold.entries.at(e.requirement_id) == e.label);
  }
}
