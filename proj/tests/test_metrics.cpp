#include "qdacode/error.hpp"
#include "qdacode/metrics.hpp"

#include "fuzz.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace qdacode;

namespace {

AnnotationSet set_of(std::map<std::string, std::string> e, std::string name = "x") {
  AnnotationSet s;
  s.annotator = std::move(name);
  s.entries = std::move(e);
  return s;
}

Codebook abc_codebook() {
  Codebook cb;
  cb.test_case = "t";
  cb.labels = {"A", "B", "C", "D"};
  cb.brief_description = "b";
  cb.full_description = "f";
  return cb;
}

}  // namespace

TEST_CASE("kappa hand case") {
  const auto a = fuzz::as_set({"Loan", "Loan", "Catalog", "Notification"}, "A");
  const auto b = fuzz::as_set({"Loan", "Catalog", "Catalog", "Notification"}, "B");
  const auto r = cohen_kappa(a, b);
  // p_o = 3/4; p_e = (2/4)(1/4) + (1/4)(2/4) + (1/4)(1/4) = 5/16
  CHECK(r.observed == doctest::Approx(0.75));
  CHECK(r.expected == doctest::Approx(5.0 / 16.0));
  CHECK(r.kappa == doctest::Approx(7.0 / 11.0).epsilon(1e-12));
  CHECK(std::abs(r.kappa - 0.6364) < 1e-4);
  CHECK(r.n == 4);
}

TEST_CASE("kappa of identical sets is exactly one") {
  const auto a = fuzz::as_set({"Loan", "Catalog", "User"}, "A");
  CHECK(cohen_kappa(a, a).kappa == 1.0);
  const auto same = fuzz::as_set({"Loan", "Loan"}, "A");
  CHECK(cohen_kappa(same, same).kappa == 1.0);  // p_e = 1 with full agreement
}

TEST_CASE("kappa errors") {
  CHECK_THROWS_AS(cohen_kappa(set_of({{"1", "A"}}), set_of({{"2", "A"}})), MetricError);
  CHECK_THROWS_AS(kappa_from_table(Eigen::Matrix2d::Zero()), MetricError);
  CHECK_THROWS_AS(kappa_from_table(Eigen::MatrixXd::Ones(2, 3)), MetricError);
  // disjoint marginals: p_e = 0, so kappa = p_o = 0
  CHECK(kappa_from_table(Eigen::Matrix2d{{0, 2}, {0, 0}}).kappa == 0.0);
}

TEST_CASE("kappa is restricted to shared ids") {
  const auto a = set_of({{"1", "A"}, {"2", "B"}, {"3", "A"}});
  const auto b = set_of({{"1", "A"}, {"2", "B"}, {"4", "B"}});
  CHECK(cohen_kappa(a, b).n == 2);
  CHECK(cohen_kappa(a, b).kappa == 1.0);
}

TEST_CASE("kappa matches the brute-force oracle and is symmetric") {
  std::mt19937_64 rng(101);
  int compared = 0;
  for (int i = 0; i < 1500; ++i) {
    const auto p = fuzz::label_pair(rng);
    const double want = oracle::brute_kappa(p.a, p.b);
    const auto a = fuzz::as_set(p.a, "A"), b = fuzz::as_set(p.b, "B");
    if (std::isnan(want)) {
      if (p.a == p.b) CHECK(cohen_kappa(a, b).kappa == 1.0);
      else CHECK_THROWS_AS(cohen_kappa(a, b), MetricError);
      continue;
    }
    const double got = cohen_kappa(a, b).kappa;
    CHECK(std::abs(got - want) <= 1e-12);
    CHECK(std::abs(cohen_kappa(b, a).kappa - got) <= 1e-12);
    CHECK(got <= 1.0 + 1e-12);
    ++compared;
  }
  CHECK(compared > 1000);
}

TEST_CASE("sample sd") {
  const std::vector<double> v{0.7, 0.74, 0.71, 0.69};
  CHECK(sd_across_runs(v) == doctest::Approx(oracle::sample_sd(v)).epsilon(1e-14));
  const std::vector<double> same{0.5, 0.5, 0.5};
  CHECK(sd_across_runs(same) == 0.0);
  const std::vector<double> one{0.5};
  CHECK_THROWS_AS(sd_across_runs(one), MetricError);
}

TEST_CASE("icc matches the ANOVA oracle") {
  std::mt19937_64 rng(202);
  int compared = 0;
  for (int i = 0; i < 400; ++i) {
    const auto x = fuzz::matrix(rng, i % 2 == 0);
    if ((x.colwise() - x.col(0)).cwiseAbs().maxCoeff() == 0.0) {
      CHECK(icc_consistency(x) == 1.0);
      continue;
    }
    const double want = oracle::anova_icc2k(fuzz::rows_of(x));
    if (!std::isfinite(want)) {
      CHECK_THROWS_AS(icc_consistency(x), MetricError);
      continue;
    }
    CHECK(std::abs(icc_consistency(x) - want) <= 1e-10);
    ++compared;
  }
  CHECK(compared >= 200);
}

TEST_CASE("icc special cases") {
  Eigen::MatrixXd same(4, 3);
  same << 1, 1, 1, 0, 0, 0, 1, 1, 1, 1, 1, 1;
  CHECK(icc_consistency(same) == 1.0);
  CHECK(icc_consistency(Eigen::MatrixXd::Ones(3, 5)) == 1.0);
  CHECK_THROWS_AS(icc_consistency(Eigen::MatrixXd::Ones(1, 5)), MetricError);
  Eigen::MatrixXd nan = Eigen::MatrixXd::Ones(3, 3);
  nan(1, 1) = std::nan("");
  CHECK_THROWS_AS(icc_consistency(nan), MetricError);
  // works on single precision too
  Eigen::MatrixXf f(3, 2);
  f << 1, 2, 3, 3, 5, 6;
  CHECK(icc_consistency(f) == doctest::Approx(oracle::anova_icc2k({{1, 2}, {3, 3}, {5, 6}})).epsilon(1e-5));
}

TEST_CASE("classification report by hand") {
  const auto gold = set_of({{"1", "A"}, {"2", "A"}, {"3", "B"}, {"4", "C"}});
  const auto pred = set_of({{"1", "A"}, {"2", "B"}, {"3", "B"}, {"4", "zzz"}});
  const auto r = classification_report(pred, gold, abc_codebook());
  CHECK(r.accuracy == 0.5);
  // A: p 1, r .5; B: p .5, r 1; C: p 0, r 0
  CHECK(r.macro_precision == doctest::Approx(0.5));
  CHECK(r.macro_recall == doctest::Approx(0.5));
  CHECK(r.macro_f1 == doctest::Approx((2.0 / 3.0 + 2.0 / 3.0) / 3.0));
  CHECK(r.out_of_codebook == std::vector<std::string>{"zzz"});
  CHECK(r.per_class.at("zzz").support == 0);
}

TEST_CASE("missing predictions count as misses") {
  const auto gold = set_of({{"1", "A"}, {"2", "B"}});
  const auto pred = set_of({{"1", "A"}});
  const auto r = classification_report(pred, gold, abc_codebook());
  CHECK(r.missing == 1);
  CHECK(r.accuracy == 0.5);
}

TEST_CASE("classification report matches per-class recomputation") {
  std::mt19937_64 rng(303);
  const auto cb = abc_codebook();
  for (int i = 0; i < 1000; ++i) {
    auto p = fuzz::label_pair(rng);
    if (rng() % 5 == 0) p.a[rng() % p.a.size()] = "zzz";  // out-of-codebook prediction
    const auto r = classification_report(fuzz::as_set(p.a, "pred"), fuzz::as_set(p.b, "gold"), cb);
    const auto want = oracle::macro_scores(p.a, p.b);
    CHECK(std::abs(r.accuracy - want.accuracy) <= 1e-12);
    CHECK(std::abs(r.macro_precision - want.precision) <= 1e-12);
    CHECK(std::abs(r.macro_recall - want.recall) <= 1e-12);
    CHECK(std::abs(r.macro_f1 - want.f1) <= 1e-12);
    CHECK(r.micro_precision == doctest::Approx(r.accuracy).epsilon(1e-12));
    CHECK(r.micro_recall == doctest::Approx(r.accuracy).epsilon(1e-12));
    CHECK(r.confusion.n() == static_cast<std::int64_t>(p.b.size()));
  }
}
