#pragma once

// Reference implementations used to cross-check the library. They share no
// code with it: plain loops over std containers, textbook formulas.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

// Cohen's kappa by enumerating every (i, j) label pair of the contingency
// table. Returns NaN when p_e == 1.
inline double brute_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> labels(a.begin(), a.end());
  labels.insert(b.begin(), b.end());
  const double n = static_cast<double>(a.size());
  double po = 0.0, pe = 0.0;
  for (const auto& la : labels) {
    for (const auto& lb : labels) {
      double cell = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] == la && b[k] == lb) cell += 1.0;
      }
      if (la == lb) po += cell / n;
    }
    double ra = 0.0, cb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      ra += a[k] == la;
      cb += b[k] == la;
    }
    pe += (ra / n) * (cb / n);
  }
  if (pe == 1.0) return std::nan("");
  return (po - pe) / (1.0 - pe);
}

// ICC(2,k) from the two-way ANOVA table; the error sum of squares is taken
// as the remainder SST - SSR - SSC. NaN when the denominator vanishes.
inline double anova_icc2k(const std::vector<std::vector<double>>& x) {
  const std::size_t n = x.size();
  const std::size_t k = x.front().size();
  double grand = 0.0;
  for (const auto& row : x) for (double v : row) grand += v;
  grand /= static_cast<double>(n * k);

  double ssr = 0.0, ssc = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (double v : x[i]) m += v;
    m /= static_cast<double>(k);
    ssr += static_cast<double>(k) * (m - grand) * (m - grand);
  }
  for (std::size_t j = 0; j < k; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x[i][j];
    m /= static_cast<double>(n);
    ssc += static_cast<double>(n) * (m - grand) * (m - grand);
  }
  for (const auto& row : x) for (double v : row) sst += (v - grand) * (v - grand);
  const double sse = sst - ssr - ssc;
  const double msr = ssr / static_cast<double>(n - 1);
  const double msc = ssc / static_cast<double>(k - 1);
  const double mse = sse / static_cast<double>((n - 1) * (k - 1));
  const double denom = msr + (msc - mse) / static_cast<double>(n);
  if (std::abs(denom) < 1e-9 * (msr + (msc + mse) / static_cast<double>(n))) return std::nan("");
  return (msr - mse) / denom;
}

inline double sample_sd(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct Macro {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Macro scores over classes present in gold, counting tp/fp/fn item by item.
inline Macro macro_scores(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  std::set<std::string> classes(gold.begin(), gold.end());
  Macro out;
  double correct = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += pred[i] == gold[i];
  out.accuracy = correct / static_cast<double>(gold.size());
  for (const auto& c : classes) {
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (pred[i] == c && gold[i] == c) tp += 1.0;
      if (pred[i] == c && gold[i] != c) fp += 1.0;
      if (pred[i] != c && gold[i] == c) fn += 1.0;
    }
    const double p = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    out.precision += p;
    out.recall += r;
    out.f1 += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  const double m = static_cast<double>(classes.size());
  out.precision /= m;
  out.recall /= m;
  out.f1 /= m;
  return out;
}

}  // namespace oracle
