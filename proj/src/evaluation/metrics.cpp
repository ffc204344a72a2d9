#include "mtgrid/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtgrid/common/error.hpp"

namespace mtgrid::eval {

double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("cosine of vectors with sizes " + std::to_string(a.size()) + " and " +
                          std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw InvalidArgument("cosine of a zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double clc_score(const std::vector<Embedding>& references, const std::vector<Embedding>& targets) {
  if (references.empty()) throw InvalidArgument("cross-lingual score needs a reference image");
  if (targets.empty()) throw InvalidArgument("cross-lingual score needs a target image");
  double sum = 0.0;
  for (const auto& r : references) {
    for (const auto& t : targets) sum += cosine(r, t);
  }
  return sum / (static_cast<double>(references.size()) * static_cast<double>(targets.size()));
}

CssPair css_scores(const Embedding& reference, const std::vector<Embedding>& ef,
                   const std::vector<Embedding>& es) {
  if (ef.empty() || es.empty()) throw InvalidArgument("code-switch score needs variant images");
  auto mean_cos = [&](const std::vector<Embedding>& set) {
    double sum = 0.0;
    for (const auto& v : set) sum += cosine(reference, v);
    return sum / static_cast<double>(set.size());
  };
  return {mean_cos(ef), mean_cos(es)};
}

Quartiles summarize(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("summary of an empty sample");
  std::sort(values.begin(), values.end());
  auto at = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  Quartiles q;
  q.count = values.size();
  q.min = values.front();
  q.max = values.back();
  q.q1 = at(0.25);
  q.median = at(0.5);
  q.q3 = at(0.75);
  q.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return q;
}

}  // namespace mtgrid::eval
