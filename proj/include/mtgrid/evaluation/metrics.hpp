#pragma once

#include <utility>
#include <vector>

#include "mtgrid/evaluation/embedding.hpp"

namespace mtgrid::eval {

// Throws InvalidArgument on differing sizes or a zero vector.
double cosine(const Embedding& a, const Embedding& b);

// Mean cosine over every (reference, target) pair. Pairs within the
// reference set are not included. Throws InvalidArgument on an empty set.
double clc_score(const std::vector<Embedding>& references, const std::vector<Embedding>& targets);

struct CssPair {
  double ef = 0.0;
  double es = 0.0;
};

// Mean cosine between the reference and each variant, per variant family.
CssPair css_scores(const Embedding& reference, const std::vector<Embedding>& ef,
                   const std::vector<Embedding>& es);

// Five-number summary plus mean. Quartiles use linear interpolation between
// order statistics at position (n - 1) p.
struct Quartiles {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};

// Throws InvalidArgument on an empty sample.
Quartiles summarize(std::vector<double> values);

}  // namespace mtgrid::eval
