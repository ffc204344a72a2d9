#include "mtgrid/training/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "mtgrid/common/error.hpp"

namespace mtgrid {

double cosine_mask_ratio(double u) { return std::cos(std::numbers::pi * u / 2.0); }

MaskedImage apply_mask_with_ratio(std::span<const TokenId> image_ids, double ratio, Rng& rng) {
  const int m = static_cast<int>(image_ids.size());
  if (m == 0) throw InvalidArgument("cannot mask an empty image");
  if (!(ratio > 0.0) || ratio > 1.0) throw InvalidArgument("mask ratio must lie in (0, 1]");
  const int count = std::min(m, static_cast<int>(std::ceil(ratio * m)));
  // Partial Fisher-Yates: the first `count` slots become the chosen set.
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < count; ++i) {
    const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(m - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  MaskedImage out;
  out.positions.assign(order.begin(), order.begin() + count);
  std::sort(out.positions.begin(), out.positions.end());
  out.ids.assign(image_ids.begin(), image_ids.end());
  for (int p : out.positions) out.ids[static_cast<std::size_t>(p)] = special_id(Special::mask);
  return out;
}

MaskedImage apply_mask(std::span<const TokenId> image_ids, Rng& rng,
                       const MaskSchedule& schedule) {
  const auto m = static_cast<double>(image_ids.size());
  if (schedule.mode == MaskMode::fixed) {
    return apply_mask_with_ratio(image_ids, schedule.fixed_ratio, rng);
  }
  for (;;) {
    const double r = cosine_mask_ratio(rng.uniform());
    if (std::ceil(r * m) >= 1.0) return apply_mask_with_ratio(image_ids, r, rng);
  }
}

std::vector<TokenId> cfg_dropout(std::span<const TokenId> prompt_ids, double p, Rng& rng) {
  if (p < 0.0 || p > 1.0) throw InvalidArgument("cfg dropout probability must lie in [0, 1]");
  if (rng.uniform() < p) return {};
  return {prompt_ids.begin(), prompt_ids.end()};
}

template <typename T>
double image_nll(const RowMatrix<T>& logits, std::span<const int> targets,
                 LossReduction reduction, RowMatrix<T>* d_logits, double grad_scale) {
  const auto n = logits.rows();
  if (n == 0) throw InvalidArgument("loss over an empty mask set");
  if (static_cast<std::size_t>(n) != targets.size()) {
    throw InvalidArgument("loss: logits rows and targets differ in count");
  }
  const double norm = reduction == LossReduction::mean ? 1.0 / static_cast<double>(n) : 1.0;
  if (d_logits != nullptr) d_logits->resize(n, logits.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= logits.cols()) throw InvalidArgument("loss target outside the codebook");
    const double mx = static_cast<double>(logits.row(r).maxCoeff());
    double z = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      z += std::exp(static_cast<double>(logits(r, c)) - mx);
    }
    const double log_z = mx + std::log(z);
    total += log_z - static_cast<double>(logits(r, t));
    if (d_logits != nullptr) {
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        const double p = std::exp(static_cast<double>(logits(r, c)) - log_z);
        (*d_logits)(r, c) = static_cast<T>((p - (c == t ? 1.0 : 0.0)) * norm * grad_scale);
      }
    }
  }
  const double loss = total * norm;
  if (!std::isfinite(loss)) throw NumericError("non-finite loss");
  return loss;
}

template <typename T>
double masked_nll_loss(const RowMatrix<T>& logits, std::span<const TokenId> targets,
                       std::span<const int> positions, const SequenceLayout& layout,
                       const UnifiedVocab& vocab, LossReduction reduction) {
  if (logits.rows() != layout.total_len || logits.cols() != vocab.size()) {
    throw InvalidArgument("loss: logits shape does not match layout and vocabulary");
  }
  if (static_cast<int>(targets.size()) != layout.image_span.size()) {
    throw InvalidArgument("loss: target count differs from the image span");
  }
  const int k = vocab.codebook_size();
  RowMatrix<T> rows(static_cast<Eigen::Index>(positions.size()), k);
  std::vector<int> codes;
  codes.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const int j = positions[i];
    if (j < 0 || j >= layout.image_span.size()) {
      throw InvalidArgument("loss: mask position " + std::to_string(j) + " outside the image");
    }
    rows.row(static_cast<Eigen::Index>(i)) =
        logits.row(layout.image_span.start + j).segment(vocab.image_offset(), k);
    codes.push_back(vocab.palette_of(targets[static_cast<std::size_t>(j)]));
  }
  return image_nll<T>(rows, codes, reduction);
}

template double image_nll<float>(const RowMatrix<float>&, std::span<const int>, LossReduction,
                                 RowMatrix<float>*, double);
template double image_nll<double>(const RowMatrix<double>&, std::span<const int>, LossReduction,
                                  RowMatrix<double>*, double);
template double masked_nll_loss<float>(const RowMatrix<float>&, std::span<const TokenId>,
                                       std::span<const int>, const SequenceLayout&,
                                       const UnifiedVocab&, LossReduction);
template double masked_nll_loss<double>(const RowMatrix<double>&, std::span<const TokenId>,
                                        std::span<const int>, const SequenceLayout&,
                                        const UnifiedVocab&, LossReduction);

}  // namespace mtgrid
