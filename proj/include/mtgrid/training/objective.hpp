#pragma once

#include <span>
#include <vector>

#include "mtgrid/common/rng.hpp"
#include "mtgrid/model/parameters.hpp"
#include "mtgrid/tokenizer/sequence.hpp"

namespace mtgrid {

enum class MaskMode { cosine, fixed };

struct MaskSchedule {
  MaskMode mode = MaskMode::cosine;
  double fixed_ratio = 0.5;  // used in fixed mode
};

struct MaskedImage {
  std::vector<TokenId> ids;       // MASK at the chosen positions, original elsewhere
  std::vector<int> positions;     // chosen positions, ascending, never empty
};

// Cosine law: r = cos(pi u / 2) with u ~ U(0, 1), then ceil(r M) positions
// drawn without replacement; r is redrawn if that count is zero.
double cosine_mask_ratio(double u);
MaskedImage apply_mask(std::span<const TokenId> image_ids, Rng& rng,
                       const MaskSchedule& schedule = {});
// Same as apply_mask with the ratio given directly.
MaskedImage apply_mask_with_ratio(std::span<const TokenId> image_ids, double ratio, Rng& rng);

// With probability p the prompt is replaced by the empty (null) prompt.
std::vector<TokenId> cfg_dropout(std::span<const TokenId> prompt_ids, double p, Rng& rng);

enum class LossReduction { mean, sum };

// Negative log-likelihood over rows of image-codebook logits, one row per
// masked position, with targets as codebook indices. When d_logits is given
// it receives d loss / d logits scaled by grad_scale.
template <typename T>
double image_nll(const RowMatrix<T>& logits, std::span<const int> targets,
                 LossReduction reduction, RowMatrix<T>* d_logits = nullptr,
                 double grad_scale = 1.0);

// Full-sequence form: logits are [total_len x vocab_size]; targets are the
// original image token ids (length M) and positions index the image span.
// Only the image-codebook columns of the masked image rows are read.
template <typename T>
double masked_nll_loss(const RowMatrix<T>& logits, std::span<const TokenId> targets,
                       std::span<const int> positions, const SequenceLayout& layout,
                       const UnifiedVocab& vocab, LossReduction reduction = LossReduction::mean);

}  // namespace mtgrid
