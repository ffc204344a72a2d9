#pragma once

#include <span>
#include <vector>

#include "mtgrid/model/attention_mask.hpp"
#include "mtgrid/model/config.hpp"
#include "mtgrid/model/parameters.hpp"
#include "mtgrid/tokenizer/vocab.hpp"

namespace mtgrid {

template <typename T>
struct QkNormalized {
  RowMatrix<T> q;
  RowMatrix<T> k;
};

// Each row of q and k is one head's vector. Rows are L2-normalized and scaled
// by the head's gain; an all-zero row maps to the zero vector.
template <typename T>
QkNormalized<T> qk_normalize(const RowMatrix<T>& q, const RowMatrix<T>& k, T q_gain,
                             T k_gain);

struct ModelInput {
  std::span<const TokenId> ids;
  const AttentionMask* mask = nullptr;
};

// Decoder trunk over a batch of sequences. Only active positions (those the
// mask lets attend to themselves) are computed; they are stacked into one
// row block per item so dense layers run as single matrix products.
//
// Per layer, with RMS norms scaling by (1 + weight):
//   h = norm(x); q,k,v = h Wq, h Wk, h Wv
//   per head: scores = (gq q/|q|)(gk k/|k|)^T, masked softmax, mix v
//   x += attn Wo; x += gelu(norm(x) W_in) W_out
// followed by a final norm. The output head is the token embedding (tied).
template <typename T>
class Transformer {
 public:
  Transformer(const ParameterTable<T>& params, const ModelConfig& config);

  // Throws NumericError naming the layer when activations become non-finite.
  void run(std::span<const ModelInput> batch, bool keep_activations);

  // Final normalized hidden state, one row per active position.
  const RowMatrix<T>& final_hidden() const { return final_; }
  Eigen::Index rows() const { return final_.rows(); }
  // Row of (item, position), or -1 when the position is inactive.
  int row_of(std::size_t item, int position) const;

  // Attention probabilities of one head over the item's active positions.
  // Requires run(..., keep_activations = true).
  const RowMatrix<T>& attention_probs(int layer, std::size_t item, int head) const;

  // Logits over the image codebook for the selected rows: |rows| x K.
  RowMatrix<T> image_logits(std::span<const int> rows) const;
  // Logits over the whole vocabulary for the selected rows.
  RowMatrix<T> vocab_logits(std::span<const int> rows) const;

  // Backpropagates d_logits (|rows| x K) from image_logits into grads,
  // including the tied-embedding contribution of the output head.
  // Requires run(..., keep_activations = true).
  void backward_from_image_logits(std::span<const int> rows, const RowMatrix<T>& d_logits,
                                  ParameterTable<T>& grads) const;

 private:
  struct LayerCache {
    RowMatrix<T> xhat1, xhat2;
    Eigen::Matrix<T, Eigen::Dynamic, 1> inv_rms1, inv_rms2;
    RowMatrix<T> qn, kn, v;      // normalized q/k before gains, raw v
    RowMatrix<T> q_norms, k_norms;  // rows x heads
    std::vector<RowMatrix<T>> probs;  // per (item, head)
    RowMatrix<T> attn;           // mixed values, rows x d
    RowMatrix<T> pre_act;        // rows x d_ff
    RowMatrix<T> gelu_tanh;      // tanh term of the gelu at pre_act
  };

  void backward(const RowMatrix<T>& d_final, ParameterTable<T>& grads) const;

  const ParameterTable<T>& params_;
  ModelConfig config_;
  std::vector<Eigen::Index> offsets_;
  std::vector<Eigen::Index> counts_;
  std::vector<std::vector<int>> pos_to_row_;
  std::vector<TokenId> row_ids_;
  std::vector<int> row_pos_;
  std::vector<RowMatrix<T>> biases_;
  std::vector<LayerCache> caches_;
  RowMatrix<T> final_xhat_;
  Eigen::Matrix<T, Eigen::Dynamic, 1> final_inv_rms_;
  RowMatrix<T> final_;
  bool kept_ = false;
};

// Logits for every position of one sequence, [total_len x vocab_size].
// Rows of inactive (padding) positions are zero.
template <typename T>
RowMatrix<T> forward(const ParameterTable<T>& params, const ModelConfig& config,
                     std::span<const TokenId> ids, const AttentionMask& mask);

}  // namespace mtgrid
