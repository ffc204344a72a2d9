#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mtgrid/model/config.hpp"

namespace mtgrid {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Dense tensor of rank 1 or 2, row-major.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  std::size_t size() const { return data.size(); }
  int rows() const { return shape.size() == 2 ? shape[0] : 1; }
  int cols() const { return shape.back(); }

  Eigen::Map<RowMatrix<T>> matrix() { return {data.data(), rows(), cols()}; }
  Eigen::Map<const RowMatrix<T>> matrix() const { return {data.data(), rows(), cols()}; }
  Eigen::Map<RowVector<T>> vector() { return {data.data(), static_cast<Eigen::Index>(data.size())}; }
  Eigen::Map<const RowVector<T>> vector() const {
    return {data.data(), static_cast<Eigen::Index>(data.size())};
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// Ordered table of named tensors. Order is fixed by construction and is the
// order used for checkpoints, merging and optimizer state.
template <typename T>
class ParameterTable {
 public:
  using Entry = std::pair<std::string, Tensor<T>>;

  void add(std::string name, std::vector<int> shape);

  std::size_t count() const { return entries_.size(); }
  std::size_t total_elements() const;

  Tensor<T>& operator[](std::size_t i) { return entries_[i].second; }
  const Tensor<T>& operator[](std::size_t i) const { return entries_[i].second; }
  const std::string& name(std::size_t i) const { return entries_[i].first; }

  // Throws InvalidArgument naming the tensor when absent.
  Tensor<T>& at(std::string_view name);
  const Tensor<T>& at(std::string_view name) const;
  std::ptrdiff_t find(std::string_view name) const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void set_zero();

  template <typename U>
  ParameterTable<U> cast() const {
    ParameterTable<U> out;
    for (const auto& [name, t] : entries_) {
      out.add(name, t.shape);
      auto& dst = out[out.count() - 1].data;
      for (std::size_t i = 0; i < t.data.size(); ++i) dst[i] = static_cast<U>(t.data[i]);
    }
    return out;
  }

  friend bool operator==(const ParameterTable&, const ParameterTable&) = default;

 private:
  std::vector<Entry> entries_;
};

using Parameters = ParameterTable<float>;

// Positions of the named tensors inside the canonical table.
struct ParamLayout {
  static constexpr std::size_t kTokenEmbedding = 0;
  static constexpr std::size_t kPositionEmbedding = 1;
  static constexpr std::size_t kPerLayer = 10;
  enum LayerSlot : std::size_t {
    kAttnNorm = 0, kWq, kWk, kWv, kWo, kQGain, kKGain, kMlpNorm, kWIn, kWOut
  };
  static std::size_t layer(int l, LayerSlot slot) {
    return 2 + kPerLayer * static_cast<std::size_t>(l) + slot;
  }
  static std::size_t final_norm(int n_layers) {
    return 2 + kPerLayer * static_cast<std::size_t>(n_layers);
  }
};

// Zero tensors with the canonical names and shapes for a config:
//   embed.token [V, d], embed.position [L, d],
//   layers.i.{attn_norm.weight [d], attn.wq/wk/wv/wo [d, d],
//             attn.q_gain/k_gain [H], mlp_norm.weight [d],
//             mlp.w_in [d, d_ff], mlp.w_out [d_ff, d]},
//   final_norm.weight [d].
template <typename T>
ParameterTable<T> make_parameter_table(const ModelConfig& config);

// Seeded initialization: embeddings and projections ~ N(0, 0.02^2), with
// residual output projections (attn.wo, mlp.w_out) scaled by
// 1/sqrt(2 n_layers); norm weights 0 (the norm scales by 1 + weight);
// qk gains sqrt(log2(L^2 - L)) so their product starts at log2(L^2 - L).
Parameters init_parameters(const ModelConfig& config);

// Initial value of each qk-norm gain for a sequence length.
double initial_qk_gain(int max_seq_len);

// Throws InvalidArgument when shapes differ from the config's canonical table.
template <typename T>
void check_shapes(const ParameterTable<T>& params, const ModelConfig& config);

// Throws NumericError naming the first tensor holding NaN or Inf.
template <typename T>
void check_finite(const ParameterTable<T>& params);

}  // namespace mtgrid
