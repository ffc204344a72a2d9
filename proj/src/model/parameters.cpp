#include "mtgrid/model/parameters.hpp"

#include <cmath>

#include "mtgrid/common/error.hpp"
#include "mtgrid/common/rng.hpp"

namespace mtgrid {

template <typename T>
void ParameterTable<T>::add(std::string name, std::vector<int> shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 1) throw InvalidArgument("tensor " + name + " has a non-positive dimension");
    n *= static_cast<std::size_t>(d);
  }
  if (shape.empty() || shape.size() > 2) {
    throw InvalidArgument("tensor " + name + " must have rank 1 or 2");
  }
  entries_.emplace_back(std::move(name), Tensor<T>{std::move(shape), std::vector<T>(n, T(0))});
}

template <typename T>
std::size_t ParameterTable<T>::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

template <typename T>
std::ptrdiff_t ParameterTable<T>::find(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first == name) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

template <typename T>
Tensor<T>& ParameterTable<T>::at(std::string_view name) {
  const auto i = find(name);
  if (i < 0) throw InvalidArgument("no tensor named " + std::string(name));
  return entries_[static_cast<std::size_t>(i)].second;
}

template <typename T>
const Tensor<T>& ParameterTable<T>::at(std::string_view name) const {
  const auto i = find(name);
  if (i < 0) throw InvalidArgument("no tensor named " + std::string(name));
  return entries_[static_cast<std::size_t>(i)].second;
}

template <typename T>
void ParameterTable<T>::set_zero() {
  for (auto& e : entries_) std::fill(e.second.data.begin(), e.second.data.end(), T(0));
}

template <typename T>
ParameterTable<T> make_parameter_table(const ModelConfig& c) {
  validate_config(c);
  ParameterTable<T> p;
  const int d = c.d_model;
  p.add("embed.token", {c.vocab_size, d});
  p.add("embed.position", {c.max_seq_len, d});
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string pre = "layers." + std::to_string(l) + ".";
    p.add(pre + "attn_norm.weight", {d});
    p.add(pre + "attn.wq", {d, d});
    p.add(pre + "attn.wk", {d, d});
    p.add(pre + "attn.wv", {d, d});
    p.add(pre + "attn.wo", {d, d});
    p.add(pre + "attn.q_gain", {c.n_heads});
    p.add(pre + "attn.k_gain", {c.n_heads});
    p.add(pre + "mlp_norm.weight", {d});
    p.add(pre + "mlp.w_in", {d, c.d_ff});
    p.add(pre + "mlp.w_out", {c.d_ff, d});
  }
  p.add("final_norm.weight", {d});
  return p;
}

double initial_qk_gain(int max_seq_len) {
  const double l = std::max(2, max_seq_len);
  return std::sqrt(std::log2(l * l - l));
}

Parameters init_parameters(const ModelConfig& c) {
  Parameters p = make_parameter_table<float>(c);
  Rng rng(mix_seed({c.rng_seed, 0x1417}));
  constexpr double kStd = 0.02;
  const double residual_std = kStd / std::sqrt(2.0 * c.n_layers);
  const float gain = static_cast<float>(initial_qk_gain(c.max_seq_len));
  auto normal_fill = [&](Tensor<float>& t, double std) {
    for (auto& v : t.data) v = static_cast<float>(rng.normal() * std);
  };
  normal_fill(p[ParamLayout::kTokenEmbedding], kStd);
  normal_fill(p[ParamLayout::kPositionEmbedding], kStd);
  for (int l = 0; l < c.n_layers; ++l) {
    normal_fill(p[ParamLayout::layer(l, ParamLayout::kWq)], kStd);
    normal_fill(p[ParamLayout::layer(l, ParamLayout::kWk)], kStd);
    normal_fill(p[ParamLayout::layer(l, ParamLayout::kWv)], kStd);
    normal_fill(p[ParamLayout::layer(l, ParamLayout::kWo)], residual_std);
    normal_fill(p[ParamLayout::layer(l, ParamLayout::kWIn)], kStd);
    normal_fill(p[ParamLayout::layer(l, ParamLayout::kWOut)], residual_std);
    for (auto slot : {ParamLayout::kQGain, ParamLayout::kKGain}) {
      auto& t = p[ParamLayout::layer(l, slot)].data;
      std::fill(t.begin(), t.end(), gain);
    }
  }
  return p;
}

template <typename T>
void check_shapes(const ParameterTable<T>& params, const ModelConfig& config) {
  const auto expected = make_parameter_table<T>(config);
  if (params.count() != expected.count()) {
    throw InvalidArgument("parameter table has " + std::to_string(params.count()) +
                          " tensors, config expects " + std::to_string(expected.count()));
  }
  for (std::size_t i = 0; i < expected.count(); ++i) {
    if (params.name(i) != expected.name(i) || params[i].shape != expected[i].shape) {
      throw InvalidArgument("tensor " + expected.name(i) + " shape mismatch");
    }
  }
}

template <typename T>
void check_finite(const ParameterTable<T>& params) {
  for (const auto& [name, t] : params) {
    for (T v : t.data) {
      if (!std::isfinite(v)) throw NumericError("tensor " + name + " holds a non-finite value");
    }
  }
}

template class ParameterTable<float>;
template class ParameterTable<double>;
template ParameterTable<float> make_parameter_table<float>(const ModelConfig&);
template ParameterTable<double> make_parameter_table<double>(const ModelConfig&);
template void check_shapes<float>(const ParameterTable<float>&, const ModelConfig&);
template void check_shapes<double>(const ParameterTable<double>&, const ModelConfig&);
template void check_finite<float>(const ParameterTable<float>&);
template void check_finite<double>(const ParameterTable<double>&);

}  // namespace mtgrid
