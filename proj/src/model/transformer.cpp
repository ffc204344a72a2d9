#include "mtgrid/model/transformer.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mtgrid/common/error.hpp"

namespace mtgrid {
namespace {

constexpr double kNormEps = 1e-6;
constexpr double kGeluCoeff = 0.044715;

template <typename T>
using ColVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// out = xhat * (1 + weight), xhat = x / rms(x).
template <typename T>
void rms_norm(const RowMatrix<T>& x, const Tensor<T>& weight, RowMatrix<T>& xhat,
              ColVector<T>& inv_rms, RowMatrix<T>& out) {
  inv_rms = (x.array().square().rowwise().mean() + T(kNormEps)).rsqrt();
  xhat = x.array().colwise() * inv_rms.array();
  out = xhat.array().rowwise() * (weight.vector().array() + T(1));
}

// Accumulates d weight and returns dx for out = xhat * (1 + weight).
template <typename T>
RowMatrix<T> rms_norm_backward(const RowMatrix<T>& d_out, const RowMatrix<T>& xhat,
                               const ColVector<T>& inv_rms, const Tensor<T>& weight,
                               Tensor<T>& d_weight) {
  // Column sums in a fixed row order.
  for (Eigen::Index r = 0; r < d_out.rows(); ++r) {
    for (Eigen::Index c = 0; c < d_out.cols(); ++c) {
      d_weight.data[static_cast<std::size_t>(c)] += d_out(r, c) * xhat(r, c);
    }
  }
  RowMatrix<T> d_xhat = d_out.array().rowwise() * (weight.vector().array() + T(1));
  const ColVector<T> proj = (d_xhat.array() * xhat.array()).rowwise().mean();
  RowMatrix<T> dx = d_xhat - (xhat.array().colwise() * proj.array()).matrix();
  return dx.array().colwise() * inv_rms.array();
}

// gelu(u) = 0.5 u (1 + tanh(a (u + c u^3))); returns the tanh term.
template <typename T>
RowMatrix<T> gelu_tanh(const RowMatrix<T>& u) {
  const T a = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  return (a * (u.array() + T(kGeluCoeff) * u.array().cube())).tanh();
}

template <typename T>
RowMatrix<T> gelu_from_tanh(const RowMatrix<T>& u, const RowMatrix<T>& t) {
  return T(0.5) * u.array() * (T(1) + t.array());
}

template <typename T>
RowMatrix<T> gelu_grad_from_tanh(const RowMatrix<T>& u, const RowMatrix<T>& t) {
  const T a = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  return T(0.5) * (T(1) + t.array()) +
         T(0.5) * u.array() * (T(1) - t.array().square()) * a *
             (T(1) + T(3 * kGeluCoeff) * u.array().square());
}

// Normalizes each head segment of every row in place; writes the norms.
template <typename T>
void normalize_heads(RowMatrix<T>& m, int n_heads, RowMatrix<T>& norms) {
  const Eigen::Index dh = m.cols() / n_heads;
  norms.resize(m.rows(), n_heads);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (int h = 0; h < n_heads; ++h) {
      auto seg = m.row(r).segment(h * dh, dh);
      const T n = seg.norm();
      norms(r, h) = n;
      if (n > T(0)) {
        seg /= n;
      } else {
        seg.setZero();
      }
    }
  }
}

// d(normalized) -> d(raw) for one head segment per row.
template <typename T>
void normalize_heads_backward(const RowMatrix<T>& normalized, const RowMatrix<T>& norms,
                              RowMatrix<T>& d, int n_heads) {
  const Eigen::Index dh = normalized.cols() / n_heads;
  for (Eigen::Index r = 0; r < d.rows(); ++r) {
    for (int h = 0; h < n_heads; ++h) {
      auto g = d.row(r).segment(h * dh, dh);
      const auto u = normalized.row(r).segment(h * dh, dh);
      const T n = norms(r, h);
      if (n > T(0)) {
        const T dot = g.dot(u);
        g = (g - dot * u) / n;
      } else {
        g.setZero();
      }
    }
  }
}

}  // namespace

template <typename T>
QkNormalized<T> qk_normalize(const RowMatrix<T>& q, const RowMatrix<T>& k, T q_gain,
                             T k_gain) {
  QkNormalized<T> out{q, k};
  RowMatrix<T> norms;
  normalize_heads(out.q, 1, norms);
  normalize_heads(out.k, 1, norms);
  out.q *= q_gain;
  out.k *= k_gain;
  return out;
}

template <typename T>
Transformer<T>::Transformer(const ParameterTable<T>& params, const ModelConfig& config)
    : params_(params), config_(config) {
  validate_config(config_);
  check_shapes(params_, config_);
}

template <typename T>
int Transformer<T>::row_of(std::size_t item, int position) const {
  return pos_to_row_.at(item).at(static_cast<std::size_t>(position));
}

template <typename T>
void Transformer<T>::run(std::span<const ModelInput> batch, bool keep_activations) {
  const int d = config_.d_model;
  const int n_heads = config_.n_heads;
  const int dh = config_.head_dim();
  using PL = ParamLayout;

  offsets_.clear();
  counts_.clear();
  pos_to_row_.clear();
  row_ids_.clear();
  row_pos_.clear();
  biases_.clear();
  caches_.clear();
  kept_ = keep_activations;

  for (const ModelInput& in : batch) {
    const int len = static_cast<int>(in.ids.size());
    if (in.mask == nullptr || in.mask->size() != len) {
      throw InvalidArgument("model input mask does not match sequence length");
    }
    if (len > config_.max_seq_len) {
      throw InvalidArgument("sequence length " + std::to_string(len) +
                            " exceeds max_seq_len " + std::to_string(config_.max_seq_len));
    }
    std::vector<int> active;
    std::vector<int> rows(static_cast<std::size_t>(len), -1);
    for (int p = 0; p < len; ++p) {
      if (!in.mask->active(p)) continue;
      const TokenId id = in.ids[static_cast<std::size_t>(p)];
      if (id < 0 || id >= config_.vocab_size) {
        throw InvalidArgument("token id " + std::to_string(id) + " outside the vocabulary");
      }
      rows[static_cast<std::size_t>(p)] = static_cast<int>(row_ids_.size());
      row_ids_.push_back(id);
      row_pos_.push_back(p);
      active.push_back(p);
    }
    offsets_.push_back(static_cast<Eigen::Index>(row_ids_.size() - active.size()));
    counts_.push_back(static_cast<Eigen::Index>(active.size()));
    pos_to_row_.push_back(std::move(rows));
    const auto n = static_cast<Eigen::Index>(active.size());
    RowMatrix<T> bias(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        bias(i, j) = in.mask->allowed(active[static_cast<std::size_t>(i)],
                                      active[static_cast<std::size_t>(j)])
                         ? T(0)
                         : -std::numeric_limits<T>::infinity();
      }
    }
    biases_.push_back(std::move(bias));
  }

  const auto total_rows = static_cast<Eigen::Index>(row_ids_.size());
  const auto& tok = params_[PL::kTokenEmbedding].matrix();
  const auto& pos = params_[PL::kPositionEmbedding].matrix();
  RowMatrix<T> x(total_rows, d);
  for (Eigen::Index r = 0; r < total_rows; ++r) {
    x.row(r) = tok.row(row_ids_[static_cast<std::size_t>(r)]) +
               pos.row(row_pos_[static_cast<std::size_t>(r)]);
  }

  if (keep_activations) caches_.resize(static_cast<std::size_t>(config_.n_layers));
  LayerCache scratch;
  RowMatrix<T> h, qs, ks, scores;
  for (int l = 0; l < config_.n_layers; ++l) {
    LayerCache& c = keep_activations ? caches_[static_cast<std::size_t>(l)] : scratch;
    rms_norm(x, params_[PL::layer(l, PL::kAttnNorm)], c.xhat1, c.inv_rms1, h);
    c.qn.noalias() = h * params_[PL::layer(l, PL::kWq)].matrix();
    c.kn.noalias() = h * params_[PL::layer(l, PL::kWk)].matrix();
    c.v.noalias() = h * params_[PL::layer(l, PL::kWv)].matrix();
    normalize_heads(c.qn, n_heads, c.q_norms);
    normalize_heads(c.kn, n_heads, c.k_norms);
    const auto& qg = params_[PL::layer(l, PL::kQGain)].data;
    const auto& kg = params_[PL::layer(l, PL::kKGain)].data;
    qs.resize(total_rows, d);
    ks.resize(total_rows, d);
    for (int hd = 0; hd < n_heads; ++hd) {
      qs.middleCols(hd * dh, dh) = c.qn.middleCols(hd * dh, dh) * qg[static_cast<std::size_t>(hd)];
      ks.middleCols(hd * dh, dh) = c.kn.middleCols(hd * dh, dh) * kg[static_cast<std::size_t>(hd)];
    }
    c.attn.resize(total_rows, d);
    if (keep_activations) c.probs.resize(batch.size() * static_cast<std::size_t>(n_heads));
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Eigen::Index r0 = offsets_[b];
      const Eigen::Index n = counts_[b];
      if (n == 0) continue;
      for (int hd = 0; hd < n_heads; ++hd) {
        scores.noalias() = qs.block(r0, hd * dh, n, dh) * ks.block(r0, hd * dh, n, dh).transpose();
        scores += biases_[b];
        const ColVector<T> row_max = scores.rowwise().maxCoeff();
        scores = (scores.array().colwise() - row_max.array()).exp();
        const ColVector<T> row_sum = scores.rowwise().sum();
        scores.array().colwise() /= row_sum.array();
        c.attn.block(r0, hd * dh, n, dh).noalias() = scores * c.v.block(r0, hd * dh, n, dh);
        if (keep_activations) {
          c.probs[b * static_cast<std::size_t>(n_heads) + static_cast<std::size_t>(hd)] = scores;
        }
      }
    }
    x.noalias() += c.attn * params_[PL::layer(l, PL::kWo)].matrix();

    rms_norm(x, params_[PL::layer(l, PL::kMlpNorm)], c.xhat2, c.inv_rms2, h);
    c.pre_act.noalias() = h * params_[PL::layer(l, PL::kWIn)].matrix();
    c.gelu_tanh = gelu_tanh(c.pre_act);
    const RowMatrix<T> act = gelu_from_tanh(c.pre_act, c.gelu_tanh);
    x.noalias() += act * params_[PL::layer(l, PL::kWOut)].matrix();
    if (!x.allFinite()) {
      throw NumericError("non-finite activations in layer " + std::to_string(l));
    }
  }
  rms_norm(x, params_[PL::final_norm(config_.n_layers)], final_xhat_, final_inv_rms_, final_);
}

template <typename T>
const RowMatrix<T>& Transformer<T>::attention_probs(int layer, std::size_t item, int head) const {
  if (!kept_) throw InvalidArgument("attention probabilities require kept activations");
  return caches_.at(static_cast<std::size_t>(layer))
      .probs.at(item * static_cast<std::size_t>(config_.n_heads) + static_cast<std::size_t>(head));
}

template <typename T>
RowMatrix<T> Transformer<T>::image_logits(std::span<const int> rows) const {
  const auto& tok = params_[ParamLayout::kTokenEmbedding].matrix();
  const auto e_img = tok.middleRows(config_.image_offset, config_.codebook_size);
  RowMatrix<T> h(static_cast<Eigen::Index>(rows.size()), config_.d_model);
  for (std::size_t i = 0; i < rows.size(); ++i) h.row(static_cast<Eigen::Index>(i)) = final_.row(rows[i]);
  RowMatrix<T> logits = h * e_img.transpose();
  if (!logits.allFinite()) throw NumericError("non-finite logits in output head");
  return logits;
}

template <typename T>
RowMatrix<T> Transformer<T>::vocab_logits(std::span<const int> rows) const {
  const auto& tok = params_[ParamLayout::kTokenEmbedding].matrix();
  RowMatrix<T> h(static_cast<Eigen::Index>(rows.size()), config_.d_model);
  for (std::size_t i = 0; i < rows.size(); ++i) h.row(static_cast<Eigen::Index>(i)) = final_.row(rows[i]);
  RowMatrix<T> logits = h * tok.transpose();
  if (!logits.allFinite()) throw NumericError("non-finite logits in output head");
  return logits;
}

template <typename T>
void Transformer<T>::backward_from_image_logits(std::span<const int> rows,
                                                const RowMatrix<T>& d_logits,
                                                ParameterTable<T>& grads) const {
  if (!kept_) throw InvalidArgument("backward requires kept activations");
  const auto& tok = params_[ParamLayout::kTokenEmbedding].matrix();
  const auto e_img = tok.middleRows(config_.image_offset, config_.codebook_size);
  RowMatrix<T> h(static_cast<Eigen::Index>(rows.size()), config_.d_model);
  for (std::size_t i = 0; i < rows.size(); ++i) h.row(static_cast<Eigen::Index>(i)) = final_.row(rows[i]);
  grads[ParamLayout::kTokenEmbedding]
      .matrix()
      .middleRows(config_.image_offset, config_.codebook_size)
      .noalias() += d_logits.transpose() * h;
  const RowMatrix<T> dh = d_logits * e_img;
  RowMatrix<T> d_final = RowMatrix<T>::Zero(final_.rows(), final_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) d_final.row(rows[i]) += dh.row(static_cast<Eigen::Index>(i));
  backward(d_final, grads);
}

template <typename T>
void Transformer<T>::backward(const RowMatrix<T>& d_final, ParameterTable<T>& grads) const {
  using PL = ParamLayout;
  const int n_heads = config_.n_heads;
  const int dh = config_.head_dim();
  const Eigen::Index total_rows = final_.rows();
  const auto n_items = offsets_.size();

  RowMatrix<T> dx = rms_norm_backward(d_final, final_xhat_, final_inv_rms_,
                                      params_[PL::final_norm(config_.n_layers)],
                                      grads[PL::final_norm(config_.n_layers)]);
  RowMatrix<T> h, d_h, d_attn, dqs, dks, dv, dp, ds;
  for (int l = config_.n_layers - 1; l >= 0; --l) {
    const LayerCache& c = caches_[static_cast<std::size_t>(l)];

    // Feed-forward block.
    h = c.xhat2.array().rowwise() * (params_[PL::layer(l, PL::kMlpNorm)].vector().array() + T(1));
    const RowMatrix<T> act = gelu_from_tanh(c.pre_act, c.gelu_tanh);
    grads[PL::layer(l, PL::kWOut)].matrix().noalias() += act.transpose() * dx;
    RowMatrix<T> d_pre = dx * params_[PL::layer(l, PL::kWOut)].matrix().transpose();
    d_pre.array() *= gelu_grad_from_tanh(c.pre_act, c.gelu_tanh).array();
    grads[PL::layer(l, PL::kWIn)].matrix().noalias() += h.transpose() * d_pre;
    d_h.noalias() = d_pre * params_[PL::layer(l, PL::kWIn)].matrix().transpose();
    dx += rms_norm_backward(d_h, c.xhat2, c.inv_rms2, params_[PL::layer(l, PL::kMlpNorm)],
                            grads[PL::layer(l, PL::kMlpNorm)]);

    // Attention block.
    grads[PL::layer(l, PL::kWo)].matrix().noalias() += c.attn.transpose() * dx;
    d_attn.noalias() = dx * params_[PL::layer(l, PL::kWo)].matrix().transpose();
    const auto& qg = params_[PL::layer(l, PL::kQGain)].data;
    const auto& kg = params_[PL::layer(l, PL::kKGain)].data;
    auto& dqg = grads[PL::layer(l, PL::kQGain)].data;
    auto& dkg = grads[PL::layer(l, PL::kKGain)].data;
    dqs.setZero(total_rows, config_.d_model);
    dks.setZero(total_rows, config_.d_model);
    dv.setZero(total_rows, config_.d_model);
    for (std::size_t b = 0; b < n_items; ++b) {
      const Eigen::Index r0 = offsets_[b];
      const Eigen::Index n = counts_[b];
      if (n == 0) continue;
      for (int hd = 0; hd < n_heads; ++hd) {
        const RowMatrix<T>& p = c.probs[b * static_cast<std::size_t>(n_heads) + static_cast<std::size_t>(hd)];
        const auto d_o = d_attn.block(r0, hd * dh, n, dh);
        dp.noalias() = d_o * c.v.block(r0, hd * dh, n, dh).transpose();
        dv.block(r0, hd * dh, n, dh).noalias() = p.transpose() * d_o;
        const ColVector<T> row_dot = (dp.array() * p.array()).rowwise().sum();
        ds = p.array() * (dp.array().colwise() - row_dot.array());
        const T gq = qg[static_cast<std::size_t>(hd)];
        const T gk = kg[static_cast<std::size_t>(hd)];
        // scores = gq gk qn kn^T
        dqs.block(r0, hd * dh, n, dh).noalias() = ds * c.kn.block(r0, hd * dh, n, dh) * gk;
        dks.block(r0, hd * dh, n, dh).noalias() = ds.transpose() * c.qn.block(r0, hd * dh, n, dh) * gq;
      }
    }
    // dqs currently holds d(scores)/d(gq qn) * gq-free factor: d qn = gq * dqs.
    for (int hd = 0; hd < n_heads; ++hd) {
      const auto hq = static_cast<std::size_t>(hd);
      const auto dq_block = dqs.middleCols(hd * dh, dh);
      const auto dk_block = dks.middleCols(hd * dh, dh);
      dqg[hq] += (dq_block.array() * c.qn.middleCols(hd * dh, dh).array()).sum();
      dkg[hq] += (dk_block.array() * c.kn.middleCols(hd * dh, dh).array()).sum();
      dqs.middleCols(hd * dh, dh) *= qg[hq];
      dks.middleCols(hd * dh, dh) *= kg[hq];
    }
    normalize_heads_backward(c.qn, c.q_norms, dqs, n_heads);
    normalize_heads_backward(c.kn, c.k_norms, dks, n_heads);

    h = c.xhat1.array().rowwise() * (params_[PL::layer(l, PL::kAttnNorm)].vector().array() + T(1));
    grads[PL::layer(l, PL::kWq)].matrix().noalias() += h.transpose() * dqs;
    grads[PL::layer(l, PL::kWk)].matrix().noalias() += h.transpose() * dks;
    grads[PL::layer(l, PL::kWv)].matrix().noalias() += h.transpose() * dv;
    d_h.noalias() = dqs * params_[PL::layer(l, PL::kWq)].matrix().transpose();
    d_h.noalias() += dks * params_[PL::layer(l, PL::kWk)].matrix().transpose();
    d_h.noalias() += dv * params_[PL::layer(l, PL::kWv)].matrix().transpose();
    dx += rms_norm_backward(d_h, c.xhat1, c.inv_rms1, params_[PL::layer(l, PL::kAttnNorm)],
                            grads[PL::layer(l, PL::kAttnNorm)]);
  }

  auto d_tok = grads[PL::kTokenEmbedding].matrix();
  auto d_pos = grads[PL::kPositionEmbedding].matrix();
  for (Eigen::Index r = 0; r < total_rows; ++r) {
    d_tok.row(row_ids_[static_cast<std::size_t>(r)]) += dx.row(r);
    d_pos.row(row_pos_[static_cast<std::size_t>(r)]) += dx.row(r);
  }
}

template <typename T>
RowMatrix<T> forward(const ParameterTable<T>& params, const ModelConfig& config,
                     std::span<const TokenId> ids, const AttentionMask& mask) {
  Transformer<T> model(params, config);
  const ModelInput input{ids, &mask};
  model.run(std::span<const ModelInput>(&input, 1), false);
  std::vector<int> rows;
  std::vector<int> positions;
  for (int p = 0; p < static_cast<int>(ids.size()); ++p) {
    const int r = model.row_of(0, p);
    if (r < 0) continue;
    rows.push_back(r);
    positions.push_back(p);
  }
  const RowMatrix<T> active = model.vocab_logits(rows);
  RowMatrix<T> logits = RowMatrix<T>::Zero(static_cast<Eigen::Index>(ids.size()), config.vocab_size);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    logits.row(positions[i]) = active.row(static_cast<Eigen::Index>(i));
  }
  return logits;
}

template struct QkNormalized<float>;
template struct QkNormalized<double>;
template QkNormalized<float> qk_normalize<float>(const RowMatrix<float>&, const RowMatrix<float>&, float, float);
template QkNormalized<double> qk_normalize<double>(const RowMatrix<double>&, const RowMatrix<double>&, double, double);
template class Transformer<float>;
template class Transformer<double>;
template RowMatrix<float> forward<float>(const ParameterTable<float>&, const ModelConfig&,
                                         std::span<const TokenId>, const AttentionMask&);
template RowMatrix<double> forward<double>(const ParameterTable<double>&, const ModelConfig&,
                                           std::span<const TokenId>, const AttentionMask&);

}  // namespace mtgrid
