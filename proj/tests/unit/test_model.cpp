#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "mtgrid/common/error.hpp"
#include "mtgrid/model/attention_mask.hpp"
#include "mtgrid/model/transformer.hpp"
#include "mtgrid/training/objective.hpp"
#include "mtgrid/training/trainer.hpp"

using namespace mtgrid;
using namespace mtgrid::testing;

namespace {

std::string mask_rows(const AttentionMask& m) {
  std::string out;
  for (int p = 0; p < m.size(); ++p) {
    for (int j = 0; j < m.size(); ++j) out += m.allowed(p, j) ? '1' : '0';
    out += ' ';
  }
  return out;
}

TokenSequence tiny_sequence(const UnifiedVocab& vocab, int prompt_len, Rng& rng) {
  const auto prompt = random_prompt(vocab, prompt_len, rng);
  auto image = random_image(vocab, kTinyImageLen, rng);
  for (int i = 0; i < kTinyImageLen; i += 3) image[static_cast<std::size_t>(i)] = special_id(Special::mask);
  return assemble_t2i_sequence(prompt, image, vocab, kTinyPromptLen, kTinyImageLen);
}

}  // namespace

TEST_CASE("attention mask follows the block rules") {
  CHECK(mask_rows(build_attention_mask(bare_layout(2, 2))) == "1000 1100 1111 1111 ");
  CHECK(mask_rows(build_attention_mask(bare_layout(0, 3))) == "111 111 111 ");
  CHECK(build_attention_mask(bare_layout(3, 5)) == build_attention_mask(bare_layout(3, 5)));

  const UnifiedVocab vocab = tiny_vocab();
  const std::vector<TokenId> prompt{8, 9};
  const auto seq = assemble_t2i_sequence(prompt, std::vector<TokenId>(kTinyImageLen, 6), vocab,
                                         kTinyPromptLen, kTinyImageLen);
  const auto m = build_attention_mask(seq.layout);
  for (int p = 0; p < m.size(); ++p) {
    for (int j = 0; j < m.size(); ++j) {
      if (seq.layout.is_padding(p) || seq.layout.is_padding(j)) CHECK_FALSE(m.allowed(p, j));
    }
  }
  // Bracketing specials follow their block's rule.
  CHECK(m.allowed(seq.layout.text_block.end - 1, 0));
  CHECK_FALSE(m.allowed(0, 1));
  CHECK(m.allowed(seq.layout.image_block.start, seq.layout.image_block.end - 1));
  CHECK_FALSE(m.allowed(seq.layout.text_block.start, seq.layout.image_block.start));
}

TEST_CASE("qk normalization") {
  RowMatrix<double> unit(1, 3);
  unit << 0.6, 0.8, 0.0;
  auto out = qk_normalize<double>(unit, unit, 1.0, 1.0);
  CHECK(out.q.isApprox(unit, 1e-15));

  RowMatrix<double> v(2, 3);
  v << 1.0, -2.0, 0.5, 3.0, 0.1, 0.2;
  const auto a = qk_normalize<double>(v, v, 1.5, 0.7);
  const auto b = qk_normalize<double>(RowMatrix<double>(v * 10.0), RowMatrix<double>(v * 0.3), 1.5, 0.7);
  CHECK((a.q - b.q).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.k - b.k).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(a.q.row(0).norm() - 1.5) < 1e-12);

  const RowMatrix<double> zero = RowMatrix<double>::Zero(1, 4);
  const auto z = qk_normalize<double>(zero, zero, 2.0, 2.0);
  CHECK(z.q.isZero());
  CHECK(z.k.isZero());
}

TEST_CASE("init_parameters is seeded and shaped by the config") {
  const ModelConfig c = tiny_config();
  const Parameters a = init_parameters(c);
  CHECK(a == init_parameters(c));
  ModelConfig other = c;
  other.rng_seed = c.rng_seed + 1;
  CHECK_FALSE(a == init_parameters(other));
  CHECK_NOTHROW(check_shapes(a, c));
  CHECK_NOTHROW(check_finite(a));
  const double gain = initial_qk_gain(c.max_seq_len);
  CHECK(std::abs(gain * gain - std::log2(double(c.max_seq_len) * c.max_seq_len - c.max_seq_len)) < 1e-9);
}

TEST_CASE("forward is pure and finite") {
  const UnifiedVocab vocab = tiny_vocab();
  const ModelConfig c = tiny_config(2, 8, 2);
  const Parameters p = jittered_parameters(c, 3);
  Rng rng(11);
  const auto seq = tiny_sequence(vocab, 3, rng);
  const auto mask = build_attention_mask(seq.layout);
  const auto a = forward<float>(p, c, seq.ids, mask);
  const auto b = forward<float>(p, c, seq.ids, mask);
  CHECK(a.rows() == seq.layout.total_len);
  CHECK(a.cols() == c.vocab_size);
  CHECK(a.allFinite());
  CHECK(a == b);
  // Padding rows are left at zero.
  for (int pos = 0; pos < seq.layout.total_len; ++pos) {
    if (seq.layout.is_padding(pos)) CHECK(a.row(pos).isZero());
  }
}

TEST_CASE("zero attention output weights make logits independent of attention mixing") {
  const UnifiedVocab vocab = tiny_vocab();
  const ModelConfig c = tiny_config(1, 8, 2);
  Parameters p = jittered_parameters(c, 5);
  auto& wo = p[ParamLayout::layer(0, ParamLayout::kWo)].data;
  std::fill(wo.begin(), wo.end(), 0.0f);
  Rng rng(2);
  const auto seq = tiny_sequence(vocab, 2, rng);
  const auto mask = build_attention_mask(seq.layout);
  const auto base = forward<double>(p.cast<double>(), c, seq.ids, mask);
  Parameters q = p;
  for (std::size_t slot : {ParamLayout::kWq, ParamLayout::kWk, ParamLayout::kWv}) {
    for (float& v : q[ParamLayout::layer(0, static_cast<ParamLayout::LayerSlot>(slot))].data) v = -v * 3.0f;
  }
  const auto changed = forward<double>(q.cast<double>(), c, seq.ids, mask);
  CHECK((base - changed).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("non-finite activations are reported with the layer") {
  const UnifiedVocab vocab = tiny_vocab();
  const ModelConfig c = tiny_config(2, 8, 2);
  Parameters p = jittered_parameters(c, 5);
  p[ParamLayout::layer(1, ParamLayout::kWIn)].data[0] = std::nanf("");
  Rng rng(2);
  const auto seq = tiny_sequence(vocab, 2, rng);
  const auto mask = build_attention_mask(seq.layout);
  CHECK_THROWS_WITH_AS(forward<float>(p, c, seq.ids, mask), doctest::Contains("layer 1"), NumericError);
}

TEST_CASE("softmax rows over attended positions sum to one") {
  const UnifiedVocab vocab = tiny_vocab();
  const ModelConfig c = tiny_config(2, 8, 2);
  const Parameters p = jittered_parameters(c, 8);
  Rng rng(9);
  const auto s0 = tiny_sequence(vocab, 1, rng);
  const auto s1 = tiny_sequence(vocab, 4, rng);
  const auto m0 = build_attention_mask(s0.layout);
  const auto m1 = build_attention_mask(s1.layout);
  const std::vector<ModelInput> batch{{s0.ids, &m0}, {s1.ids, &m1}};
  Transformer<float> model(p, c);
  model.run(batch, true);
  for (int l = 0; l < c.n_layers; ++l) {
    for (std::size_t item = 0; item < batch.size(); ++item) {
      const AttentionMask& m = *batch[item].mask;
      std::vector<int> active;
      for (int pos = 0; pos < m.size(); ++pos) {
        if (m.active(pos)) active.push_back(pos);
      }
      for (int h = 0; h < c.n_heads; ++h) {
        const auto& probs = model.attention_probs(l, item, h);
        REQUIRE(probs.rows() == static_cast<Eigen::Index>(active.size()));
        for (Eigen::Index r = 0; r < probs.rows(); ++r) {
          CHECK(std::abs(probs.row(r).sum() - 1.0f) < 1e-6);
          for (Eigen::Index j = 0; j < probs.cols(); ++j) {
            if (!m.allowed(active[static_cast<std::size_t>(r)], active[static_cast<std::size_t>(j)])) {
              CHECK(probs(r, j) == 0.0f);
            }
          }
        }
      }
    }
  }
}

TEST_CASE("analytic gradients match central differences on a one-layer model") {
  const UnifiedVocab vocab = tiny_vocab();
  const ModelConfig c = tiny_config(1, 8, 2);
  const ParameterTable<double> params = jittered_parameters(c, 21).cast<double>();
  Rng rng(4);
  std::vector<TokenSequence> seqs;
  std::vector<std::vector<int>> positions;
  std::vector<std::vector<TokenId>> targets;
  for (int b = 0; b < 2; ++b) {
    const auto prompt = random_prompt(vocab, 2 + b, rng);
    const auto image = random_image(vocab, kTinyImageLen, rng);
    const auto masked = apply_mask_with_ratio(image, 0.5, rng);
    seqs.push_back(assemble_t2i_sequence(prompt, masked.ids, vocab, kTinyPromptLen, kTinyImageLen));
    positions.push_back(masked.positions);
    targets.push_back(image);
  }
  MaskCache masks;
  ParameterTable<double> grads = make_parameter_table<double>(c);
  loss_and_gradient<double>(params, c, seqs, positions, targets, LossReduction::mean, &grads, masks);

  constexpr double h = 1e-3;
  for (std::size_t i = 0; i < params.count(); ++i) {
    ParameterTable<double> probe = params;
    double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
    for (std::size_t k = 0; k < probe[i].size(); ++k) {
      const double orig = probe[i].data[k];
      probe[i].data[k] = orig + h;
      const double up = loss_and_gradient<double>(probe, c, seqs, positions, targets,
                                                   LossReduction::mean, nullptr, masks);
      probe[i].data[k] = orig - h;
      const double down = loss_and_gradient<double>(probe, c, seqs, positions, targets,
                                                     LossReduction::mean, nullptr, masks);
      probe[i].data[k] = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads[i].data[k];
      diff_sq += (numeric - analytic) * (numeric - analytic);
      a_sq += analytic * analytic;
      n_sq += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(a_sq), std::sqrt(n_sq), 1e-12});
    INFO("tensor " << params.name(i) << " |g| " << std::sqrt(a_sq));
    CHECK(std::sqrt(diff_sq) / denom < 1e-3);
    CHECK(std::sqrt(a_sq) > 0.0);
  }
}
