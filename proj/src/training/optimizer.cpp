#include "mtgrid/training/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "mtgrid/common/error.hpp"

namespace mtgrid {

void validate_train_config(const TrainConfig& c) {
  if (c.steps < 1) throw InvalidArgument("train config: steps must be >= 1");
  if (c.warmup_steps < 0 || c.warmup_steps >= c.steps) {
    throw InvalidArgument("train config: warmup_steps must lie in [0, steps)");
  }
  if (c.cfg_dropout_p < 0.0 || c.cfg_dropout_p > 1.0) {
    throw InvalidArgument("train config: cfg_dropout_p must lie in [0, 1]");
  }
  if (c.batch_size < 1) throw InvalidArgument("train config: batch_size must be >= 1");
  if (c.save_interval < 1) throw InvalidArgument("train config: save_interval must be >= 1");
  if (c.peak_lr < 0.0) throw InvalidArgument("train config: peak_lr must be >= 0");
  if (c.mask_schedule.mode == MaskMode::fixed &&
      (c.mask_schedule.fixed_ratio <= 0.0 || c.mask_schedule.fixed_ratio > 1.0)) {
    throw InvalidArgument("train config: fixed mask ratio must lie in (0, 1]");
  }
}

double lr_at(int step, const TrainConfig& c) {
  if (step < 0 || step > c.steps) throw InvalidArgument("lr_at: step outside [0, steps]");
  if (step <= c.warmup_steps) {
    return c.warmup_steps == 0 ? c.peak_lr
                               : c.peak_lr * static_cast<double>(step) / c.warmup_steps;
  }
  const double progress =
      static_cast<double>(step - c.warmup_steps) / static_cast<double>(c.steps - c.warmup_steps);
  return c.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamState make_adam_state(const Parameters& params) {
  AdamState s;
  for (const auto& [name, t] : params) {
    s.m.add(name, t.shape);
    s.v.add(name, t.shape);
  }
  return s;
}

double clip_grad_norm(Parameters& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, t] : grads) {
    for (float g : t.data) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  if (max_norm > 0.0 && norm > max_norm) {
    const auto scale = static_cast<float>(max_norm / norm);
    for (auto& [name, t] : grads) {
      for (float& g : t.data) g *= scale;
    }
  }
  return norm;
}

void adamw_update(Parameters& params, AdamState& state, const Parameters& grads, double lr,
                  const TrainConfig& c) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  const auto b1 = static_cast<float>(c.beta1);
  const auto b2 = static_cast<float>(c.beta2);
  for (std::size_t i = 0; i < params.count(); ++i) {
    auto& p = params[i].data;
    auto& m = state.m[i].data;
    auto& v = state.v[i].data;
    const auto& g = grads[i].data;
    const bool decay = params[i].shape.size() == 2;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0f - b1) * g[k];
      v[k] = b2 * v[k] + (1.0f - b2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      double update = m_hat / (std::sqrt(v_hat) + c.adam_eps);
      if (decay) update += c.weight_decay * p[k];
      p[k] = static_cast<float>(p[k] - lr * update);
    }
  }
}

}  // namespace mtgrid
