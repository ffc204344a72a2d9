#pragma once

#include <cstdint>

#include "mtgrid/model/parameters.hpp"
#include "mtgrid/training/objective.hpp"

namespace mtgrid {

struct TrainConfig {
  int steps = 3000;
  int warmup_steps = 100;
  double peak_lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;  // decoupled; matrices only
  double grad_clip = 1.0;      // global L2 norm; <= 0 disables
  int batch_size = 32;
  double cfg_dropout_p = 0.1;
  MaskSchedule mask_schedule;
  LossReduction loss_reduction = LossReduction::mean;
  int save_interval = 500;
  std::uint64_t rng_seed = 0;
};

// Throws InvalidArgument unless 0 <= warmup_steps < steps and
// 0 <= cfg_dropout_p <= 1, with positive batch size and save interval.
void validate_train_config(const TrainConfig& config);

// Linear warmup 0 -> peak over [0, warmup_steps], then cosine decay to 0 at
// `steps`.
double lr_at(int step, const TrainConfig& config);

struct AdamState {
  Parameters m;
  Parameters v;
  std::int64_t t = 0;  // updates applied so far

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

AdamState make_adam_state(const Parameters& params);

// Scales grads in place so their global L2 norm is at most max_norm and
// returns the norm before scaling.
double clip_grad_norm(Parameters& grads, double max_norm);

// One AdamW update with bias correction. Weight decay applies to rank-2
// tensors only (embeddings and projections, not norms or gains).
void adamw_update(Parameters& params, AdamState& state, const Parameters& grads, double lr,
                  const TrainConfig& config);

}  // namespace mtgrid
