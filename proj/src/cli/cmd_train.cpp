#include <chrono>
#include <ostream>

#include "mtgrid/cli/commands.hpp"
#include "mtgrid/cli/context.hpp"
#include "mtgrid/common/atomic_file.hpp"
#include "mtgrid/common/error.hpp"
#include "mtgrid/training/trainer.hpp"

namespace mtgrid::cli {

std::vector<std::string> all_stage_names() {
  std::vector<std::string> out;
  for (const auto& s : default_curriculum(1.0, 0)) out.push_back(s.name);
  return out;
}

ModelConfig model_config_from(const RunConfig& c, const UnifiedVocab& vocab) {
  const int prompt_len = static_cast<int>(c.get_int("model.max_prompt_len", 32));
  ModelConfig m = make_model_config(vocab, t2i_sequence_length(prompt_len, kGridSide * kGridSide));
  m.n_layers = static_cast<int>(c.get_int("model.n_layers", m.n_layers));
  m.n_heads = static_cast<int>(c.get_int("model.n_heads", m.n_heads));
  m.d_model = static_cast<int>(c.get_int("model.d_model", m.d_model));
  m.d_ff = static_cast<int>(c.get_int("model.d_ff", 4 * m.d_model));
  m.rng_seed = static_cast<std::uint64_t>(c.get_int("model.seed", 0));
  validate_config(m);
  return m;
}

void apply_train_overrides(const RunConfig& c, TrainConfig& t) {
  t.batch_size = static_cast<int>(c.get_int("train.batch_size", t.batch_size));
  t.cfg_dropout_p = c.get_double("train.cfg_dropout_p", t.cfg_dropout_p);
  t.weight_decay = c.get_double("train.weight_decay", t.weight_decay);
  t.grad_clip = c.get_double("train.grad_clip", t.grad_clip);
  const std::string mode = c.get_string("train.mask_mode", "cosine");
  if (mode == "cosine") t.mask_schedule.mode = MaskMode::cosine;
  else if (mode == "fixed") t.mask_schedule.mode = MaskMode::fixed;
  else throw InvalidArgument("train.mask_mode must be cosine or fixed");
  t.mask_schedule.fixed_ratio = c.get_double("train.fixed_ratio", t.mask_schedule.fixed_ratio);
  const std::string reduction = c.get_string("train.loss_reduction", "mean");
  if (reduction == "mean") t.loss_reduction = LossReduction::mean;
  else if (reduction == "sum") t.loss_reduction = LossReduction::sum;
  else throw InvalidArgument("train.loss_reduction must be mean or sum");
}

int run_train(CommandContext& ctx) {
  const RunConfig& c = ctx.config;
  const std::string data_path = c.get_string("train.data", "");
  if (data_path.empty()) throw InvalidArgument("train.data (--data) is required");
  const auto lexicons = load_lexicons(c);
  const UnifiedVocab vocab = make_vocab(lexicons);
  const ModelConfig model = model_config_from(c, vocab);
  auto stages = default_curriculum(c.get_double("train.base_lr", 1e-3), ctx.seed,
                                   c.get_double("train.length_scale", 1.0));
  for (auto& s : stages) {
    apply_train_overrides(c, s.train);
    s.train.save_interval = static_cast<int>(
        c.get_int("train." + s.name + ".save_interval", s.train.save_interval));
  }
  const auto selected = c.get_list("train.stages", all_stage_names());
  const std::string init_path = c.get_string("train.init", "");
  const std::string resume_path = c.get_string("train.resume", "");
  ctx.write_snapshot();

  const auto examples = make_examples(scene::load_dataset(data_path), vocab);
  Parameters params;
  AdamState state;
  std::string resume_stage;
  int resume_step = 0;
  if (!resume_path.empty()) {
    Checkpoint ck = load_checkpoint(resume_path);
    if (!(ck.model_config == model)) throw InvalidArgument("resume checkpoint has a different model config");
    if (!ck.training_state) throw InvalidArgument("resume checkpoint has no optimizer state");
    resume_stage = ck.metadata.value("stage", "");
    resume_step = static_cast<int>(ck.step);
    params = std::move(ck.params);
    state = std::move(*ck.training_state);
  } else if (!init_path.empty()) {
    Checkpoint ck = load_checkpoint(init_path);
    if (!(ck.model_config == model)) throw InvalidArgument("init checkpoint has a different model config");
    params = std::move(ck.params);
    state = ck.training_state ? std::move(*ck.training_state) : make_adam_state(params);
  } else {
    params = init_parameters(model);
    state = make_adam_state(params);
  }
  *ctx.log << "model: " << params.total_elements() << " parameters, " << examples.size()
           << " training records\n";

  bool skipping = !resume_stage.empty();
  nlohmann::ordered_json timings = nlohmann::ordered_json::object();
  for (const std::string& name : selected) {
    const auto it = std::find_if(stages.begin(), stages.end(),
                                 [&](const CurriculumStage& s) { return s.name == name; });
    if (it == stages.end()) throw InvalidArgument("unknown stage '" + name + "'");
    int start = 0;
    if (skipping) {
      if (name != resume_stage) continue;
      skipping = false;
      start = resume_step;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const int log_every = static_cast<int>(c.get_int("train.log_every", 50));
    auto on_step = [&](int step, const StepResult& r) {
      if (step % log_every == 0 || step == it->train.steps) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        *ctx.log << name << " step " << step << "/" << it->train.steps << " loss " << r.loss
                 << " lr " << r.lr << " elapsed " << secs << "s\n" << std::flush;
      }
    };
    StageResult result = run_stage(*it, model, vocab, examples, std::move(params), std::move(state),
                                   ctx.out_dir, start, on_step);
    params = std::move(result.params);
    state = std::move(result.state);
    timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_file_atomically(ctx.out_dir / "timings.json", timings.dump(2) + "\n");
  }
  if (skipping) throw InvalidArgument("resume stage '" + resume_stage + "' is not among the selected stages");
  *ctx.out << "training finished; checkpoints in " << ctx.out_dir.string() << "\n";
  return kExitOk;
}

}  // namespace mtgrid::cli
