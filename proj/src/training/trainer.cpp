#include "mtgrid/training/trainer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "mtgrid/common/atomic_file.hpp"
#include "mtgrid/model/transformer.hpp"

namespace mtgrid {

TrainExample make_example(const scene::DatasetRecord& record, const UnifiedVocab& vocab) {
  TrainExample ex;
  ex.prompt_ids = encode_text(record.caption, vocab, record.language);
  ex.image_ids = grid_to_ids(record.grid, vocab);
  ex.language = record.language;
  ex.style = record.style;
  return ex;
}

std::vector<TrainExample> make_examples(const std::vector<scene::DatasetRecord>& records,
                                        const UnifiedVocab& vocab) {
  std::vector<TrainExample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(make_example(r, vocab));
  return out;
}

int max_prompt_len(const ModelConfig& config, int image_len) {
  return config.max_seq_len - t2i_sequence_length(0, image_len);
}

const AttentionMask& MaskCache::get(const SequenceLayout& layout) {
  const auto key = std::make_pair(layout.text_block.end, layout.total_len);
  auto it = masks_.find(key);
  if (it == masks_.end()) it = masks_.emplace(key, build_attention_mask(layout)).first;
  return it->second;
}

template <typename T>
double loss_and_gradient(const ParameterTable<T>& params, const ModelConfig& model_config,
                         const std::vector<TokenSequence>& sequences,
                         const std::vector<std::vector<int>>& positions,
                         const std::vector<std::vector<TokenId>>& targets,
                         LossReduction reduction, ParameterTable<T>* grads, MaskCache& masks) {
  const std::size_t n = sequences.size();
  if (n == 0) throw InvalidArgument("empty batch");
  std::vector<ModelInput> inputs;
  inputs.reserve(n);
  for (const auto& s : sequences) inputs.push_back({s.ids, &masks.get(s.layout)});
  Transformer<T> model(params, model_config);
  model.run(inputs, grads != nullptr);

  std::vector<int> rows;
  std::vector<int> codes;
  std::vector<std::size_t> starts;
  for (std::size_t b = 0; b < n; ++b) {
    starts.push_back(rows.size());
    const auto& layout = sequences[b].layout;
    for (int j : positions[b]) {
      rows.push_back(model.row_of(b, layout.image_span.start + j));
      codes.push_back(targets[b][static_cast<std::size_t>(j)] - model_config.image_offset);
    }
  }
  starts.push_back(rows.size());
  const RowMatrix<T> logits = model.image_logits(rows);
  RowMatrix<T> d_logits(logits.rows(), logits.cols());
  RowMatrix<T> d_part;
  double loss = 0.0;
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t b = 0; b < n; ++b) {
    const auto r0 = static_cast<Eigen::Index>(starts[b]);
    const auto cnt = static_cast<Eigen::Index>(starts[b + 1] - starts[b]);
    const RowMatrix<T> part = logits.middleRows(r0, cnt);
    const std::span<const int> part_codes(codes.data() + starts[b], static_cast<std::size_t>(cnt));
    loss += scale * image_nll<T>(part, part_codes, reduction,
                                 grads != nullptr ? &d_part : nullptr, scale);
    if (grads != nullptr) d_logits.middleRows(r0, cnt) = d_part;
  }
  if (grads != nullptr) model.backward_from_image_logits(rows, d_logits, *grads);
  return loss;
}

StepResult train_step(Parameters& params, AdamState& state, std::span<const TrainExample> batch,
                      const TrainConfig& config, const ModelConfig& model_config,
                      const UnifiedVocab& vocab, int step, Rng& rng, MaskCache& masks) {
  std::vector<TokenSequence> sequences;
  std::vector<std::vector<int>> positions;
  std::vector<std::vector<TokenId>> targets;
  for (const TrainExample& ex : batch) {
    const auto prompt = cfg_dropout(ex.prompt_ids, config.cfg_dropout_p, rng);
    MaskedImage masked = apply_mask(ex.image_ids, rng, config.mask_schedule);
    const int image_len = static_cast<int>(ex.image_ids.size());
    sequences.push_back(assemble_t2i_sequence(prompt, masked.ids, vocab,
                                              max_prompt_len(model_config, image_len), image_len));
    positions.push_back(std::move(masked.positions));
    targets.push_back(ex.image_ids);
  }
  Parameters grads = make_parameter_table<float>(model_config);
  StepResult result;
  try {
    result.loss = loss_and_gradient<float>(params, model_config, sequences, positions, targets,
                                           config.loss_reduction, &grads, masks);
    check_finite(grads);
    result.grad_norm = clip_grad_norm(grads, config.grad_clip);
  } catch (const NumericError& e) {
    throw NumericError("step " + std::to_string(step) + ": " + e.what());
  }
  result.lr = lr_at(step, config);
  adamw_update(params, state, grads, result.lr, config);
  return result;
}

std::vector<CurriculumStage> default_curriculum(double base_lr, std::uint64_t seed,
                                                double length_scale) {
  using scene::CaptionStyle;
  struct Row {
    const char* name;
    std::array<double, scene::kNumStyles> weights;  // label, noisy, detailed, instruct
    int steps;
    int warmup;
    double lr_factor;
  };
  const Row rows[] = {
      {"pretrain_1", {100, 0, 0, 0}, 3000, 100, 1.0},
      {"pretrain_2", {20, 80, 0, 0}, 3000, 100, 1.0},
      {"pretrain_3", {0, 50, 50, 0}, 3000, 100, 1.0},
      {"instruct_1", {0, 60, 30, 10}, 2000, 100, 2.0},
      {"instruct_2", {0, 25, 60, 15}, 1000, 40, 0.5},
  };
  std::vector<CurriculumStage> stages;
  int index = 0;
  for (const Row& r : rows) {
    CurriculumStage s;
    s.name = r.name;
    s.index = index++;
    s.style_weights = r.weights;
    s.train.steps = std::max(2, static_cast<int>(std::lround(r.steps * length_scale)));
    s.train.warmup_steps =
        std::min(s.train.steps - 1, static_cast<int>(std::lround(r.warmup * length_scale)));
    s.train.peak_lr = base_lr * r.lr_factor;
    s.train.save_interval = std::max(1, s.train.steps / 5);
    s.train.rng_seed = seed;
    stages.push_back(std::move(s));
  }
  return stages;
}

StagePool::StagePool(std::span<const TrainExample> examples, const CurriculumStage& stage)
    : weights_(stage.style_weights) {
  double sum = 0.0;
  for (double w : weights_) {
    if (w < 0.0) throw InvalidArgument("stage " + stage.name + ": negative style weight");
    sum += w;
  }
  if (std::abs(sum - 100.0) > 1e-9) {
    throw InvalidArgument("stage " + stage.name + ": style weights must sum to 100");
  }
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    if (std::find(stage.languages.begin(), stage.languages.end(), ex.language) ==
        stage.languages.end()) {
      continue;
    }
    by_style_[static_cast<std::size_t>(ex.style)].push_back(i);
  }
  for (int s = 0; s < scene::kNumStyles; ++s) {
    if (weights_[static_cast<std::size_t>(s)] > 0.0 && by_style_[static_cast<std::size_t>(s)].empty()) {
      throw InvalidArgument("stage " + stage.name + ": empty pool for style " +
                            std::string(scene::style_name(static_cast<scene::CaptionStyle>(s))));
    }
  }
}

scene::CaptionStyle StagePool::draw_style(Rng& rng) const {
  double u = rng.uniform() * 100.0;
  int last = 0;
  for (int s = 0; s < scene::kNumStyles; ++s) {
    const double w = weights_[static_cast<std::size_t>(s)];
    if (w <= 0.0) continue;
    last = s;
    if (u < w) return static_cast<scene::CaptionStyle>(s);
    u -= w;
  }
  return static_cast<scene::CaptionStyle>(last);
}

std::vector<std::size_t> StagePool::draw_batch(int batch_size, Rng& rng) const {
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    const auto& pool = by_style_[static_cast<std::size_t>(draw_style(rng))];
    out.push_back(pool[rng.below(pool.size())]);
  }
  return out;
}

std::uint64_t step_seed(std::uint64_t seed, int stage_index, int step) {
  return mix_seed({seed, 0x7472616eULL, static_cast<std::uint64_t>(stage_index),
                   static_cast<std::uint64_t>(step)});
}

std::filesystem::path stage_checkpoint_prefix(const std::filesystem::path& out_dir,
                                              const std::string& stage, int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-step%06d", step);
  return out_dir / (stage + buf);
}

namespace {

std::string format_report_csv(const StageReport& report) {
  std::ostringstream out;
  out.precision(9);
  out << "step,loss,lr\n";
  for (std::size_t i = 0; i < report.steps.size(); ++i) {
    out << i + 1 << ',' << report.steps[i].loss << ',' << report.steps[i].lr << '\n';
  }
  return out.str();
}

void write_report(const std::filesystem::path& out_dir, const StageReport& report) {
  write_file_atomically(out_dir / (report.stage + ".report.csv"), format_report_csv(report));
  nlohmann::ordered_json summary;
  summary["stage"] = report.stage;
  summary["steps"] = report.steps.size();
  nlohmann::ordered_json langs;
  for (Language l : kAllLanguages) {
    langs[std::string(language_tag(l))] = report.language_counts[static_cast<std::size_t>(l)];
  }
  summary["language_counts"] = langs;
  nlohmann::ordered_json styles;
  for (int s = 0; s < scene::kNumStyles; ++s) {
    styles[std::string(scene::style_name(static_cast<scene::CaptionStyle>(s)))] =
        report.style_counts[static_cast<std::size_t>(s)];
  }
  summary["style_counts"] = styles;
  if (!report.steps.empty()) {
    summary["first_loss"] = report.steps.front().loss;
    summary["final_loss"] = report.steps.back().loss;
  }
  nlohmann::json cks = nlohmann::json::array();
  for (const auto& p : report.checkpoints) cks.push_back(p.filename().string());
  summary["checkpoints"] = cks;
  write_file_atomically(out_dir / (report.stage + ".summary.json"), summary.dump(2) + "\n");
}

// Rows of an earlier report up to and including `last_step`.
std::vector<StepResult> read_report_rows(const std::filesystem::path& path, int last_step) {
  std::vector<StepResult> rows;
  std::ifstream in(path);
  if (!in) throw IoError("cannot resume: missing stage report " + path.string());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line) && static_cast<int>(rows.size()) < last_step) {
    StepResult r;
    char comma = 0;
    int step = 0;
    std::istringstream fields(line);
    fields >> step >> comma >> r.loss >> comma >> r.lr;
    if (!fields || step != static_cast<int>(rows.size()) + 1) {
      throw IoError("cannot resume: malformed stage report " + path.string());
    }
    rows.push_back(r);
  }
  if (static_cast<int>(rows.size()) != last_step) {
    throw IoError("cannot resume: stage report " + path.string() + " ends before step " +
                  std::to_string(last_step));
  }
  return rows;
}

}  // namespace

StageResult run_stage(const CurriculumStage& stage, const ModelConfig& model_config,
                      const UnifiedVocab& vocab, std::span<const TrainExample> examples,
                      Parameters params, AdamState state, const std::filesystem::path& out_dir,
                      int start_step, const StepCallback& on_step) {
  const TrainConfig& config = stage.train;
  validate_train_config(config);
  if (start_step < 0 || start_step > config.steps) {
    throw InvalidArgument("stage " + stage.name + ": start step outside the stage");
  }
  const StagePool pool(examples, stage);
  std::filesystem::create_directories(out_dir);

  StageResult result{std::move(params), std::move(state), {}};
  StageReport& report = result.report;
  report.stage = stage.name;
  if (start_step > 0) {
    report.steps = read_report_rows(out_dir / (stage.name + ".report.csv"), start_step);
  }
  MaskCache masks;
  std::vector<TrainExample> batch;
  for (int step = 1; step <= config.steps; ++step) {
    Rng rng(step_seed(config.rng_seed, stage.index, step));
    const auto indices = pool.draw_batch(config.batch_size, rng);
    for (std::size_t i : indices) {
      report.language_counts[static_cast<std::size_t>(examples[i].language)] += 1;
      report.style_counts[static_cast<std::size_t>(examples[i].style)] += 1;
    }
    if (step <= start_step) {
      if (step % config.save_interval == 0 || step == config.steps) {
        report.checkpoints.push_back(stage_checkpoint_prefix(out_dir, stage.name, step));
      }
      continue;
    }
    batch.clear();
    for (std::size_t i : indices) batch.push_back(examples[i]);
    report.steps.push_back(train_step(result.params, result.state, batch, config, model_config,
                                      vocab, step, rng, masks));
    if (on_step) on_step(step, report.steps.back());
    if (step % config.save_interval == 0 || step == config.steps) {
      const auto prefix = stage_checkpoint_prefix(out_dir, stage.name, step);
      Checkpoint ck{model_config, step, result.params, result.state, {}};
      ck.metadata["stage"] = stage.name;
      ck.metadata["stage_index"] = stage.index;
      save_checkpoint(prefix, ck);
      report.checkpoints.push_back(prefix);
      write_report(out_dir, report);
    }
  }
  return result;
}

template double loss_and_gradient<float>(const ParameterTable<float>&, const ModelConfig&,
                                         const std::vector<TokenSequence>&,
                                         const std::vector<std::vector<int>>&,
                                         const std::vector<std::vector<TokenId>>&, LossReduction,
                                         ParameterTable<float>*, MaskCache&);
template double loss_and_gradient<double>(const ParameterTable<double>&, const ModelConfig&,
                                          const std::vector<TokenSequence>&,
                                          const std::vector<std::vector<int>>&,
                                          const std::vector<std::vector<TokenId>>&, LossReduction,
                                          ParameterTable<double>*, MaskCache&);

}  // namespace mtgrid
