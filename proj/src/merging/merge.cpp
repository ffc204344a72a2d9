#include "mtgrid/merging/merge.hpp"

#include <cmath>

#include "mtgrid/common/error.hpp"

namespace mtgrid {
namespace {

void check_compatible(const Parameters& a, const Parameters& b) {
  if (a.count() != b.count()) throw InvalidArgument("merge: checkpoints hold different tensor counts");
  for (std::size_t i = 0; i < a.count(); ++i) {
    if (a.name(i) != b.name(i)) {
      throw InvalidArgument("merge: tensor " + a.name(i) + " missing or out of order");
    }
    if (a[i].shape != b[i].shape) throw InvalidArgument("merge: tensor " + a.name(i) + " shape mismatch");
  }
}

using Accumulator = std::vector<std::vector<double>>;

Accumulator make_accumulator(const Parameters& like) {
  Accumulator acc;
  for (const auto& [name, t] : like) acc.emplace_back(t.size(), 0.0);
  return acc;
}

void accumulate(Accumulator& acc, const Parameters& p, double coefficient) {
  if (coefficient == 0.0) return;
  for (std::size_t i = 0; i < p.count(); ++i) {
    const auto& src = p[i].data;
    auto& dst = acc[i];
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] += coefficient * static_cast<double>(src[k]);
  }
}

Parameters finish(const Accumulator& acc, const Parameters& like) {
  Parameters out;
  for (std::size_t i = 0; i < like.count(); ++i) {
    out.add(like.name(i), like[i].shape);
    auto& dst = out[i].data;
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<float>(acc[i][k]);
  }
  return out;
}

}  // namespace

std::string_view strategy_name(MergeStrategy s) {
  switch (s) {
    case MergeStrategy::sma: return "sma";
    case MergeStrategy::ema: return "ema";
    case MergeStrategy::wma: return "wma";
  }
  return "?";
}

MergeStrategy parse_strategy(std::string_view name) {
  if (name == "sma") return MergeStrategy::sma;
  if (name == "ema") return MergeStrategy::ema;
  if (name == "wma") return MergeStrategy::wma;
  throw InvalidArgument("unknown merge strategy '" + std::string(name) + "'");
}

nlohmann::json to_json(const MergeSpec& spec) {
  nlohmann::json j;
  j["strategy"] = strategy_name(spec.strategy);
  std::vector<std::string> paths;
  for (const auto& p : spec.checkpoints) paths.push_back(checkpoint_prefix(p).filename().string());
  j["checkpoints"] = paths;
  if (spec.strategy == MergeStrategy::ema) j["ema_alpha"] = spec.ema_alpha;
  if (spec.strategy == MergeStrategy::wma) j["wma_weights"] = spec.wma_weights;
  return j;
}

std::vector<double> normalize_weights(const std::vector<double>& weights) {
  if (weights.empty()) throw InvalidArgument("normalize_weights: no weights");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("normalize_weights: weights must be finite and non-negative");
    sum += w;
  }
  if (!(sum > 0.0)) throw InvalidArgument("normalize_weights: weights are all zero");
  std::vector<double> out;
  out.reserve(weights.size());
  for (double w : weights) out.push_back(w / sum);
  return out;
}

std::vector<double> ema_coefficients(std::size_t n, double alpha) {
  if (n == 0) throw InvalidArgument("merge: no checkpoints");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("merge: ema alpha must lie in (0, 1]");
  std::vector<double> c(n, 0.0);
  c[0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) c[j] *= 1.0 - alpha;
    c[i] = alpha;
  }
  return c;
}

std::vector<double> merge_coefficients(const MergeSpec& spec, std::size_t n) {
  if (n == 0) throw InvalidArgument("merge: no checkpoints");
  switch (spec.strategy) {
    case MergeStrategy::sma: return std::vector<double>(n, 1.0 / static_cast<double>(n));
    case MergeStrategy::ema: return ema_coefficients(n, spec.ema_alpha);
    case MergeStrategy::wma: {
      std::vector<double> w = spec.wma_weights;
      if (w.empty()) {
        for (std::size_t i = 1; i <= n; ++i) w.push_back(static_cast<double>(i));
      }
      if (w.size() != n) throw InvalidArgument("merge: wma weight count differs from checkpoint count");
      return normalize_weights(w);
    }
  }
  return {};
}

Parameters merge_weighted(const std::vector<Parameters>& checkpoints,
                          const std::vector<double>& coefficients) {
  if (checkpoints.empty()) throw InvalidArgument("merge: no checkpoints");
  if (coefficients.size() != checkpoints.size()) throw InvalidArgument("merge: coefficient count mismatch");
  for (const auto& c : checkpoints) check_compatible(checkpoints.front(), c);
  Accumulator acc = make_accumulator(checkpoints.front());
  for (std::size_t i = 0; i < checkpoints.size(); ++i) accumulate(acc, checkpoints[i], coefficients[i]);
  return finish(acc, checkpoints.front());
}

Parameters merge_sma(const std::vector<Parameters>& checkpoints) {
  MergeSpec spec;
  spec.strategy = MergeStrategy::sma;
  return merge_weighted(checkpoints, merge_coefficients(spec, checkpoints.size()));
}

Parameters merge_ema(const std::vector<Parameters>& checkpoints, double alpha) {
  return merge_weighted(checkpoints, ema_coefficients(checkpoints.size(), alpha));
}

Parameters merge_wma(const std::vector<Parameters>& checkpoints, const std::vector<double>& weights) {
  if (weights.size() != checkpoints.size()) throw InvalidArgument("merge: wma weight count differs from checkpoint count");
  return merge_weighted(checkpoints, normalize_weights(weights));
}

Checkpoint merge_checkpoints(const MergeSpec& spec) {
  const auto coefficients = merge_coefficients(spec, spec.checkpoints.size());
  Checkpoint first = load_checkpoint(spec.checkpoints.front());
  Accumulator acc = make_accumulator(first.params);
  accumulate(acc, first.params, coefficients[0]);
  for (std::size_t i = 1; i < spec.checkpoints.size(); ++i) {
    const Checkpoint ck = load_checkpoint(spec.checkpoints[i]);
    if (!(ck.model_config == first.model_config)) {
      throw InvalidArgument("merge: " + spec.checkpoints[i].string() + " has a different model config");
    }
    check_compatible(first.params, ck.params);
    accumulate(acc, ck.params, coefficients[i]);
  }
  Checkpoint out;
  out.model_config = first.model_config;
  out.params = finish(acc, first.params);
  out.step = 0;
  out.metadata["merge"] = to_json(spec);
  out.metadata["merge"]["coefficients"] = coefficients;
  return out;
}

void merge_to_file(const MergeSpec& spec, const std::filesystem::path& out_prefix) {
  save_checkpoint(out_prefix, merge_checkpoints(spec));
}

}  // namespace mtgrid
