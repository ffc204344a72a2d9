#include "mtgrid/evaluation/suite.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "mtgrid/common/atomic_file.hpp"
#include "mtgrid/common/error.hpp"
#include "mtgrid/common/rng.hpp"

namespace mtgrid::eval {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::array<Language, kNumLanguages - 1> kTargets = {
    Language::zh, Language::nl, Language::fr, Language::hi, Language::fa};

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

ojson quartiles_json(const Quartiles& q) {
  ojson j;
  j["count"] = q.count;
  j["min"] = q.min;
  j["q1"] = q.q1;
  j["median"] = q.median;
  j["q3"] = q.q3;
  j["max"] = q.max;
  j["mean"] = q.mean;
  return j;
}

std::string quartiles_csv(const std::string& metric, const std::string& backend, const Quartiles& q) {
  return metric + "," + backend + "," + std::to_string(q.count) + "," + num(q.min) + "," +
         num(q.q1) + "," + num(q.median) + "," + num(q.q3) + "," + num(q.max) + "," +
         num(q.mean) + "\n";
}

std::string image_id(const std::string& prompt_id, Language lang, int k) {
  return prompt_id + "/" + std::string(language_tag(lang)) + "/" + std::to_string(k);
}

std::string code_switch_id(const std::string& prompt_id, CodeSwitchVariant v, Language target) {
  return prompt_id + "/" + std::string(variant_name(v)) + "-" + std::string(language_tag(target));
}

// Everything generated for one prompt.
struct PromptImages {
  std::array<std::vector<TokenGrid>, kNumLanguages> grids;  // [language][k]
  std::vector<CodeSwitchPrompt> switched;
  std::vector<TokenGrid> switched_grids;
};

void check_coverage(const std::vector<PromptRecord>& prompts) {
  std::array<bool, kNumDimensions> seen{};
  for (const auto& p : prompts) {
    seen[static_cast<std::size_t>(p.constraint.dimension)] = true;
    for (Language lang : kAllLanguages) {
      if (p.text_in(lang).empty()) {
        throw InvalidArgument("prompt " + p.prompt_id + " has no text for language " +
                              std::string(language_tag(lang)));
      }
    }
  }
  for (Dimension d : kAllDimensions) {
    if (!seen[static_cast<std::size_t>(d)]) {
      throw InvalidArgument("prompt set has no " + std::string(dimension_name(d)) + " prompts");
    }
  }
  for (std::size_t i = 1; i < prompts.size(); ++i) {
    if (prompts[i].prompt_id == prompts[i - 1].prompt_id) {
      throw InvalidArgument("duplicate prompt_id '" + prompts[i].prompt_id + "'");
    }
  }
}

}  // namespace

std::uint64_t generation_seed(std::uint64_t eval_seed, const std::string& prompt_id,
                              Language language, int k) {
  return mix_seed({eval_seed, hash_string(prompt_id), static_cast<std::uint64_t>(language),
                   static_cast<std::uint64_t>(k)});
}

std::uint64_t code_switch_seed(std::uint64_t eval_seed, const std::string& prompt_id,
                               CodeSwitchVariant variant, Language target) {
  return mix_seed({eval_seed, hash_string(prompt_id), 0xc5ULL,
                   static_cast<std::uint64_t>(variant), static_cast<std::uint64_t>(target)});
}

EvalReport run_eval_suite(const Parameters& params, const ModelConfig& model_config,
                          const UnifiedVocab& vocab, const scene::LexiconSet& lexicons,
                          std::vector<PromptRecord> prompts, const EvalConfig& config,
                          const std::filesystem::path& out_dir) {
  if (config.samples_per_prompt < 1) throw InvalidArgument("eval needs at least one sample per prompt");
  if (config.backends.empty()) throw InvalidArgument("eval needs at least one embedding backend");
  validate_sampler_config(config.sampler);
  std::sort(prompts.begin(), prompts.end(),
            [](const PromptRecord& a, const PromptRecord& b) { return a.prompt_id < b.prompt_id; });
  check_coverage(prompts);
  std::vector<std::unique_ptr<EmbeddingBackend>> backends;
  for (const auto& spec : config.backends) backends.push_back(make_backend(spec));

  const int K = config.samples_per_prompt;
  std::vector<PromptImages> images(prompts.size());

  auto generate_prompt = [&](std::size_t pi) {
    const PromptRecord& p = prompts[pi];
    std::vector<GenerationRequest> requests;
    for (Language lang : kAllLanguages) {
      const auto ids = encode_text(p.text_in(lang), vocab, lang);
      for (int k = 0; k < K; ++k) {
        GenerationRequest req;
        req.prompt_ids = ids;
        req.seed = generation_seed(config.seed, p.prompt_id, lang, k);
        requests.push_back(std::move(req));
      }
    }
    PromptImages& out = images[pi];
    if (config.code_switch) {
      const auto concepts = p.concepts.empty()
                                ? english_concepts(p.text_in(Language::en), vocab, lexicons)
                                : p.concepts;
      out.switched = make_code_switch_prompts(
          concepts, std::vector<Language>(kTargets.begin(), kTargets.end()), lexicons);
      for (const auto& cs : out.switched) {
        GenerationRequest req;
        for (const auto& s : cs.surfaces) req.prompt_ids.push_back(vocab.text_id(s));
        req.seed = code_switch_seed(config.seed, p.prompt_id, cs.variant, cs.target);
        requests.push_back(std::move(req));
      }
    }
    auto results = generate_batch(params, model_config, vocab, requests, config.sampler);
    std::size_t r = 0;
    for (Language lang : kAllLanguages) {
      auto& dst = out.grids[static_cast<std::size_t>(lang)];
      for (int k = 0; k < K; ++k) dst.push_back(std::move(results[r++].grid));
    }
    for (; r < results.size(); ++r) out.switched_grids.push_back(std::move(results[r].grid));
  };

  const int workers = std::max(1, config.workers);
  if (workers == 1) {
    for (std::size_t i = 0; i < prompts.size(); ++i) generate_prompt(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < prompts.size(); i = next++) {
          try {
            generate_prompt(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = prompts.size();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  EvalReport report;
  std::string generations, flags_out;
  std::map<Language, std::array<int, kNumDimensions>> passes;
  for (std::size_t pi = 0; pi < prompts.size(); ++pi) {
    const PromptRecord& p = prompts[pi];
    report.prompt_ids.push_back(p.prompt_id);
    const auto dim = static_cast<std::size_t>(p.constraint.dimension);
    for (Language lang : kAllLanguages) {
      auto& score = report.compositional[lang];
      auto& pass = passes[lang];
      const auto& grids = images[pi].grids[static_cast<std::size_t>(lang)];
      for (int k = 0; k < K; ++k) {
        const TokenGrid& g = grids[static_cast<std::size_t>(k)];
        const std::string id = image_id(p.prompt_id, lang, k);
        ojson gen;
        gen["image_id"] = id;
        gen["prompt_id"] = p.prompt_id;
        gen["language"] = language_tag(lang);
        gen["k"] = k;
        gen["seed"] = generation_seed(config.seed, p.prompt_id, lang, k);
        gen["grid"] = g.tokens;
        generations += gen.dump() + "\n";

        const PromptScore ps = score_prompt(p.constraint, g);
        const bool own = ps.flags[dim].value_or(false);
        score.trials[dim] += 1;
        pass[dim] += own ? 1 : 0;
        ojson rec;
        rec["image_id"] = id;
        rec["prompt_id"] = p.prompt_id;
        rec["language"] = language_tag(lang);
        rec["dimension"] = dimension_name(p.constraint.dimension);
        ojson fl = ojson::object();
        for (Dimension d : kAllDimensions) {
          const auto& f = ps.flags[static_cast<std::size_t>(d)];
          if (f) fl[std::string(dimension_name(d))] = *f;
        }
        rec["flags"] = fl;
        rec["passed"] = own;
        flags_out += rec.dump() + "\n";
      }
    }
    for (std::size_t i = 0; i < images[pi].switched.size(); ++i) {
      const auto& cs = images[pi].switched[i];
      ojson gen;
      gen["image_id"] = code_switch_id(p.prompt_id, cs.variant, cs.target);
      gen["prompt_id"] = p.prompt_id;
      gen["variant"] = variant_name(cs.variant);
      gen["language"] = language_tag(cs.target);
      gen["text"] = cs.text;
      gen["seed"] = code_switch_seed(config.seed, p.prompt_id, cs.variant, cs.target);
      gen["grid"] = images[pi].switched_grids[i].tokens;
      generations += gen.dump() + "\n";
    }
  }
  for (auto& [lang, score] : report.compositional) {
    double sum = 0.0;
    for (std::size_t d = 0; d < kNumDimensions; ++d) {
      score.rate[d] = static_cast<double>(passes[lang][d]) / score.trials[d];
      sum += score.rate[d];
    }
    score.overall = sum / kNumDimensions;
  }

  std::string clc_out, css_out;
  for (const auto& backend : backends) {
    ClcReport clc;
    clc.backend = backend->name();
    clc.languages = kNumLanguages;
    clc.samples_per_prompt = K;
    clc.prompts = static_cast<int>(prompts.size());
    CssReport css;
    css.backend = backend->name();
    for (std::size_t pi = 0; pi < prompts.size(); ++pi) {
      const PromptRecord& p = prompts[pi];
      std::vector<Embedding> refs, targets;
      for (Language lang : kAllLanguages) {
        const auto& grids = images[pi].grids[static_cast<std::size_t>(lang)];
        for (int k = 0; k < K; ++k) {
          auto e = backend->embed(grids[static_cast<std::size_t>(k)], image_id(p.prompt_id, lang, k));
          (lang == Language::en ? refs : targets).push_back(std::move(e));
        }
      }
      const double value = clc_score(refs, targets);
      clc.per_prompt.push_back(value);
      ojson rec;
      rec["prompt_id"] = p.prompt_id;
      rec["backend"] = clc.backend;
      rec["clc"] = value;
      clc_out += rec.dump() + "\n";

      if (!images[pi].switched.empty()) {
        std::vector<Embedding> ef, es;
        for (std::size_t i = 0; i < images[pi].switched.size(); ++i) {
          const auto& cs = images[pi].switched[i];
          auto e = backend->embed(images[pi].switched_grids[i],
                                  code_switch_id(p.prompt_id, cs.variant, cs.target));
          (cs.variant == CodeSwitchVariant::english_first ? ef : es).push_back(std::move(e));
        }
        const CssPair pair = css_scores(refs.front(), ef, es);
        css.per_prompt.push_back(pair);
        ojson crec;
        crec["prompt_id"] = p.prompt_id;
        crec["backend"] = css.backend;
        crec["ef"] = pair.ef;
        crec["es"] = pair.es;
        css_out += crec.dump() + "\n";
      }
    }
    clc.overall = summarize(clc.per_prompt).mean;
    report.clc.push_back(std::move(clc));
    if (!css.per_prompt.empty()) {
      std::vector<double> ef, es;
      for (const auto& pair : css.per_prompt) {
        ef.push_back(pair.ef);
        es.push_back(pair.es);
      }
      css.ef = summarize(ef).mean;
      css.es = summarize(es).mean;
      report.css.push_back(std::move(css));
    }
  }

  std::filesystem::create_directories(out_dir);
  std::string comp_csv = "language";
  for (Dimension d : kAllDimensions) comp_csv += "," + std::string(dimension_name(d));
  comp_csv += ",overall\n";
  ojson summary;
  summary["languages"] = kNumLanguages;
  summary["samples_per_prompt"] = K;
  summary["prompts"] = prompts.size();
  summary["seed"] = config.seed;
  ojson comp = ojson::object();
  for (Language lang : kAllLanguages) {
    const auto& score = report.compositional.at(lang);
    comp_csv += std::string(language_tag(lang));
    ojson row;
    for (Dimension d : kAllDimensions) {
      const double rate = score.rate[static_cast<std::size_t>(d)];
      comp_csv += "," + num(rate);
      row[std::string(dimension_name(d))] = rate;
    }
    comp_csv += "," + num(score.overall) + "\n";
    row["overall"] = score.overall;
    comp[std::string(language_tag(lang))] = row;
  }
  summary["compositional"] = comp;

  std::string summary_csv = "metric,backend,count,min,q1,median,q3,max,mean\n";
  ojson clc_j = ojson::object();
  for (const auto& clc : report.clc) {
    const auto q = summarize(clc.per_prompt);
    clc_j[clc.backend] = quartiles_json(q);
    summary_csv += quartiles_csv("clc", clc.backend, q);
  }
  summary["clc"] = clc_j;
  ojson css_j = ojson::object();
  for (const auto& css : report.css) {
    std::vector<double> ef, es;
    for (const auto& pair : css.per_prompt) {
      ef.push_back(pair.ef);
      es.push_back(pair.es);
    }
    const auto qef = summarize(ef);
    const auto qes = summarize(es);
    ojson entry;
    entry["ef"] = quartiles_json(qef);
    entry["es"] = quartiles_json(qes);
    css_j[css.backend] = entry;
    summary_csv += quartiles_csv("css_ef", css.backend, qef);
    summary_csv += quartiles_csv("css_es", css.backend, qes);
  }
  summary["css"] = css_j;

  write_file_atomically(out_dir / "generations.jsonl", generations);
  write_file_atomically(out_dir / "compositional.jsonl", flags_out);
  write_file_atomically(out_dir / "compositional.csv", comp_csv);
  write_file_atomically(out_dir / "clc.jsonl", clc_out);
  write_file_atomically(out_dir / "css.jsonl", css_out);
  write_file_atomically(out_dir / "summary.json", summary.dump(2) + "\n");
  write_file_atomically(out_dir / "summary.csv", summary_csv);
  return report;
}

}  // namespace mtgrid::eval
