#include "codespot/pipeline/pipeline.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <numeric>
#include <random>

#include "codespot/ablation/ablation.hpp"
#include "codespot/corpus/batching.hpp"
#include "codespot/corpus/grammar.hpp"
#include "codespot/importance/importance.hpp"
#include "codespot/metrics/metrics.hpp"
#include "codespot/model/checkpoint.hpp"
#include "codespot/oracle/oracle.hpp"
#include "codespot/trainer/trainer.hpp"
#include "codespot/util/binary_io.hpp"
#include "codespot/util/error.hpp"

namespace codespot::pipeline {

namespace fs = std::filesystem;

fs::path RunLayout::language_map(const std::string& language) const { return maps() / (language + ".imap"); }

fs::path RunLayout::spot_mask(double k_percent) const {
  return masks() / fmt::format("spot_k{}.mask", k_percent);
}

Corpora build_corpora(const PipelineConfig& config, std::size_t code_docs, std::size_t general_docs) {
  Corpora c;
  std::vector<std::string> names = config.include;
  if (!config.holdout.empty()) names.push_back(config.holdout);
  for (const auto& name : names) {
    const corpus::MiniLanguageSpec spec{name, corpus::parse_grammar_id(name), config.corpus.seed};
    c.code.emplace(name, corpus::generate_corpus(spec, code_docs, config.corpus.split_ratio));
  }
  c.general = corpus::generate_general_corpus(config.corpus.seed + 1, general_docs, config.corpus.split_ratio);
  return c;
}

corpus::Corpus pretraining_corpus(const Corpora& corpora) {
  std::vector<const corpus::Corpus*> parts;
  for (const auto& [name, splits] : corpora.code) parts.push_back(&splits.train);
  parts.push_back(&corpora.general.train);
  return corpus::merge_corpora(parts, "pretrain");
}

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) { write_text_file(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::vector<ablation::EvalSplit> eval_splits(const PipelineConfig& config, const Corpora& corpora,
                                             std::size_t max_docs, std::size_t context_len) {
  std::vector<ablation::EvalSplit> splits;
  auto add = [&](const corpus::Corpus& c, std::string tag, ablation::SplitRole role) {
    const corpus::Corpus kept = corpus::truncate_corpus(c, max_docs);
    splits.push_back({std::move(tag), role, corpus::sequential_batches(kept, model::kEvalBatchSize, context_len)});
  };
  for (const auto& name : config.include) add(corpora.code.at(name).eval, name, ablation::SplitRole::kCode);
  if (!config.holdout.empty()) add(corpora.code.at(config.holdout).eval, config.holdout, ablation::SplitRole::kHoldout);
  add(corpora.general.eval, std::string(corpus::kGeneralTag), ablation::SplitRole::kGeneral);
  return splits;
}

nlohmann::json split_accuracies(const model::ModelState& m, const std::vector<ablation::EvalSplit>& splits) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& s : splits) j[s.tag] = model::eval_accuracy(m, s.batches);
  return j;
}

double mean_code_accuracy(const nlohmann::json& acc, const std::vector<std::string>& include) {
  double s = 0.0;
  for (const auto& name : include) s += acc.at(name).get<double>();
  return s / static_cast<double>(include.size());
}

trainer::TrainConfig language_finetune_config(const PipelineConfig& config, std::size_t language_index,
                                              std::size_t steps) {
  trainer::TrainConfig t = config.finetune;
  t.steps = steps;
  t.seed = config.finetune.seed + language_index;
  return t;
}

struct SpotOutputs {
  std::vector<importance::ImportanceMap> language_maps;
  importance::ImportanceMap total;
  std::vector<trainer::TrainLog> logs;
};

SpotOutputs compute_importance(const PipelineConfig& config, const model::ModelState& base,
                               const Corpora& corpora, std::size_t steps) {
  SpotOutputs out;
  for (std::size_t i = 0; i < config.include.size(); ++i) {
    const std::string& name = config.include[i];
    trainer::FinetuneOutput ft;
    try {
      ft = trainer::finetune(base, corpora.code.at(name).train, language_finetune_config(config, i, steps));
    } catch (const Error& e) {
      fail(e.kind(), fmt::format("fine-tuning on {}: {}", name, e.what()));
    }
    out.language_maps.push_back(importance::score_language(ft, name, config.gradient_mode));
    out.logs.push_back(std::move(ft.log));
  }
  out.total = importance::aggregate(out.language_maps, config.normalize);
  return out;
}

}  // namespace

StageResult cmd_pretrain(const PipelineConfig& config) {
  const RunLayout layout(config.run_dir);
  const Corpora corpora = build_corpora(config, config.corpus.code_docs, config.corpus.general_docs);
  const corpus::Corpus train = pretraining_corpus(corpora);

  const model::ModelState init = model::init_model(config.model);
  trainer::PretrainOutput out;
  try {
    out = trainer::pretrain(init, train, config.pretrain);
  } catch (const Error& e) {
    fail(ErrorKind::kTraining, fmt::format("pretraining diverged: {}", e.what()));
  }
  model::save_checkpoint(out.model, layout.base_checkpoint());
  out.log.save_csv(layout.reports() / "pretrain_loss.csv");

  const auto splits = eval_splits(config, corpora, config.ablation.max_eval_docs, config.model.context_len);
  const auto before = split_accuracies(init, splits);
  const auto after = split_accuracies(out.model, splits);

  StageResult r;
  r.summary["parameters"] = out.model.parameters.size();
  r.summary["registry_digest"] = fmt::format("{:016x}", out.model.registry.digest());
  r.summary["train_documents"] = train.documents.size();
  r.summary["train_tokens"] = train.token_count();
  r.summary["steps"] = config.pretrain.train.steps;
  r.summary["first_loss"] = out.log.losses.front();
  r.summary["final_loss"] = out.log.losses.back();
  r.summary["untrained_accuracy"] = before;
  r.summary["trained_accuracy"] = after;
  r.summary["untrained_code_accuracy"] = mean_code_accuracy(before, config.include);
  r.summary["trained_code_accuracy"] = mean_code_accuracy(after, config.include);
  r.ok = r.summary["trained_code_accuracy"].get<double>() > r.summary["untrained_code_accuracy"].get<double>();
  r.summary["ok"] = r.ok;
  write_json(layout.reports() / "pretrain.json", r.summary);
  return r;
}

StageResult cmd_spot(const PipelineConfig& config) {
  const RunLayout layout(config.run_dir);
  const model::ModelState base = model::load_checkpoint(layout.base_checkpoint(), config.model);
  const Corpora corpora = build_corpora(config, config.corpus.code_docs, config.corpus.general_docs);

  SpotOutputs spot = compute_importance(config, base, corpora, config.finetune.steps);
  StageResult r;
  nlohmann::json langs = nlohmann::json::array();
  for (std::size_t i = 0; i < spot.language_maps.size(); ++i) {
    const auto& m = spot.language_maps[i];
    importance::save_importance_map(m, layout.language_map(m.language_tag));
    spot.logs[i].save_csv(layout.reports() / ("finetune_" + m.language_tag + "_loss.csv"));
    langs.push_back({{"language", m.language_tag},
                     {"batches", m.batch_count},
                     {"first_loss", spot.logs[i].losses.front()},
                     {"final_loss", spot.logs[i].losses.back()},
                     {"score_sum", std::accumulate(m.scores.begin(), m.scores.end(), 0.0)}});
  }
  importance::save_importance_map(spot.total, layout.total_map());

  nlohmann::json masks = nlohmann::json::array();
  for (double k : config.ablation.k_list) {
    const importance::SpotMask mask = importance::select_top_k(spot.total, k);
    importance::save_spot_mask(mask, layout.spot_mask(k));
    const std::size_t expected = importance::spot_size(spot.total.scores.size(), k);
    masks.push_back({{"k_percent", k},
                     {"count", mask.count()},
                     {"expected_count", expected},
                     {"threshold_score", mask.threshold_score}});
    r.ok = r.ok && mask.count() == expected;
  }
  r.summary["languages"] = langs;
  r.summary["holdout"] = config.holdout;
  r.summary["gradient_mode"] = importance::to_string(config.gradient_mode);
  r.summary["normalize"] = config.normalize;
  r.summary["masks"] = masks;
  r.summary["ok"] = r.ok;
  write_json(layout.reports() / "spot.json", r.summary);
  return r;
}

StageResult cmd_ablate(const PipelineConfig& config) {
  const RunLayout layout(config.run_dir);
  const model::ModelState base = model::load_checkpoint(layout.base_checkpoint(), config.model);
  const std::uint64_t digest = base.registry.digest();
  const importance::ImportanceMap total = importance::load_importance_map(layout.total_map(), digest);
  ablation::AblationPlan plan;
  for (double k : config.ablation.k_list) plan.spots.push_back(importance::load_spot_mask(layout.spot_mask(k), digest));
  plan.n_random_seeds = config.ablation.random_seeds;
  plan.random_seed = config.ablation.random_seed;
  plan.include_bottom_k = config.ablation.bottom_k;

  const Corpora corpora = build_corpora(config, config.corpus.code_docs, config.corpus.general_docs);
  const auto splits = eval_splits(config, corpora, config.ablation.max_eval_docs, config.model.context_len);
  const ablation::AblationReport report = ablation::run_ablation_suite(base, total, splits, plan);

  write_json(layout.reports() / "ablation.json", report.to_json());
  write_text_file(layout.reports() / "ablation_table.csv", report.to_table_csv());
  write_text_file(layout.reports() / "ablation_curves.csv", report.to_curve_csv());

  StageResult r;
  r.summary["original"] = report.to_json()["original"];
  nlohmann::json per_k = nlohmann::json::array();
  for (const auto& s : report.summaries) {
    per_k.push_back({{"k_percent", s.k_percent},
                     {"spot_code_drop", s.spot.code_drop},
                     {"spot_general_drop", s.spot.general_drop},
                     {"spot_holdout_drop", s.spot.holdout_drop ? nlohmann::json(*s.spot.holdout_drop) : nlohmann::json()},
                     {"random_mean_code_drop", s.random_mean_code_drop},
                     {"random_mean_holdout_drop",
                      s.random_mean_holdout_drop ? nlohmann::json(*s.random_mean_holdout_drop) : nlohmann::json()},
                     {"spot_m_s", s.spot.derived.m_s ? nlohmann::json(*s.spot.derived.m_s) : nlohmann::json()},
                     {"spot_beats_random_code", s.spot_beats_random_code},
                     {"spot_general_below_code", s.spot_general_below_code},
                     {"spot_beats_random_holdout",
                      s.spot_beats_random_holdout ? nlohmann::json(*s.spot_beats_random_holdout) : nlohmann::json()}});
  }
  r.summary["per_k"] = per_k;
  return r;
}

StageResult cmd_ablate_fixture(const fs::path& fixture, const fs::path& out_dir) {
  const auto rows = metrics::load_table_fixture(fixture);
  const auto checks = metrics::check_table_closure(rows);
  StageResult r;
  nlohmann::json list = nlohmann::json::array();
  std::size_t failed = 0;
  for (const auto& c : checks) {
    failed += !c.ok;
    list.push_back({{"model", c.model},
                    {"condition", c.condition},
                    {"metric", c.metric},
                    {"printed", c.printed},
                    {"recomputed", c.recomputed},
                    {"ok", c.ok}});
  }
  r.ok = failed == 0 && !checks.empty();
  r.summary["checks"] = checks.size();
  r.summary["failures"] = failed;
  r.summary["ok"] = r.ok;
  r.summary["details"] = list;
  write_text_file(out_dir / "fixture_table.csv", metrics::render_derived_table_csv(rows));
  write_json(out_dir / "fixture_closure.json", r.summary);
  return r;
}

StageResult cmd_oracle(const PipelineConfig& config) {
  const RunLayout layout(config.run_dir);
  const OracleSettings& o = config.oracle;
  StageResult r;

  const oracle::GradCheckSummary grad = oracle::run_gradcheck(o.gradcheck_seed, o.gradcheck_cases_per_op);
  write_json(layout.oracle() / "gradcheck.json", grad.to_json());

  // Reduced model: same pipeline, smaller shapes.
  const Corpora corpora = build_corpora(config, o.code_docs, o.general_docs);
  trainer::PretrainConfig pre = config.pretrain;
  pre.train.steps = o.pretrain_steps;
  const model::ModelState base =
      trainer::pretrain(model::init_model(o.model), pretraining_corpus(corpora), pre).model;
  model::save_checkpoint(base, layout.oracle() / "reduced_base.ckpt");
  const SpotOutputs spot = compute_importance(config, base, corpora, o.finetune_steps);

  std::vector<const corpus::Corpus*> parts;
  std::vector<corpus::Corpus> kept;
  kept.reserve(config.include.size());
  for (const auto& name : config.include) kept.push_back(corpus::truncate_corpus(corpora.code.at(name).eval, o.eval_docs));
  for (const auto& c : kept) parts.push_back(&c);
  const corpus::Corpus code_eval = corpus::merge_corpora(parts, "code_eval");
  const auto batches = corpus::sequential_batches(code_eval, model::kEvalBatchSize, o.model.context_len);

  const oracle::LeaveOneOutResult loo = oracle::leave_one_out(base, batches);
  write_text_file(layout.oracle() / "leave_one_out.csv",
                  oracle::leave_one_out_csv(base.registry, loo, spot.total.scores));
  const double rho = oracle::spearman(spot.total.scores, loo.true_delta);
  const std::size_t top1 = importance::spot_size(loo.true_delta.size(), 1.0);
  const std::size_t top5 = importance::spot_size(loo.true_delta.size(), 5.0);

  // Whole-model gradient check on a random subset of scalars.
  std::mt19937_64 rng(o.gradcheck_seed);
  std::vector<std::size_t> probe(base.parameters.size());
  std::iota(probe.begin(), probe.end(), std::size_t{0});
  std::shuffle(probe.begin(), probe.end(), rng);
  probe.resize(std::min<std::size_t>(probe.size(), 64));
  std::sort(probe.begin(), probe.end());
  const double model_err = oracle::model_gradcheck(base, batches.front(), probe);

  const auto taylor = oracle::taylor_probes(base, batches, 1e-3, 20);
  std::size_t taylor_within = 0;
  for (const auto& p : taylor) taylor_within += p.rel_error <= 0.5;

  const bool rank_ok = rho > o.spearman_bound;
  r.ok = grad.all_ok() && rank_ok && model_err <= 1e-6;

  nlohmann::json bounds;
  bounds["seed"] = {{"model", o.model.seed}, {"corpus", config.corpus.seed}, {"pretrain", pre.train.seed},
                    {"finetune", config.finetune.seed}, {"gradcheck", o.gradcheck_seed}};
  bounds["spearman_threshold"] = o.spearman_bound;
  bounds["spearman"] = rho;
  bounds["spearman_ok"] = rank_ok;
  bounds["topk_overlap_1pct"] = oracle::topk_overlap(spot.total.scores, loo.true_delta, top1);
  bounds["topk_overlap_5pct"] = oracle::topk_overlap(spot.total.scores, loo.true_delta, top5);
  bounds["scalars"] = loo.true_delta.size();
  bounds["base_loss"] = loo.base_loss;
  bounds["gradcheck_cases"] = grad.cases.size();
  bounds["gradcheck_failures"] = grad.failures();
  bounds["gradcheck_worst_rel_error"] = grad.worst();
  bounds["model_gradcheck_rel_error"] = model_err;
  bounds["taylor_probes"] = taylor.size();
  bounds["taylor_within_50pct"] = taylor_within;
  bounds["ok"] = r.ok;
  write_json(layout.oracle() / "bounds.json", bounds);
  r.summary = bounds;
  return r;
}

StageResult cmd_report(const PipelineConfig& config) {
  const RunLayout layout(config.run_dir);
  StageResult r;
  nlohmann::json s;
  s["schema_version"] = ablation::kReportSchemaVersion;
  const fs::path pre = layout.reports() / "pretrain.json";
  const fs::path spot = layout.reports() / "spot.json";
  const fs::path abl = layout.reports() / "ablation.json";
  const fs::path bounds = layout.oracle() / "bounds.json";
  for (const auto& p : {pre, spot, abl}) {
    if (!fs::exists(p)) fail(ErrorKind::kIo, "missing stage report " + p.filename().string());
  }
  s["pretrain"] = read_json(pre);
  s["spot"] = read_json(spot);
  const nlohmann::json ab = read_json(abl);
  s["ablation_original"] = ab["original"];
  s["ablation_summaries"] = ab["summaries"];
  if (fs::exists(bounds)) s["oracle"] = read_json(bounds);

  // Largest k in the sweep carries the specialisation and hold-out checks.
  const nlohmann::json* largest = nullptr;
  for (const auto& e : ab["summaries"]) {
    if (largest == nullptr || e["k_percent"].get<double>() > (*largest)["k_percent"].get<double>()) largest = &e;
  }
  if (largest != nullptr) {
    s["specialization"] = {{"k_percent", (*largest)["k_percent"]},
                           {"spot_beats_random_code", (*largest)["spot_beats_random_code"]},
                           {"spot_general_below_code", (*largest)["spot_general_below_code"]},
                           {"spot_beats_random_holdout", (*largest)["spot_beats_random_holdout"]}};
    r.ok = (*largest)["spot_beats_random_code"].get<bool>() && (*largest)["spot_general_below_code"].get<bool>();
  }
  s["ok"] = r.ok;
  write_json(layout.reports() / "summary.json", s);
  r.summary = s;
  return r;
}

}  // namespace codespot::pipeline
