#include "arseq/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "json.hpp"

#include "arseq/random.hpp"

namespace arseq {

VadLexicon load_run_lexicon(const RunConfig& config) {
  if (config.lexicon_path.empty()) throw ConfigError("lexicon_path is not set");
  VadLexicon lex = load_lexicon(config.lexicon_path, config.scale()).lexicon;
  if (!config.synonyms_path.empty()) lex = extend_with_synonyms(lex, load_synonyms(config.synonyms_path));
  lex = finalize(std::move(lex));
  if (!config.lemmas_path.empty()) lex.set_lemma_map(load_lemma_map(config.lemmas_path));
  return lex;
}

PreparedData prepare_data(const RunConfig& config) {
  if (config.train_path.empty()) throw ConfigError("train_path is not set");
  PreparedData d;
  d.lexicon = load_run_lexicon(config);
  const auto max_len = static_cast<std::size_t>(config.max_len);
  d.train_pairs = load_pairs(config.train_path, max_len);
  if (d.train_pairs.empty()) throw ConfigError("no usable training pairs in " + config.train_path);
  if (!config.valid_path.empty()) d.valid_pairs = load_pairs(config.valid_path, max_len);
  d.vocab = Vocabulary::build(d.train_pairs, config.vocab_size);
  d.train = encode_pairs(d.vocab, d.train_pairs);
  d.valid = encode_pairs(d.vocab, d.valid_pairs);
  d.tables = AffectTables::build(d.vocab, d.lexicon, d.train);

  auto digest = [&](const char* key, const std::string& path) {
    if (!path.empty()) d.digests[std::string("digest.") + key] = file_digest(path);
  };
  digest("train", config.train_path);
  digest("valid", config.valid_path);
  digest("lexicon", config.lexicon_path);
  digest("synonyms", config.synonyms_path);
  digest("lemmas", config.lemmas_path);
  return d;
}

Seq2Seq make_model(const RunConfig& config, const PreparedData& data) {
  Seq2Seq model(config.model_config(static_cast<int>(data.vocab.size())), data.tables);
  model.initialize(config.seed, config.init_range);
  return model;
}

TrainRun run_training(const RunConfig& config, std::ostream* log) {
  const PreparedData data = prepare_data(config);
  const std::filesystem::path dir = std::filesystem::path(config.out_dir.empty() ? "." : config.out_dir);
  std::filesystem::create_directories(dir);

  TrainRun run;
  run.checkpoint = dir / "model.ckpt";
  run.manifest = dir / "manifest.cfg";
  run.metrics = dir / "metrics.jsonl";

  RunConfig manifest = config;
  manifest.info = data.digests;
  manifest.info["checkpoint"] = run.checkpoint.string();
  {
    std::ofstream out(run.manifest);
    out << "# run manifest; usable as a config file\n" << manifest.to_text();
    if (!out) throw ConfigError("cannot write " + run.manifest.string());
  }
  data.vocab.save(dir / "vocab.tsv");
  if (log)
    *log << "vocabulary " << data.vocab.size() << " tokens, " << data.train.size() << " training pairs, "
         << data.valid.size() << " validation pairs\n";

  Seq2Seq model = make_model(config, data);
  const AffectiveWeights weights = compute_weights(data.lexicon, data.vocab, config.delta);

  std::ofstream metrics(run.metrics, std::ios::trunc);
  const std::string manifest_name = run.manifest.filename().string();
  run.result = train(model, data.train, data.valid, weights, config.train_config(), [&](const EpochMetrics& m) {
    nlohmann::ordered_json j;
    j["epoch"] = m.epoch;
    j["train_loss"] = m.train_loss;
    j["val_ppl"] = std::isfinite(m.val_ppl) ? nlohmann::ordered_json(m.val_ppl) : nlohmann::ordered_json(nullptr);
    j["wall_time_s"] = m.wall_time_s;
    j["manifest"] = manifest_name;
    metrics << j.dump() << '\n' << std::flush;
    if (log) *log << j.dump() << '\n';
  });

  std::map<std::string, std::string> meta = data.digests;
  for (const auto& [k, v] : config.entries()) meta["config." + k] = v;
  meta["manifest"] = manifest_name;
  meta["best_epoch"] = std::to_string(run.result.best_epoch);
  save_checkpoint(run.checkpoint, model, data.vocab, meta);
  return run;
}

std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n >= size) return idx;
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace arseq
