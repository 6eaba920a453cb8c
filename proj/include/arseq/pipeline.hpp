#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "arseq/checkpoint.hpp"
#include "arseq/config.hpp"
#include "arseq/corpus.hpp"
#include "arseq/lexicon.hpp"
#include "arseq/loss.hpp"
#include "arseq/model.hpp"
#include "arseq/train.hpp"

namespace arseq {

/// Lexicon from config paths: annotations, optional synonyms and lemma map, finalized.
VadLexicon load_run_lexicon(const RunConfig& config);

struct PreparedData {
  VadLexicon lexicon;
  Vocabulary vocab;
  std::vector<UtterancePair> train_pairs;
  std::vector<UtterancePair> valid_pairs;
  std::vector<EncodedPair> train;
  std::vector<EncodedPair> valid;
  AffectTables tables;
  /// digest.* entries for every input file.
  std::map<std::string, std::string> digests;
};

PreparedData prepare_data(const RunConfig& config);

struct TrainRun {
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::filesystem::path metrics;
  TrainResult result;
};

/// Trains into out_dir: model.ckpt, metrics.jsonl, vocab.tsv and manifest.cfg.
/// The manifest is a config file that reproduces the run.
TrainRun run_training(const RunConfig& config, std::ostream* log = nullptr);

/// Fresh seeded model for a config and prepared data.
Seq2Seq make_model(const RunConfig& config, const PreparedData& data);

/// Deterministic sample of up to n indices out of `size`, in ascending order.
std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, std::uint64_t seed);

}  // namespace arseq
