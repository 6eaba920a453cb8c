#pragma once

#include <string>
#include <vector>

#include "arseq/model.hpp"
#include "arseq/random.hpp"
#include "arseq/tokens.hpp"

namespace arseq::fixture {

inline MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.uniform(-scale, scale);
  return m;
}

/// Random normalized VAD rows (zero for reserved ids and every `neutral_every`-th
/// id) and random positive frequencies.
inline AffectTables random_tables(int vocab, std::uint64_t seed, int neutral_every = 3) {
  Rng rng(seed);
  AffectTables t = AffectTables::neutral(vocab);
  for (int i = kNumSpecial; i < vocab; ++i) {
    t.frequency[i] = 1e-4 + rng.uniform() * 0.05;
    if (neutral_every > 0 && i % neutral_every == 0) continue;
    t.vad.row(i) << rng.uniform(-2, 2), rng.uniform(0, 4), rng.uniform(-2, 2);
  }
  return t;
}

inline ModelConfig small_config(int vocab, int m = 6, int h = 5, int layers = 1) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.word_dim = m;
  c.hidden_dim = h;
  c.layers = layers;
  return c;
}

/// Model with every parameter uniform in [-range, range].
inline Seq2Seq random_model(const ModelConfig& config, std::uint64_t seed, double range = 0.5,
                            int neutral_every = 3) {
  Seq2Seq model(config, random_tables(config.vocab_size, seed + 1000, neutral_every));
  model.initialize(seed, range);
  return model;
}

inline std::vector<int> random_ids(Rng& rng, int vocab, std::size_t n) {
  std::vector<int> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(kNumSpecial + static_cast<int>(rng.below(vocab - kNumSpecial)));
  return ids;
}

}  // namespace arseq::fixture
