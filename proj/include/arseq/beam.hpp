#pragma once

// Length-capped beam search over any step-wise decoder.
//
// A decoder supplies
//   State                                     opaque per-hypothesis state
//   std::pair<State, VectorXd> start()         state after <sos>, next-token log-probs
//   std::pair<State, VectorXd> advance(const State&, int token)
//
// Tokens with non-finite log-probability are never expanded. A hypothesis that
// reaches max_len without emitting EOS is completed as is (forced end); the
// forced EOS adds nothing to its log-probability.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "arseq/tensor.hpp"
#include "arseq/tokens.hpp"

namespace arseq {

struct Hypothesis {
  std::vector<int> tokens;  // content tokens, without <sos>/<eos>
  double log_prob = 0.0;
  bool complete = false;
  bool forced_end = false;
  double score = 0.0;  // length-normalized log-probability
  double mmi_score = 0.0;
  double affect_score = 0.0;
};

struct BeamOptions {
  int beam_size = 20;
  int max_len = 20;
  int eos_id = kEosId;
  std::vector<int> banned{kPadId, kSosId};
};

namespace detail {

inline bool hypothesis_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

}  // namespace detail

/// Returns up to beam_size completed hypotheses, best log-probability first
/// (ties by token sequence).
template <typename Decoder>
std::vector<Hypothesis> beam_search(Decoder& decoder, const BeamOptions& options) {
  if (options.beam_size < 1) throw std::invalid_argument("beam_search: beam_size must be at least 1");
  if (options.max_len < 1) throw std::invalid_argument("beam_search: max_len must be at least 1");
  using State = typename Decoder::State;
  struct Alive {
    std::vector<int> tokens;
    double log_prob;
    State state;
    VectorXd next;
  };
  struct Candidate {
    double log_prob;
    std::size_t parent;
    int token;
  };
  const std::size_t beam = static_cast<std::size_t>(options.beam_size);

  std::vector<Alive> alive;
  {
    auto [state, next] = decoder.start();
    alive.push_back({{}, 0.0, std::move(state), std::move(next)});
  }
  std::vector<Hypothesis> done;

  auto kth_completed = [&]() {
    std::vector<double> lps;
    for (const auto& h : done) lps.push_back(h.log_prob);
    std::nth_element(lps.begin(), lps.begin() + static_cast<std::ptrdiff_t>(beam - 1), lps.end(),
                     std::greater<>());
    return lps[beam - 1];
  };

  for (int len = 1; len <= options.max_len && !alive.empty(); ++len) {
    std::vector<Candidate> cands;
    for (std::size_t p = 0; p < alive.size(); ++p) {
      const VectorXd& next = alive[p].next;
      for (Eigen::Index tok = 0; tok < next.size(); ++tok) {
        const int id = static_cast<int>(tok);
        if (!std::isfinite(next[tok])) continue;
        if (std::find(options.banned.begin(), options.banned.end(), id) != options.banned.end()) continue;
        cands.push_back({alive[p].log_prob + next[tok], p, id});
      }
    }
    const std::size_t keep = std::min(beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        return std::tie(b.log_prob, a.parent, a.token) < std::tie(a.log_prob, b.parent, b.token);
                      });
    cands.resize(keep);

    std::vector<Alive> next_alive;
    for (const auto& c : cands) {
      const Alive& parent = alive[c.parent];
      Hypothesis h;
      h.tokens = parent.tokens;
      h.log_prob = c.log_prob;
      if (c.token == options.eos_id) {
        h.complete = true;
        done.push_back(std::move(h));
        continue;
      }
      h.tokens.push_back(c.token);
      if (len == options.max_len) {
        h.complete = true;
        h.forced_end = true;
        done.push_back(std::move(h));
        continue;
      }
      auto [state, next] = decoder.advance(parent.state, c.token);
      next_alive.push_back({std::move(h.tokens), c.log_prob, std::move(state), std::move(next)});
    }
    alive = std::move(next_alive);

    // Log-probabilities only decrease, so no alive hypothesis can enter the
    // top beam once the best of them is below the b-th completed one.
    if (!alive.empty() && done.size() >= beam) {
      double best_alive = -std::numeric_limits<double>::infinity();
      for (const auto& a : alive) best_alive = std::max(best_alive, a.log_prob);
      if (best_alive < kth_completed()) break;
    }
  }

  std::sort(done.begin(), done.end(), detail::hypothesis_before);
  if (done.size() > beam) done.resize(beam);
  for (auto& h : done) h.score = h.mmi_score = h.log_prob;
  return done;
}

/// Greedy decoding; the reference for beam_size = 1.
template <typename Decoder>
Hypothesis greedy_decode(Decoder& decoder, const BeamOptions& options) {
  Hypothesis h;
  auto [state, next] = decoder.start();
  for (int len = 1; len <= options.max_len; ++len) {
    int best = -1;
    for (Eigen::Index tok = 0; tok < next.size(); ++tok) {
      const int id = static_cast<int>(tok);
      if (!std::isfinite(next[tok])) continue;
      if (std::find(options.banned.begin(), options.banned.end(), id) != options.banned.end()) continue;
      if (best < 0 || next[tok] > next[best]) best = id;
    }
    if (best < 0) break;
    h.log_prob += next[best];
    if (best == options.eos_id) break;
    h.tokens.push_back(best);
    if (len == options.max_len) {
      h.forced_end = true;
      break;
    }
    std::tie(state, next) = decoder.advance(state, best);
  }
  h.complete = true;
  h.score = h.mmi_score = h.log_prob;
  return h;
}

}  // namespace arseq
