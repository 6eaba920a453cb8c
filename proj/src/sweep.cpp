#include "arseq/sweep.hpp"

#include "json.hpp"

#include "arseq/decode.hpp"

namespace arseq {

std::vector<SweepPoint> SweepGrid::points() const {
  std::vector<SweepPoint> out;
  for (auto mode : modes)
    for (double l : lambdas)
      for (const auto& g : gammas)
        for (double d : deltas) out.push_back({l, g, d, mode});
  return out;
}

std::string to_json(const SweepRow& row) {
  nlohmann::ordered_json j;
  j["lambda"] = row.point.lambda;
  j["gamma"] = row.gamma;
  j["delta"] = row.point.delta;
  j["importance"] = std::string(to_string(row.point.importance));
  j["ok"] = row.ok;
  if (row.ok) {
    j["perplexity"] = row.perplexity;
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.affect.thresholds.size(); ++i)
      counts[format_double(row.affect.thresholds[i])] = row.affect.counts[i];
    j["affect_words"] = counts;
  } else {
    j["error"] = row.error;
  }
  return j.dump();
}

SweepRow sweep_run(const RunConfig& base, const PreparedData& data, const SweepPoint& point) {
  RunConfig cfg = base;
  cfg.lambda = point.lambda;
  cfg.gamma = point.gamma;
  cfg.delta = point.delta;
  cfg.importance = point.importance;

  SweepRow row;
  row.point = point;
  row.gamma = cfg.effective_gamma();

  Seq2Seq model = make_model(cfg, data);
  const AffectiveWeights weights = compute_weights(data.lexicon, data.vocab, cfg.delta);
  train(model, data.train, data.valid, weights, cfg.train_config());

  const auto& eval_set = data.valid.empty() ? data.train : data.valid;
  row.perplexity = perplexity(model, eval_set).perplexity;

  const auto& source = data.valid.empty() ? data.train_pairs : data.valid_pairs;
  const Responder responder(model, data.vocab, vocabulary_norms(data.vocab, data.lexicon), cfg.decode_options());
  std::vector<Tokens> responses;
  for (std::size_t i : sample_indices(source.size(), static_cast<std::size_t>(cfg.eval_samples), cfg.seed))
    responses.push_back(responder.respond_tokens(source[i].input).tokens);
  row.affect = affect_word_report(responses, data.lexicon);
  row.ok = true;
  return row;
}

std::vector<SweepRow> sweep(const RunConfig& base, const PreparedData& data, const std::vector<SweepPoint>& points,
                            const std::function<void(const SweepRow&)>& on_row) {
  if (points.empty()) throw std::invalid_argument("sweep: empty grid");
  std::vector<SweepRow> rows;
  for (const auto& p : points) {
    SweepRow row;
    try {
      row = sweep_run(base, data, p);
    } catch (const std::exception& e) {
      row = SweepRow{};
      row.point = p;
      RunConfig cfg = base;
      cfg.gamma = p.gamma;
      cfg.importance = p.importance;
      row.gamma = cfg.effective_gamma();
      row.error = e.what();
    }
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace arseq
