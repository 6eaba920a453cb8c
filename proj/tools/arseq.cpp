// arseq: train, evaluate, inspect and serve affect-aware conversation models.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "arseq/checkpoint.hpp"
#include "arseq/config.hpp"
#include "arseq/decode.hpp"
#include "arseq/eval.hpp"
#include "arseq/pipeline.hpp"
#include "arseq/serve.hpp"
#include "arseq/sweep.hpp"

using namespace arseq;

namespace {

std::string flag_name(std::string key) {
  for (auto& c : key)
    if (c == '_') c = '-';
  return "--" + key;
}

/// --config plus one flag per config key; flags win over the file.
struct ConfigFlags {
  std::string path;
  std::map<std::string, std::string> values;
  bool with_keys = true;

  void attach(CLI::App* app, bool keys = true) {
    with_keys = keys;
    app->add_option("-c,--config", path, "config file (default: $" + std::string(kConfigEnv) + ")");
    if (!with_keys) return;
    for (const auto& key : config_keys()) app->add_option(flag_name(key), values[key], "config key " + key);
  }

  std::optional<RunConfig> resolve(const CLI::App* app, bool required) const {
    std::string file = path;
    if (file.empty())
      if (const char* env = std::getenv(kConfigEnv)) file = env;
    RunConfig cfg;
    if (!file.empty()) {
      cfg = RunConfig::load(file);
    } else if (required) {
      throw ConfigError("no config file given (use --config or set " + std::string(kConfigEnv) + ")");
    } else {
      bool any = false;
      for (const auto& key : config_keys()) any = any || (with_keys && app->count(flag_name(key)) > 0);
      if (!any) return std::nullopt;
    }
    if (!with_keys) return cfg;
    for (const auto& key : config_keys())
      if (app->count(flag_name(key)) > 0) cfg.set(key, values.at(key));
    return cfg;
  }
};

RunConfig config_from_metadata(const std::map<std::string, std::string>& meta) {
  RunConfig cfg;
  for (const auto& [k, v] : meta)
    if (k.rfind("config.", 0) == 0) cfg.set(k.substr(7), v);
  return cfg;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("not a number: '" + item + "'");
    }
  }
  return out;
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

/// Checkpoint path and run config from --checkpoint or a manifest.
struct ModelSource {
  std::string checkpoint;
  ConfigFlags config;

  void attach(CLI::App* app) {
    app->add_option("--checkpoint", checkpoint, "checkpoint file (default: the manifest's checkpoint)");
    config.attach(app, false);
  }

  std::pair<LoadedCheckpoint, RunConfig> load(const CLI::App* app) const {
    std::optional<RunConfig> manifest = config.resolve(app, false);
    std::string path = checkpoint;
    if (path.empty() && manifest) {
      if (auto it = manifest->info.find("checkpoint"); it != manifest->info.end()) path = it->second;
    }
    if (path.empty()) throw ConfigError("no checkpoint given (use --checkpoint or a manifest with a checkpoint key)");
    LoadedCheckpoint ckpt = load_checkpoint(path);
    RunConfig cfg = manifest ? *manifest : config_from_metadata(ckpt.metadata);
    cfg.info["checkpoint"] = path;
    return {std::move(ckpt), std::move(cfg)};
  }
};

VectorXd table_norms(const Seq2Seq& model) { return model.tables().vad.rowwise().norm(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affect-aware neural conversation models"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model; writes checkpoint, metrics, vocabulary and manifest");
  ConfigFlags train_flags;
  train_flags.attach(train_cmd);
  bool quiet = false;
  train_cmd->add_flag("-q,--quiet", quiet, "no progress output");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "perplexity of a checkpoint on a pair file, as JSON");
  ModelSource eval_src;
  eval_src.attach(eval_cmd);
  std::string eval_pairs, eval_lexicon;
  int eval_samples = 0;
  eval_cmd->add_option("--pairs", eval_pairs, "tab-separated pairs (default: the config's valid_path)");
  eval_cmd->add_option("--lexicon", eval_lexicon, "also report affect-rich words of decoded responses");
  eval_cmd->add_option("--samples", eval_samples, "responses to decode for the affect report (default: eval_samples)");

  // chat
  auto* chat_cmd = app.add_subcommand("chat", "read messages from stdin, one response line per message");
  ModelSource chat_src;
  chat_src.attach(chat_cmd);
  std::optional<int> chat_beam;
  bool chat_no_rerank = false;
  chat_cmd->add_option("--beam-size", chat_beam, "beam size");
  chat_cmd->add_flag("--no-rerank", chat_no_rerank, "skip affect re-ranking");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP service: POST /api/respond, GET /api/health");
  ModelSource serve_src;
  serve_src.attach(serve_cmd);
  ServeOptions serve_opts;
  std::string serve_lexicon;
  serve_cmd->add_option("--lexicon", serve_lexicon, "lexicon for affect norms (default: the run's lexicon)");
  serve_cmd->add_option("--host", serve_opts.host, "bind address")->capture_default_str();
  serve_cmd->add_option("--port", serve_opts.port, "port, 0 for any")->capture_default_str();
  serve_cmd->add_option("--static", serve_opts.static_dir, "directory served at /");
  serve_cmd->add_option("--threads", serve_opts.threads, "worker threads")->capture_default_str()->check(
      CLI::PositiveNumber);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate one model per grid point, JSON lines out");
  ConfigFlags sweep_flags;
  sweep_flags.attach(sweep_cmd);
  std::string sw_lambdas, sw_gammas, sw_deltas, sw_modes, sweep_out;
  sweep_cmd->add_option("--lambdas", sw_lambdas, "comma-separated lambda values (default: config lambda)");
  sweep_cmd->add_option("--gammas", sw_gammas, "comma-separated gamma values or 'auto'");
  sweep_cmd->add_option("--deltas", sw_deltas, "comma-separated delta values");
  sweep_cmd->add_option("--modes", sw_modes, "comma-separated importance modes: ui,gi,li");
  sweep_cmd->add_option("-o,--out", sweep_out, "output file (default: stdout)");

  // inspect
  auto* inspect_cmd = app.add_subcommand("inspect", "analysis exports");
  inspect_cmd->require_subcommand(1);
  auto* att_cmd = inspect_cmd->add_subcommand("attention", "alignment matrix for one input, CSV");
  ModelSource att_src;
  att_src.attach(att_cmd);
  std::string att_input, att_response, att_out;
  att_cmd->add_option("--input", att_input, "input sentence")->required();
  att_cmd->add_option("--response", att_response, "response to align (default: the decoded response)");
  att_cmd->add_option("-o,--out", att_out, "output CSV (default: stdout)");

  auto* beta_cmd = inspect_cmd->add_subcommand("beta", "learned modifier scales per word, CSV");
  ModelSource beta_src;
  beta_src.attach(beta_cmd);
  std::string beta_words, beta_words_file, beta_out;
  beta_cmd->add_option("--words", beta_words, "comma-separated words");
  beta_cmd->add_option("--words-file", beta_words_file, "one word per line");
  beta_cmd->add_option("-o,--out", beta_out, "output CSV (default: stdout)");

  auto* aw_cmd = inspect_cmd->add_subcommand("affect-words", "distinct affect-rich words in a response file, JSON");
  std::string aw_lexicon, aw_synonyms, aw_responses, aw_thresholds = "1,2,3";
  aw_cmd->add_option("--lexicon", aw_lexicon, "lexicon CSV")->required();
  aw_cmd->add_option("--synonyms", aw_synonyms, "synonym file");
  aw_cmd->add_option("--responses", aw_responses, "one response per line")->required();
  aw_cmd->add_option("--thresholds", aw_thresholds, "comma-separated norm thresholds")->capture_default_str();

  // prep
  auto* prep_cmd = app.add_subcommand("prep", "data preparation");
  prep_cmd->require_subcommand(1);
  auto* prep_lex = prep_cmd->add_subcommand("lexicon", "extend with synonyms, clip and write a lexicon CSV");
  std::string pl_lexicon, pl_synonyms, pl_out;
  prep_lex->add_option("--lexicon", pl_lexicon, "raw lexicon CSV")->required();
  prep_lex->add_option("--synonyms", pl_synonyms, "synonym file");
  prep_lex->add_option("-o,--out", pl_out, "output CSV")->required();
  auto* prep_corpus = prep_cmd->add_subcommand("corpus", "tokenize and length-filter a pair file");
  std::string pc_in, pc_out;
  std::size_t pc_max_len = 20;
  prep_corpus->add_option("--input", pc_in, "raw tab-separated pairs")->required();
  prep_corpus->add_option("-o,--out", pc_out, "output pairs")->required();
  prep_corpus->add_option("--max-len", pc_max_len, "maximum tokens per side")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      const RunConfig cfg = *train_flags.resolve(train_cmd, true);
      const TrainRun run = run_training(cfg, quiet ? nullptr : &std::cerr);
      std::cout << nlohmann::ordered_json{{"checkpoint", run.checkpoint.string()},
                                          {"manifest", run.manifest.string()},
                                          {"metrics", run.metrics.string()},
                                          {"best_epoch", run.result.best_epoch}}
                       .dump()
                << '\n';
    } else if (*eval_cmd) {
      auto [ckpt, cfg] = eval_src.load(eval_cmd);
      const std::string pairs_path = eval_pairs.empty() ? cfg.valid_path : eval_pairs;
      if (pairs_path.empty()) throw ConfigError("no evaluation pairs (use --pairs)");
      const auto pairs = load_pairs(pairs_path, static_cast<std::size_t>(cfg.max_len));
      const auto encoded = encode_pairs(ckpt.vocab, pairs);
      std::cout << to_json(perplexity(*ckpt.model, encoded, pairs_path)) << '\n';
      if (!eval_lexicon.empty()) {
        cfg.lexicon_path = eval_lexicon;
        const VadLexicon lex = load_run_lexicon(cfg);
        const Responder responder(*ckpt.model, ckpt.vocab, vocabulary_norms(ckpt.vocab, lex), cfg.decode_options());
        const std::size_t n = static_cast<std::size_t>(eval_samples > 0 ? eval_samples : cfg.eval_samples);
        std::vector<Tokens> responses;
        for (std::size_t i : sample_indices(pairs.size(), n, cfg.seed))
          responses.push_back(responder.respond_tokens(pairs[i].input).tokens);
        std::cout << to_json(affect_word_report(responses, lex)) << '\n';
      }
    } else if (*chat_cmd) {
      auto [ckpt, cfg] = chat_src.load(chat_cmd);
      const Responder responder(*ckpt.model, ckpt.vocab, table_norms(*ckpt.model), cfg.decode_options());
      std::optional<bool> rerank;
      if (chat_no_rerank) rerank = false;
      std::string line;
      while (std::getline(std::cin, line)) {
        try {
          std::cout << responder.respond(line, chat_beam, rerank).text() << std::endl;
        } catch (const EmptyMessageError& e) {
          std::cerr << e.what() << '\n';
          std::cout << std::endl;
        }
      }
    } else if (*serve_cmd) {
      auto [ckpt, cfg] = serve_src.load(serve_cmd);
      if (!serve_lexicon.empty()) cfg.lexicon_path = serve_lexicon;
      const VadLexicon lex = load_run_lexicon(cfg);
      const std::string id = file_digest(cfg.info["checkpoint"]);
      const ChatService service(std::move(ckpt), lex, cfg.decode_options(), id);
      HttpServer server(service, serve_opts);
      const int port = server.bind();
      std::cerr << "listening on http://" << serve_opts.host << ":" << port << std::endl;
      server.listen();
    } else if (*sweep_cmd) {
      const RunConfig cfg = *sweep_flags.resolve(sweep_cmd, true);
      SweepGrid grid;
      grid.lambdas = sw_lambdas.empty() ? std::vector<double>{cfg.lambda} : parse_list(sw_lambdas);
      grid.deltas = sw_deltas.empty() ? std::vector<double>{cfg.delta} : parse_list(sw_deltas);
      if (sw_gammas.empty()) {
        grid.gammas = {cfg.gamma};
      } else {
        for (const auto& g : split_words(sw_gammas))
          grid.gammas.push_back(g == "auto" ? std::nullopt : std::optional<double>(parse_list(g).at(0)));
      }
      if (sw_modes.empty()) {
        grid.modes = {cfg.importance};
      } else {
        for (const auto& m : split_words(sw_modes)) grid.modes.push_back(parse_importance_mode(m));
      }
      const PreparedData data = prepare_data(cfg);
      std::ofstream file;
      if (!sweep_out.empty()) file.open(sweep_out);
      std::ostream& out = sweep_out.empty() ? std::cout : file;
      const auto rows = sweep(cfg, data, grid.points(), [&](const SweepRow& row) { out << to_json(row) << std::endl; });
      for (const auto& r : rows)
        if (!r.ok) std::cerr << "run failed: " << r.error << '\n';
    } else if (*att_cmd) {
      auto [ckpt, cfg] = att_src.load(att_cmd);
      Tokens input = preprocess(att_input);
      if (input.empty()) throw EmptyMessageError("input is empty after preprocessing");
      if (input.size() > static_cast<std::size_t>(cfg.max_len)) input.resize(static_cast<std::size_t>(cfg.max_len));
      const auto ids = ckpt.vocab.encode(input);
      std::vector<int> response;
      if (!att_response.empty()) {
        response = ckpt.vocab.encode(preprocess(att_response));
      } else {
        const Responder responder(*ckpt.model, ckpt.vocab, table_norms(*ckpt.model), cfg.decode_options());
        response = responder.respond_tokens(input).best.tokens;
      }
      const AttentionExport exp = export_attention(*ckpt.model, ckpt.vocab, ids, response);
      std::ofstream file;
      if (!att_out.empty()) file.open(att_out);
      write_attention_csv(att_out.empty() ? std::cout : file, exp);
    } else if (*beta_cmd) {
      auto [ckpt, cfg] = beta_src.load(beta_cmd);
      std::vector<std::string> words = split_words(beta_words);
      if (!beta_words_file.empty()) {
        std::ifstream in(beta_words_file);
        if (!in) throw ConfigError("cannot open " + beta_words_file);
        for (std::string w; std::getline(in, w);)
          if (!w.empty()) words.push_back(w);
      }
      std::vector<std::string> missing;
      const auto rows = export_beta(*ckpt.model, ckpt.vocab, words, &missing);
      for (const auto& w : missing) std::cerr << "not in vocabulary: " << w << '\n';
      std::ofstream file;
      if (!beta_out.empty()) file.open(beta_out);
      write_beta_csv(beta_out.empty() ? std::cout : file, rows);
    } else if (*aw_cmd) {
      RunConfig cfg;
      cfg.lexicon_path = aw_lexicon;
      cfg.synonyms_path = aw_synonyms;
      const VadLexicon lex = load_run_lexicon(cfg);
      std::ifstream in(aw_responses);
      if (!in) throw ConfigError("cannot open " + aw_responses);
      std::vector<Tokens> responses;
      for (std::string line; std::getline(in, line);) responses.push_back(preprocess(line));
      const auto thresholds = parse_list(aw_thresholds);
      std::cout << to_json(affect_word_report(responses, lex, thresholds)) << '\n';
    } else if (*prep_lex) {
      LexiconLoad load = load_lexicon(pl_lexicon);
      ExtensionStats stats;
      VadLexicon lex = load.lexicon;
      if (!pl_synonyms.empty()) lex = extend_with_synonyms(lex, load_synonyms(pl_synonyms), &stats);
      lex = finalize(std::move(lex));
      save_lexicon(lex, pl_out);
      std::cerr << load.rows << " rows, " << load.duplicates << " duplicates, " << stats.added
                << " added from synonyms, " << lex.size() << " entries written\n";
    } else if (*prep_corpus) {
      std::size_t skipped = 0;
      const auto raw = read_pair_file(pc_in, &skipped);
      std::vector<UtterancePair> pairs;
      for (const auto& r : raw) pairs.push_back({preprocess(r.input), preprocess(r.response)});
      const auto kept = filter_pairs(pairs, pc_max_len);
      save_pairs(kept, pc_out);
      std::cerr << raw.size() << " pairs read, " << skipped << " malformed lines, " << kept.size() << " kept\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
