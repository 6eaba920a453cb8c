#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

#include "arseq/checkpoint.hpp"
#include "arseq/config.hpp"
#include "arseq/decode.hpp"
#include "arseq/pipeline.hpp"
#include "arseq/sweep.hpp"
#include "fixtures.hpp"
#include "workspace.hpp"

using namespace arseq;
using namespace arseq::fixture;

namespace {

const std::string kData = ARSEQ_TEST_DATA;

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return RunConfig::parse(in, "test.cfg");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("config parsing: comments, defaults, typed values") {
  const RunConfig c = parse("\xEF\xBB\xBF# header\n\n  lambda = 0.3 \nimportance=gi\ngamma = auto\nshuffle = false\n"
                            "neutral = 5, 2.5, 5\nseed = 42\n");
  CHECK(c.lambda == 0.3);
  CHECK(c.importance == ImportanceMode::global);
  CHECK_FALSE(c.gamma.has_value());
  CHECK(c.effective_gamma() == 1.0);
  CHECK_FALSE(c.shuffle);
  CHECK(c.neutral == Vad(5, 2.5, 5));
  CHECK(c.seed == 42);
  CHECK(c.delta == 0.15);
  CHECK(parse("gamma = 2.5\n").effective_gamma() == 2.5);
  CHECK(parse("").effective_gamma() == 5.0);
}

TEST_CASE("config errors name the source line") {
  CHECK(error_of("lambda = 1\nbogus = 3\n").find("test.cfg:2") != std::string::npos);
  CHECK(error_of("bogus = 3\n").find("unknown config key 'bogus'") != std::string::npos);
  CHECK(error_of("epochs = -1\n").find("nonnegative") != std::string::npos);
  CHECK(error_of("lambda = fast\n").find("a number") != std::string::npos);
  CHECK(error_of("importance = zz\n").find("ui, gi or li") != std::string::npos);
  CHECK(error_of("justtext\n").find("key = value") != std::string::npos);
  CHECK(error_of("neutral = 1,2\n").find("three") != std::string::npos);
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/arseq.cfg"), ConfigError);
}

TEST_CASE("config text round-trips every key, including informational ones") {
  RunConfig c;
  c.lambda = 0.1 + 0.2;
  c.gamma = 1.0 / 3.0;
  c.train_path = "/data/train.tsv";
  c.importance = ImportanceMode::uniform;
  c.info["digest.train"] = "0123456789abcdef";
  c.info["checkpoint"] = "run/model.ckpt";
  const RunConfig back = parse(c.to_text());
  CHECK(back.entries() == c.entries());
  CHECK(back.info == c.info);
  CHECK(back.lambda == c.lambda);
  CHECK(*back.gamma == *c.gamma);

  std::vector<std::string> keys;
  for (const auto& [k, _] : c.entries()) keys.push_back(k);
  CHECK(keys == config_keys());
  for (const auto& k : config_keys()) CHECK(c.get(k).has_value());
  CHECK(c.get("checkpoint") == "run/model.ckpt");
  CHECK_FALSE(c.get("nope").has_value());
}

TEST_CASE("config maps onto component configs") {
  RunConfig c = parse("word_dim = 7\nhidden_dim = 9\nlr = 0.5\nbeam_size = 3\ndecode_max_len = 11\nmax_len = 13\n"
                      "importance = ui\nmmi_weight = 0\nrerank = false\n");
  const ModelConfig m = c.model_config(50);
  CHECK(m.vocab_size == 50);
  CHECK(m.word_dim == 7);
  CHECK(m.hidden_dim == 9);
  CHECK(m.gamma == 0.5);
  CHECK(c.train_config().adam.learning_rate == 0.5);
  const DecodeOptions d = c.decode_options();
  CHECK(d.beam_size == 3);
  CHECK(d.max_len == 11);
  CHECK(d.max_input_len == 13);
  CHECK(d.mmi_weight == 0.0);
  CHECK_FALSE(d.rerank);
}

TEST_CASE("number formatting and digests") {
  for (double v : {0.1, 1e-8, 1.0 / 3.0, 5.0, -2.5e300}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(5.0) == "5");
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(file_digest(kData + "/lexicon.csv").size() == 16);
  CHECK_THROWS(file_digest(kData + "/missing"));
}

TEST_CASE("checkpoints round-trip parameters, tables, vocabulary and metadata") {
  TempDir dir("ckpt");
  const Vocabulary vocab = Vocabulary::from_entries(
      {{"<pad>", 0}, {"<sos>", 0}, {"<eos>", 0}, {"<unk>", 0}, {"hi", 9}, {"there", 4}, {"nice", 2}, {"day", 1}});
  ModelConfig cfg = small_config(8, 5, 4, 2);
  cfg.importance = ImportanceMode::global;
  cfg.gamma = 1.25;
  const Seq2Seq model = random_model(cfg, 17);
  save_checkpoint(dir / "m.ckpt", model, vocab, {{"note", "x y"}});
  const LoadedCheckpoint ck = load_checkpoint(dir / "m.ckpt");

  CHECK(ck.metadata.at("note") == "x y");
  CHECK(ck.vocab.tokens() == vocab.tokens());
  CHECK(ck.vocab.counts() == vocab.counts());
  const ModelConfig& lc = ck.model->config();
  CHECK(lc.layers == 2);
  CHECK(lc.gamma == 1.25);
  CHECK(lc.importance == ImportanceMode::global);
  const auto a = model.params().all();
  const auto b = ck.model->params().all();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(a[i]->value == b[i]->value);
  }
  CHECK(ck.model->tables().vad == model.tables().vad);
  CHECK(ck.model->tables().frequency == model.tables().frequency);

  const EncodedPair pair{{4, 5, 6}, {7, 4}};
  TapeD t1, t2;
  CHECK(ForwardPass(t1, model).sequence_loss(pair, VectorXd::Ones(8)).nll ==
        ForwardPass(t2, *ck.model).sequence_loss(pair, VectorXd::Ones(8)).nll);

  // Same content, same bytes.
  save_checkpoint(dir / "again.ckpt", *ck.model, ck.vocab, {{"note", "x y"}});
  CHECK(slurp(dir / "m.ckpt") == slurp(dir / "again.ckpt"));
}

TEST_CASE("corrupt checkpoints are rejected") {
  TempDir dir("ckpt_bad");
  const Vocabulary vocab = Vocabulary::from_entries({{"<pad>", 0}, {"<sos>", 0}, {"<eos>", 0}, {"<unk>", 0}, {"a", 1}});
  save_checkpoint(dir / "m.ckpt", random_model(small_config(5), 1), vocab);
  const std::string bytes = slurp(dir / "m.ckpt");
  {
    std::ofstream out(dir / "short.ckpt", std::ios::binary);
    out << bytes.substr(0, bytes.size() / 2);
  }
  {
    std::ofstream out(dir / "magic.ckpt", std::ios::binary);
    out << "NOTACKPT" << bytes.substr(8);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), CheckpointError);
}

TEST_CASE("sample_indices is sorted, distinct and seeded") {
  const auto a = sample_indices(100, 10, 3);
  CHECK(a.size() == 10);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
  CHECK(a == sample_indices(100, 10, 3));
  CHECK(a != sample_indices(100, 10, 4));
  CHECK(sample_indices(5, 10, 1) == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("prepare_data builds vocabulary, pairs and affect tables") {
  TempDir dir("prep");
  const RunConfig c = tiny_run_config(dir.path(), kData);
  const PreparedData d = prepare_data(c);
  CHECK(d.train.size() == 40);
  CHECK(d.valid.size() == 8);
  CHECK(d.vocab.contains("nice"));
  CHECK(d.tables.vad.rows() == static_cast<Eigen::Index>(d.vocab.size()));
  CHECK(d.tables.vad.row(d.vocab.id("nice")).norm() == doctest::Approx(2.4989).epsilon(1e-4));
  CHECK(d.tables.vad.row(kEosId).isZero(0.0));
  CHECK(d.digests.at("digest.train") == file_digest(c.train_path));
  CHECK(d.lexicon.contains("pleasant"));
}

TEST_CASE("training runs write a reproducible manifest and checkpoint") {
  TempDir dir("train");
  const RunConfig c = tiny_run_config(dir.path(), kData);
  std::ostringstream log;
  const TrainRun run = run_training(c, &log);
  CHECK(std::filesystem::exists(run.checkpoint));
  CHECK(std::filesystem::exists(dir.path() / "run" / "vocab.tsv"));
  CHECK(log.str().find("vocabulary") != std::string::npos);

  std::ifstream metrics(run.metrics);
  std::string line;
  int epochs = 0;
  while (std::getline(metrics, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["epoch"].get<int>() == ++epochs);
    CHECK(j["manifest"].get<std::string>() == "manifest.cfg");
    CHECK(j["val_ppl"].is_number());
  }
  CHECK(epochs == 3);

  const RunConfig manifest = RunConfig::load(run.manifest);
  CHECK(manifest.get("checkpoint") == run.checkpoint.string());
  CHECK(manifest.entries() == c.entries());

  const LoadedCheckpoint ck = load_checkpoint(run.checkpoint);
  CHECK(ck.metadata.at("config.lambda") == "0.1");
  CHECK(ck.metadata.at("manifest") == "manifest.cfg");
  CHECK(std::stoi(ck.metadata.at("best_epoch")) >= 1);

  const std::string first = slurp(run.checkpoint);
  run_training(manifest);
  CHECK(slurp(run.checkpoint) == first);
}

TEST_CASE("sweep grids and runs") {
  SweepGrid grid;
  grid.modes = {ImportanceMode::uniform, ImportanceMode::local};
  grid.lambdas = {0.0, 0.1};
  grid.gammas = {std::nullopt};
  grid.deltas = {0.0, 0.5, 1.0};
  const auto points = grid.points();
  REQUIRE(points.size() == 12);
  CHECK(points[0].importance == ImportanceMode::uniform);
  CHECK(points[0].delta == 0.0);
  CHECK(points[1].delta == 0.5);
  CHECK(points[3].lambda == 0.1);
  CHECK(points[6].importance == ImportanceMode::local);

  TempDir dir("sweep");
  RunConfig c = tiny_run_config(dir.path(), kData);
  c.epochs = 1;
  const PreparedData data = prepare_data(c);
  SweepPoint bad;
  bad.delta = -1.0;
  std::vector<SweepRow> seen;
  const auto rows = sweep(c, data, {SweepPoint{}, bad}, [&](const SweepRow& r) { seen.push_back(r); });
  REQUIRE(rows.size() == 2);
  CHECK(seen.size() == 2);
  CHECK(rows[0].ok);
  CHECK(rows[0].gamma == 5.0);
  CHECK(rows[0].perplexity > 1.0);
  CHECK(rows[0].affect.responses == 5);
  CHECK(rows[0].affect.counts.size() == 3);
  CHECK_FALSE(rows[1].ok);
  CHECK_FALSE(rows[1].error.empty());
  const auto j = nlohmann::json::parse(to_json(rows[0]));
  CHECK(j["ok"].get<bool>());
}
