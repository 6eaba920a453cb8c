#include "arseq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "arseq/config.hpp"
#include "text_util.hpp"

namespace arseq {

namespace {

constexpr char kMagic[8] = {'A', 'R', 'S', 'E', 'Q', 'C', 'K', 'P'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  void le(std::uint64_t v, int bytes) {
    char buf[8];
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(buf, bytes);
  }
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 28)) fail("implausible string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
  }
  [[noreturn]] void fail(const std::string& what) const { throw CheckpointError(source_ + ": " + what); }

 private:
  std::uint64_t le(int bytes) {
    unsigned char buf[8];
    read(reinterpret_cast<char*>(buf), static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
  std::string source_;
};

void write_tensor(Writer& w, const std::string& name, const MatrixXd& m) {
  w.str(name);
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
}

std::map<std::string, std::string> model_metadata(const ModelConfig& c) {
  return {
      {"model.vocab_size", std::to_string(c.vocab_size)},
      {"model.word_dim", std::to_string(c.word_dim)},
      {"model.hidden_dim", std::to_string(c.hidden_dim)},
      {"model.layers", std::to_string(c.layers)},
      {"model.lambda", format_double(c.lambda)},
      {"model.gamma", format_double(c.gamma)},
      {"model.importance", std::string(to_string(c.importance))},
      {"model.a", format_double(c.importance_params.a)},
      {"model.epsilon", format_double(c.importance_params.epsilon)},
  };
}

ModelConfig model_config_from(const std::map<std::string, std::string>& meta, const Reader& rd) {
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) rd.fail("missing metadata " + key);
    return it->second;
  };
  auto num = [&](const std::string& key) {
    auto v = text::parse_double(need(key));
    if (!v) rd.fail("bad metadata " + key);
    return *v;
  };
  ModelConfig c;
  c.vocab_size = static_cast<int>(num("model.vocab_size"));
  c.word_dim = static_cast<int>(num("model.word_dim"));
  c.hidden_dim = static_cast<int>(num("model.hidden_dim"));
  c.layers = static_cast<int>(num("model.layers"));
  c.lambda = num("model.lambda");
  c.gamma = num("model.gamma");
  c.importance = parse_importance_mode(need("model.importance"));
  c.importance_params.a = num("model.a");
  c.importance_params.epsilon = num("model.epsilon");
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Seq2Seq& model, const Vocabulary& vocab,
                     const std::map<std::string, std::string>& extra) {
  if (vocab.size() != static_cast<std::size_t>(model.config().vocab_size))
    throw CheckpointError("vocabulary size does not match the model");
  auto meta = model_metadata(model.config());
  for (const auto& [k, v] : extra) meta.emplace(k, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  Writer w(out);
  out.write(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(vocab.size()));
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    w.str(vocab.tokens()[i]);
    w.u64(vocab.counts()[i]);
  }
  const auto params = model.params().all();
  w.u32(static_cast<std::uint32_t>(params.size() + 2));
  for (const auto* p : params) write_tensor(w, p->name, p->value);
  write_tensor(w, "tables.vad", model.tables().vad);
  write_tensor(w, "tables.frequency", model.tables().frequency);
  out.flush();
  if (!out) throw CheckpointError("write failed for " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  Reader rd(in, path.string());
  char magic[8];
  rd.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) rd.fail("not a checkpoint file");
  if (const auto version = rd.u32(); version != kCheckpointVersion)
    rd.fail("unsupported version " + std::to_string(version));

  LoadedCheckpoint out;
  for (std::uint32_t n = rd.u32(), i = 0; i < n; ++i) {
    std::string k = rd.str();
    out.metadata[k] = rd.str();
  }
  std::vector<std::pair<std::string, std::size_t>> entries;
  for (std::uint32_t n = rd.u32(), i = 0; i < n; ++i) {
    std::string tok = rd.str();
    entries.emplace_back(std::move(tok), static_cast<std::size_t>(rd.u64()));
  }
  out.vocab = Vocabulary::from_entries(std::move(entries));

  std::map<std::string, MatrixXd> tensors;
  for (std::uint32_t n = rd.u32(), i = 0; i < n; ++i) {
    std::string name = rd.str();
    const std::uint32_t rows = rd.u32(), cols = rd.u32();
    if (static_cast<std::uint64_t>(rows) * cols > (1ULL << 32)) rd.fail("tensor " + name + " is implausibly large");
    MatrixXd m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = rd.f64();
    tensors[name] = std::move(m);
  }

  const ModelConfig cfg = model_config_from(out.metadata, rd);
  if (static_cast<std::size_t>(cfg.vocab_size) != out.vocab.size()) rd.fail("vocabulary size mismatch");
  auto take = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    auto it = tensors.find(name);
    if (it == tensors.end()) rd.fail("missing tensor " + name);
    if (it->second.rows() != rows || it->second.cols() != cols)
      rd.fail("tensor " + name + " has shape " + std::to_string(it->second.rows()) + "x" +
              std::to_string(it->second.cols()) + ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    return std::move(it->second);
  };
  AffectTables tables;
  tables.vad = take("tables.vad", cfg.vocab_size, 3);
  tables.frequency = take("tables.frequency", cfg.vocab_size, 1);
  out.model = std::make_unique<Seq2Seq>(cfg, std::move(tables));
  for (auto* p : out.model->params().all()) p->value = take(p->name, p->value.rows(), p->value.cols());
  return out;
}

}  // namespace arseq
