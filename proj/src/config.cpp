#include "arseq/config.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <sstream>

#include "text_util.hpp"

namespace arseq {

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a_hex(buf.str());
}

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

double to_double(const std::string& key, const std::string& v) {
  auto d = text::parse_double(v);
  if (!d) bad_value(key, v, "a number");
  return *d;
}

long long to_integer(const std::string& key, const std::string& v, long long min) {
  const auto s = text::trim(v);
  long long out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad_value(key, v, "an integer");
  if (out < min) bad_value(key, v, min == 0 ? "a nonnegative integer" : "a positive integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define STRING_FIELD(name) \
  Field{#name, [](const RunConfig& c) { return c.name; }, [](RunConfig& c, const std::string& v) { c.name = v; }}
#define DOUBLE_FIELD(name)                                                \
  Field{#name, [](const RunConfig& c) { return format_double(c.name); }, \
        [](RunConfig& c, const std::string& v) { c.name = to_double(#name, v); }}
#define INT_FIELD(name, min)                                                  \
  Field{#name, [](const RunConfig& c) { return std::to_string(c.name); },    \
        [](RunConfig& c, const std::string& v) {                              \
          c.name = static_cast<decltype(c.name)>(to_integer(#name, v, min)); \
        }}
#define BOOL_FIELD(name)                                                       \
  Field{#name, [](const RunConfig& c) { return std::string(c.name ? "true" : "false"); }, \
        [](RunConfig& c, const std::string& v) { c.name = to_bool(#name, v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      STRING_FIELD(train_path),
      STRING_FIELD(valid_path),
      STRING_FIELD(lexicon_path),
      STRING_FIELD(synonyms_path),
      STRING_FIELD(lemmas_path),
      STRING_FIELD(out_dir),
      INT_FIELD(vocab_size, 5),
      INT_FIELD(max_len, 1),
      INT_FIELD(word_dim, 1),
      INT_FIELD(hidden_dim, 1),
      INT_FIELD(layers, 1),
      DOUBLE_FIELD(lambda),
      Field{"gamma", [](const RunConfig& c) { return c.gamma ? format_double(*c.gamma) : std::string("auto"); },
            [](RunConfig& c, const std::string& v) {
              if (v == "auto") c.gamma.reset();
              else c.gamma = to_double("gamma", v);
            }},
      DOUBLE_FIELD(delta),
      Field{"importance", [](const RunConfig& c) { return std::string(to_string(c.importance)); },
            [](RunConfig& c, const std::string& v) {
              try {
                c.importance = parse_importance_mode(v);
              } catch (const std::exception&) {
                bad_value("importance", v, "ui, gi or li");
              }
            }},
      DOUBLE_FIELD(a),
      DOUBLE_FIELD(epsilon),
      DOUBLE_FIELD(lr),
      DOUBLE_FIELD(beta1),
      DOUBLE_FIELD(beta2),
      INT_FIELD(batch_size, 1),
      INT_FIELD(epochs, 0),
      DOUBLE_FIELD(init_range),
      DOUBLE_FIELD(clip_norm),
      INT_FIELD(seed, 0),
      BOOL_FIELD(shuffle),
      INT_FIELD(beam_size, 1),
      INT_FIELD(decode_max_len, 1),
      DOUBLE_FIELD(mmi_weight),
      INT_FIELD(mmi_first_k, 0),
      BOOL_FIELD(rerank),
      DOUBLE_FIELD(clip_low),
      DOUBLE_FIELD(clip_high),
      Field{"neutral",
            [](const RunConfig& c) {
              return format_double(c.neutral[0]) + "," + format_double(c.neutral[1]) + "," +
                     format_double(c.neutral[2]);
            },
            [](RunConfig& c, const std::string& v) {
              const auto parts = text::split(v, ',');
              if (parts.size() != 3) bad_value("neutral", v, "three comma-separated numbers");
              for (int i = 0; i < 3; ++i) c.neutral[i] = to_double("neutral", parts[static_cast<std::size_t>(i)]);
            }},
      INT_FIELD(eval_samples, 1),
  };
  return table;
}

#undef STRING_FIELD
#undef DOUBLE_FIELD
#undef INT_FIELD
#undef BOOL_FIELD

bool is_info_key(const std::string& key) { return key.rfind("digest.", 0) == 0 || key == "checkpoint"; }

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.emplace_back(f.key);
    return k;
  }();
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (is_info_key(key)) {
    info[key] = value;
    return;
  }
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
  if (auto it = info.find(key); it != info.end()) return it->second;
  for (const auto& f : fields())
    if (key == f.key) return f.get(*this);
  return std::nullopt;
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  for (const auto& [k, v] : info) out += k + " = " + v + "\n";
  return out;
}

RunConfig RunConfig::parse(std::istream& in, const std::string& source) {
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) text::strip_bom(line);
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key(text::trim(body.substr(0, eq)));
    const std::string value(text::trim(body.substr(eq + 1)));
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

VadScale RunConfig::scale() const {
  VadScale s;
  s.clip_low = clip_low;
  s.clip_high = clip_high;
  s.neutral = neutral;
  return s;
}

ModelConfig RunConfig::model_config(int vocab) const {
  ModelConfig m;
  m.vocab_size = vocab;
  m.word_dim = word_dim;
  m.hidden_dim = hidden_dim;
  m.layers = layers;
  m.lambda = lambda;
  m.gamma = effective_gamma();
  m.importance = importance;
  m.importance_params = {a, epsilon};
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.adam = {lr, beta1, beta2, 1e-8};
  t.clip_norm = clip_norm;
  t.seed = seed;
  t.shuffle = shuffle;
  return t;
}

DecodeOptions RunConfig::decode_options() const {
  DecodeOptions d;
  d.beam_size = beam_size;
  d.max_len = decode_max_len;
  d.max_input_len = max_len;
  d.mmi_weight = mmi_weight;
  d.mmi_first_k = mmi_first_k;
  d.rerank = rerank;
  return d;
}

}  // namespace arseq
