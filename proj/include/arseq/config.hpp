#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "arseq/decode.hpp"
#include "arseq/lexicon.hpp"
#include "arseq/model.hpp"
#include "arseq/train.hpp"

namespace arseq {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Environment variable naming the default config file.
inline constexpr const char* kConfigEnv = "ARSEQ_CONFIG";

/// Flat `key = value` run configuration. Lines starting with '#' are
/// comments. Keys under `digest.` and the `checkpoint` key are informational
/// (written into manifests) and kept verbatim.
struct RunConfig {
  std::string train_path;
  std::string valid_path;
  std::string lexicon_path;
  std::string synonyms_path;
  std::string lemmas_path;
  std::string out_dir = "run";

  std::size_t vocab_size = 30000;
  int max_len = 20;

  int word_dim = 64;
  int hidden_dim = 64;
  int layers = 1;
  double lambda = 0.1;
  std::optional<double> gamma;  // unset: mode default
  double delta = 0.15;
  ImportanceMode importance = ImportanceMode::local;
  double a = 1e-3;
  double epsilon = 1e-8;

  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 64;
  int epochs = 5;
  double init_range = 0.08;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  bool shuffle = true;

  int beam_size = 20;
  int decode_max_len = 20;
  double mmi_weight = 0.25;
  int mmi_first_k = 5;
  bool rerank = true;

  double clip_low = 3.0;
  double clip_high = 7.0;
  Vad neutral{5.0, 3.0, 5.0};

  int eval_samples = 200;

  std::map<std::string, std::string> info;

  static RunConfig parse(std::istream& in, const std::string& source = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  /// Assigns one key; throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& key) const;

  /// Every key with its current value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string to_text() const;

  double effective_gamma() const { return gamma.value_or(default_gamma(importance)); }
  VadScale scale() const;
  ModelConfig model_config(int vocab) const;
  TrainConfig train_config() const;
  DecodeOptions decode_options() const;
};

/// Keys accepted by RunConfig::set, in file order.
const std::vector<std::string>& config_keys();

std::string format_double(double v);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

}  // namespace arseq
