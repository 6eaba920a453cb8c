#pragma once

// Binary checkpoint, little-endian throughout:
//
//   "ARSEQCKP" u32 version
//   u32 n, n x (str key, str value)            metadata, sorted by key
//   u32 n, n x (str token, u64 count)          vocabulary in id order
//   u32 n, n x (str name, u32 rows, u32 cols, rows*cols f64 row-major)
//
// where str is u32 length + bytes. Tensors are the model parameters plus the
// "tables.vad" and "tables.frequency" affect tables.

#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include "arseq/corpus.hpp"
#include "arseq/model.hpp"

namespace arseq {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct LoadedCheckpoint {
  std::map<std::string, std::string> metadata;
  Vocabulary vocab;
  std::unique_ptr<Seq2Seq> model;
};

/// Model hyper-parameters are stored as `model.*` metadata entries alongside `extra`.
void save_checkpoint(const std::filesystem::path& path, const Seq2Seq& model, const Vocabulary& vocab,
                     const std::map<std::string, std::string>& extra = {});

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace arseq
