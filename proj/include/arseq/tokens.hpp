#pragma once

#include <string_view>

namespace arseq {

// Reserved vocabulary ids; every vocabulary starts with these four entries.
inline constexpr int kPadId = 0;
inline constexpr int kSosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kNumSpecial = 4;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kSosToken = "<sos>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kUnkToken = "<unk>";

inline bool is_special_token(std::string_view tok) {
  return tok == kPadToken || tok == kSosToken || tok == kEosToken || tok == kUnkToken;
}

inline bool is_special_id(int id) { return id >= 0 && id < kNumSpecial; }

}  // namespace arseq
