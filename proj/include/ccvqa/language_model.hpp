#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccvqa/rope.hpp"

namespace ccvqa::lm {

using Logits = std::vector<double>;

// Next-token scorer over a token stream with explicit positions.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual TokenId eos_token() const = 0;
  // Logits for the token following `tokens`. Throws ShapeError when the
  // position map length differs from the token count.
  virtual Logits next_token_logits(std::span<const TokenId> tokens, const PositionMap& positions) const = 0;
};

// Byte-level tokens. Byte 0 doubles as end-of-sequence.
namespace bytes {
inline constexpr std::size_t kVocab = 256;
inline constexpr TokenId kEos = 0;
std::vector<TokenId> encode(std::string_view text);
std::string decode(std::span<const TokenId> tokens);
}  // namespace bytes

}  // namespace ccvqa::lm
