#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace lsi {

// Byte-level tokenizer: ids 0..255 are the raw byte values, followed by the
// reserved control ids. Stateless; safe for concurrent use.
namespace tok {

constexpr int PAD = 256;
constexpr int BOS = 257;
constexpr int EOS = 258;
constexpr int SEP = 259;
constexpr int VOCAB_SIZE = 260;

inline bool is_special(int id) { return id >= 256 && id < VOCAB_SIZE; }

std::vector<int> encode(std::string_view text);

// strict = true rejects control ids and reports their positions.
std::string decode(const std::vector<int> &ids, bool strict = true);

// Keeps the prefix; output length is at most limit.
std::vector<int> truncate(std::vector<int> ids, size_t limit);

} // namespace tok

} // namespace lsi
