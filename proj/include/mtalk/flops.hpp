#pragma once

#include <cstdint>

namespace mtalk::metrics {

// Multiply-accumulates of one single-head attention core over a length-L sequence of
// width H: L*L*H for the scores, L*L*H for the weighted sum, plus one unit per
// softmax entry.
constexpr std::uint64_t attention_macs(std::uint64_t length, std::uint64_t hidden) {
  return 2 * length * length * hidden + length * length;
}

}  // namespace mtalk::metrics
