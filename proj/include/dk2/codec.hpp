#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dk2/bitvec.hpp"

namespace dk2::etdc {

// End-tagged dense byte codes. The final byte of a codeword has its high bit
// set (0x80..0xFF); non-final bytes use 0x00..0x7F. Codes are assigned densely
// by length and then lexicographically, so there are 128 one-byte codes,
// 2^14 two-byte codes, 2^21 three-byte codes and 2^28 four-byte codes.
inline constexpr uint64_t kClassSize[4] = {
    uint64_t(1) << 7, uint64_t(1) << 14, uint64_t(1) << 21, uint64_t(1) << 28};
inline constexpr uint64_t kMaxCodes =
    kClassSize[0] + kClassSize[1] + kClassSize[2] + kClassSize[3];

unsigned length(uint64_t index);

// Writes the codeword for index into out, returns its length (1..4).
unsigned encode(uint64_t index, uint8_t out[4]);

struct Decoded {
    uint64_t index;
    unsigned consumed;
};

// Decodes one codeword starting at offset.
Decoded decode(std::span<const uint8_t> bytes, size_t offset);

// Returns the offset just past the codeword starting at offset.
size_t skip(std::span<const uint8_t> bytes, size_t offset);

}  // namespace dk2::etdc

namespace dk2 {

// Per-block rank acceleration: counts[i] holds the number of 1s in the i-th
// full period of the block. A trailing slice shorter than one period carries
// no counter.
struct RankSamples {
    uint32_t period = 0;
    std::vector<uint16_t> counts;
};

RankSamples rebuild_samples(const BitVec& bits, uint32_t period);

// Number of 1s in bits[0, pos).
uint64_t block_rank1(const BitVec& bits, const RankSamples& samples, uint64_t pos);

}  // namespace dk2
