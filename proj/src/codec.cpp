#include "dk2/codec.hpp"

#include <stdexcept>

namespace dk2::etdc {

unsigned length(uint64_t index) {
    uint64_t base = 0;
    for (unsigned len = 1; len <= 4; ++len) {
        base += kClassSize[len - 1];
        if (index < base) return len;
    }
    throw std::out_of_range("etdc: index beyond 4-byte code space");
}

unsigned encode(uint64_t index, uint8_t out[4]) {
    unsigned len = length(index);
    uint64_t rel = index;
    for (unsigned i = 1; i < len; ++i) rel -= kClassSize[i - 1];
    // rel written base-128, most significant digit first; final byte tagged.
    for (unsigned i = len; i-- > 0;) {
        uint8_t digit = uint8_t(rel & 0x7F);
        rel >>= 7;
        out[i] = (i == len - 1) ? uint8_t(digit | 0x80) : digit;
    }
    return len;
}

Decoded decode(std::span<const uint8_t> bytes, size_t offset) {
    uint64_t rel = 0;
    for (unsigned i = 0; i < 4; ++i) {
        if (offset + i >= bytes.size())
            throw std::runtime_error("etdc: truncated codeword");
        uint8_t b = bytes[offset + i];
        rel = (rel << 7) | (b & 0x7F);
        if (b & 0x80) {
            uint64_t base = 0;
            for (unsigned j = 0; j < i; ++j) base += kClassSize[j];
            return Decoded{base + rel, i + 1};
        }
    }
    throw std::runtime_error("etdc: no terminator within 4 bytes");
}

size_t skip(std::span<const uint8_t> bytes, size_t offset) {
    for (unsigned i = 0; i < 4; ++i) {
        if (offset + i >= bytes.size())
            throw std::runtime_error("etdc: truncated codeword");
        if (bytes[offset + i] & 0x80) return offset + i + 1;
    }
    throw std::runtime_error("etdc: no terminator within 4 bytes");
}

}  // namespace dk2::etdc

namespace dk2 {

RankSamples rebuild_samples(const BitVec& bits, uint32_t period) {
    RankSamples s;
    s.period = period;
    if (period == 0) return s;
    uint64_t full = bits.size() / period;
    s.counts.resize(full);
    for (uint64_t i = 0; i < full; ++i)
        s.counts[i] = uint16_t(bits.popcount_range(i * period, (i + 1) * period));
    return s;
}

uint64_t block_rank1(const BitVec& bits, const RankSamples& samples, uint64_t pos) {
    if (pos > bits.size()) throw std::out_of_range("block_rank1: position beyond block");
    if (samples.period == 0) return bits.popcount_range(0, pos);
    uint64_t full = pos / samples.period;
    if (full > samples.counts.size()) full = samples.counts.size();
    uint64_t r = 0;
    for (uint64_t i = 0; i < full; ++i) r += samples.counts[i];
    r += bits.popcount_range(full * samples.period, pos);
    return r;
}

}  // namespace dk2
