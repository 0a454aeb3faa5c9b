#pragma once

#include <bit>
#include <cassert>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace dk2 {

// Growable bit buffer, word-packed, LSB-first within each 64-bit word.
// Bits at positions >= size() are kept zero so whole-word operations
// (popcount, serialization, comparison) need no masking.
class BitVec {
public:
    BitVec() = default;

    uint64_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    bool get(uint64_t pos) const {
        assert(pos < size_);
        return (words_[pos >> 6] >> (pos & 63)) & 1u;
    }

    void set(uint64_t pos, bool v) {
        assert(pos < size_);
        uint64_t mask = uint64_t(1) << (pos & 63);
        if (v) words_[pos >> 6] |= mask;
        else   words_[pos >> 6] &= ~mask;
    }

    void flip(uint64_t pos) {
        assert(pos < size_);
        words_[pos >> 6] ^= uint64_t(1) << (pos & 63);
    }

    void push_back(bool v) {
        grow_to(size_ + 1);
        if (v) words_[(size_ - 1) >> 6] |= uint64_t(1) << ((size_ - 1) & 63);
    }

    // Reads n <= 64 bits starting at pos into the low bits of the result.
    uint64_t read_bits(uint64_t pos, unsigned n) const {
        assert(n <= 64 && pos + n <= size_);
        if (n == 0) return 0;
        uint64_t wi = pos >> 6;
        unsigned off = unsigned(pos & 63);
        uint64_t lo = words_[wi] >> off;
        if (off + n > 64) lo |= words_[wi + 1] << (64 - off);
        return n == 64 ? lo : (lo & ((uint64_t(1) << n) - 1));
    }

    // Writes the low n <= 64 bits of w at pos (must already be in range).
    void write_bits(uint64_t pos, unsigned n, uint64_t w) {
        assert(n <= 64 && pos + n <= size_);
        if (n == 0) return;
        if (n < 64) w &= (uint64_t(1) << n) - 1;
        uint64_t wi = pos >> 6;
        unsigned off = unsigned(pos & 63);
        uint64_t lomask = (n == 64 && off == 0) ? ~uint64_t(0)
                                                : (((n < 64 ? (uint64_t(1) << n) - 1 : ~uint64_t(0))) << off);
        words_[wi] = (words_[wi] & ~lomask) | (w << off);
        if (off + n > 64) {
            unsigned hi = off + n - 64;
            uint64_t himask = (uint64_t(1) << hi) - 1;
            words_[wi + 1] = (words_[wi + 1] & ~himask) | (w >> (64 - off));
        }
    }

    void append_bits(uint64_t w, unsigned n) {
        uint64_t at = size_;
        grow_to(size_ + n);
        write_bits(at, n, w);
    }

    void append(const BitVec& other) {
        uint64_t m = other.size_, src = 0;
        while (m > 0) {
            unsigned chunk = unsigned(m < 64 ? m : 64);
            append_bits(other.read_bits(src, chunk), chunk);
            src += chunk; m -= chunk;
        }
    }

    // Inserts n <= 64 bits at pos, shifting the tail right.
    void insert(uint64_t pos, uint64_t w, unsigned n) {
        assert(pos <= size_ && n <= 64);
        uint64_t old = size_;
        grow_to(size_ + n);
        uint64_t m = old - pos;
        uint64_t src = pos + m;
        while (m > 0) {  // move highest chunk first; dest is above all unread source bits
            unsigned chunk = unsigned(m < 64 ? m : 64);
            src -= chunk;
            write_bits(src + n, chunk, read_bits_raw(src, chunk));
            m -= chunk;
        }
        write_bits(pos, n, w);
    }

    // Removes n bits at pos, shifting the tail left.
    void erase(uint64_t pos, uint64_t n) {
        assert(pos + n <= size_);
        uint64_t src = pos + n, dst = pos, m = size_ - src;
        while (m > 0) {
            unsigned chunk = unsigned(m < 64 ? m : 64);
            write_bits(dst, chunk, read_bits_raw(src, chunk));
            src += chunk; dst += chunk; m -= chunk;
        }
        shrink_to(size_ - n);
    }

    // Splits off the tail starting at pos into a new vector.
    BitVec split_off(uint64_t pos) {
        assert(pos <= size_);
        BitVec tail;
        uint64_t m = size_ - pos, src = pos;
        tail.grow_to(m);
        uint64_t dst = 0;
        while (src < size_) {
            unsigned chunk = unsigned((size_ - src) < 64 ? (size_ - src) : 64);
            tail.write_bits(dst, chunk, read_bits_raw(src, chunk));
            src += chunk; dst += chunk;
        }
        shrink_to(pos);
        return tail;
    }

    uint64_t popcount() const {
        uint64_t c = 0;
        for (uint64_t w : words_) c += std::popcount(w);
        return c;
    }

    // Number of 1s in [from, to).
    uint64_t popcount_range(uint64_t from, uint64_t to) const {
        assert(from <= to && to <= size_);
        if (from == to) return 0;
        uint64_t wi = from >> 6, wj = (to - 1) >> 6, c = 0;
        if (wi == wj) {
            uint64_t w = words_[wi] >> (from & 63);
            return std::popcount(w & mask_low(to - from));
        }
        c += std::popcount(words_[wi] >> (from & 63));
        for (uint64_t k = wi + 1; k < wj; ++k) c += std::popcount(words_[k]);
        unsigned tail = unsigned(((to - 1) & 63) + 1);
        c += std::popcount(words_[wj] & mask_low(tail));
        return c;
    }

    void clear() { words_.clear(); size_ = 0; }

    const std::vector<uint64_t>& words() const { return words_; }

    std::vector<uint8_t> to_bytes() const {
        std::vector<uint8_t> out((size_ + 7) / 8);
        for (size_t i = 0; i < out.size(); ++i)
            out[i] = uint8_t(words_[i >> 3] >> ((i & 7) * 8));
        return out;
    }

    static BitVec from_bytes(const uint8_t* data, uint64_t nbits) {
        BitVec v;
        v.grow_to(nbits);
        for (uint64_t i = 0; i < (nbits + 7) / 8; ++i)
            v.words_[i >> 3] |= uint64_t(data[i]) << ((i & 7) * 8);
        // zero any padding bits the last byte may carry
        if (nbits & 63) v.words_.back() &= mask_low(unsigned(nbits & 63));
        return v;
    }

    bool operator==(const BitVec& o) const {
        return size_ == o.size_ && words_ == o.words_;
    }

private:
    static uint64_t mask_low(uint64_t n) {
        return n >= 64 ? ~uint64_t(0) : (uint64_t(1) << n) - 1;
    }

    // read_bits without the pos+n <= size_ assertion: used while size_ is
    // already extended but the tail has not been shifted yet.
    uint64_t read_bits_raw(uint64_t pos, unsigned n) const {
        uint64_t wi = pos >> 6;
        unsigned off = unsigned(pos & 63);
        uint64_t lo = words_[wi] >> off;
        if (off + n > 64) lo |= words_[wi + 1] << (64 - off);
        return n == 64 ? lo : (lo & mask_low(n));
    }

    void grow_to(uint64_t nbits) {
        size_ = nbits;
        words_.resize((nbits + 63) / 64, 0);
    }

    void shrink_to(uint64_t nbits) {
        size_ = nbits;
        words_.resize((nbits + 63) / 64);
        if (size_ & 63) words_.back() &= mask_low(unsigned(size_ & 63));
    }

    std::vector<uint64_t> words_;
    uint64_t size_ = 0;
};

}  // namespace dk2
