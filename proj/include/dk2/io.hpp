#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dk2 {

// Little-endian fixed-width serialization for snapshots.
struct ByteWriter {
    std::vector<uint8_t> buf;

    void u8(uint8_t v) { buf.push_back(v); }
    void u16(uint16_t v) { le(v, 2); }
    void u32(uint32_t v) { le(v, 4); }
    void u64(uint64_t v) { le(v, 8); }
    void f64(double v) {
        uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        __builtin_memcpy(&bits, &v, 8);
        u64(bits);
    }
    void bytes(const uint8_t* p, size_t n) { buf.insert(buf.end(), p, p + n); }
    void str(const std::string& s) {
        u32(uint32_t(s.size()));
        bytes(reinterpret_cast<const uint8_t*>(s.data()), s.size());
    }

private:
    void le(uint64_t v, unsigned n) {
        for (unsigned i = 0; i < n; ++i) buf.push_back(uint8_t(v >> (8 * i)));
    }
};

struct ByteReader {
    std::span<const uint8_t> data;
    size_t pos = 0;

    explicit ByteReader(std::span<const uint8_t> d) : data(d) {}

    uint8_t u8() { return uint8_t(le(1)); }
    uint16_t u16() { return uint16_t(le(2)); }
    uint32_t u32() { return uint32_t(le(4)); }
    uint64_t u64() { return le(8); }
    double f64() {
        uint64_t bits = u64();
        double v;
        __builtin_memcpy(&v, &bits, 8);
        return v;
    }
    const uint8_t* bytes(size_t n) {
        need(n);
        const uint8_t* p = data.data() + pos;
        pos += n;
        return p;
    }
    std::string str() {
        uint32_t n = u32();
        const uint8_t* p = bytes(n);
        return std::string(reinterpret_cast<const char*>(p), n);
    }
    bool exhausted() const { return pos == data.size(); }

private:
    void need(size_t n) {
        if (pos + n > data.size()) throw std::runtime_error("snapshot: truncated");
    }
    uint64_t le(unsigned n) {
        need(n);
        uint64_t v = 0;
        for (unsigned i = 0; i < n; ++i) v |= uint64_t(data[pos + i]) << (8 * i);
        pos += n;
        return v;
    }
};

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace dk2
