#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dk2 {

// Per-level subdivision arities. arity[l] is the k used to divide a level-l
// submatrix; the last level's arity is the leaf submatrix side k'. The side
// covered by the schedule is the product of all arities.
//
// T-level arities must satisfy k_l^2 % k_{l+1}^2 == 0 (non-increasing powers
// in practice): leaf split points inside the bit tree are chosen on the
// lattice of the largest group size, and that lattice only lands on genuine
// group boundaries when later group sizes divide earlier ones.
struct KSchedule {
    std::vector<uint8_t> arity;

    uint64_t levels() const { return arity.size(); }
    uint8_t kprime() const { return arity.back(); }

    uint64_t side() const {
        uint64_t s = 1;
        for (uint8_t k : arity) s *= k;
        return s;
    }

    // Side covered by one child of a level-l node (product of arities below l).
    uint64_t child_side(uint64_t level) const {
        uint64_t s = 1;
        for (uint64_t i = level + 1; i < arity.size(); ++i) s *= arity[i];
        return s;
    }

    void validate() const {
        if (arity.size() < 2)
            throw std::invalid_argument("k-schedule: need at least two levels");
        for (uint8_t k : arity)
            if (k < 2 || k > 8)
                throw std::invalid_argument("k-schedule: arities must be in 2..8");
        for (size_t l = 0; l + 2 < arity.size(); ++l) {
            uint32_t a = uint32_t(arity[l]) * arity[l], b = uint32_t(arity[l + 1]) * arity[l + 1];
            if (a % b != 0)
                throw std::invalid_argument(
                    "k-schedule: each internal arity's square must divide its predecessor's");
        }
    }

    // Uniform arity k on every level, enough levels to cover min_side.
    // If kprime != 0 the last level uses kprime instead of k.
    static KSchedule uniform(uint8_t k, uint64_t min_side, uint8_t kprime = 0);

    // k=4 on the first five levels, k=2 below, optional k' last level.
    static KSchedule hybrid(uint64_t min_side, uint8_t kprime = 0);

    // Parses "hybrid", a single integer ("2"), or an explicit list ("4,4,2,2").
    static KSchedule parse(const std::string& text, uint64_t min_side, uint8_t kprime = 0);

    bool operator==(const KSchedule&) const = default;
};

// Child offset of (r, c) within its level-l node: the k_l x k_l children are
// numbered left to right, top to bottom.
inline uint64_t compute_child(uint64_t r, uint64_t c, uint64_t level, const KSchedule& sched) {
    uint64_t s = sched.child_side(level);
    uint64_t k = sched.arity[level];
    return ((r / s) % k) * k + (c / s) % k;
}

struct Cell {
    uint64_t row = 0;
    uint64_t col = 0;
    friend auto operator<=>(const Cell&, const Cell&) = default;
};

enum class VocabMode : uint8_t {
    off = 0,      // last level stored as plain bits
    on = 1,       // shared-matrix vocabulary, frequency-order tracking off
    tracked = 2,  // vocabulary with optimal-order tracking and ratio-driven rebuild
};

struct DK2Config {
    uint32_t block_bytes = 512;                  // B: leaf block size in bytes
    uint8_t expansions = 3;                      // e: partial expansions, classes 0..e
    uint32_t sample_t = 128;                     // bits per rank counter in T leaves
    uint32_t sample_l = 128;                     // codewords per offset sample in coded leaves
    VocabMode vocab = VocabMode::off;
    double rebuild_ratio = 1.2;                  // rebuild when current/optimal exceeds this
    uint64_t rebuild_floor_bytes = 100 * 1024;   // and the coded tree is at least this big
    uint64_t rebuild_period = uint64_t(1) << 20; // untracked mode: rebuild every N updates

    void validate() const {
        if (block_bytes < 16) throw std::invalid_argument("config: block size too small");
        if (sample_t == 0 || sample_t > 65535) throw std::invalid_argument("config: bad sample period");
        if (rebuild_ratio < 1.0) throw std::invalid_argument("config: rebuild ratio must be >= 1");
    }
};

}  // namespace dk2
