#pragma once

#include <cstdint>
#include <vector>

#include "dk2/audit.hpp"
#include "dk2/bitvec.hpp"
#include "dk2/config.hpp"
#include "dk2/io.hpp"

namespace dk2 {

// Immutable pointer-free quadtree over a square 0/1 matrix. Internal levels
// are concatenated into T, one group of arity*arity bits per nonzero parent
// cell; the last level's groups form L. Children of the 1 at T[p] start at
// the group whose ordinal is the number of 1s up to and including p, counted
// within p's level. A sampled directory over T answers those rank queries.
class StaticK2Tree {
public:
    StaticK2Tree() = default;

    // Duplicates are merged; cells must lie inside schedule.side().
    static StaticK2Tree build(const KSchedule& sched, std::vector<Cell> cells);

    // Adopts already-laid-out level bitmaps; validates their shape.
    static StaticK2Tree from_bits(const KSchedule& sched, BitVec t, BitVec l);

    const KSchedule& schedule() const { return sched_; }
    uint64_t side() const { return sched_.side(); }
    uint64_t cell_count() const { return cell_count_; }
    const BitVec& t_bits() const { return t_; }
    const BitVec& l_bits() const { return l_; }
    const std::vector<uint64_t>& level_bits() const { return level_bits_; }
    const std::vector<uint64_t>& level_ones() const { return level_ones_; }

    bool contains(uint64_t row, uint64_t col) const;
    // Inclusive bounds; results sorted by (row, col).
    std::vector<Cell> cells_in_range(uint64_t r1, uint64_t r2, uint64_t c1, uint64_t c2) const;
    std::vector<uint64_t> columns_in_row(uint64_t row) const;
    std::vector<uint64_t> rows_in_column(uint64_t col) const;
    std::vector<Cell> all_cells() const;

    struct Sizes {
        uint64_t t_bits = 0;
        uint64_t l_bits = 0;
        uint64_t dir_bytes = 0;
        uint64_t total_bytes() const { return (t_bits + l_bits + 7) / 8 + dir_bytes; }
    };
    Sizes measure() const;

    // Ones in T positions [0, p], inclusive.
    uint64_t rank1(uint64_t p) const;

    AuditReport audit() const;

    void save(ByteWriter& w) const;
    static StaticK2Tree load(ByteReader& r);

    friend bool operator==(const StaticK2Tree& a, const StaticK2Tree& b) {
        return a.sched_ == b.sched_ && a.t_ == b.t_ && a.l_ == b.l_;
    }

    static constexpr uint32_t kDirPeriod = 640;  // one u32 per 640 bits, 5% of T

private:
    void derive_levels();  // level_bits_/level_ones_/starts from t_, l_, sched_
    void build_dir();
    uint64_t rank_excl(uint64_t q) const;

    template <class Emit>
    void walk(uint32_t level, uint64_t pos, uint64_t org_r, uint64_t org_c, uint64_t r1,
              uint64_t r2, uint64_t c1, uint64_t c2, Emit& emit) const;

    KSchedule sched_;
    BitVec t_;
    BitVec l_;
    std::vector<uint32_t> dir_;  // ones in [0, (i+1)*period)
    std::vector<uint64_t> level_bits_;   // T levels only
    std::vector<uint64_t> level_ones_;
    std::vector<uint64_t> level_start_;  // prefix sums of level_bits_
    std::vector<uint64_t> ones_before_;  // prefix sums of level_ones_
    uint64_t cell_count_ = 0;
};

}  // namespace dk2
