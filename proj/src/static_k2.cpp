#include "dk2/static_k2.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <stdexcept>

namespace dk2 {

static constexpr uint32_t kMagic = 0x53324B44;  // "DK2S"

StaticK2Tree StaticK2Tree::build(const KSchedule& sched, std::vector<Cell> cells) {
    sched.validate();
    StaticK2Tree t;
    t.sched_ = sched;
    uint64_t side = sched.side();
    if (side >= (uint64_t(1) << 31))
        throw std::invalid_argument("static build: side too large");
    for (const Cell& c : cells)
        if (c.row >= side || c.col >= side)
            throw std::out_of_range("static build: cell outside matrix");

    size_t nlev = sched.levels();
    // key = child offsets of all levels, most significant first; sorting by it
    // lays cells out in tree order, so every level is one linear sweep
    std::vector<uint64_t> keys;
    keys.reserve(cells.size());
    for (const Cell& c : cells) {
        uint64_t key = 0;
        for (size_t l = 0; l < nlev; ++l) {
            uint64_t g = uint64_t(sched.arity[l]) * sched.arity[l];
            key = key * g + compute_child(c.row, c.col, l, sched);
        }
        keys.push_back(key);
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    t.cell_count_ = keys.size();

    std::vector<uint64_t> sfx(nlev, 1);  // sfx[l] = product of group sizes below l
    for (size_t l = nlev - 1; l-- > 0;)
        sfx[l] = sfx[l + 1] * uint64_t(sched.arity[l + 1]) * sched.arity[l + 1];

    t.level_bits_.assign(nlev - 1, 0);
    t.level_ones_.assign(nlev - 1, 0);
    for (size_t l = 0; l < nlev && !keys.empty(); ++l) {
        BitVec& dst = (l + 1 < nlev) ? t.t_ : t.l_;
        uint64_t gsz = uint64_t(sched.arity[l]) * sched.arity[l];
        uint64_t ndiv = sfx[l] * gsz;  // keys sharing key/ndiv sit in one group
        uint64_t ones = 0, groups = 0;
        size_t i = 0;
        while (i < keys.size()) {
            uint64_t node = keys[i] / ndiv;
            uint64_t mask = 0;
            while (i < keys.size() && keys[i] / ndiv == node) {
                mask |= uint64_t(1) << ((keys[i] / sfx[l]) % gsz);
                ++i;
            }
            dst.append_bits(mask, unsigned(gsz));
            ones += std::popcount(mask);
            ++groups;
        }
        if (l + 1 < nlev) {
            t.level_bits_[l] = groups * gsz;
            t.level_ones_[l] = ones;
        }
    }
    t.derive_levels();
    t.build_dir();
    return t;
}

StaticK2Tree StaticK2Tree::from_bits(const KSchedule& sched, BitVec t, BitVec l) {
    sched.validate();
    StaticK2Tree out;
    out.sched_ = sched;
    out.t_ = std::move(t);
    out.l_ = std::move(l);
    out.derive_levels();
    out.build_dir();
    return out;
}

void StaticK2Tree::derive_levels() {
    size_t nlev = sched_.levels();
    level_bits_.assign(nlev - 1, 0);
    level_ones_.assign(nlev - 1, 0);
    level_start_.assign(nlev - 1, 0);
    ones_before_.assign(nlev - 1, 0);
    uint64_t pos = 0;
    uint64_t expect = uint64_t(sched_.arity[0]) * sched_.arity[0];
    if (t_.size() == 0) {
        if (l_.size() != 0) throw std::runtime_error("static tree: leaf bits without tree bits");
        cell_count_ = 0;
        return;
    }
    for (size_t l = 0; l + 1 < nlev; ++l) {
        level_start_[l] = pos;
        ones_before_[l] = l == 0 ? 0 : ones_before_[l - 1] + level_ones_[l - 1];
        if (pos + expect > t_.size()) throw std::runtime_error("static tree: truncated level");
        level_bits_[l] = expect;
        level_ones_[l] = t_.popcount_range(pos, pos + expect);
        pos += expect;
        uint64_t next_g = uint64_t(sched_.arity[l + 1]) * sched_.arity[l + 1];
        expect = level_ones_[l] * next_g;
    }
    if (pos != t_.size()) throw std::runtime_error("static tree: level sizes disagree");
    if (expect != l_.size()) throw std::runtime_error("static tree: leaf level size disagrees");
    cell_count_ = l_.popcount();
}

void StaticK2Tree::build_dir() {
    dir_.clear();
    uint64_t blocks = t_.size() / kDirPeriod;  // counts at full-period boundaries only
    uint64_t acc = 0;
    for (uint64_t i = 0; i < blocks; ++i) {
        acc += t_.popcount_range(i * kDirPeriod, (i + 1) * kDirPeriod);
        dir_.push_back(uint32_t(acc));
    }
}

uint64_t StaticK2Tree::rank_excl(uint64_t q) const {
    uint64_t blk = q / kDirPeriod;
    uint64_t base = blk == 0 ? 0 : dir_[blk - 1];
    return base + t_.popcount_range(blk * kDirPeriod, q);
}

uint64_t StaticK2Tree::rank1(uint64_t p) const { return rank_excl(p + 1); }

bool StaticK2Tree::contains(uint64_t row, uint64_t col) const {
    uint64_t side = sched_.side();
    if (row >= side || col >= side) return false;
    if (t_.size() == 0) return false;
    size_t nlev = sched_.levels();
    uint64_t pos = compute_child(row, col, 0, sched_);
    for (size_t l = 0; l + 1 < nlev; ++l) {
        if (!t_.get(pos)) return false;
        uint64_t ordinal = rank1(pos) - ones_before_[l];
        uint64_t g = uint64_t(sched_.arity[l + 1]) * sched_.arity[l + 1];
        uint64_t off = compute_child(row, col, l + 1, sched_);
        uint64_t base = (ordinal - 1) * g;
        pos = (l + 2 < nlev) ? level_start_[l + 1] + base + off : base + off;
    }
    return l_.get(pos);
}

template <class Emit>
void StaticK2Tree::walk(uint32_t level, uint64_t pos, uint64_t org_r, uint64_t org_c,
                        uint64_t r1, uint64_t r2, uint64_t c1, uint64_t c2, Emit& emit) const {
    size_t nlev = sched_.levels();
    uint64_t k = sched_.arity[level];
    uint64_t s = sched_.child_side(level);
    bool last = level + 1 == nlev;
    const BitVec& src = last ? l_ : t_;
    for (uint64_t j = 0; j < k * k; ++j) {
        if (!src.get(pos + j)) continue;
        uint64_t cr = org_r + (j / k) * s;
        uint64_t cc = org_c + (j % k) * s;
        if (cr > r2 || cr + s - 1 < r1 || cc > c2 || cc + s - 1 < c1) continue;
        if (last) {
            emit(Cell{cr, cc});
            continue;
        }
        uint64_t ordinal = rank1(pos + j) - ones_before_[level];
        uint64_t g = uint64_t(sched_.arity[level + 1]) * sched_.arity[level + 1];
        uint64_t base = (ordinal - 1) * g;
        if (level + 2 < nlev) base += level_start_[level + 1];
        walk(level + 1, base, cr, cc, r1, r2, c1, c2, emit);
    }
}

std::vector<Cell> StaticK2Tree::cells_in_range(uint64_t r1, uint64_t r2, uint64_t c1,
                                               uint64_t c2) const {
    std::vector<Cell> out;
    if (t_.size() == 0 || r1 > r2 || c1 > c2) return out;
    auto emit = [&](Cell c) { out.push_back(c); };
    walk(0, 0, 0, 0, r1, r2, c1, c2, emit);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<uint64_t> StaticK2Tree::columns_in_row(uint64_t row) const {
    std::vector<uint64_t> out;
    if (row >= side()) return out;
    for (const Cell& c : cells_in_range(row, row, 0, side() - 1)) out.push_back(c.col);
    return out;
}

std::vector<uint64_t> StaticK2Tree::rows_in_column(uint64_t col) const {
    std::vector<uint64_t> out;
    if (col >= side()) return out;
    for (const Cell& c : cells_in_range(0, side() - 1, col, col)) out.push_back(c.row);
    return out;
}

std::vector<Cell> StaticK2Tree::all_cells() const {
    if (t_.size() == 0) return {};
    return cells_in_range(0, side() - 1, 0, side() - 1);
}

StaticK2Tree::Sizes StaticK2Tree::measure() const {
    return Sizes{t_.size(), l_.size(), dir_.size() * 4};
}

AuditReport StaticK2Tree::audit() const {
    AuditReport rep;
    try {
        StaticK2Tree copy = *this;
        copy.derive_levels();
        if (copy.level_bits_ != level_bits_ || copy.level_ones_ != level_ones_)
            rep.fail("level metadata is stale");
        if (copy.cell_count_ != cell_count_) rep.fail("cell count is stale");
    } catch (const std::exception& e) {
        rep.fail(e.what());
        return rep;
    }
    size_t nlev = sched_.levels();
    for (size_t l = 0; l + 1 < nlev; ++l) {
        uint64_t g = uint64_t(sched_.arity[l]) * sched_.arity[l];
        for (uint64_t p = level_start_[l]; p < level_start_[l] + level_bits_[l]; p += g)
            if (t_.popcount_range(p, p + g) == 0) rep.fail("empty group in tree bits");
    }
    uint64_t kp = uint64_t(sched_.kprime()) * sched_.kprime();
    for (uint64_t p = 0; p < l_.size(); p += kp)
        if (l_.popcount_range(p, p + kp) == 0) rep.fail("empty group in leaf bits");
    StaticK2Tree fresh_dir = *this;
    fresh_dir.build_dir();
    if (fresh_dir.dir_ != dir_) rep.fail("rank directory is stale");
    return rep;
}

void StaticK2Tree::save(ByteWriter& w) const {
    w.u32(kMagic);
    w.u8(1);
    w.u8(uint8_t(sched_.arity.size()));
    for (uint8_t k : sched_.arity) w.u8(k);
    w.u64(t_.size());
    auto tb = t_.to_bytes();
    w.bytes(tb.data(), tb.size());
    w.u64(l_.size());
    auto lb = l_.to_bytes();
    w.bytes(lb.data(), lb.size());
}

StaticK2Tree StaticK2Tree::load(ByteReader& r) {
    if (r.u32() != kMagic) throw std::runtime_error("static snapshot: bad magic");
    if (r.u8() != 1) throw std::runtime_error("static snapshot: unknown version");
    StaticK2Tree t;
    uint8_t nlev = r.u8();
    t.sched_.arity.resize(nlev);
    for (auto& k : t.sched_.arity) k = r.u8();
    t.sched_.validate();
    uint64_t tbits = r.u64();
    const uint8_t* tp = r.bytes((tbits + 7) / 8);
    t.t_ = BitVec::from_bytes(tp, tbits);
    uint64_t lbits = r.u64();
    const uint8_t* lp = r.bytes((lbits + 7) / 8);
    t.l_ = BitVec::from_bytes(lp, lbits);
    t.derive_levels();
    t.build_dir();
    return t;
}

}  // namespace dk2
