#include "dk2/dk2tree.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <stdexcept>

namespace dk2 {

static constexpr uint32_t kMagic = 0x44324B44;  // "DK2D"

// ---- LLayer ----

static BitTree::Params plain_l_params(uint32_t group_bits, const DK2Config& cfg) {
    BitTree::Params p;
    p.block_bytes = cfg.block_bytes;
    p.expansions = cfg.expansions;
    p.sample_period = cfg.sample_l;
    p.rank_support = false;
    p.align_bits = group_bits;
    return p;
}

static std::variant<BitTree, VocabLTree> make_llayer(uint32_t group_bits, const DK2Config& cfg) {
    if (cfg.vocab == VocabMode::off)
        return std::variant<BitTree, VocabLTree>(std::in_place_type<BitTree>,
                                                 plain_l_params(group_bits, cfg));
    return std::variant<BitTree, VocabLTree>(std::in_place_type<VocabLTree>, group_bits, cfg);
}

LLayer::LLayer(uint32_t group_bits, const DK2Config& cfg)
    : group_bits_(group_bits), impl_(make_llayer(group_bits, cfg)) {
    assert(group_bits_ >= 1 && group_bits_ <= 64);
}

uint64_t LLayer::total_bits() const {
    return std::visit([](const auto& t) { return t.total_bits(); }, impl_);
}

uint64_t LLayer::read_group(uint64_t pos) const {
    if (const BitTree* t = std::get_if<BitTree>(&impl_))
        return t->read_bits(pos - pos % group_bits_, unsigned(group_bits_));
    return std::get<VocabLTree>(impl_).read_group(pos);
}

void LLayer::insert_group(uint64_t pos, uint64_t matrix) {
    if (BitTree* t = std::get_if<BitTree>(&impl_))
        t->insert_bits(pos, matrix, unsigned(group_bits_));
    else
        std::get<VocabLTree>(impl_).insert_group(pos, matrix);
}

void LLayer::remove_group(uint64_t pos) {
    if (BitTree* t = std::get_if<BitTree>(&impl_))
        t->remove_bits(pos, unsigned(group_bits_));
    else
        std::get<VocabLTree>(impl_).remove_group(pos);
}

void LLayer::set_bit(uint64_t pos, bool value) {
    if (BitTree* t = std::get_if<BitTree>(&impl_))
        t->flip(pos);
    else
        std::get<VocabLTree>(impl_).set_bit(pos, value);
}

void LLayer::bulk_load(const BitVec& bits) {
    assert(bits.size() % group_bits_ == 0);
    if (BitTree* t = std::get_if<BitTree>(&impl_)) {
        t->bulk_load(bits);
        return;
    }
    std::vector<uint64_t> matrices;
    matrices.reserve(bits.size() / group_bits_);
    for (uint64_t p = 0; p < bits.size(); p += group_bits_)
        matrices.push_back(bits.read_bits(p, unsigned(group_bits_)));
    std::get<VocabLTree>(impl_).bulk_load(matrices);
}

BitVec LLayer::to_bitvec() const {
    return std::visit([](const auto& t) { return t.to_bitvec(); }, impl_);
}

uint64_t LLayer::measured_bytes() const {
    return std::visit([](const auto& t) { return t.measured_bytes(); }, impl_);
}

AuditReport LLayer::audit() const {
    return std::visit([](const auto& t) { return t.audit(); }, impl_);
}

void LLayer::save(ByteWriter& w) const {
    w.u8(vocab_backed() ? 1 : 0);
    w.u32(group_bits_);
    std::visit([&](const auto& t) { t.save(w); }, impl_);
}

LLayer LLayer::load(ByteReader& r, const DK2Config& cfg) {
    uint8_t tag = r.u8();
    uint32_t group_bits = r.u32();
    if (group_bits < 1 || group_bits > 64)
        throw std::runtime_error("leaf layer snapshot: bad group size");
    bool want_vocab = cfg.vocab != VocabMode::off;
    if (bool(tag) != want_vocab)
        throw std::runtime_error("leaf layer snapshot: storage kind mismatch");
    LLayer l(group_bits, cfg);
    if (tag == 0)
        l.impl_ = BitTree::load(r);
    else
        l.impl_ = VocabLTree::load(r, cfg);
    return l;
}

// ---- DK2Tree ----

static KSchedule validated(KSchedule s) {
    s.validate();
    return s;
}

static DK2Config validated(DK2Config c) {
    c.validate();
    return c;
}

static BitTree::Params t_params(const KSchedule& s, const DK2Config& c) {
    BitTree::Params p;
    p.block_bytes = c.block_bytes;
    p.expansions = c.expansions;
    p.sample_period = c.sample_t;
    p.rank_support = true;
    p.align_bits = uint32_t(s.arity[0]) * s.arity[0];
    return p;
}

DK2Tree::DK2Tree(KSchedule sched, DK2Config cfg)
    : sched_(validated(std::move(sched))),
      cfg_(validated(cfg)),
      side_(sched_.side()),
      t_(t_params(sched_, cfg_)),
      l_(uint32_t(sched_.kprime()) * sched_.kprime(), cfg_) {
    if (side_ > (uint64_t(1) << 31)) throw std::length_error("matrix side limit");
    level_bits_.assign(sched_.levels() - 1, 0);
    level_ones_.assign(sched_.levels() - 1, 0);
}

uint64_t DK2Tree::level_start(uint64_t level) const {
    uint64_t s = 0;
    for (uint64_t l = 0; l < level; ++l) s += level_bits_[l];
    return s;
}

uint64_t DK2Tree::ones_before(uint64_t level) const {
    uint64_t s = 0;
    for (uint64_t l = 0; l < level; ++l) s += level_ones_[l];
    return s;
}

void DK2Tree::grow() {
    uint8_t k0 = sched_.arity[0];
    if (side_ * k0 > (uint64_t(1) << 31)) throw std::length_error("matrix side limit");
    uint64_t g = group_sz(0);
    if (t_.total_bits() > 0) {
        // old root becomes child 0 of the new root
        t_.insert_bits(0, 1, unsigned(g));
        stats_.splices += 1;
        level_bits_.insert(level_bits_.begin(), g);
        level_ones_.insert(level_ones_.begin(), 1);
    } else {
        level_bits_.insert(level_bits_.begin(), 0);
        level_ones_.insert(level_ones_.begin(), 0);
    }
    sched_.arity.insert(sched_.arity.begin(), k0);
    side_ *= k0;
}

uint64_t DK2Tree::group_of(NodeRef n) const {
    if (n.level + 1 < sched_.levels()) return t_.read_bits(n.pos, unsigned(group_sz(n.level)));
    return l_.read_group(n.pos);
}

DK2Tree::NodeRef DK2Tree::child(NodeRef n, unsigned offset) const {
    assert(n.level + 1 < sched_.levels());
    uint64_t ordinal = t_.rank1(n.pos + offset) - ones_before(n.level);
    uint64_t g = group_sz(n.level + 1);
    uint64_t base = (ordinal - 1) * g;
    if (n.level + 2 < sched_.levels()) base += level_start(n.level + 1);
    return NodeRef{n.level + 1u, base};
}

bool DK2Tree::contains(uint64_t row, uint64_t col) const {
    if (row >= side_ || col >= side_ || t_.total_bits() == 0) return false;
    uint64_t nlev = sched_.levels();
    uint64_t pos = compute_child(row, col, 0, sched_);
    for (uint64_t l = 0; l + 1 < nlev; ++l) {
        auto [bit, rank] = t_.access_and_rank1(pos);
        if (!bit) return false;
        uint64_t ordinal = rank - ones_before(l);
        uint64_t g = group_sz(l + 1);
        uint64_t off = compute_child(row, col, l + 1, sched_);
        pos = (ordinal - 1) * g + off;
        if (l + 2 < nlev) pos += level_start(l + 1);
    }
    return (l_.read_group(pos) >> (pos % group_sz(nlev - 1))) & 1;
}

void DK2Tree::append_chain(uint64_t row, uint64_t col, uint64_t from, uint64_t child_ordinal) {
    uint64_t nlev = sched_.levels();
    if (from == 0) {
        uint64_t off = compute_child(row, col, 0, sched_);
        t_.insert_bits(0, uint64_t(1) << off, unsigned(group_sz(0)));
        stats_.splices += 1;
        level_bits_[0] = group_sz(0);
        level_ones_[0] = 1;
        child_ordinal = 1;
        from = 1;
    }
    for (uint64_t l = from; l < nlev; ++l) {
        uint64_t off = compute_child(row, col, l, sched_);
        uint64_t g = group_sz(l);
        uint64_t base = (child_ordinal - 1) * g;
        if (l + 1 < nlev) {
            base += level_start(l);
            t_.insert_bits(base, uint64_t(1) << off, unsigned(g));
            stats_.splices += 1;
            level_bits_[l] += g;
            level_ones_[l] += 1;
            child_ordinal = t_.rank1(base + off) - ones_before(l);
        } else {
            l_.insert_group(base, uint64_t(1) << off);
            stats_.splices += 1;
        }
    }
}

bool DK2Tree::set_cell(uint64_t row, uint64_t col) {
    stats_ = {};
    while (row >= side_ || col >= side_) grow();
    uint64_t nlev = sched_.levels();
    if (t_.total_bits() == 0) {
        append_chain(row, col, 0, 1);
        ++cell_count_;
        return true;
    }
    uint64_t pos = compute_child(row, col, 0, sched_);
    for (uint64_t l = 0; l + 1 < nlev; ++l) {
        auto [bit, rank] = t_.access_and_rank1(pos);
        if (!bit) {
            t_.flip(pos);
            stats_.flips += 1;
            level_ones_[l] += 1;
            append_chain(row, col, l + 1, rank + 1 - ones_before(l));
            ++cell_count_;
            return true;
        }
        uint64_t ordinal = rank - ones_before(l);
        if (l + 2 < nlev) {
            pos = level_start(l + 1) + (ordinal - 1) * group_sz(l + 1) +
                  compute_child(row, col, l + 1, sched_);
        } else {
            uint64_t base = (ordinal - 1) * group_sz(nlev - 1);
            uint64_t off = compute_child(row, col, nlev - 1, sched_);
            if ((l_.read_group(base) >> off) & 1) return false;
            l_.set_bit(base + off, true);
            stats_.flips += 1;
            ++cell_count_;
            return true;
        }
    }
    assert(false && "descent must end at the leaf level");
    return false;
}

bool DK2Tree::clear_cell(uint64_t row, uint64_t col) {
    if (row >= side_ || col >= side_ || t_.total_bits() == 0) return false;
    stats_ = {};
    uint64_t nlev = sched_.levels();
    std::vector<uint64_t> tpos(nlev - 1), tbase(nlev - 1);
    uint64_t pos = compute_child(row, col, 0, sched_);
    uint64_t base = 0;
    for (uint64_t l = 0; l + 1 < nlev; ++l) {
        tpos[l] = pos;
        tbase[l] = base;
        auto [bit, rank] = t_.access_and_rank1(pos);
        if (!bit) return false;
        uint64_t ordinal = rank - ones_before(l);
        uint64_t g = group_sz(l + 1);
        base = (ordinal - 1) * g;
        if (l + 2 < nlev) base += level_start(l + 1);
        pos = base + compute_child(row, col, l + 1, sched_);
    }
    uint64_t off = pos - base;
    uint64_t group = l_.read_group(base);
    if (!((group >> off) & 1)) return false;
    --cell_count_;
    if (group != uint64_t(1) << off) {
        l_.set_bit(pos, false);
        stats_.flips += 1;
        return true;
    }
    l_.remove_group(base);
    stats_.removals += 1;
    // each removal only shifts positions inside its own level, and every
    // recorded position above sits in an earlier level
    for (uint64_t l = nlev - 1; l-- > 0;) {
        t_.flip(tpos[l]);
        stats_.flips += 1;
        level_ones_[l] -= 1;
        uint64_t g = group_sz(l);
        if (t_.read_bits(tbase[l], unsigned(g)) != 0) return true;
        t_.remove_bits(tbase[l], unsigned(g));
        stats_.removals += 1;
        level_bits_[l] -= g;
    }
    return true;
}

template <class Emit>
void DK2Tree::walk(uint32_t level, uint64_t pos, uint64_t org_r, uint64_t org_c, uint64_t r1,
                   uint64_t r2, uint64_t c1, uint64_t c2, Emit& emit) const {
    uint64_t k = sched_.arity[level];
    uint64_t s = sched_.child_side(level);
    bool last = level + 1 == sched_.levels();
    uint64_t group = last ? l_.read_group(pos) : t_.read_bits(pos, unsigned(group_sz(level)));
    for (uint64_t j = 0; j < k * k; ++j) {
        if (!((group >> j) & 1)) continue;
        uint64_t cr = org_r + (j / k) * s;
        uint64_t cc = org_c + (j % k) * s;
        if (cr > r2 || cr + s - 1 < r1 || cc > c2 || cc + s - 1 < c1) continue;
        if (last) {
            emit(Cell{cr, cc});
            continue;
        }
        uint64_t ordinal = t_.rank1(pos + j) - ones_before(level);
        uint64_t g = group_sz(level + 1);
        uint64_t cbase = (ordinal - 1) * g;
        if (level + 2 < sched_.levels()) cbase += level_start(level + 1);
        walk(level + 1, cbase, cr, cc, r1, r2, c1, c2, emit);
    }
}

std::vector<Cell> DK2Tree::cells_in_range(uint64_t r1, uint64_t r2, uint64_t c1,
                                          uint64_t c2) const {
    std::vector<Cell> out;
    if (t_.total_bits() == 0 || r1 > r2 || c1 > c2) return out;
    auto emit = [&](Cell c) { out.push_back(c); };
    walk(0, 0, 0, 0, r1, r2, c1, c2, emit);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<uint64_t> DK2Tree::columns_in_row(uint64_t row) const {
    std::vector<uint64_t> out;
    if (row >= side_) return out;
    for (const Cell& c : cells_in_range(row, row, 0, side_ - 1)) out.push_back(c.col);
    return out;
}

std::vector<uint64_t> DK2Tree::rows_in_column(uint64_t col) const {
    std::vector<uint64_t> out;
    if (col >= side_) return out;
    for (const Cell& c : cells_in_range(0, side_ - 1, col, col)) out.push_back(c.row);
    return out;
}

std::vector<Cell> DK2Tree::all_cells() const {
    if (t_.total_bits() == 0) return {};
    return cells_in_range(0, side_ - 1, 0, side_ - 1);
}

uint64_t DK2Tree::add_node() {
    if (!free_ids_.empty()) {
        uint64_t id = free_ids_.back();
        free_ids_.pop_back();
        return id;
    }
    if (next_fresh_ >= side_) grow();
    return next_fresh_++;
}

void DK2Tree::remove_node(uint64_t id) {
    for (uint64_t c : columns_in_row(id)) clear_cell(id, c);
    for (uint64_t r : rows_in_column(id)) clear_cell(r, id);
    free_ids_.push_back(id);
}

DK2Tree DK2Tree::from_static(const StaticK2Tree& st, DK2Config cfg) {
    DK2Tree t(st.schedule(), cfg);
    t.t_.bulk_load(st.t_bits());
    t.l_.bulk_load(st.l_bits());
    t.level_bits_ = st.level_bits();
    t.level_ones_ = st.level_ones();
    t.cell_count_ = st.cell_count();
    t.next_fresh_ = t.side_;  // identifier history is not part of the static form
    return t;
}

StaticK2Tree DK2Tree::to_static() const {
    return StaticK2Tree::from_bits(sched_, t_.to_bitvec(), l_.to_bitvec());
}

uint64_t DK2Tree::measured_bytes() const {
    return t_.measured_bytes() + l_.measured_bytes() +
           (level_bits_.size() + level_ones_.size() + free_ids_.size()) * 8;
}

AuditReport DK2Tree::audit() const {
    AuditReport rep = t_.audit();
    rep.merge(l_.audit());
    uint64_t nlev = sched_.levels();
    if (level_bits_.size() != nlev - 1 || level_ones_.size() != nlev - 1) {
        rep.fail("level array sizes disagree with schedule");
        return rep;
    }
    uint64_t tb = 0, to = 0;
    for (uint64_t l = 0; l + 1 < nlev; ++l) {
        tb += level_bits_[l];
        to += level_ones_[l];
    }
    if (tb != t_.total_bits()) rep.fail("level bit totals disagree with tree");
    if (to != t_.total_ones()) rep.fail("level one totals disagree with tree");
    if (t_.total_bits() > 0 && level_bits_[0] != group_sz(0))
        rep.fail("root level has wrong size");
    for (uint64_t l = 0; l + 2 < nlev; ++l)
        if (level_bits_[l + 1] != level_ones_[l] * group_sz(l + 1))
            rep.fail("level size does not match parent ones");
    if (l_.total_bits() != level_ones_[nlev - 2] * group_sz(nlev - 1))
        rep.fail("leaf level size does not match parent ones");
    uint64_t start = 0;
    for (uint64_t l = 0; l + 1 < nlev; ++l) {
        if (level_bits_[l] == 0) continue;
        uint64_t end = start + level_bits_[l];
        uint64_t ones = t_.rank1(end - 1) - (start ? t_.rank1(start - 1) : 0);
        if (ones != level_ones_[l]) rep.fail("per-level ones count is wrong");
        start = end;
    }
    BitVec tb_all = t_.to_bitvec();
    start = 0;
    for (uint64_t l = 0; l + 1 < nlev; ++l) {
        uint64_t g = group_sz(l);
        for (uint64_t p = start; p < start + level_bits_[l]; p += g)
            if (tb_all.popcount_range(p, p + g) == 0) rep.fail("empty group in tree bits");
        start += level_bits_[l];
    }
    BitVec lb_all = l_.to_bitvec();
    uint64_t lg = group_sz(nlev - 1);
    for (uint64_t p = 0; p < lb_all.size(); p += lg)
        if (lb_all.popcount_range(p, p + lg) == 0) rep.fail("empty group in leaf bits");
    if (lb_all.popcount() != cell_count_) rep.fail("cell count is stale");
    if (next_fresh_ > side_) rep.fail("fresh identifier beyond matrix side");
    for (uint64_t id : free_ids_)
        if (id >= next_fresh_) rep.fail("freed identifier was never handed out");
    return rep;
}

void DK2Tree::save(ByteWriter& w) const {
    w.u32(kMagic);
    w.u8(1);
    w.u8(uint8_t(sched_.arity.size()));
    for (uint8_t k : sched_.arity) w.u8(k);
    w.u32(cfg_.block_bytes);
    w.u8(cfg_.expansions);
    w.u32(cfg_.sample_t);
    w.u32(cfg_.sample_l);
    w.u8(uint8_t(cfg_.vocab));
    w.f64(cfg_.rebuild_ratio);
    w.u64(cfg_.rebuild_floor_bytes);
    w.u64(cfg_.rebuild_period);
    w.u64(cell_count_);
    w.u64(next_fresh_);
    w.u32(uint32_t(free_ids_.size()));
    for (uint64_t id : free_ids_) w.u64(id);
    for (uint64_t l = 0; l + 1 < sched_.levels(); ++l) {
        w.u64(level_bits_[l]);
        w.u64(level_ones_[l]);
    }
    t_.save(w);
    l_.save(w);
}

DK2Tree DK2Tree::load(ByteReader& r) {
    if (r.u32() != kMagic) throw std::runtime_error("dynamic snapshot: bad magic");
    if (r.u8() != 1) throw std::runtime_error("dynamic snapshot: unknown version");
    KSchedule sched;
    uint8_t nlev = r.u8();
    sched.arity.resize(nlev);
    for (auto& k : sched.arity) k = r.u8();
    DK2Config cfg;
    cfg.block_bytes = r.u32();
    cfg.expansions = r.u8();
    cfg.sample_t = r.u32();
    cfg.sample_l = r.u32();
    uint8_t vm = r.u8();
    if (vm > 2) throw std::runtime_error("dynamic snapshot: bad vocabulary mode");
    cfg.vocab = VocabMode(vm);
    cfg.rebuild_ratio = r.f64();
    cfg.rebuild_floor_bytes = r.u64();
    cfg.rebuild_period = r.u64();
    DK2Tree t(sched, cfg);
    t.cell_count_ = r.u64();
    t.next_fresh_ = r.u64();
    uint32_t nfree = r.u32();
    for (uint32_t i = 0; i < nfree; ++i) t.free_ids_.push_back(r.u64());
    for (uint64_t l = 0; l + 1 < t.sched_.levels(); ++l) {
        t.level_bits_[l] = r.u64();
        t.level_ones_[l] = r.u64();
    }
    t.t_ = BitTree::load(r);
    t.l_ = LLayer::load(r, t.cfg_);
    AuditReport rep = t.audit();
    if (!rep.ok) throw std::runtime_error("dynamic snapshot: " + rep.issues);
    return t;
}

}  // namespace dk2
