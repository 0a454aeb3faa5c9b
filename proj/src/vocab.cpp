#include "dk2/vocab.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

namespace dk2 {

// ---- hash table ----

uint64_t MatrixVocabulary::mix(uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

uint32_t MatrixVocabulary::hfind(uint64_t key) const {
    if (hkeys_.empty()) return ~uint32_t(0);
    uint64_t mask = hkeys_.size() - 1;
    for (uint64_t i = mix(key) & mask;; i = (i + 1) & mask) {
        if (hstate_[i] == 0) return ~uint32_t(0);
        if (hstate_[i] == 1 && hkeys_[i] == key) return uint32_t(i);
    }
}

void MatrixVocabulary::hgrow() {
    size_t cap = hkeys_.empty() ? 16 : hkeys_.size() * 2;
    std::vector<uint64_t> keys(cap, 0);
    std::vector<uint32_t> vals(cap, 0);
    std::vector<uint8_t> state(cap, 0);
    uint64_t mask = cap - 1;
    uint64_t used = 0;
    for (size_t i = 0; i < hkeys_.size(); ++i) {
        if (hstate_[i] != 1) continue;
        uint64_t j = mix(hkeys_[i]) & mask;
        while (state[j] != 0) j = (j + 1) & mask;
        keys[j] = hkeys_[i];
        vals[j] = hvals_[i];
        state[j] = 1;
        slot_[rank_of_code_[hvals_[i]]] = uint32_t(j);
        ++used;
    }
    hkeys_ = std::move(keys);
    hvals_ = std::move(vals);
    hstate_ = std::move(state);
    hused_ = used;
}

uint32_t MatrixVocabulary::hinsert(uint64_t key, uint32_t val) {
    if (hkeys_.empty() || (hused_ + 1) * 10 > hkeys_.size() * 7) hgrow();
    uint64_t mask = hkeys_.size() - 1;
    uint64_t i = mix(key) & mask;
    while (hstate_[i] == 1) i = (i + 1) & mask;
    if (hstate_[i] == 0) ++hused_;  // reusing a tombstone keeps the count
    hkeys_[i] = key;
    hvals_[i] = val;
    hstate_[i] = 1;
    return uint32_t(i);
}

void MatrixVocabulary::herase(uint32_t slot) {
    assert(hstate_[slot] == 1);
    hstate_[slot] = 2;
    hkeys_[slot] = 0;
}

// ---- rank order maintenance ----

void MatrixVocabulary::swap_ranks(uint32_t a, uint32_t b) {
    if (a == b) return;
    std::swap(freq_[a], freq_[b]);
    std::swap(slot_[a], slot_[b]);
    std::swap(code_at_rank_[a], code_at_rank_[b]);
    rank_of_code_[code_at_rank_[a]] = a;
    rank_of_code_[code_at_rank_[b]] = b;
}

uint32_t MatrixVocabulary::bump(uint32_t code) {
    uint32_t p = rank_of_code_[code];
    uint64_t f = freq_[p];
    ClassRange& cls = classes_.at(f);
    uint32_t t = cls.start;
    swap_ranks(p, t);
    freq_[t] = f + 1;
    cls.start++;
    if (--cls.count == 0) classes_.erase(f);
    auto [it, fresh] = classes_.try_emplace(f + 1, ClassRange{t, 0});
    assert(fresh || it->second.start + it->second.count == t);
    it->second.count++;
    if (fresh) it->second.start = t;
    occurrences_ += 1;
    current_bytes_ += etdc::length(code);
    optimal_bytes_ += etdc::length(t);
    return t;
}

uint32_t MatrixVocabulary::drop(uint32_t code) {
    uint32_t p = rank_of_code_[code];
    uint64_t f = freq_[p];
    assert(f >= 1);
    ClassRange& cls = classes_.at(f);
    uint32_t t = cls.start + cls.count - 1;
    swap_ranks(p, t);
    freq_[t] = f - 1;
    if (--cls.count == 0) classes_.erase(f);
    auto [it, fresh] = classes_.try_emplace(f - 1, ClassRange{t, 0});
    assert(fresh || it->second.start == t + 1);
    it->second.start = t;
    it->second.count++;
    occurrences_ -= 1;
    current_bytes_ -= etdc::length(code);
    optimal_bytes_ -= etdc::length(t);
    return t;
}

// ---- public operations ----

uint32_t MatrixVocabulary::acquire(uint64_t matrix) {
    assert(matrix != 0 && "all-zero groups are removed, never coded");
    uint32_t slot = hfind(matrix);
    if (slot != ~uint32_t(0)) {
        uint32_t code = hvals_[slot];
        bump(code);
        return code;
    }
    uint32_t code;
    if (!free_codes_.empty()) {
        code = free_codes_.back();
        free_codes_.pop_back();
    } else {
        if (freq_.size() >= etdc::kMaxCodes) throw std::length_error("vocabulary full");
        code = uint32_t(freq_.size());
        uint32_t p = code;
        freq_.push_back(0);
        slot_.push_back(0);
        code_at_rank_.push_back(code);
        rank_of_code_.push_back(p);
        auto [it, fresh] = classes_.try_emplace(0, ClassRange{p, 0});
        assert(fresh || it->second.start + it->second.count == p);
        it->second.count++;
    }
    slot = hinsert(matrix, code);
    slot_[rank_of_code_[code]] = slot;
    bump(code);
    ++live_;
    return code;
}

void MatrixVocabulary::release(uint32_t code) {
    assert(code < rank_of_code_.size() && freq_[rank_of_code_[code]] > 0);
    uint32_t t = drop(code);
    if (freq_[t] == 0) {
        herase(slot_[t]);
        free_codes_.push_back(code);
        --live_;
    }
}

uint64_t MatrixVocabulary::matrix_of(uint32_t code) const {
    uint32_t p = rank_of_code_.at(code);
    assert(freq_[p] > 0 && "dead code has no matrix");
    return hkeys_[slot_[p]];
}

uint32_t MatrixVocabulary::code_of(uint64_t matrix) const {
    uint32_t slot = hfind(matrix);
    return slot == ~uint32_t(0) ? kDeadCode : hvals_[slot];
}

std::vector<uint64_t> MatrixVocabulary::matrices_in_rank_order() const {
    std::vector<uint64_t> out(freq_.size(), 0);
    for (size_t p = 0; p < freq_.size(); ++p)
        if (freq_[p] > 0) out[p] = hkeys_[slot_[p]];
    return out;
}

std::vector<uint32_t> MatrixVocabulary::rebuild() {
    size_t m = freq_.size();
    std::vector<uint32_t> remap(m, kDeadCode);
    std::vector<uint64_t> matrices = matrices_in_rank_order();
    std::vector<uint64_t> freq = std::move(freq_);
    std::vector<uint32_t> old_code = std::move(code_at_rank_);

    freq_.clear();
    slot_.clear();
    code_at_rank_.clear();
    rank_of_code_.clear();
    free_codes_.clear();
    classes_.clear();
    hkeys_.clear();
    hvals_.clear();
    hstate_.clear();
    hused_ = 0;
    live_ = 0;
    occurrences_ = 0;
    current_bytes_ = 0;
    optimal_bytes_ = 0;

    // rank order was already descending-frequency; reading it in order gives
    // the tie-break on previous rank for free
    for (uint32_t p = 0; p < m; ++p) {
        if (freq[p] == 0) break;
        uint32_t code = uint32_t(freq_.size());
        remap[old_code[p]] = code;
        freq_.push_back(freq[p]);
        code_at_rank_.push_back(code);
        rank_of_code_.push_back(code);
        slot_.push_back(hinsert(matrices[p], code));
        occurrences_ += freq[p];
        uint64_t bytes = freq[p] * etdc::length(code);
        current_bytes_ += bytes;
        optimal_bytes_ += bytes;
        ++live_;
    }
    rebuild_classes();
    return remap;
}

void MatrixVocabulary::rebuild_classes() {
    classes_.clear();
    size_t p = 0;
    while (p < freq_.size()) {
        size_t q = p;
        while (q < freq_.size() && freq_[q] == freq_[p]) ++q;
        classes_[freq_[p]] = ClassRange{uint32_t(p), uint32_t(q - p)};
        p = q;
    }
}

AuditReport MatrixVocabulary::audit() const {
    AuditReport rep;
    size_t m = freq_.size();
    if (slot_.size() != m || code_at_rank_.size() != m || rank_of_code_.size() != m) {
        rep.fail("vocab array sizes disagree");
        return rep;
    }
    for (size_t p = 0; p + 1 < m; ++p)
        if (freq_[p] < freq_[p + 1]) rep.fail("frequencies not non-increasing");
    for (uint32_t c = 0; c < m; ++c)
        if (rank_of_code_[c] >= m || code_at_rank_[rank_of_code_[c]] != c)
            rep.fail("rank/code maps are not inverse");
    uint64_t live = 0, occ = 0, cur = 0, opt = 0;
    for (uint32_t p = 0; p < m; ++p) {
        if (freq_[p] == 0) continue;
        ++live;
        occ += freq_[p];
        cur += freq_[p] * etdc::length(code_at_rank_[p]);
        opt += freq_[p] * etdc::length(p);
        uint32_t s = slot_[p];
        if (s >= hkeys_.size() || hstate_[s] != 1 || hvals_[s] != code_at_rank_[p])
            rep.fail("rank entry does not match its hash slot");
    }
    if (live != live_) rep.fail("live count mismatch");
    if (occ != occurrences_) rep.fail("occurrence count mismatch");
    if (cur != current_bytes_) rep.fail("current byte counter mismatch");
    if (opt != optimal_bytes_) rep.fail("ideal byte counter mismatch");
    uint64_t hfull = 0;
    for (uint8_t s : hstate_) hfull += s == 1;
    if (hfull != live) rep.fail("hash table live slot count mismatch");
    std::vector<uint32_t> dead;
    for (uint32_t p = 0; p < m; ++p)
        if (freq_[p] == 0) dead.push_back(code_at_rank_[p]);
    std::vector<uint32_t> freed = free_codes_;
    std::sort(dead.begin(), dead.end());
    std::sort(freed.begin(), freed.end());
    if (dead != freed) rep.fail("free code list does not match dead entries");
    uint64_t covered = 0;
    for (auto& [f, cls] : classes_) {
        covered += cls.count;
        if (cls.start + cls.count > m) {
            rep.fail("class range out of bounds");
            continue;
        }
        for (uint32_t p = cls.start; p < cls.start + cls.count; ++p)
            if (freq_[p] != f) rep.fail("class range holds wrong frequency");
    }
    if (covered != m) rep.fail("class ranges do not cover all entries");
    return rep;
}

void MatrixVocabulary::save(ByteWriter& w) const {
    w.u64(freq_.size());
    for (uint32_t p = 0; p < freq_.size(); ++p) {
        w.u64(freq_[p] > 0 ? hkeys_[slot_[p]] : 0);
        w.u64(freq_[p]);
        w.u32(code_at_rank_[p]);
    }
    w.u32(uint32_t(free_codes_.size()));
    for (uint32_t c : free_codes_) w.u32(c);
}

MatrixVocabulary MatrixVocabulary::load(ByteReader& r) {
    MatrixVocabulary v;
    uint64_t m = r.u64();
    v.freq_.resize(m);
    v.slot_.resize(m, 0);
    v.code_at_rank_.resize(m);
    v.rank_of_code_.resize(m);
    for (uint32_t p = 0; p < m; ++p) {
        uint64_t matrix = r.u64();
        v.freq_[p] = r.u64();
        uint32_t code = r.u32();
        if (code >= m) throw std::runtime_error("vocab snapshot: code out of range");
        v.code_at_rank_[p] = code;
        v.rank_of_code_[code] = p;
        if (p > 0 && v.freq_[p] > v.freq_[p - 1])
            throw std::runtime_error("vocab snapshot: frequencies out of order");
        if ((matrix == 0) != (v.freq_[p] == 0))
            throw std::runtime_error("vocab snapshot: dead entry with matrix");
        if (v.freq_[p] > 0) {
            v.slot_[p] = v.hinsert(matrix, code);
            ++v.live_;
            v.occurrences_ += v.freq_[p];
            v.current_bytes_ += v.freq_[p] * etdc::length(code);
            v.optimal_bytes_ += v.freq_[p] * etdc::length(p);
        }
    }
    uint32_t nfree = r.u32();
    for (uint32_t i = 0; i < nfree; ++i) v.free_codes_.push_back(r.u32());
    v.rebuild_classes();
    AuditReport rep = v.audit();
    if (!rep.ok) throw std::runtime_error("vocab snapshot: " + rep.issues);
    return v;
}

// ---- VocabLTree ----

static CodeTree::Params ltree_params(uint32_t group_bits, const DK2Config& cfg) {
    CodeTree::Params p;
    p.block_bytes = cfg.block_bytes;
    p.expansions = cfg.expansions;
    p.sample_period = cfg.sample_l;
    p.rank_support = false;
    p.bits_per_code = group_bits;
    return p;
}

VocabLTree::VocabLTree(uint32_t group_bits, const DK2Config& cfg)
    : group_bits_(group_bits),
      mode_(cfg.vocab),
      rebuild_ratio_(cfg.rebuild_ratio),
      rebuild_floor_bytes_(cfg.rebuild_floor_bytes),
      rebuild_period_(cfg.rebuild_period),
      tree_(ltree_params(group_bits, cfg)) {
    assert(group_bits_ >= 1 && group_bits_ <= 64);
}

std::vector<uint8_t> VocabLTree::encode(uint32_t code) const {
    uint8_t buf[4];
    unsigned n = etdc::encode(code, buf);
    return std::vector<uint8_t>(buf, buf + n);
}

uint64_t VocabLTree::read_group(uint64_t pos, CodeTree::PathMemo* memo) const {
    return vocab_.matrix_of(uint32_t(tree_.code_at(pos, memo)));
}

void VocabLTree::insert_group(uint64_t pos, uint64_t matrix) {
    uint32_t code = vocab_.acquire(matrix);
    tree_.insert_code(pos, encode(code));
    post_update();
}

void VocabLTree::remove_group(uint64_t pos) {
    uint32_t code = uint32_t(tree_.remove_code(pos));
    vocab_.release(code);
    post_update();
}

void VocabLTree::set_bit(uint64_t pos, bool value) {
    uint64_t old_matrix = read_group(pos);
    uint64_t bit = uint64_t(1) << (pos % group_bits_);
    uint64_t new_matrix = value ? old_matrix | bit : old_matrix & ~bit;
    assert(new_matrix != old_matrix && "caller flips only when the bit changes");
    assert(new_matrix != 0 && "caller removes all-zero groups instead");
    uint32_t code = vocab_.acquire(new_matrix);
    uint32_t old_code = uint32_t(tree_.replace_code(pos, encode(code)));
    vocab_.release(old_code);
    post_update();
}

void VocabLTree::bulk_load(const std::vector<uint64_t>& matrices) {
    vocab_ = MatrixVocabulary();
    std::vector<uint32_t> codes;
    codes.reserve(matrices.size());
    for (uint64_t mx : matrices) codes.push_back(vocab_.acquire(mx));
    std::vector<uint32_t> remap = vocab_.rebuild();
    std::vector<std::vector<uint8_t>> words;
    words.reserve(codes.size());
    for (uint32_t c : codes) words.push_back(encode(remap[c]));
    tree_.bulk_load_codes(words);
    updates_since_rebuild_ = 0;
}

BitVec VocabLTree::to_bitvec() const {
    BitVec out;
    tree_.visit_leaves([&](const CodeLeaf& leaf, uint64_t) {
        size_t off = 0;
        for (uint32_t i = 0; i < leaf.ncodes; ++i) {
            auto dec = etdc::decode(leaf.bytes, off);
            off += dec.consumed;
            out.append_bits(vocab_.matrix_of(uint32_t(dec.index)), unsigned(group_bits_));
        }
    });
    return out;
}

uint64_t VocabLTree::measured_bytes() const {
    // vocabulary: hash table plus the rank arrays
    uint64_t vb = vocab_.live_entries() * (8 + 4 + 4 + 4 + 4);
    return tree_.measured_bytes() + vb;
}

void VocabLTree::post_update() {
    ++updates_since_rebuild_;
    bool due = false;
    if (mode_ == VocabMode::tracked) {
        due = vocab_.current_bytes() >= rebuild_floor_bytes_ &&
              vocab_.size_ratio() > rebuild_ratio_;
    } else {
        due = updates_since_rebuild_ >= rebuild_period_;
    }
    if (due) rebuild_now();
}

void VocabLTree::rebuild_now() {
    std::vector<uint32_t> old_codes;
    old_codes.reserve(size_t(tree_.total_bits() / group_bits_));
    tree_.visit_leaves([&](const CodeLeaf& leaf, uint64_t) {
        size_t off = 0;
        for (uint32_t i = 0; i < leaf.ncodes; ++i) {
            auto dec = etdc::decode(leaf.bytes, off);
            off += dec.consumed;
            old_codes.push_back(uint32_t(dec.index));
        }
    });
    std::vector<uint32_t> remap = vocab_.rebuild();
    std::vector<std::vector<uint8_t>> words;
    words.reserve(old_codes.size());
    for (uint32_t c : old_codes) words.push_back(encode(remap[c]));
    tree_.bulk_load_codes(words);
    updates_since_rebuild_ = 0;
    ++rebuilds_;
}

AuditReport VocabLTree::audit() const {
    AuditReport rep = tree_.audit();
    rep.merge(vocab_.audit());
    if (tree_.total_bits() % group_bits_ != 0) rep.fail("stored bits not a whole group count");
    if (vocab_.total_occurrences() != tree_.total_bits() / group_bits_)
        rep.fail("vocabulary occurrence total differs from stored group count");
    std::unordered_map<uint32_t, uint64_t> seen;
    bool decode_ok = true;
    tree_.visit_leaves([&](const CodeLeaf& leaf, uint64_t) {
        size_t off = 0;
        for (uint32_t i = 0; i < leaf.ncodes && decode_ok; ++i) {
            try {
                auto dec = etdc::decode(leaf.bytes, off);
                off += dec.consumed;
                seen[uint32_t(dec.index)] += 1;
            } catch (const std::exception&) {
                decode_ok = false;
            }
        }
    });
    if (!decode_ok) rep.fail("stored bytes fail to decode");
    for (auto& [code, n] : seen)
        if (code >= etdc::kMaxCodes || vocab_.freq_of_code(code) != n)
            rep.fail("stored code frequency differs from vocabulary");
    return rep;
}

void VocabLTree::save(ByteWriter& w) const {
    w.u32(group_bits_);
    w.u64(updates_since_rebuild_);
    tree_.save(w);
    vocab_.save(w);
}

VocabLTree VocabLTree::load(ByteReader& r, const DK2Config& cfg) {
    uint32_t group_bits = r.u32();
    if (group_bits < 1 || group_bits > 64)
        throw std::runtime_error("vocab snapshot: bad group size");
    VocabLTree t(group_bits, cfg);
    t.updates_since_rebuild_ = r.u64();
    t.tree_ = CodeTree::load(r);
    t.vocab_ = MatrixVocabulary::load(r);
    AuditReport rep = t.audit();
    if (!rep.ok) throw std::runtime_error("vocab snapshot: " + rep.issues);
    return t;
}

}  // namespace dk2
