#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "dk2/audit.hpp"
#include "dk2/bitvec.hpp"
#include "dk2/codec.hpp"
#include "dk2/io.hpp"

namespace dk2 {

// Leaf payload for bitmap trees: raw bits plus optional per-period rank
// counters. The leaf never stores bits of two different sibling groups split
// across a neighbour; split and borrow points are chosen on group boundaries.
struct BitLeaf {
    static constexpr bool kCoded = false;
    BitVec bits;
    RankSamples samples;
    uint8_t cls = 0;

    uint64_t logical_bits() const { return bits.size(); }
    uint64_t physical_bytes() const { return (bits.size() + 7) / 8; }
};

// Leaf payload for codeword trees: concatenated variable-length byte codes,
// each standing for one fixed-size group of logical bits. Offset samples give
// the byte position of every sample_period-th codeword.
struct CodeLeaf {
    static constexpr bool kCoded = true;
    std::vector<uint8_t> bytes;
    uint32_t ncodes = 0;
    std::vector<uint16_t> samples;  // byte offset of codeword i*period
    uint8_t cls = 0;

    uint64_t physical_bytes() const { return bytes.size(); }

    void rebuild_samples(uint32_t period) {
        samples.clear();
        if (period == 0) return;
        size_t off = 0;
        for (uint32_t i = 0; i < ncodes; ++i) {
            if (i % period == 0) samples.push_back(uint16_t(off));
            off = etdc::skip(bytes, off);
        }
    }

    size_t locate(uint32_t ordinal, uint32_t period) const {
        assert(ordinal <= ncodes);
        if (ordinal == ncodes) return bytes.size();
        size_t off = 0;
        uint32_t from = 0;
        if (period != 0 && !samples.empty()) {
            uint32_t s = std::min<uint32_t>(ordinal / period, uint32_t(samples.size()) - 1);
            off = samples[s];
            from = s * period;
        }
        for (; from < ordinal; ++from) off = etdc::skip(bytes, off);
        return off;
    }
};

// Balanced tree over leaf blocks. Internal entries carry the logical bit
// count (and, when rank support is on, the ones count) of their subtree, so
// position lookups and rank accumulate counters on the way down instead of
// storing absolute offsets. All leaves sit at the same depth.
//
// Writers need exclusive access; any number of readers may run concurrently,
// each with its own PathMemo. No internal locking.
template <class Leaf>
class BlockTree {
public:
    struct Params {
        uint32_t block_bytes = 512;   // class-0 leaf capacity in bytes
        uint8_t expansions = 3;       // classes 0..e, capacity B*(1 + c/(e+1))
        uint32_t sample_period = 128; // bits (bit leaves) or codewords (coded leaves)
        bool rank_support = true;     // maintain ones counters + rank samples
        uint32_t align_bits = 4;      // bit leaves: split/borrow lattice, = largest group size
        uint32_t bits_per_code = 16;  // coded leaves: logical bits per codeword
    };

    struct Entry;
    struct Node {
        bool leaf_node = false;
        std::vector<Entry> entries;  // internal nodes only
        Leaf payload;                // leaf nodes only
    };
    struct Entry {
        uint64_t bits = 0;
        uint64_t ones = 0;
        std::unique_ptr<Node> child;
    };

    struct PathMemo {
        struct Frame {
            const Node* node;
            uint64_t b_start, o_start, covered;
        };
        std::vector<Frame> frames;  // root first, leaf frame last
        uint64_t version = ~uint64_t(0);
        uint32_t last_internal_visits = 0;
    };

    struct FindResult {
        const Leaf* leaf;
        uint64_t bits_before;
        uint64_t ones_before;
    };

    explicit BlockTree(Params params = {}) : params_(params) {
        if constexpr (Leaf::kCoded) params_.rank_support = false;
        max_entries_ = std::max<uint32_t>(4, params_.block_bytes / entry_bytes());
        min_entries_ = (max_entries_ + 1) / 2;
        root_ = std::make_unique<Node>();
    }

    const Params& params() const { return params_; }
    uint64_t total_bits() const { return total_bits_; }
    uint64_t total_ones() const { return total_ones_; }
    uint64_t version() const { return version_; }

    uint32_t capacity_bytes(uint8_t cls) const {
        return params_.block_bytes +
               uint32_t(cls) * params_.block_bytes / (uint32_t(params_.expansions) + 1);
    }
    uint32_t min_bytes() const { return params_.block_bytes / 4; }

    // ---- lookup ----

    FindResult find_leaf(uint64_t p) const {
        check_read_pos(p);
        const Node* n = root_.get();
        uint64_t b = 0, o = 0;
        while (!n->leaf_node) {
            size_t i = 0;
            while (p >= b + n->entries[i].bits) {
                b += n->entries[i].bits;
                o += n->entries[i].ones;
                ++i;
            }
            n = n->entries[i].child.get();
        }
        return {&n->payload, b, o};
    }

    FindResult find_leaf_star(uint64_t p, PathMemo& memo) const {
        check_read_pos(p);
        memo.last_internal_visits = 0;
        if (memo.version != version_ || memo.frames.empty()) {
            memo.version = version_;
            memo.frames.clear();
            return descend_memo(root_.get(), 0, 0, p, memo);
        }
        // ascend from the deepest remembered frame until one covers p
        for (size_t d = memo.frames.size(); d-- > 0;) {
            const auto& f = memo.frames[d];
            if (p >= f.b_start && p < f.b_start + f.covered) {
                if (f.node->leaf_node)
                    return {&f.node->payload, f.b_start, f.o_start};
                memo.frames.resize(d + 1);
                return descend_memo(f.node, f.b_start, f.o_start, p, memo);
            }
        }
        memo.frames.clear();
        return descend_memo(root_.get(), 0, 0, p, memo);
    }

    bool access(uint64_t p, PathMemo* memo = nullptr) const
        requires(!Leaf::kCoded)
    {
        FindResult f = find(p, memo);
        return f.leaf->bits.get(p - f.bits_before);
    }

    // Number of 1s in positions [0, p], inclusive.
    uint64_t rank1(uint64_t p, PathMemo* memo = nullptr) const
        requires(!Leaf::kCoded)
    {
        require_rank();
        FindResult f = find(p, memo);
        return f.ones_before + block_rank1(f.leaf->bits, f.leaf->samples, p - f.bits_before + 1);
    }

    std::pair<bool, uint64_t> access_and_rank1(uint64_t p, PathMemo* memo = nullptr) const
        requires(!Leaf::kCoded)
    {
        require_rank();
        FindResult f = find(p, memo);
        uint64_t local = p - f.bits_before;
        return {f.leaf->bits.get(local),
                f.ones_before + block_rank1(f.leaf->bits, f.leaf->samples, local + 1)};
    }

    // Reads n <= 64 bits at p; the range must lie inside one leaf, which holds
    // for any sibling group by the alignment invariant.
    uint64_t read_bits(uint64_t p, unsigned n, PathMemo* memo = nullptr) const
        requires(!Leaf::kCoded)
    {
        FindResult f = find(p, memo);
        uint64_t local = p - f.bits_before;
        assert(local + n <= f.leaf->bits.size());
        return f.leaf->bits.read_bits(local, n);
    }

    // ---- bit mutations ----

    void flip(uint64_t p)
        requires(!Leaf::kCoded)
    {
        check_read_pos(p);
        Path path;
        Node* n = descend_mut(p, false, path);
        BitLeaf& leaf = n->payload;
        uint64_t local = p - path.bits_before;
        bool was = leaf.bits.get(local);
        leaf.bits.flip(local);
        int64_t d1 = was ? -1 : 1;
        if (params_.rank_support) {
            size_t s = local / params_.sample_period;
            if (s < leaf.samples.counts.size())
                leaf.samples.counts[s] = uint16_t(int32_t(leaf.samples.counts[s]) + d1);
            apply_deltas(path, 0, d1);
            total_ones_ = uint64_t(int64_t(total_ones_) + d1);
        }
        ++version_;
    }

    void insert_bits(uint64_t p, uint64_t group, unsigned n)
        requires(!Leaf::kCoded)
    {
        if (p > total_bits_) throw std::out_of_range("blocktree: insert past end");
        assert(n >= 1 && n <= 64);
        ensure_first_leaf();
        Path path;
        Node* node = descend_mut(p, true, path);
        BitLeaf& leaf = node->payload;
        uint64_t local = p - path.bits_before;
        leaf.bits.insert(local, group, n);
        int64_t dones = params_.rank_support ? int64_t(std::popcount(group & mask_n(n))) : 0;
        refresh_bit_samples(leaf);
        apply_deltas(path, int64_t(n), dones);
        total_bits_ += n;
        total_ones_ = uint64_t(int64_t(total_ones_) + dones);
        ++version_;
        fix_overflow(path);
    }

    void remove_bits(uint64_t p, unsigned n)
        requires(!Leaf::kCoded)
    {
        assert(n >= 1 && n <= 64);
        if (p + n > total_bits_) throw std::out_of_range("blocktree: remove past end");
        Path path;
        Node* node = descend_mut(p, false, path);
        BitLeaf& leaf = node->payload;
        uint64_t local = p - path.bits_before;
        assert(local + n <= leaf.bits.size() && "group split across leaves");
        int64_t dones =
            params_.rank_support ? -int64_t(leaf.bits.popcount_range(local, local + n)) : 0;
        leaf.bits.erase(local, n);
        refresh_bit_samples(leaf);
        apply_deltas(path, -int64_t(n), dones);
        total_bits_ -= n;
        total_ones_ = uint64_t(int64_t(total_ones_) + dones);
        ++version_;
        fix_underflow(path);
    }

    // ---- codeword operations ----

    uint64_t code_at(uint64_t p, PathMemo* memo = nullptr) const
        requires(Leaf::kCoded)
    {
        FindResult f = find(p, memo);
        const CodeLeaf& leaf = *f.leaf;
        uint32_t ordinal = uint32_t((p - f.bits_before) / params_.bits_per_code);
        size_t off = leaf.locate(ordinal, params_.sample_period);
        return etdc::decode(leaf.bytes, off).index;
    }

    void insert_code(uint64_t p, std::span<const uint8_t> codeword)
        requires(Leaf::kCoded)
    {
        if (p > total_bits_) throw std::out_of_range("blocktree: insert past end");
        assert(p % params_.bits_per_code == 0);
        ensure_first_leaf();
        Path path;
        Node* node = descend_mut(p, true, path);
        CodeLeaf& leaf = node->payload;
        uint32_t ordinal = uint32_t((p - path.bits_before) / params_.bits_per_code);
        size_t off = leaf.locate(ordinal, params_.sample_period);
        leaf.bytes.insert(leaf.bytes.begin() + off, codeword.begin(), codeword.end());
        leaf.ncodes += 1;
        leaf.rebuild_samples(params_.sample_period);
        apply_deltas(path, int64_t(params_.bits_per_code), 0);
        total_bits_ += params_.bits_per_code;
        ++version_;
        fix_overflow(path);
    }

    // Removes the codeword covering p; returns its decoded index.
    uint64_t remove_code(uint64_t p)
        requires(Leaf::kCoded)
    {
        check_read_pos(p);
        Path path;
        Node* node = descend_mut(p, false, path);
        CodeLeaf& leaf = node->payload;
        uint32_t ordinal = uint32_t((p - path.bits_before) / params_.bits_per_code);
        size_t off = leaf.locate(ordinal, params_.sample_period);
        auto dec = etdc::decode(leaf.bytes, off);
        leaf.bytes.erase(leaf.bytes.begin() + off, leaf.bytes.begin() + off + dec.consumed);
        leaf.ncodes -= 1;
        leaf.rebuild_samples(params_.sample_period);
        apply_deltas(path, -int64_t(params_.bits_per_code), 0);
        total_bits_ -= params_.bits_per_code;
        ++version_;
        fix_underflow(path);
        return dec.index;
    }

    // Replaces the codeword covering p; returns the decoded old index.
    uint64_t replace_code(uint64_t p, std::span<const uint8_t> codeword)
        requires(Leaf::kCoded)
    {
        check_read_pos(p);
        Path path;
        Node* node = descend_mut(p, false, path);
        CodeLeaf& leaf = node->payload;
        uint32_t ordinal = uint32_t((p - path.bits_before) / params_.bits_per_code);
        size_t off = leaf.locate(ordinal, params_.sample_period);
        auto dec = etdc::decode(leaf.bytes, off);
        leaf.bytes.erase(leaf.bytes.begin() + off, leaf.bytes.begin() + off + dec.consumed);
        leaf.bytes.insert(leaf.bytes.begin() + off, codeword.begin(), codeword.end());
        leaf.rebuild_samples(params_.sample_period);
        ++version_;
        // logical size unchanged; physical size may cross class limits
        fix_overflow(path);
        fix_underflow(path);
        return dec.index;
    }

    // ---- bulk construction ----

    void bulk_load(const BitVec& all)
        requires(!Leaf::kCoded)
    {
        reset();
        if (all.size() == 0) return;
        uint64_t cap_bits = uint64_t(capacity_bytes(0)) * 8;
        uint64_t chunk = cap_bits / params_.align_bits * params_.align_bits;
        std::vector<uint64_t> cuts;  // chunk sizes
        uint64_t left = all.size();
        while (left > chunk) {
            cuts.push_back(chunk);
            left -= chunk;
        }
        cuts.push_back(left);
        if (cuts.size() >= 2 && left * 8 < uint64_t(min_bytes()) * 8 * 8) {
            // rebalance the final two chunks on the alignment lattice
            uint64_t combined = cuts[cuts.size() - 2] + left;
            uint64_t lo = combined / 2 / params_.align_bits * params_.align_bits;
            if (lo == 0) lo = params_.align_bits;
            cuts[cuts.size() - 2] = lo;
            cuts.back() = combined - lo;
        }
        std::vector<std::unique_ptr<Node>> leaves;
        uint64_t pos = 0;
        for (uint64_t sz : cuts) {
            auto n = std::make_unique<Node>();
            n->leaf_node = true;
            uint64_t src = pos;
            while (src < pos + sz) {
                unsigned take = unsigned(std::min<uint64_t>(64, pos + sz - src));
                n->payload.bits.append_bits(all.read_bits(src, take), take);
                src += take;
            }
            n->payload.cls = class_for(n->payload.physical_bytes());
            refresh_bit_samples(n->payload);
            pos += sz;
            leaves.push_back(std::move(n));
        }
        build_from_leaves(std::move(leaves));
        total_bits_ = all.size();
        total_ones_ = params_.rank_support ? all.popcount() : 0;
        ++version_;
    }

    void bulk_load_codes(std::span<const std::vector<uint8_t>> codewords)
        requires(Leaf::kCoded)
    {
        reset();
        if (codewords.empty()) return;
        uint64_t cap = capacity_bytes(0);
        std::vector<std::unique_ptr<Node>> leaves;
        auto fresh = [&] {
            auto n = std::make_unique<Node>();
            n->leaf_node = true;
            return n;
        };
        auto cur = fresh();
        for (const auto& cw : codewords) {
            if (cur->payload.bytes.size() + cw.size() > cap && cur->payload.ncodes > 0) {
                leaves.push_back(std::move(cur));
                cur = fresh();
            }
            cur->payload.bytes.insert(cur->payload.bytes.end(), cw.begin(), cw.end());
            cur->payload.ncodes += 1;
        }
        leaves.push_back(std::move(cur));
        if (leaves.size() >= 2 && leaves.back()->payload.physical_bytes() < min_bytes()) {
            // move codewords from the second-to-last leaf until both are near half
            CodeLeaf& a = leaves[leaves.size() - 2]->payload;
            CodeLeaf& b = leaves.back()->payload;
            while (b.physical_bytes() + 4 < a.physical_bytes() && a.ncodes > 1) {
                size_t off = a.locate(a.ncodes - 1, 0);
                b.bytes.insert(b.bytes.begin(), a.bytes.begin() + off, a.bytes.end());
                a.bytes.resize(off);
                a.ncodes -= 1;
                b.ncodes += 1;
            }
        }
        for (auto& n : leaves) {
            n->payload.cls = class_for(n->payload.physical_bytes());
            n->payload.rebuild_samples(params_.sample_period);
            total_bits_ += uint64_t(n->payload.ncodes) * params_.bits_per_code;
        }
        build_from_leaves(std::move(leaves));
        ++version_;
    }

    // ---- inspection ----

    template <class Fn>
    void visit_leaves(Fn&& fn) const {
        uint64_t b = 0;
        visit_rec(root_.get(), b, fn);
    }

    BitVec to_bitvec() const
        requires(!Leaf::kCoded)
    {
        BitVec out;
        visit_leaves([&](const Leaf& leaf, uint64_t) { out.append(leaf.bits); });
        return out;
    }

    uint64_t leaf_count() const {
        uint64_t n = 0;
        visit_leaves([&](const Leaf&, uint64_t) { ++n; });
        return n;
    }
    uint64_t height() const { return height_; }
    uint32_t max_entries() const { return max_entries_; }

    uint64_t measured_bytes() const { return measure_rec(root_.get()); }

    AuditReport audit() const {
        AuditReport rep;
        if (!root_) {
            rep.fail("missing root");
            return rep;
        }
        uint64_t leaves = leaf_count();
        int64_t depth = -1;
        auto sums = audit_rec(root_.get(), 0, leaves, depth, rep);
        if (sums.first != total_bits_) rep.fail("total bits counter mismatch");
        if (params_.rank_support && sums.second != total_ones_) rep.fail("total ones counter mismatch");
        if (!params_.rank_support && total_ones_ != 0) rep.fail("ones tracked without rank support");
        return rep;
    }

    // ---- snapshots ----

    void save(ByteWriter& w) const {
        w.u8(1);  // format version
        uint8_t flags = (Leaf::kCoded ? 1 : 0) | (params_.rank_support ? 2 : 0);
        w.u8(flags);
        w.u32(params_.block_bytes);
        w.u8(params_.expansions);
        w.u32(params_.sample_period);
        w.u32(Leaf::kCoded ? params_.bits_per_code : params_.align_bits);
        w.u64(total_bits_);
        w.u64(total_ones_);
        save_rec(root_.get(), w);
    }

    static BlockTree load(ByteReader& r) {
        if (r.u8() != 1) throw std::runtime_error("blocktree snapshot: unknown version");
        uint8_t flags = r.u8();
        if (bool(flags & 1) != Leaf::kCoded)
            throw std::runtime_error("blocktree snapshot: leaf kind mismatch");
        Params p;
        p.rank_support = flags & 2;
        p.block_bytes = r.u32();
        p.expansions = r.u8();
        p.sample_period = r.u32();
        uint32_t aux = r.u32();
        if constexpr (Leaf::kCoded) p.bits_per_code = aux;
        else p.align_bits = aux;
        BlockTree t(p);
        uint64_t bits = r.u64(), ones = r.u64();
        uint64_t h = 0;
        t.root_ = t.load_rec(r, h);
        t.height_ = t.root_->leaf_node ? 1 : h;
        if (t.root_->leaf_node) {
            // stored as a bare leaf only for the trivial empty tree
            auto leaf = std::move(t.root_);
            t.root_ = std::make_unique<Node>();
            adopt_single(t, std::move(leaf));
        }
        auto counted = t.recount(t.root_.get());
        if (counted.first != bits || (p.rank_support && counted.second != ones))
            throw std::runtime_error("blocktree snapshot: counter mismatch");
        t.total_bits_ = bits;
        t.total_ones_ = p.rank_support ? ones : 0;
        return t;
    }

private:
    struct PathStep {
        Node* node;
        uint32_t idx;
    };
    struct Path {
        std::vector<PathStep> steps;  // root..leaf parent
        Node* leaf = nullptr;
        uint64_t bits_before = 0;
        uint64_t ones_before = 0;
    };

    static uint64_t mask_n(unsigned n) {
        return n >= 64 ? ~uint64_t(0) : (uint64_t(1) << n) - 1;
    }

    uint32_t entry_bytes() const {
        return params_.rank_support ? 24 : 16;  // counters plus child pointer
    }

    void require_rank() const {
        if (!params_.rank_support)
            throw std::logic_error("blocktree: rank not supported in this mode");
    }

    void check_read_pos(uint64_t p) const {
        if (p >= total_bits_) throw std::out_of_range("blocktree: position beyond tree");
    }

    uint8_t class_for(uint64_t phys_bytes) const {
        for (uint8_t c = 0;; ++c) {
            if (phys_bytes <= capacity_bytes(c)) return c;
            if (c == params_.expansions) return params_.expansions;
        }
    }

    FindResult find(uint64_t p, PathMemo* memo) const {
        return memo ? find_leaf_star(p, *memo) : find_leaf(p);
    }

    FindResult descend_memo(const Node* n, uint64_t b, uint64_t o, uint64_t p,
                            PathMemo& memo) const {
        while (!n->leaf_node) {
            memo.last_internal_visits++;
            uint64_t covered = 0, ones = 0;
            for (const Entry& e : n->entries) covered += e.bits, ones += e.ones;
            memo.frames.push_back({n, b, o, covered});
            size_t i = 0;
            while (p >= b + n->entries[i].bits) {
                b += n->entries[i].bits;
                o += n->entries[i].ones;
                ++i;
            }
            n = n->entries[i].child.get();
        }
        uint64_t covered = leaf_logical(n->payload);
        memo.frames.push_back({n, b, o, covered});
        return {&n->payload, b, o};
    }

    uint64_t leaf_logical(const Leaf& leaf) const {
        if constexpr (Leaf::kCoded) return uint64_t(leaf.ncodes) * params_.bits_per_code;
        else return leaf.bits.size();
    }

    // Descends to the leaf for p, recording the path. In insert mode a
    // position on a boundary lands at the end of the earlier leaf, and
    // p == total_bits_ is allowed.
    Node* descend_mut(uint64_t p, bool insert_mode, Path& path) {
        Node* n = root_.get();
        uint64_t b = 0, o = 0;
        while (!n->leaf_node) {
            size_t i = 0;
            while (i + 1 < n->entries.size()) {
                uint64_t end = b + n->entries[i].bits;
                if (insert_mode ? p <= end : p < end) break;
                b += n->entries[i].bits;
                o += n->entries[i].ones;
                ++i;
            }
            path.steps.push_back({n, uint32_t(i)});
            n = n->entries[i].child.get();
        }
        path.leaf = n;
        path.bits_before = b;
        path.ones_before = o;
        return n;
    }

    void apply_deltas(Path& path, int64_t dbits, int64_t dones) {
        for (auto& s : path.steps) {
            Entry& e = s.node->entries[s.idx];
            e.bits = uint64_t(int64_t(e.bits) + dbits);
            e.ones = uint64_t(int64_t(e.ones) + dones);
        }
    }

    void refresh_bit_samples(BitLeaf& leaf) {
        if (params_.rank_support)
            leaf.samples = rebuild_samples(leaf.bits, params_.sample_period);
    }

    void ensure_first_leaf() {
        if (root_->leaf_node || !root_->entries.empty()) return;
        auto leaf = std::make_unique<Node>();
        leaf->leaf_node = true;
        Entry e;
        e.child = std::move(leaf);
        root_->entries.push_back(std::move(e));
        height_ = 1;
    }

    static void adopt_single(BlockTree& t, std::unique_ptr<Node> leaf) {
        Entry e;
        e.bits = t.leaf_logical(leaf->payload);
        e.ones = 0;
        e.child = std::move(leaf);
        t.root_->entries.push_back(std::move(e));
        t.height_ = 1;
    }

    void reset() {
        root_ = std::make_unique<Node>();
        height_ = 0;
        total_bits_ = total_ones_ = 0;
    }

    // ---- structural repair: overflow ----

    void fix_overflow(Path& path) {
        Leaf& leaf = path.leaf->payload;
        leaf.cls = class_for(leaf.physical_bytes());
        if (leaf.physical_bytes() <= capacity_bytes(params_.expansions)) return;
        split_leaf(path);
    }

    void split_leaf(Path& path) {
        Leaf& left = path.leaf->payload;
        auto right_node = std::make_unique<Node>();
        right_node->leaf_node = true;
        Leaf& right = right_node->payload;

        uint64_t moved_bits = 0, moved_ones = 0;
        if constexpr (Leaf::kCoded) {
            // cut at the codeword boundary nearest the byte midpoint
            assert(left.ncodes >= 2);
            size_t half = left.bytes.size() / 2;
            size_t off = 0, best_off = 0;
            uint32_t best_ord = 0;
            for (uint32_t i = 1; i < left.ncodes; ++i) {
                off = etdc::skip(left.bytes, off);
                size_t d = off >= half ? off - half : half - off;
                size_t bd = best_off >= half ? best_off - half : half - best_off;
                if (best_ord == 0 || d < bd) {
                    best_off = off;
                    best_ord = i;
                }
                if (off >= half) break;
            }
            right.bytes.assign(left.bytes.begin() + best_off, left.bytes.end());
            left.bytes.resize(best_off);
            right.ncodes = left.ncodes - best_ord;
            left.ncodes = best_ord;
            left.rebuild_samples(params_.sample_period);
            right.rebuild_samples(params_.sample_period);
            moved_bits = uint64_t(right.ncodes) * params_.bits_per_code;
        } else {
            // cut on the group-size lattice nearest the midpoint, in global
            // content coordinates so the cut is a genuine sibling-group boundary
            uint64_t b0 = path.bits_before, sz = left.bits.size(), a = params_.align_bits;
            uint64_t target = b0 + sz / 2;
            uint64_t cut = (target + a / 2) / a * a;
            uint64_t lo = (b0 / a + 1) * a;               // first lattice point > b0
            uint64_t hi = (b0 + sz - 1) / a * a;          // last lattice point < b0+sz
            assert(lo <= hi);
            cut = std::clamp(cut, lo, hi);
            assert(cut > b0 && cut < b0 + sz);
            right.bits = left.bits.split_off(cut - b0);
            refresh_bit_samples(left);
            refresh_bit_samples(right);
            moved_bits = right.bits.size();
            moved_ones = params_.rank_support ? right.bits.popcount() : 0;
        }
        left.cls = class_for(left.physical_bytes());
        right.cls = class_for(right.physical_bytes());

        Entry re;
        re.bits = moved_bits;
        re.ones = moved_ones;
        re.child = std::move(right_node);

        if (path.steps.empty()) {
            // single-leaf tree whose root is the leaf's parent: cannot happen,
            // root is always internal
            assert(false);
            return;
        }
        PathStep& ps = path.steps.back();
        Entry& le = ps.node->entries[ps.idx];
        le.bits -= moved_bits;
        le.ones -= moved_ones;
        insert_entry(path, path.steps.size() - 1, ps.idx + 1, std::move(re));
    }

    void insert_entry(Path& path, size_t depth, uint32_t at, Entry&& e) {
        Node* node = path.steps[depth].node;
        node->entries.insert(node->entries.begin() + at, std::move(e));
        if (node->entries.size() <= max_entries_) return;
        // split internal node
        size_t keep = (node->entries.size() + 1) / 2;
        auto sibling = std::make_unique<Node>();
        sibling->entries.assign(std::make_move_iterator(node->entries.begin() + keep),
                                std::make_move_iterator(node->entries.end()));
        node->entries.resize(keep);
        Entry se;
        for (const Entry& x : sibling->entries) {
            se.bits += x.bits;
            se.ones += x.ones;
        }
        se.child = std::move(sibling);
        if (depth == 0) {
            auto new_root = std::make_unique<Node>();
            Entry old_e;
            for (const Entry& x : node->entries) {
                old_e.bits += x.bits;
                old_e.ones += x.ones;
            }
            old_e.child = std::move(root_);
            new_root->entries.push_back(std::move(old_e));
            new_root->entries.push_back(std::move(se));
            root_ = std::move(new_root);
            ++height_;
        } else {
            // the split node keeps only its first `keep` entries; its counter
            // in the parent must shrink by what moved to the sibling
            PathStep& up = path.steps[depth - 1];
            Entry& kept = up.node->entries[up.idx];
            kept.bits -= se.bits;
            kept.ones -= se.ones;
            insert_entry(path, depth - 1, up.idx + 1, std::move(se));
        }
    }

    // ---- structural repair: underflow ----

    void fix_underflow(Path& path) {
        Leaf& leaf = path.leaf->payload;
        leaf.cls = class_for(leaf.physical_bytes());
        if (leaf.physical_bytes() >= min_bytes()) return;
        if (path.steps.empty()) return;
        Node* parent = path.steps.back().node;
        if (height_ == 1 && parent->entries.size() == 1) return;  // single leaf is exempt
        uint32_t idx = path.steps.back().idx;

        uint32_t li = idx > 0 ? idx - 1 : idx + 1;
        uint32_t ri = idx + 1 < parent->entries.size() ? idx + 1 : idx - 1;
        uint32_t sib = li;
        if (li != ri) {
            uint64_t lsz = parent->entries[li].child->payload.physical_bytes();
            uint64_t rsz = parent->entries[ri].child->payload.physical_bytes();
            sib = rsz > lsz ? ri : li;
        }
        bool sib_left = sib < idx;
        if (try_borrow_leaf(path, parent, idx, sib, sib_left)) return;
        merge_leaves(path, parent, sib_left ? sib : idx);
    }

    // Rebalances us and the donor toward equal size so both end at or above
    // the minimum fill. Returns false when their combined content is too
    // small for that, in which case the caller merges them instead.
    bool try_borrow_leaf(Path& path, Node* parent, uint32_t idx, uint32_t sib, bool sib_left) {
        Leaf& us = parent->entries[idx].child->payload;
        Leaf& donor = parent->entries[sib].child->payload;
        uint64_t moved_bits = 0, moved_ones = 0;

        if constexpr (Leaf::kCoded) {
            if (us.physical_bytes() + donor.physical_bytes() < 2 * uint64_t(min_bytes()) + 8)
                return false;
            uint32_t moved = 0;
            while (us.physical_bytes() < min_bytes()) {
                assert(donor.ncodes > 1);
                if (sib_left) {
                    size_t off = donor.locate(donor.ncodes - 1, params_.sample_period);
                    us.bytes.insert(us.bytes.begin(), donor.bytes.begin() + off,
                                    donor.bytes.end());
                    donor.bytes.resize(off);
                } else {
                    size_t len = etdc::skip(donor.bytes, 0);
                    us.bytes.insert(us.bytes.end(), donor.bytes.begin(),
                                    donor.bytes.begin() + len);
                    donor.bytes.erase(donor.bytes.begin(), donor.bytes.begin() + len);
                }
                donor.ncodes -= 1;
                us.ncodes += 1;
                ++moved;
            }
            us.rebuild_samples(params_.sample_period);
            donor.rebuild_samples(params_.sample_period);
            moved_bits = uint64_t(moved) * params_.bits_per_code;
        } else {
            // new cut goes on the group-size lattice nearest the combined
            // midpoint, in global content coordinates
            uint64_t a = params_.align_bits;
            uint64_t total = us.bits.size() + donor.bits.size();
            if ((total + 7) / 8 < 2 * uint64_t(min_bytes()) + 16) return false;
            uint64_t start = path.bits_before - (sib_left ? donor.bits.size() : 0);
            uint64_t old_cut = sib_left ? path.bits_before : path.bits_before + us.bits.size();
            uint64_t cut = (start + total / 2 + a / 2) / a * a;
            uint64_t lo = (start / a + 1) * a;
            uint64_t hi = (start + total - 1) / a * a;
            assert(lo <= hi);
            cut = std::clamp(cut, lo, hi);
            if (sib_left) {
                assert(cut < old_cut);
                BitVec moved = donor.bits.split_off(donor.bits.size() - (old_cut - cut));
                moved_ones = params_.rank_support ? moved.popcount() : 0;
                moved_bits = moved.size();
                moved.append(us.bits);
                us.bits = std::move(moved);
            } else {
                assert(cut > old_cut);
                BitVec moved = donor.bits;
                donor.bits = moved.split_off(cut - old_cut);
                moved_ones = params_.rank_support ? moved.popcount() : 0;
                moved_bits = moved.size();
                us.bits.append(moved);
            }
            refresh_bit_samples(us);
            refresh_bit_samples(donor);
        }
        assert(us.physical_bytes() >= min_bytes() && donor.physical_bytes() >= min_bytes());
        Entry& eu = parent->entries[idx];
        Entry& ed = parent->entries[sib];
        eu.bits += moved_bits;
        eu.ones += moved_ones;
        ed.bits -= moved_bits;
        ed.ones -= moved_ones;
        us.cls = class_for(us.physical_bytes());
        donor.cls = class_for(donor.physical_bytes());
        return true;
    }

    void merge_leaves(Path& path, Node* parent, uint32_t left_idx) {
        Leaf& left = parent->entries[left_idx].child->payload;
        Leaf& right = parent->entries[left_idx + 1].child->payload;
        if constexpr (Leaf::kCoded) {
            left.bytes.insert(left.bytes.end(), right.bytes.begin(), right.bytes.end());
            left.ncodes += right.ncodes;
            left.rebuild_samples(params_.sample_period);
        } else {
            left.bits.append(right.bits);
            refresh_bit_samples(left);
        }
        left.cls = class_for(left.physical_bytes());
        Entry& le = parent->entries[left_idx];
        Entry& re = parent->entries[left_idx + 1];
        le.bits += re.bits;
        le.ones += re.ones;
        parent->entries.erase(parent->entries.begin() + left_idx + 1);
        fix_internal_underflow(path, path.steps.size() - 1);
    }

    void fix_internal_underflow(Path& path, size_t depth) {
        Node* node = path.steps[depth].node;
        if (depth == 0) {
            // collapse single-entry roots over internal children
            while (!root_->leaf_node && root_->entries.size() == 1 &&
                   !root_->entries[0].child->leaf_node) {
                root_ = std::move(root_->entries[0].child);
                --height_;
            }
            return;
        }
        if (node->entries.size() >= min_entries_) return;
        Node* parent = path.steps[depth - 1].node;
        uint32_t idx = path.steps[depth - 1].idx;
        uint32_t li = idx > 0 ? idx - 1 : idx + 1;
        uint32_t ri = idx + 1 < parent->entries.size() ? idx + 1 : idx - 1;
        uint32_t sib = li;
        if (li != ri) {
            size_t lsz = parent->entries[li].child->entries.size();
            size_t rsz = parent->entries[ri].child->entries.size();
            sib = rsz > lsz ? ri : li;
        }
        Node* donor = parent->entries[sib].child.get();
        bool sib_left = sib < idx;
        if (donor->entries.size() > min_entries_) {
            Entry moved;
            if (sib_left) {
                moved = std::move(donor->entries.back());
                donor->entries.pop_back();
            } else {
                moved = std::move(donor->entries.front());
                donor->entries.erase(donor->entries.begin());
            }
            parent->entries[sib].bits -= moved.bits;
            parent->entries[sib].ones -= moved.ones;
            parent->entries[idx].bits += moved.bits;
            parent->entries[idx].ones += moved.ones;
            if (sib_left) node->entries.insert(node->entries.begin(), std::move(moved));
            else node->entries.push_back(std::move(moved));
            return;
        }
        // merge the two internal nodes
        uint32_t l = sib_left ? sib : idx;
        Node* lnode = parent->entries[l].child.get();
        Node* rnode = parent->entries[l + 1].child.get();
        for (auto& e : rnode->entries) lnode->entries.push_back(std::move(e));
        parent->entries[l].bits += parent->entries[l + 1].bits;
        parent->entries[l].ones += parent->entries[l + 1].ones;
        parent->entries.erase(parent->entries.begin() + l + 1);
        fix_internal_underflow(path, depth - 1);
    }

    // ---- recursion helpers ----

    template <class Fn>
    void visit_rec(const Node* n, uint64_t& b, Fn& fn) const {
        if (n->leaf_node) {
            fn(n->payload, b);
            b += leaf_logical(n->payload);
            return;
        }
        for (const Entry& e : n->entries) visit_rec(e.child.get(), b, fn);
    }

    uint64_t measure_rec(const Node* n) const {
        if (n->leaf_node) {
            uint64_t bytes = 8 + capacity_bytes(n->payload.cls);
            if constexpr (Leaf::kCoded) bytes += n->payload.samples.size() * 2;
            else bytes += n->payload.samples.counts.size() * 2;
            return bytes;
        }
        uint64_t bytes = 8 + uint64_t(max_entries_) * entry_bytes();
        for (const Entry& e : n->entries) bytes += measure_rec(e.child.get());
        return bytes;
    }

    std::pair<uint64_t, uint64_t> recount(Node* n) {
        if (n->leaf_node) {
            uint64_t ones = 0;
            if constexpr (!Leaf::kCoded)
                ones = params_.rank_support ? n->payload.bits.popcount() : 0;
            return {leaf_logical(n->payload), ones};
        }
        uint64_t b = 0, o = 0;
        for (Entry& e : n->entries) {
            auto s = recount(e.child.get());
            if (e.bits != s.first || e.ones != (params_.rank_support ? s.second : 0))
                throw std::runtime_error("blocktree snapshot: counter mismatch");
            b += s.first;
            o += s.second;
        }
        return {b, o};
    }

    std::pair<uint64_t, uint64_t> audit_rec(const Node* n, uint64_t depth, uint64_t leaves,
                                            int64_t& leaf_depth, AuditReport& rep) const {
        if (n->leaf_node) {
            if (leaf_depth < 0) leaf_depth = int64_t(depth);
            else if (leaf_depth != int64_t(depth)) rep.fail("leaves at unequal depth");
            const Leaf& leaf = n->payload;
            if (leaf.cls > params_.expansions) rep.fail("leaf class out of range");
            if (leaf.cls != class_for(leaf.physical_bytes())) rep.fail("leaf class not canonical");
            if (leaf.physical_bytes() > capacity_bytes(leaf.cls)) rep.fail("leaf over capacity");
            if (leaves > 1 && leaf.physical_bytes() < min_bytes()) rep.fail("leaf under minimum fill");
            uint64_t ones = 0;
            if constexpr (Leaf::kCoded) {
                size_t off = 0;
                uint32_t count = 0;
                try {
                    while (off < leaf.bytes.size()) {
                        off = etdc::skip(leaf.bytes, off);
                        ++count;
                    }
                } catch (const std::exception&) {
                    rep.fail("leaf bytes are not a codeword sequence");
                }
                if (count != leaf.ncodes) rep.fail("codeword count mismatch");
                CodeLeaf copy = leaf;
                copy.rebuild_samples(params_.sample_period);
                if (copy.samples != leaf.samples) rep.fail("stale offset samples");
            } else {
                ones = params_.rank_support ? leaf.bits.popcount() : 0;
                if (params_.rank_support) {
                    RankSamples fresh = rebuild_samples(leaf.bits, params_.sample_period);
                    if (fresh.counts != leaf.samples.counts) rep.fail("stale rank samples");
                }
            }
            return {leaf_logical(leaf), ones};
        }
        bool root = depth == 0;
        size_t sz = n->entries.size();
        if (!root && (sz < min_entries_ || sz > max_entries_)) rep.fail("internal fanout out of range");
        if (root && sz > max_entries_) rep.fail("root fanout too large");
        if (root && sz == 1 && !n->entries[0].child->leaf_node)
            rep.fail("root should have collapsed");
        uint64_t b = 0, o = 0;
        for (const Entry& e : n->entries) {
            auto s = audit_rec(e.child.get(), depth + 1, leaves, leaf_depth, rep);
            if (e.bits != s.first) rep.fail("entry bit counter mismatch");
            uint64_t want_ones = params_.rank_support ? s.second : 0;
            if (e.ones != want_ones) rep.fail("entry ones counter mismatch");
            b += s.first;
            o += s.second;
        }
        return {b, o};
    }

    void save_rec(const Node* n, ByteWriter& w) const {
        if (n->leaf_node) {
            w.u8(1);
            w.u8(n->payload.cls);
            if constexpr (Leaf::kCoded) {
                w.u32(n->payload.ncodes);
                w.u32(uint32_t(n->payload.bytes.size()));
                w.bytes(n->payload.bytes.data(), n->payload.bytes.size());
            } else {
                w.u64(n->payload.bits.size());
                auto raw = n->payload.bits.to_bytes();
                w.bytes(raw.data(), raw.size());
            }
            return;
        }
        w.u8(0);
        w.u16(uint16_t(n->entries.size()));
        for (const Entry& e : n->entries) {
            w.u64(e.bits);
            if (params_.rank_support) w.u64(e.ones);
        }
        for (const Entry& e : n->entries) save_rec(e.child.get(), w);
    }

    std::unique_ptr<Node> load_rec(ByteReader& r, uint64_t& height) {
        auto n = std::make_unique<Node>();
        uint8_t tag = r.u8();
        if (tag == 1) {
            n->leaf_node = true;
            n->payload.cls = r.u8();
            if (n->payload.cls > params_.expansions)
                throw std::runtime_error("blocktree snapshot: leaf class out of range");
            if constexpr (Leaf::kCoded) {
                n->payload.ncodes = r.u32();
                uint32_t nbytes = r.u32();
                const uint8_t* p = r.bytes(nbytes);
                n->payload.bytes.assign(p, p + nbytes);
                n->payload.rebuild_samples(params_.sample_period);
            } else {
                uint64_t nbits = r.u64();
                const uint8_t* p = r.bytes((nbits + 7) / 8);
                n->payload.bits = BitVec::from_bytes(p, nbits);
                refresh_bit_samples(n->payload);
            }
            height = 0;
            return n;
        }
        if (tag != 0) throw std::runtime_error("blocktree snapshot: bad node tag");
        uint16_t count = r.u16();
        n->entries.resize(count);
        for (auto& e : n->entries) {
            e.bits = r.u64();
            e.ones = params_.rank_support ? r.u64() : 0;
        }
        uint64_t child_h = 0;
        for (auto& e : n->entries) e.child = load_rec(r, child_h);
        height = child_h + 1;
        return n;
    }

    void build_from_leaves(std::vector<std::unique_ptr<Node>> nodes) {
        // wrap leaves in entries, then stack internal levels bottom-up
        std::vector<Entry> level;
        for (auto& n : nodes) {
            Entry e;
            e.bits = leaf_logical(n->payload);
            e.ones = 0;
            if constexpr (!Leaf::kCoded)
                if (params_.rank_support) e.ones = n->payload.bits.popcount();
            e.child = std::move(n);
            level.push_back(std::move(e));
        }
        height_ = 1;
        while (level.size() > max_entries_) {
            size_t groups = (level.size() + max_entries_ - 1) / max_entries_;
            std::vector<Entry> up;
            size_t taken = 0;
            for (size_t g = 0; g < groups; ++g) {
                size_t take = (level.size() - taken) / (groups - g);
                auto node = std::make_unique<Node>();
                Entry e;
                for (size_t i = 0; i < take; ++i) {
                    e.bits += level[taken + i].bits;
                    e.ones += level[taken + i].ones;
                    node->entries.push_back(std::move(level[taken + i]));
                }
                taken += take;
                e.child = std::move(node);
                up.push_back(std::move(e));
            }
            level = std::move(up);
            ++height_;
        }
        root_ = std::make_unique<Node>();
        root_->entries = std::move(level);
    }

    Params params_;
    uint32_t max_entries_ = 0;
    uint32_t min_entries_ = 0;
    std::unique_ptr<Node> root_;
    uint64_t height_ = 0;
    uint64_t total_bits_ = 0;
    uint64_t total_ones_ = 0;
    uint64_t version_ = 0;

    friend struct BlockTreeTestAccess;
};

using BitTree = BlockTree<BitLeaf>;
using CodeTree = BlockTree<CodeLeaf>;

}  // namespace dk2
