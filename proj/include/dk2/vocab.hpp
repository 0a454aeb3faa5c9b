#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "dk2/audit.hpp"
#include "dk2/blocktree.hpp"
#include "dk2/codec.hpp"
#include "dk2/config.hpp"
#include "dk2/io.hpp"

namespace dk2 {

// Vocabulary of leaf-group matrices. Each distinct nonzero matrix (up to 64
// bits, row-major, bit r*k+c) holds a stable code index; codes are what leaf
// blocks store, byte-coded. Entries are additionally kept in a conceptual
// array sorted by descending frequency (the "rank" order); an entry's rank is
// the code it would get if codes were reassigned right now, so the gap between
// actual and ideal coded size is known exactly at all times.
//
// rank-indexed arrays: freq_, slot_ (hash slot), code_at_rank_.
// code-indexed: rank_of_code_ (codes stay stable across rank swaps).
// Frequency classes are contiguous rank ranges; bumping a count swaps the
// entry to its class boundary, so every count change is O(1).
class MatrixVocabulary {
public:
    static constexpr uint32_t kDeadCode = ~uint32_t(0);

    // One more occurrence of this matrix; returns its code index.
    uint32_t acquire(uint64_t matrix);
    // One occurrence of the matrix holding this code is gone.
    void release(uint32_t code);

    uint64_t matrix_of(uint32_t code) const;
    // Returns kDeadCode when the matrix is not in the vocabulary.
    uint32_t code_of(uint64_t matrix) const;
    uint64_t freq_of_code(uint32_t code) const { return freq_[rank_of_code_[code]]; }

    uint64_t live_entries() const { return live_; }
    uint64_t total_occurrences() const { return occurrences_; }
    uint64_t current_bytes() const { return current_bytes_; }
    uint64_t optimal_bytes() const { return optimal_bytes_; }
    double size_ratio() const {
        return optimal_bytes_ == 0 ? 1.0 : double(current_bytes_) / double(optimal_bytes_);
    }

    // Drops dead entries and reassigns codes by descending frequency, ties
    // kept in previous rank order. Returns old code -> new code (dead entries
    // map to kDeadCode). Afterwards size_ratio() == 1.
    std::vector<uint32_t> rebuild();

    AuditReport audit() const;

    void save(ByteWriter& w) const;
    static MatrixVocabulary load(ByteReader& r);

    friend bool operator==(const MatrixVocabulary& a, const MatrixVocabulary& b) {
        return a.freq_ == b.freq_ && a.code_at_rank_ == b.code_at_rank_ &&
               a.matrices_in_rank_order() == b.matrices_in_rank_order() &&
               a.free_codes_ == b.free_codes_;
    }

private:
    struct ClassRange {
        uint32_t start = 0;  // first rank of the class
        uint32_t count = 0;
    };

    std::vector<uint64_t> freq_;          // by rank, non-increasing
    std::vector<uint32_t> slot_;          // by rank -> hash slot (live entries only)
    std::vector<uint32_t> code_at_rank_;  // by rank -> code
    std::vector<uint32_t> rank_of_code_;  // by code -> rank
    std::vector<uint32_t> free_codes_;    // dead codes, reused LIFO
    std::unordered_map<uint64_t, ClassRange> classes_;  // freq -> rank range

    // open addressing, linear probing; matrix 0 never occurs (an all-zero
    // group is deleted, not stored), so 0 marks an empty slot
    std::vector<uint64_t> hkeys_;
    std::vector<uint32_t> hvals_;  // code index
    std::vector<uint8_t> hstate_;  // 0 empty, 1 full, 2 tombstone
    uint64_t hused_ = 0;           // full + tombstones

    uint64_t live_ = 0;
    uint64_t occurrences_ = 0;
    uint64_t current_bytes_ = 0;
    uint64_t optimal_bytes_ = 0;

    static uint64_t mix(uint64_t x);
    uint32_t hfind(uint64_t key) const;  // full slot or ~0 when absent
    uint32_t hinsert(uint64_t key, uint32_t val);
    void herase(uint32_t slot);
    void hgrow();

    void swap_ranks(uint32_t a, uint32_t b);
    uint32_t bump(uint32_t code);  // freq +1, returns final rank
    uint32_t drop(uint32_t code);  // freq -1, returns final rank
    void rebuild_classes();
    std::vector<uint64_t> matrices_in_rank_order() const;
};

// Last-level bitmap stored as one codeword per k'*k' group. Presents the
// same group-level interface as a raw bitmap tree; positions are logical bit
// positions, always multiples of the group size for structural edits.
class VocabLTree {
public:
    VocabLTree(uint32_t group_bits, const DK2Config& cfg);

    uint64_t total_bits() const { return tree_.total_bits(); }
    uint64_t group_bits() const { return group_bits_; }

    uint64_t read_group(uint64_t pos, CodeTree::PathMemo* memo = nullptr) const;
    void insert_group(uint64_t pos, uint64_t matrix);
    void remove_group(uint64_t pos);
    // Sets bit (pos % group) of the group containing pos. The result must be
    // nonzero and differ from the old value; callers remove all-zero groups.
    void set_bit(uint64_t pos, bool value);

    void bulk_load(const std::vector<uint64_t>& matrices);
    BitVec to_bitvec() const;

    const MatrixVocabulary& vocab() const { return vocab_; }
    const CodeTree& tree() const { return tree_; }
    uint64_t rebuild_count() const { return rebuilds_; }
    void force_rebuild() { rebuild_now(); }
    uint64_t measured_bytes() const;

    AuditReport audit() const;

    void save(ByteWriter& w) const;
    static VocabLTree load(ByteReader& r, const DK2Config& cfg);

private:
    void post_update();
    void rebuild_now();
    std::vector<uint8_t> encode(uint32_t code) const;

    uint32_t group_bits_;
    VocabMode mode_;
    double rebuild_ratio_;
    uint64_t rebuild_floor_bytes_;
    uint64_t rebuild_period_;
    uint64_t updates_since_rebuild_ = 0;
    uint64_t rebuilds_ = 0;
    CodeTree tree_;
    MatrixVocabulary vocab_;
};

}  // namespace dk2
