#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "dk2/audit.hpp"
#include "dk2/blocktree.hpp"
#include "dk2/config.hpp"
#include "dk2/io.hpp"
#include "dk2/static_k2.hpp"
#include "dk2/vocab.hpp"

namespace dk2 {

// Last-level storage behind one group-sized interface: either raw bits or the
// vocabulary-coded tree, chosen by configuration. Positions are logical bit
// positions; structural edits land on group boundaries.
class LLayer {
public:
    LLayer(uint32_t group_bits, const DK2Config& cfg);

    uint64_t total_bits() const;
    uint64_t read_group(uint64_t pos) const;
    void insert_group(uint64_t pos, uint64_t matrix);
    void remove_group(uint64_t pos);
    void set_bit(uint64_t pos, bool value);  // group must stay nonzero and actually change

    void bulk_load(const BitVec& bits);
    BitVec to_bitvec() const;
    uint64_t measured_bytes() const;

    bool vocab_backed() const { return std::holds_alternative<VocabLTree>(impl_); }
    const VocabLTree* vocab_tree() const { return std::get_if<VocabLTree>(&impl_); }
    VocabLTree* vocab_tree() { return std::get_if<VocabLTree>(&impl_); }

    AuditReport audit() const;
    void save(ByteWriter& w) const;
    static LLayer load(ByteReader& r, const DK2Config& cfg);

private:
    uint32_t group_bits_;
    std::variant<BitTree, VocabLTree> impl_;
};

// Dynamic square 0/1 matrix as a quadtree of per-level groups laid out over
// balanced block trees: internal levels in one rank-enabled bit tree T, the
// cell level in the L layer. Counters per level let a child lookup turn into
// one rank query. The matrix side grows on demand by prepending a root level.
class DK2Tree {
public:
    struct UpdateStats {
        uint64_t flips = 0;      // single-bit writes, T or L
        uint64_t splices = 0;    // whole groups inserted
        uint64_t removals = 0;   // whole groups removed
        uint64_t work() const { return flips + splices + removals; }
    };

    // Node handles for external traversal. level == levels-1 addresses L.
    struct NodeRef {
        uint32_t level = 0;
        uint64_t pos = 0;
    };

    explicit DK2Tree(KSchedule sched, DK2Config cfg = {});

    const KSchedule& schedule() const { return sched_; }
    const DK2Config& config() const { return cfg_; }
    uint64_t side() const { return side_; }
    uint64_t cell_count() const { return cell_count_; }
    bool empty() const { return cell_count_ == 0; }

    bool contains(uint64_t row, uint64_t col) const;
    // Returns true when the matrix changed. set_cell grows the matrix first
    // if (row, col) falls outside the current side.
    bool set_cell(uint64_t row, uint64_t col);
    bool clear_cell(uint64_t row, uint64_t col);

    // Inclusive bounds, results sorted by (row, col).
    std::vector<Cell> cells_in_range(uint64_t r1, uint64_t r2, uint64_t c1, uint64_t c2) const;
    std::vector<uint64_t> columns_in_row(uint64_t row) const;
    std::vector<uint64_t> rows_in_column(uint64_t col) const;
    std::vector<Cell> all_cells() const;

    // Row/column identifier bookkeeping for graph use. Freed identifiers are
    // reused newest first; a fresh identifier may grow the matrix.
    uint64_t add_node();
    void remove_node(uint64_t id);
    uint64_t nodes_in_use() const { return next_fresh_ - free_ids_.size(); }
    uint64_t nodes_allocated() const { return next_fresh_; }
    const std::vector<uint64_t>& free_node_ids() const { return free_ids_; }

    const UpdateStats& last_update() const { return stats_; }

    NodeRef root() const { return NodeRef{0, 0}; }
    uint64_t levels() const { return sched_.levels(); }
    // Group bits of a node, LSB = offset 0.
    uint64_t group_of(NodeRef n) const;
    // Child node under the set bit at offset within n's group.
    NodeRef child(NodeRef n, unsigned offset) const;

    const BitTree& t_tree() const { return t_; }
    const LLayer& l_layer() const { return l_; }

    // Reassigns vocabulary codes by frequency; a no-op for plain bit storage.
    void rebuild_vocabulary() {
        if (VocabLTree* v = l_.vocab_tree()) v->force_rebuild();
    }
    const std::vector<uint64_t>& level_bits() const { return level_bits_; }
    const std::vector<uint64_t>& level_ones() const { return level_ones_; }

    static DK2Tree from_static(const StaticK2Tree& st, DK2Config cfg = {});
    StaticK2Tree to_static() const;

    uint64_t measured_bytes() const;
    AuditReport audit() const;

    void save(ByteWriter& w) const;
    static DK2Tree load(ByteReader& r);

private:
    uint64_t level_start(uint64_t level) const;
    uint64_t ones_before(uint64_t level) const;
    uint64_t group_sz(uint64_t level) const {
        return uint64_t(sched_.arity[level]) * sched_.arity[level];
    }
    void grow();
    // Builds the chain of fresh single-bit groups for levels from..last.
    void append_chain(uint64_t row, uint64_t col, uint64_t from, uint64_t child_ordinal);

    template <class Emit>
    void walk(uint32_t level, uint64_t pos, uint64_t org_r, uint64_t org_c, uint64_t r1,
              uint64_t r2, uint64_t c1, uint64_t c2, Emit& emit) const;

    KSchedule sched_;
    DK2Config cfg_;
    uint64_t side_ = 0;
    BitTree t_;
    LLayer l_;
    std::vector<uint64_t> level_bits_;  // T levels only
    std::vector<uint64_t> level_ones_;
    uint64_t cell_count_ = 0;
    uint64_t next_fresh_ = 0;
    std::vector<uint64_t> free_ids_;
    UpdateStats stats_;
};

}  // namespace dk2
