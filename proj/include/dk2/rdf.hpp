#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dk2/audit.hpp"
#include "dk2/config.hpp"
#include "dk2/dk2tree.hpp"
#include "dk2/io.hpp"

namespace dk2 {

// Interned term identifiers. Freed identifiers are reused newest first, so a
// store rebuilt from the same operation sequence assigns the same numbers.
class TermDictionary {
public:
    // Terms are opaque nonempty strings; the empty string marks a freed slot.
    uint64_t intern(const std::string& term);
    std::optional<uint64_t> find(const std::string& term) const;
    const std::string& text_of(uint64_t id) const;
    void release(uint64_t id);

    uint64_t live() const { return texts_.size() - free_.size(); }
    // Count of identifiers ever handed out; the id space is [0, allocated).
    uint64_t allocated() const { return texts_.size(); }
    const std::vector<uint64_t>& freed() const { return free_; }

    AuditReport audit() const;
    void save(ByteWriter& w) const;
    static TermDictionary load(ByteReader& r);
    bool operator==(const TermDictionary& other) const;

private:
    std::unordered_map<std::string, uint64_t> ids_;
    std::vector<std::string> texts_;  // by id, "" when freed
    std::vector<uint64_t> free_;      // reuse stack, newest last
};

struct Triple {
    uint64_t s = 0, p = 0, o = 0;
    auto operator<=>(const Triple&) const = default;
};

// A query pattern over term strings; an empty optional is a variable.
struct TriplePattern {
    std::optional<std::string> s, p, o;
};

enum class Role : uint8_t { subject, object };

// One side of a join: a pattern whose `role` position must be a variable,
// shared with the other side's join position.
struct JoinSide {
    TriplePattern pattern;
    Role role = Role::subject;
};

struct JoinBinding {
    uint64_t value = 0;  // subject/object id bound to the join variable
    std::vector<Triple> left;
    std::vector<Triple> right;
    bool operator==(const JoinBinding&) const = default;
};

// Triple store over one square matrix per predicate. Subjects and objects
// share a single identifier space; every predicate matrix keeps its row and
// column identifier state in lockstep with the shared dictionary, so a cell
// (s, o) means the same pair in every matrix.
class TripleStore {
public:
    explicit TripleStore(DK2Config cfg = {}, KSchedule proto = KSchedule::uniform(2, 2));

    // Returns true when the triple was absent. Inserting interns new terms;
    // deleting the last use of a term frees its identifier everywhere.
    bool add_triple(const std::string& s, const std::string& p, const std::string& o);
    bool delete_triple(const std::string& s, const std::string& p, const std::string& o);
    bool has_triple(const std::string& s, const std::string& p, const std::string& o) const;

    // All triples matching the pattern, sorted by (s, p, o) ids. A bound term
    // that is not in the store yields an empty result.
    std::vector<Triple> match(const TriplePattern& pattern) const;

    // Distinct values of the shared join variable, each with the matching
    // triples of both sides. The three strategies return identical results.
    std::vector<JoinBinding> join_independent(const JoinSide& a, const JoinSide& b) const;
    std::vector<JoinBinding> join_chain(const JoinSide& a, const JoinSide& b) const;
    std::vector<JoinBinding> join_interactive(const JoinSide& a, const JoinSide& b) const;

    uint64_t triple_count() const { return triple_count_; }
    uint64_t term_count() const { return so_.live(); }
    uint64_t predicate_count() const { return trees_.size(); }

    const std::string& subject_text(uint64_t id) const { return so_.text_of(id); }
    const std::string& predicate_text(uint64_t id) const { return preds_.text_of(id); }
    std::array<std::string, 3> spell(const Triple& t) const;

    const std::map<uint64_t, DK2Tree>& trees() const { return trees_; }
    const TermDictionary& term_dictionary() const { return so_; }
    const TermDictionary& predicate_dictionary() const { return preds_; }

    uint64_t measured_bytes() const;
    AuditReport audit() const;

    void save(ByteWriter& w) const;
    static TripleStore load(ByteReader& r);

private:
    // Pattern with terms resolved to ids; `known` is false when some bound
    // term does not exist, which makes every match empty.
    struct Resolved {
        std::optional<uint64_t> s, p, o;
        bool known = true;
    };
    Resolved resolve(const TriplePattern& pattern) const;
    std::vector<Triple> match_ids(const Resolved& q) const;
    void match_one_tree(uint64_t pid, const DK2Tree& tree, const Resolved& q,
                        std::vector<Triple>& out) const;

    uint64_t intern_so(const std::string& term);
    void release_so(uint64_t id);
    DK2Tree& tree_for(uint64_t pid);

    // Sorted distinct ids taken from the `role` position of the side's matches.
    std::vector<uint64_t> project(const JoinSide& side) const;
    static Resolved substitute(Resolved q, Role role, uint64_t id);
    std::vector<JoinBinding> materialize(const std::vector<uint64_t>& values, const Resolved& qa,
                                         Role ra, const Resolved& qb, Role rb) const;
    static void validate_join(const JoinSide& a, const JoinSide& b);

    // Values of the join variable found by descending both matrices in step,
    // keeping only axis strips where both sides still have a set bit.
    void sync_axis(const DK2Tree& ta, Role ra, std::optional<uint64_t> bound_a,
                   const DK2Tree& tb, Role rb, std::optional<uint64_t> bound_b,
                   std::vector<uint64_t>& out) const;

    DK2Config cfg_;
    KSchedule proto_;
    TermDictionary so_;
    TermDictionary preds_;
    std::map<uint64_t, DK2Tree> trees_;    // by predicate id
    std::vector<uint64_t> so_refs_;        // triples touching each s/o id
    std::vector<uint64_t> pred_refs_;      // triples per predicate id
    uint64_t triple_count_ = 0;
};

}  // namespace dk2
