#include "dk2/rdf.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

namespace dk2 {

// --- TermDictionary ---------------------------------------------------------

uint64_t TermDictionary::intern(const std::string& term) {
    if (term.empty()) throw std::invalid_argument("dictionary: empty term");
    auto it = ids_.find(term);
    if (it != ids_.end()) return it->second;
    uint64_t id;
    if (!free_.empty()) {
        id = free_.back();
        free_.pop_back();
        texts_[id] = term;
    } else {
        id = texts_.size();
        texts_.push_back(term);
    }
    ids_.emplace(term, id);
    return id;
}

std::optional<uint64_t> TermDictionary::find(const std::string& term) const {
    auto it = ids_.find(term);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

const std::string& TermDictionary::text_of(uint64_t id) const { return texts_.at(id); }

void TermDictionary::release(uint64_t id) {
    assert(id < texts_.size() && !texts_[id].empty());
    ids_.erase(texts_[id]);
    texts_[id].clear();
    free_.push_back(id);
}

AuditReport TermDictionary::audit() const {
    AuditReport rep;
    if (ids_.size() + free_.size() != texts_.size())
        rep.fail("dictionary: live + freed != allocated");
    std::vector<bool> freed(texts_.size(), false);
    for (uint64_t id : free_) {
        if (id >= texts_.size() || freed[id]) {
            rep.fail("dictionary: bad free list entry");
            return rep;
        }
        freed[id] = true;
    }
    for (uint64_t id = 0; id < texts_.size(); ++id) {
        if (texts_[id].empty() != freed[id]) rep.fail("dictionary: freed slot not empty");
        if (!texts_[id].empty()) {
            auto it = ids_.find(texts_[id]);
            if (it == ids_.end() || it->second != id) rep.fail("dictionary: map out of sync");
        }
    }
    return rep;
}

void TermDictionary::save(ByteWriter& w) const {
    w.u64(texts_.size());
    for (const std::string& t : texts_) w.str(t);
    w.u32(uint32_t(free_.size()));
    for (uint64_t id : free_) w.u64(id);
}

TermDictionary TermDictionary::load(ByteReader& r) {
    TermDictionary d;
    uint64_t n = r.u64();
    d.texts_.reserve(n);
    for (uint64_t i = 0; i < n; ++i) d.texts_.push_back(r.str());
    uint32_t nf = r.u32();
    for (uint32_t i = 0; i < nf; ++i) d.free_.push_back(r.u64());
    for (uint64_t id = 0; id < d.texts_.size(); ++id)
        if (!d.texts_[id].empty()) d.ids_.emplace(d.texts_[id], id);
    AuditReport rep = d.audit();
    if (!rep) throw std::runtime_error("snapshot: " + rep.issues);
    return d;
}

bool TermDictionary::operator==(const TermDictionary& other) const {
    return texts_ == other.texts_ && free_ == other.free_;
}

// --- TripleStore ------------------------------------------------------------

TripleStore::TripleStore(DK2Config cfg, KSchedule proto) : cfg_(cfg), proto_(std::move(proto)) {
    cfg_.validate();
    proto_.validate();
}

uint64_t TripleStore::intern_so(const std::string& term) {
    if (auto existing = so_.find(term)) return *existing;
    uint64_t id = so_.intern(term);
    for (auto& [pid, tree] : trees_) {
        uint64_t got = tree.add_node();
        assert(got == id);
        (void)got;
    }
    if (id >= so_refs_.size()) so_refs_.resize(id + 1, 0);
    return id;
}

void TripleStore::release_so(uint64_t id) {
    so_.release(id);
    for (auto& [pid, tree] : trees_) tree.remove_node(id);
}

DK2Tree& TripleStore::tree_for(uint64_t pid) {
    auto it = trees_.find(pid);
    if (it != trees_.end()) return it->second;
    // A new predicate's matrix replays the identifier history so that its
    // row/column state matches every other tree and the dictionary.
    DK2Tree tree(proto_, cfg_);
    for (uint64_t i = 0; i < so_.allocated(); ++i) tree.add_node();
    for (uint64_t id : so_.freed()) tree.remove_node(id);
    return trees_.emplace(pid, std::move(tree)).first->second;
}

bool TripleStore::add_triple(const std::string& s, const std::string& p, const std::string& o) {
    if (s.empty() || p.empty() || o.empty()) throw std::invalid_argument("rdf: empty term");
    uint64_t sid = intern_so(s);
    uint64_t oid = intern_so(o);
    uint64_t pid = preds_.intern(p);
    if (pid >= pred_refs_.size()) pred_refs_.resize(pid + 1, 0);
    DK2Tree& tree = tree_for(pid);
    if (!tree.set_cell(sid, oid)) return false;  // duplicate; ids necessarily pre-existed
    so_refs_[sid]++;
    so_refs_[oid]++;
    pred_refs_[pid]++;
    triple_count_++;
    return true;
}

bool TripleStore::delete_triple(const std::string& s, const std::string& p, const std::string& o) {
    if (s.empty() || p.empty() || o.empty()) throw std::invalid_argument("rdf: empty term");
    auto sid = so_.find(s);
    auto oid = so_.find(o);
    auto pid = preds_.find(p);
    if (!sid || !oid || !pid) return false;
    auto it = trees_.find(*pid);
    if (it == trees_.end()) return false;
    if (!it->second.clear_cell(*sid, *oid)) return false;
    triple_count_--;
    so_refs_[*sid]--;
    pred_refs_[*pid]--;
    if (*oid != *sid) so_refs_[*oid]--;
    else so_refs_[*sid]--;
    if (so_refs_[*sid] == 0) release_so(*sid);
    if (*oid != *sid && so_refs_[*oid] == 0) release_so(*oid);
    if (pred_refs_[*pid] == 0) {
        trees_.erase(it);
        preds_.release(*pid);
    }
    return true;
}

bool TripleStore::has_triple(const std::string& s, const std::string& p,
                             const std::string& o) const {
    auto sid = so_.find(s);
    auto oid = so_.find(o);
    auto pid = preds_.find(p);
    if (!sid || !oid || !pid) return false;
    auto it = trees_.find(*pid);
    return it != trees_.end() && it->second.contains(*sid, *oid);
}

TripleStore::Resolved TripleStore::resolve(const TriplePattern& pattern) const {
    Resolved q;
    if (pattern.s) {
        q.s = so_.find(*pattern.s);
        if (!q.s) q.known = false;
    }
    if (pattern.o) {
        q.o = so_.find(*pattern.o);
        if (!q.o) q.known = false;
    }
    if (pattern.p) {
        q.p = preds_.find(*pattern.p);
        if (!q.p) q.known = false;
    }
    return q;
}

void TripleStore::match_one_tree(uint64_t pid, const DK2Tree& tree, const Resolved& q,
                                 std::vector<Triple>& out) const {
    if (q.s && q.o) {
        if (tree.contains(*q.s, *q.o)) out.push_back({*q.s, pid, *q.o});
    } else if (q.s) {
        for (uint64_t c : tree.columns_in_row(*q.s)) out.push_back({*q.s, pid, c});
    } else if (q.o) {
        for (uint64_t r : tree.rows_in_column(*q.o)) out.push_back({r, pid, *q.o});
    } else {
        for (const Cell& cell : tree.all_cells()) out.push_back({cell.row, pid, cell.col});
    }
}

std::vector<Triple> TripleStore::match_ids(const Resolved& q) const {
    std::vector<Triple> out;
    if (!q.known) return out;
    if (q.p) {
        auto it = trees_.find(*q.p);
        if (it != trees_.end()) match_one_tree(*q.p, it->second, q, out);
    } else {
        for (const auto& [pid, tree] : trees_) match_one_tree(pid, tree, q, out);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Triple> TripleStore::match(const TriplePattern& pattern) const {
    return match_ids(resolve(pattern));
}

std::array<std::string, 3> TripleStore::spell(const Triple& t) const {
    return {so_.text_of(t.s), preds_.text_of(t.p), so_.text_of(t.o)};
}

// --- joins ------------------------------------------------------------------

void TripleStore::validate_join(const JoinSide& a, const JoinSide& b) {
    auto joined = [](const JoinSide& side) {
        return side.role == Role::subject ? side.pattern.s : side.pattern.o;
    };
    if (joined(a) || joined(b))
        throw std::invalid_argument("join: the join position must be a variable");
    if (!a.pattern.p && !b.pattern.p)
        throw std::invalid_argument("join: at most one side may leave the predicate variable");
}

TripleStore::Resolved TripleStore::substitute(Resolved q, Role role, uint64_t id) {
    if (role == Role::subject) q.s = id;
    else q.o = id;
    return q;
}

std::vector<uint64_t> TripleStore::project(const JoinSide& side) const {
    std::vector<uint64_t> vals;
    for (const Triple& t : match_ids(resolve(side.pattern)))
        vals.push_back(side.role == Role::subject ? t.s : t.o);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    return vals;
}

std::vector<JoinBinding> TripleStore::materialize(const std::vector<uint64_t>& values,
                                                  const Resolved& qa, Role ra, const Resolved& qb,
                                                  Role rb) const {
    std::vector<JoinBinding> out;
    for (uint64_t v : values) {
        JoinBinding bind;
        bind.value = v;
        bind.left = match_ids(substitute(qa, ra, v));
        bind.right = match_ids(substitute(qb, rb, v));
        assert(!bind.left.empty() && !bind.right.empty());
        out.push_back(std::move(bind));
    }
    return out;
}

std::vector<JoinBinding> TripleStore::join_independent(const JoinSide& a,
                                                       const JoinSide& b) const {
    validate_join(a, b);
    std::vector<uint64_t> va = project(a);
    std::vector<uint64_t> vb = project(b);
    std::vector<uint64_t> both;
    std::set_intersection(va.begin(), va.end(), vb.begin(), vb.end(), std::back_inserter(both));
    return materialize(both, resolve(a.pattern), a.role, resolve(b.pattern), b.role);
}

std::vector<JoinBinding> TripleStore::join_chain(const JoinSide& a, const JoinSide& b) const {
    validate_join(a, b);
    Resolved qb = resolve(b.pattern);
    std::vector<uint64_t> vals;
    for (uint64_t v : project(a)) {
        if (!qb.known) break;
        if (!match_ids(substitute(qb, b.role, v)).empty()) vals.push_back(v);
    }
    return materialize(vals, resolve(a.pattern), a.role, qb, b.role);
}

std::vector<JoinBinding> TripleStore::join_interactive(const JoinSide& a,
                                                       const JoinSide& b) const {
    validate_join(a, b);
    Resolved qa = resolve(a.pattern);
    Resolved qb = resolve(b.pattern);
    std::vector<uint64_t> vals;
    if (qa.known && qb.known) {
        auto other = [](const Resolved& q, Role role) {
            return role == Role::subject ? q.o : q.s;
        };
        auto each_tree = [&](const std::optional<uint64_t>& pid, auto&& fn) {
            if (pid) {
                auto it = trees_.find(*pid);
                if (it != trees_.end()) fn(it->second);
            } else {
                for (const auto& [p, tree] : trees_) fn(tree);
            }
        };
        each_tree(qa.p, [&](const DK2Tree& ta) {
            each_tree(qb.p, [&](const DK2Tree& tb) {
                sync_axis(ta, a.role, other(qa, a.role), tb, b.role, other(qb, b.role), vals);
            });
        });
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    }
    return materialize(vals, qa, a.role, qb, b.role);
}

namespace {

// Frontier node of the synchronized descent. level == tree levels marks a
// single cell; pos is then unused.
struct SyncNode {
    uint32_t level;
    uint64_t pos;
    uint64_t axis_org;
    uint64_t other_org;
};

uint64_t node_extent(const DK2Tree& t, uint32_t level) {
    if (level == t.levels()) return 1;
    if (level == 0) return t.side();
    return t.schedule().child_side(level - 1);
}

// Splits the nodes of one tree across the k axis strips below `lo`. Nodes at
// the strip's full extent descend one level; smaller ones drop into their
// strip unchanged. Children off the bound other-axis coordinate are pruned.
void partition(const DK2Tree& t, Role role, const std::optional<uint64_t>& bound,
               const std::vector<SyncNode>& nodes, uint64_t lo, uint64_t len, uint64_t sublen,
               std::vector<std::vector<SyncNode>>& buckets) {
    for (const SyncNode& n : nodes) {
        if (node_extent(t, n.level) < len) {
            buckets[(n.axis_org - lo) / sublen].push_back(n);
            continue;
        }
        uint64_t k = t.schedule().arity[n.level];
        uint64_t s = node_extent(t, n.level) / k;
        uint64_t group = t.group_of({n.level, n.pos});
        for (uint64_t j = 0; j < k * k; ++j) {
            if (!((group >> j) & 1)) continue;
            uint64_t r_off = j / k, c_off = j % k;
            uint64_t axis_off = role == Role::subject ? r_off : c_off;
            uint64_t other_off = role == Role::subject ? c_off : r_off;
            if (bound && (*bound / s) % k != other_off) continue;
            SyncNode child;
            child.axis_org = n.axis_org + axis_off * s;
            child.other_org = n.other_org + other_off * s;
            if (n.level + 1 == t.levels() && s == 1) {
                child.level = uint32_t(t.levels());
                child.pos = 0;
            } else {
                DK2Tree::NodeRef c = t.child({n.level, n.pos}, unsigned(j));
                child.level = c.level;
                child.pos = c.pos;
            }
            buckets[axis_off].push_back(child);
        }
    }
}

}  // namespace

void TripleStore::sync_axis(const DK2Tree& ta, Role ra, std::optional<uint64_t> bound_a,
                            const DK2Tree& tb, Role rb, std::optional<uint64_t> bound_b,
                            std::vector<uint64_t>& out) const {
    if (ta.empty() || tb.empty()) return;
    if (bound_a && *bound_a >= ta.side()) return;
    if (bound_b && *bound_b >= tb.side()) return;

    struct Frame {
        uint64_t lo, len;
        std::vector<SyncNode> va, vb;
    };
    std::vector<Frame> stack;
    stack.push_back({0, std::max(ta.side(), tb.side()),
                     {SyncNode{0, 0, 0, 0}},
                     {SyncNode{0, 0, 0, 0}}});
    while (!stack.empty()) {
        Frame f = std::move(stack.back());
        stack.pop_back();
        if (f.va.empty() || f.vb.empty()) continue;
        if (f.len == 1) {
            out.push_back(f.lo);
            continue;
        }
        uint64_t ea = node_extent(ta, f.va.front().level);
        uint64_t eb = node_extent(tb, f.vb.front().level);
        assert(ea == f.len || eb == f.len);
        uint64_t k = ea == f.len ? ta.schedule().arity[f.va.front().level]
                                 : tb.schedule().arity[f.vb.front().level];
        assert(ea != f.len || eb != f.len ||
               k == tb.schedule().arity[f.vb.front().level]);
        (void)eb;
        uint64_t sublen = f.len / k;
        std::vector<std::vector<SyncNode>> ba(k), bb(k);
        partition(ta, ra, bound_a, f.va, f.lo, f.len, sublen, ba);
        partition(tb, rb, bound_b, f.vb, f.lo, f.len, sublen, bb);
        for (uint64_t i = 0; i < k; ++i) {
            if (ba[i].empty() || bb[i].empty()) continue;
            stack.push_back({f.lo + i * sublen, sublen, std::move(ba[i]), std::move(bb[i])});
        }
    }
}

// --- snapshot / audit -------------------------------------------------------

namespace {
constexpr uint32_t kRdfMagic = 0x52324B44;  // "DK2R"

void save_config(ByteWriter& w, const DK2Config& cfg) {
    w.u32(cfg.block_bytes);
    w.u8(cfg.expansions);
    w.u32(cfg.sample_t);
    w.u32(cfg.sample_l);
    w.u8(uint8_t(cfg.vocab));
    w.f64(cfg.rebuild_ratio);
    w.u64(cfg.rebuild_floor_bytes);
    w.u64(cfg.rebuild_period);
}

DK2Config load_config(ByteReader& r) {
    DK2Config cfg;
    cfg.block_bytes = r.u32();
    cfg.expansions = r.u8();
    cfg.sample_t = r.u32();
    cfg.sample_l = r.u32();
    cfg.vocab = VocabMode(r.u8());
    cfg.rebuild_ratio = r.f64();
    cfg.rebuild_floor_bytes = r.u64();
    cfg.rebuild_period = r.u64();
    return cfg;
}
}  // namespace

uint64_t TripleStore::measured_bytes() const {
    uint64_t total = 0;
    for (const auto& [pid, tree] : trees_) total += tree.measured_bytes();
    for (const TermDictionary* d : {&so_, &preds_})
        for (uint64_t id = 0; id < d->allocated(); ++id)
            total += 16 + (d->text_of(id).size());
    total += 8 * (so_refs_.size() + pred_refs_.size());
    return total;
}

AuditReport TripleStore::audit() const {
    AuditReport rep;
    rep.merge(so_.audit());
    rep.merge(preds_.audit());
    if (so_refs_.size() != so_.allocated()) rep.fail("rdf: subject/object refcount size");
    if (pred_refs_.size() != preds_.allocated()) rep.fail("rdf: predicate refcount size");
    if (!rep) return rep;

    std::vector<uint64_t> so_seen(so_.allocated(), 0), pred_seen(preds_.allocated(), 0);
    uint64_t cells = 0;
    for (const auto& [pid, tree] : trees_) {
        rep.merge(tree.audit());
        if (pid >= preds_.allocated() || preds_.text_of(pid).empty())
            rep.fail("rdf: tree for a dead predicate");
        if (tree.nodes_allocated() != so_.allocated())
            rep.fail("rdf: tree identifier space out of step with the dictionary");
        if (tree.free_node_ids() != so_.freed())
            rep.fail("rdf: tree free list out of step with the dictionary");
        for (const Cell& cell : tree.all_cells()) {
            so_seen[cell.row]++;
            so_seen[cell.col]++;
            if (pid < pred_seen.size()) pred_seen[pid]++;
            cells++;
        }
    }
    if (cells != triple_count_) rep.fail("rdf: triple count does not match stored cells");
    for (uint64_t id = 0; id < so_.allocated(); ++id) {
        if (so_seen[id] != so_refs_[id]) rep.fail("rdf: stale subject/object refcount");
        if ((so_refs_[id] > 0) != !so_.text_of(id).empty())
            rep.fail("rdf: term liveness does not match its refcount");
    }
    for (uint64_t pid = 0; pid < preds_.allocated(); ++pid) {
        if (pred_seen[pid] != pred_refs_[pid]) rep.fail("rdf: stale predicate refcount");
        bool live = !preds_.text_of(pid).empty();
        if (live != (pred_refs_[pid] > 0)) rep.fail("rdf: predicate liveness");
        if (live != (trees_.count(pid) > 0)) rep.fail("rdf: live predicate without a tree");
    }
    return rep;
}

void TripleStore::save(ByteWriter& w) const {
    w.u32(kRdfMagic);
    w.u16(1);
    save_config(w, cfg_);
    w.u8(uint8_t(proto_.arity.size()));
    for (uint8_t k : proto_.arity) w.u8(k);
    so_.save(w);
    preds_.save(w);
    w.u64(triple_count_);
    w.u64(so_refs_.size());
    for (uint64_t v : so_refs_) w.u64(v);
    w.u64(pred_refs_.size());
    for (uint64_t v : pred_refs_) w.u64(v);
    w.u32(uint32_t(trees_.size()));
    for (const auto& [pid, tree] : trees_) {
        w.u64(pid);
        tree.save(w);
    }
}

TripleStore TripleStore::load(ByteReader& r) {
    if (r.u32() != kRdfMagic) throw std::runtime_error("snapshot: not a triple store");
    if (r.u16() != 1) throw std::runtime_error("snapshot: unsupported triple store version");
    DK2Config cfg = load_config(r);
    KSchedule proto;
    uint8_t nl = r.u8();
    for (uint8_t i = 0; i < nl; ++i) proto.arity.push_back(r.u8());
    TripleStore store(cfg, proto);
    store.so_ = TermDictionary::load(r);
    store.preds_ = TermDictionary::load(r);
    store.triple_count_ = r.u64();
    uint64_t ns = r.u64();
    for (uint64_t i = 0; i < ns; ++i) store.so_refs_.push_back(r.u64());
    uint64_t np = r.u64();
    for (uint64_t i = 0; i < np; ++i) store.pred_refs_.push_back(r.u64());
    uint32_t nt = r.u32();
    for (uint32_t i = 0; i < nt; ++i) {
        uint64_t pid = r.u64();
        store.trees_.emplace(pid, DK2Tree::load(r));
    }
    AuditReport rep = store.audit();
    if (!rep) throw std::runtime_error("snapshot: " + rep.issues);
    return store;
}

}  // namespace dk2
