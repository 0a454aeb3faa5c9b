// Acceptance sweep: every release gate in one binary. Each criterion prints
// exactly one PASS/FAIL line; the exit status is the number of failures.
// Limits are pinned here, next to the checks they bound.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dk2/codec.hpp"
#include "dk2/dk2tree.hpp"
#include "dk2/gen.hpp"
#include "dk2/rdf.hpp"
#include "dk2/static_k2.hpp"
#include "oracle.hpp"

using namespace dk2;
using testutil::MatrixOracle;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kEditStreamSeconds = 30.0;  // criterion 1
constexpr double kCodecSeconds = 5.0;        // criterion 4
constexpr double kRdfSeconds = 60.0;         // criterion 8
constexpr double kMaxDynamicStaticRatio = 3.0;

int failures = 0;

double since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int num, const char* what, bool pass, double secs, const std::string& note) {
    std::printf("%s  criterion %d: %s (%.1fs)%s%s\n", pass ? "PASS" : "FAIL", num, what, secs,
                note.empty() ? "" : " - ", note.c_str());
    if (!pass) ++failures;
}

struct Check {
    bool ok = true;
    std::string note;

    void expect(bool cond, const std::string& msg) {
        if (cond || !ok) return;
        if (!cond && ok) {
            ok = false;
            note = msg;
        }
    }
};

// --- criteria 1 and 3: mixed edit stream vs oracle, structural identity ------

// 10k ops per round: 60% set, 20% clear, 10% queries split over the four
// kinds, 5% fresh node, 5% node removal; audited every 100 ops.
struct EditStreamResult {
    bool oracle_ok = true;
    bool identity_ok = true;
    double secs = 0;
    std::string note;
};

bool count_identity_holds(const DK2Tree& t) {
    if (t.t_tree().total_bits() == 0) return t.l_layer().total_bits() == 0;
    uint64_t ones = 0;
    for (uint64_t v : t.level_ones()) ones += v;
    return t.t_tree().total_bits() + t.l_layer().total_bits() == 4 * (1 + ones);
}

EditStreamResult run_edit_stream() {
    EditStreamResult res;
    Check c;
    auto t0 = Clock::now();
    DK2Tree tree(KSchedule::uniform(2, 1024));
    MatrixOracle oracle;
    std::mt19937_64 rng(20240601);
    std::vector<uint64_t> live_nodes;

    for (int round = 0; round < 10 && c.ok; ++round) {
        for (int op = 0; op < 10000 && c.ok; ++op) {
            uint64_t r = rng() % 1024, q = rng() % 1024;
            unsigned roll = rng() % 100;
            if (roll < 60) {
                c.expect(tree.set_cell(r, q) == oracle.set(r, q), "set result diverged");
            } else if (roll < 80) {
                c.expect(tree.clear_cell(r, q) == oracle.clear(r, q), "clear result diverged");
            } else if (roll < 90) {
                switch (roll % 4) {
                    case 0:
                        c.expect(tree.contains(r, q) == oracle.contains(r, q),
                                 "membership diverged");
                        break;
                    case 1:
                        c.expect(tree.columns_in_row(r) == oracle.row(r), "row query diverged");
                        break;
                    case 2:
                        c.expect(tree.rows_in_column(q) == oracle.col(q), "column query diverged");
                        break;
                    default: {
                        uint64_t r2 = r + rng() % 64, q2 = q + rng() % 64;
                        c.expect(tree.cells_in_range(r, r2, q, q2) == oracle.range(r, r2, q, q2),
                                 "range query diverged");
                    }
                }
            } else if (roll < 95) {
                live_nodes.push_back(tree.add_node());
            } else if (!live_nodes.empty()) {
                size_t pick = rng() % live_nodes.size();
                uint64_t id = live_nodes[pick];
                live_nodes.erase(live_nodes.begin() + pick);
                tree.remove_node(id);
                oracle.clear_node(id);
            }
            if (op % 100 == 99) {
                auto rep = tree.audit();
                c.expect(rep.ok, "audit: " + rep.issues);
            }
        }
        c.expect(tree.all_cells() == oracle.all(), "full listing diverged");
        if (!count_identity_holds(tree)) res.identity_ok = false;
    }
    res.secs = since(t0);
    res.oracle_ok = c.ok;
    res.note = c.note;
    if (c.ok && res.secs >= kEditStreamSeconds) {
        res.oracle_ok = false;
        res.note = "exceeded the time limit";
    }
    return res;
}

// --- criterion 2: static and dynamic forms answer identically ----------------

bool graphs_agree(std::string& note) {
    Check c;
    std::mt19937_64 rng(7121);
    for (int g = 0; g < 20 && c.ok; ++g) {
        // edge counts log-spaced over 1e3..1e5, alternating generators
        uint64_t edges = uint64_t(std::llround(std::pow(10.0, 3.0 + 2.0 * g / 19.0)));
        uint64_t side = 16384;
        std::vector<Cell> cells = (g % 2 == 0) ? gen::uniform_graph(side, edges, 100 + g)
                                               : gen::clustered_graph(side, edges, 100 + g);
        KSchedule sched = (g % 3 == 0) ? KSchedule::hybrid(side, 4) : KSchedule::uniform(2, side);

        StaticK2Tree st = StaticK2Tree::build(sched, cells);
        DK2Tree dyn(sched);
        for (const Cell& cell : cells) dyn.set_cell(cell.row, cell.col);

        for (const Cell& cell : cells)
            c.expect(st.contains(cell.row, cell.col) && dyn.contains(cell.row, cell.col),
                     "a built cell is missing");
        for (int i = 0; i < 200; ++i) {
            uint64_t r = rng() % side, q = rng() % side;
            c.expect(st.contains(r, q) == dyn.contains(r, q), "membership diverged");
        }
        for (int i = 0; i < 100; ++i) {
            uint64_t r = rng() % side;
            c.expect(st.columns_in_row(r) == dyn.columns_in_row(r), "row query diverged");
            c.expect(st.rows_in_column(r) == dyn.rows_in_column(r), "column query diverged");
        }
        for (int i = 0; i < 20; ++i) {
            uint64_t r1 = rng() % side, c1 = rng() % side;
            uint64_t r2 = std::min(side - 1, r1 + rng() % 512);
            uint64_t c2 = std::min(side - 1, c1 + rng() % 512);
            c.expect(st.cells_in_range(r1, r2, c1, c2) == dyn.cells_in_range(r1, r2, c1, c2),
                     "rectangle query diverged");
        }
        c.expect(dyn.to_static() == st, "dynamic bitmaps differ from the static build");
        c.expect(DK2Tree::from_static(st).to_static() == st,
                 "static form changed through a dynamic round trip");
    }
    note = c.note;
    return c.ok;
}

// --- criterion 4: codec roundtrip, stream decode, monotone lengths -----------

bool codec_exact(std::string& note, double& secs) {
    Check c;
    auto t0 = Clock::now();
    uint8_t buf[4];
    unsigned prev_len = 1;
    for (uint64_t i = 0; i <= 1000000 && c.ok; ++i) {
        unsigned n = etdc::encode(i, buf);
        c.expect(n == etdc::length(i), "encoded length disagrees with length()");
        c.expect(n >= prev_len, "codeword lengths are not monotone");
        prev_len = n;
        auto dec = etdc::decode(std::span<const uint8_t>(buf, n), 0);
        c.expect(dec.index == i && dec.consumed == n, "roundtrip mismatch");
    }

    std::mt19937_64 rng(40);
    std::vector<uint64_t> indices;
    std::vector<uint8_t> stream;
    for (int i = 0; i < 100000; ++i) {
        uint64_t v = rng() % etdc::kMaxCodes;
        indices.push_back(v);
        unsigned n = etdc::encode(v, buf);
        stream.insert(stream.end(), buf, buf + n);
    }
    size_t off = 0;
    for (uint64_t want : indices) {
        auto dec = etdc::decode(stream, off);
        c.expect(dec.index == want, "stream decode diverged");
        c.expect(etdc::skip(stream, off) == off + dec.consumed, "skip and decode disagree");
        off += dec.consumed;
        if (!c.ok) break;
    }
    c.expect(off == stream.size(), "stream decode ended early");

    secs = since(t0);
    if (c.ok && secs >= kCodecSeconds) {
        c.ok = false;
        c.note = "exceeded the time limit";
    }
    note = c.note;
    return c.ok;
}

// --- criterion 5: coded leaf layer tracks the plain one bit for bit ----------

bool vocab_tracks_plain(std::string& note) {
    Check c;
    KSchedule sched = KSchedule::uniform(2, 1024, 4);
    DK2Config coded_cfg;
    coded_cfg.vocab = VocabMode::on;
    DK2Tree plain(sched);
    DK2Tree coded(sched, coded_cfg);
    std::mt19937_64 rng(20240601);
    std::vector<uint64_t> live_nodes;

    auto occurrences_consistent = [&]() {
        const VocabLTree* v = coded.l_layer().vocab_tree();
        return v->vocab().total_occurrences() == coded.l_layer().total_bits() / 16;
    };

    for (int round = 0; round < 10 && c.ok; ++round) {
        for (int op = 0; op < 10000 && c.ok; ++op) {
            uint64_t r = rng() % 1024, q = rng() % 1024;
            unsigned roll = rng() % 100;
            if (roll < 60) {
                c.expect(plain.set_cell(r, q) == coded.set_cell(r, q), "set result diverged");
            } else if (roll < 80) {
                c.expect(plain.clear_cell(r, q) == coded.clear_cell(r, q),
                         "clear result diverged");
            } else if (roll < 90) {
                // queries leave both trees untouched
            } else if (roll < 95) {
                uint64_t a = plain.add_node(), b = coded.add_node();
                c.expect(a == b, "node ids diverged");
                live_nodes.push_back(a);
            } else if (!live_nodes.empty()) {
                size_t pick = rng() % live_nodes.size();
                uint64_t id = live_nodes[pick];
                live_nodes.erase(live_nodes.begin() + pick);
                plain.remove_node(id);
                coded.remove_node(id);
            }
            c.expect(occurrences_consistent(),
                     "vocabulary occurrence total differs from the stored group count");
        }
        c.expect(plain.l_layer().to_bitvec() == coded.l_layer().to_bitvec(),
                 "leaf bitmaps diverged");
        c.expect(plain.t_tree().to_bitvec() == coded.t_tree().to_bitvec(),
                 "tree bitmaps diverged");
    }
    if (c.ok) {
        auto rep = coded.audit();
        c.expect(rep.ok, "audit: " + rep.issues);
        coded.rebuild_vocabulary();
        c.expect(coded.l_layer().vocab_tree()->vocab().size_ratio() == 1.0,
                 "forced rebuild left a ratio other than 1");
        c.expect(plain.l_layer().to_bitvec() == coded.l_layer().to_bitvec(),
                 "rebuild changed the stored bits");
    }
    note = c.note;
    return c.ok;
}

// --- criterion 6: splice work equals the designed insertion depth ------------

bool splice_depths_exact(std::string& note) {
    Check c;
    double prev_mean = 0;
    for (unsigned d : {5u, 8u, 11u}) {
        DK2Tree tree(KSchedule::uniform(2, 16384));
        // anchors on the 2^13 lattice; each probe differs from an anchor in
        // exactly bit d of one coordinate, so it must splice exactly d levels
        for (uint64_t i : {0u, 1u})
            for (uint64_t j : {0u, 1u}) tree.set_cell(i << 13, j << 13);
        uint64_t total_work = 0, probes = 0;
        for (uint64_t i : {0u, 1u}) {
            for (uint64_t j : {0u, 1u}) {
                for (int axis = 0; axis < 2; ++axis) {
                    uint64_t r = (i << 13) + (axis == 0 ? uint64_t(1) << d : 0);
                    uint64_t q = (j << 13) + (axis == 0 ? 0 : uint64_t(1) << d);
                    c.expect(tree.set_cell(r, q), "probe cell was already present");
                    const DK2Tree::UpdateStats& st = tree.last_update();
                    c.expect(st.splices == d,
                             "separation 2^" + std::to_string(d) + " spliced " +
                                 std::to_string(st.splices) + " levels");
                    c.expect(st.flips == 1 && st.removals == 0, "unexpected extra work");
                    total_work += st.work();
                    probes += 1;
                }
            }
        }
        double mean = double(total_work) / double(probes);
        c.expect(mean >= prev_mean, "mean work decreased at a larger separation");
        prev_mean = mean;
    }
    note = c.note;
    return c.ok;
}

// --- criterion 7: dynamic size stays within bounds of the static size --------

bool size_ratio_bounded(std::string& note) {
    std::vector<Cell> cells = gen::clustered_graph(1 << 17, 1000000, 77);
    KSchedule sched = KSchedule::uniform(2, uint64_t(1) << 17);
    DK2Tree dyn(sched);
    for (const Cell& c : cells) dyn.set_cell(c.row, c.col);
    StaticK2Tree st = StaticK2Tree::build(sched, cells);

    double ratio = double(dyn.measured_bytes()) / double(st.measure().total_bytes());
    char buf[96];
    std::snprintf(buf, sizeof buf, "dynamic/static = %.3f, bound %.1f", ratio,
                  kMaxDynamicStaticRatio);
    note = buf;
    return ratio <= kMaxDynamicStaticRatio;
}

// --- criterion 8: triple patterns vs a scan, join strategies identical -------

using Row = std::array<std::string, 3>;

std::vector<Row> scan_match(const std::vector<Row>& rows, const std::string& s,
                            const std::string& p, const std::string& o) {
    std::vector<Row> out;
    for (const Row& t : rows)
        if ((s.empty() || t[0] == s) && (p.empty() || t[1] == p) && (o.empty() || t[2] == o))
            out.push_back(t);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Row> spelled(const TripleStore& store, const std::vector<Triple>& ts) {
    std::vector<Row> out;
    for (const Triple& t : ts) out.push_back(store.spell(t));
    std::sort(out.begin(), out.end());
    return out;
}

bool rdf_store_exact(std::string& note, double& secs) {
    Check c;
    auto t0 = Clock::now();
    std::vector<Row> rows = gen::triples(50000, 30, 3000, 99);
    TripleStore store;
    for (const Row& t : rows) store.add_triple(t[0], t[1], t[2]);
    {
        auto rep = store.audit();
        c.expect(rep.ok, "audit: " + rep.issues);
    }

    std::mt19937_64 rng(123);
    auto pick = [&](int limit, const char* prefix) {
        return std::string(prefix) + std::to_string(rng() % limit);
    };
    c.expect(spelled(store, store.match({})) == scan_match(rows, "", "", ""),
             "full enumeration diverged from the scan");
    for (int probe = 0; probe < 100 && c.ok; ++probe) {
        std::string s = pick(3000, "s"), p = pick(30, "p"), o = pick(3000, "s");
        for (unsigned shape = 1; shape < 8 && c.ok; ++shape) {
            TriplePattern q;
            if (shape & 4) q.s = s;
            if (shape & 2) q.p = p;
            if (shape & 1) q.o = o;
            c.expect(spelled(store, store.match(q)) ==
                         scan_match(rows, shape & 4 ? s : "", shape & 2 ? p : "",
                                    shape & 1 ? o : ""),
                     "pattern match diverged from the scan");
        }
    }

    // joins: vary the roles on both sides, sometimes binding the free position
    auto side_for = [&](bool var_pred, Role role, bool bind_free) {
        TriplePattern q;
        if (!var_pred) q.p = pick(30, "p");
        if (bind_free) {
            if (role == Role::subject) q.o = pick(3000, "s");
            else q.s = pick(3000, "s");
        }
        return JoinSide{q, role};
    };
    const Role roles[] = {Role::subject, Role::object};
    for (int j = 0; j < 200 && c.ok; ++j) {
        bool second_open = j >= 100;  // one side may also leave the predicate open
        JoinSide a = side_for(false, roles[j % 2], j % 3 == 0);
        // an open predicate with nothing else bound sweeps the whole store;
        // exercise that shape a few times and bind the free position otherwise
        bool bind_b = second_open ? j % 10 != 0 : (j + 1) % 3 == 0;
        JoinSide b = side_for(second_open, roles[(j / 2) % 2], bind_b);
        auto indep = store.join_independent(a, b);
        c.expect(store.join_chain(a, b) == indep, "chain join diverged");
        c.expect(store.join_interactive(a, b) == indep, "interactive join diverged");
    }

    secs = since(t0);
    if (c.ok && secs >= kRdfSeconds) {
        c.ok = false;
        c.note = "exceeded the time limit";
    }
    note = c.note;
    return c.ok;
}

// --- criterion 9: snapshots re-save byte-identically --------------------------

template <class T, class LoadFn>
bool resave_identical(const T& value, LoadFn load) {
    ByteWriter w;
    value.save(w);
    ByteReader r(w.buf);
    T back = load(r);
    ByteWriter w2;
    back.save(w2);
    return r.exhausted() && w2.buf == w.buf;
}

bool snapshots_stable(std::string& note) {
    Check c;
    std::mt19937_64 rng(31);
    std::vector<Cell> cells;
    for (int i = 0; i < 3000; ++i) cells.push_back({rng() % 2048, rng() % 2048});

    c.expect(resave_identical(StaticK2Tree::build(KSchedule::hybrid(2048, 4), cells),
                              [](ByteReader& r) { return StaticK2Tree::load(r); }),
             "static snapshot changed across a reload");

    for (VocabMode mode : {VocabMode::off, VocabMode::on, VocabMode::tracked}) {
        DK2Config cfg;
        cfg.vocab = mode;
        DK2Tree tree(KSchedule::uniform(2, 2048, 4), cfg);
        for (const Cell& cell : cells) tree.set_cell(cell.row, cell.col);
        for (int i = 0; i < 500; ++i) tree.clear_cell(rng() % 2048, rng() % 2048);
        tree.add_node();
        tree.remove_node(0);
        c.expect(resave_identical(tree, [](ByteReader& r) { return DK2Tree::load(r); }),
                 "dynamic snapshot changed across a reload");
    }

    TripleStore store;
    for (const Row& t : gen::triples(2000, 12, 300, 5)) store.add_triple(t[0], t[1], t[2]);
    std::mt19937_64 rng2(6);
    for (int i = 0; i < 300; ++i)
        store.delete_triple("s" + std::to_string(rng2() % 300), "p" + std::to_string(rng2() % 12),
                            "s" + std::to_string(rng2() % 300));
    c.expect(resave_identical(store, [](ByteReader& r) { return TripleStore::load(r); }),
             "triple store snapshot changed across a reload");

    note = c.note;
    return c.ok;
}

}  // namespace

int main() {
    {
        EditStreamResult res = run_edit_stream();
        report(1, "mixed edit stream matches a boolean oracle under audit", res.oracle_ok,
               res.secs, res.note);
        report(3, "tree and leaf bit totals satisfy the population identity", res.identity_ok, 0.0,
               res.identity_ok ? "" : "identity failed after a batch");
    }
    {
        auto t0 = Clock::now();
        std::string note;
        bool ok = graphs_agree(note);
        report(2, "static and dynamic forms answer every query identically", ok, since(t0), note);
    }
    {
        double secs = 0;
        std::string note;
        bool ok = codec_exact(note, secs);
        report(4, "byte codec roundtrips, streams, and orders lengths", ok, secs, note);
    }
    {
        auto t0 = Clock::now();
        std::string note;
        bool ok = vocab_tracks_plain(note);
        report(5, "coded leaf layer stays bit-identical to plain storage", ok, since(t0), note);
    }
    {
        auto t0 = Clock::now();
        std::string note;
        bool ok = splice_depths_exact(note);
        report(6, "splice counts equal the designed insertion depths", ok, since(t0), note);
    }
    {
        auto t0 = Clock::now();
        std::string note;
        bool ok = size_ratio_bounded(note);
        report(7, "dynamic form stays within the static size bound", ok, since(t0), note);
    }
    {
        double secs = 0;
        std::string note;
        bool ok = rdf_store_exact(note, secs);
        report(8, "triple patterns match a scan and join strategies agree", ok, secs, note);
    }
    {
        auto t0 = Clock::now();
        std::string note;
        bool ok = snapshots_stable(note);
        report(9, "every snapshot kind re-saves byte-identically", ok, since(t0), note);
    }
    return failures;
}
