#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dk2/rdf.hpp"
#include "oracle.hpp"

using namespace dk2;
using testutil::TripleOracle;
using Row = TripleOracle::Row;

namespace {

void require_ok(const AuditReport& rep) {
    if (!rep.ok) FAIL(rep.issues);
}

std::vector<Row> spelled(const TripleStore& store, const std::vector<Triple>& ts) {
    std::vector<Row> out;
    for (const Triple& t : ts) out.push_back(store.spell(t));
    std::sort(out.begin(), out.end());
    return out;
}

std::string var_or(const std::optional<std::string>& t) { return t.value_or(""); }

// Join oracle over the plain row list: group each side's matches by the value
// in its join position, keep values present on both sides.
struct JoinRow {
    std::string value;
    std::vector<Row> left, right;
    bool operator==(const JoinRow&) const = default;
};

std::vector<JoinRow> oracle_join(const TripleOracle& oracle, const JoinSide& a,
                                 const JoinSide& b) {
    auto side_groups = [&](const JoinSide& side) {
        std::map<std::string, std::vector<Row>> groups;
        for (const Row& t : oracle.match(var_or(side.pattern.s), var_or(side.pattern.p),
                                         var_or(side.pattern.o)))
            groups[side.role == Role::subject ? t[0] : t[2]].push_back(t);
        return groups;
    };
    std::map<std::string, std::vector<Row>> la = side_groups(a), lb = side_groups(b);
    std::vector<JoinRow> out;
    for (auto& [value, left] : la) {
        auto it = lb.find(value);
        if (it == lb.end()) continue;
        out.push_back({value, left, it->second});
    }
    return out;
}

std::vector<JoinRow> spelled_join(const TripleStore& store,
                                  const std::vector<JoinBinding>& bindings) {
    std::vector<JoinRow> out;
    for (const JoinBinding& b : bindings)
        out.push_back({store.subject_text(b.value), spelled(store, b.left),
                       spelled(store, b.right)});
    std::sort(out.begin(), out.end(),
              [](const JoinRow& x, const JoinRow& y) { return x.value < y.value; });
    return out;
}

TriplePattern pat(const char* s, const char* p, const char* o) {
    TriplePattern q;
    if (*s) q.s = s;
    if (*p) q.p = p;
    if (*o) q.o = o;
    return q;
}

DK2Config small_cfg() {
    DK2Config cfg;
    cfg.block_bytes = 64;
    return cfg;
}

}  // namespace

TEST_CASE("dictionary ids are dense and freed ids come back newest first") {
    TermDictionary d;
    CHECK(d.intern("alpha") == 0);
    CHECK(d.intern("beta") == 1);
    CHECK(d.intern("alpha") == 0);
    CHECK(d.intern("gamma") == 2);
    CHECK(d.live() == 3);
    CHECK(d.allocated() == 3);
    CHECK(d.find("beta") == 1);
    CHECK(d.text_of(2) == "gamma");
    CHECK_THROWS_AS(d.intern(""), std::invalid_argument);

    d.release(1);
    d.release(0);
    CHECK(d.live() == 1);
    CHECK_FALSE(d.find("beta").has_value());
    CHECK(d.freed() == std::vector<uint64_t>{1, 0});
    CHECK(d.intern("delta") == 0);
    CHECK(d.intern("beta") == 1);
    CHECK(d.allocated() == 3);
    require_ok(d.audit());

    ByteWriter w;
    d.save(w);
    ByteReader r(w.buf);
    TermDictionary back = TermDictionary::load(r);
    CHECK(back == d);
}

TEST_CASE("triples insert once, resolve, and delete with full cleanup") {
    TripleStore store(small_cfg());
    CHECK(store.add_triple("ann", "knows", "bob"));
    CHECK_FALSE(store.add_triple("ann", "knows", "bob"));
    CHECK(store.add_triple("bob", "knows", "ann"));
    CHECK(store.add_triple("ann", "likes", "pie"));
    CHECK(store.triple_count() == 3);
    CHECK(store.term_count() == 3);  // subjects and objects share one space
    CHECK(store.predicate_count() == 2);
    CHECK(store.has_triple("ann", "knows", "bob"));
    CHECK_FALSE(store.has_triple("bob", "likes", "pie"));
    require_ok(store.audit());

    CHECK(store.delete_triple("ann", "likes", "pie"));
    CHECK_FALSE(store.delete_triple("ann", "likes", "pie"));
    // "pie" and the whole "likes" matrix are gone
    CHECK(store.term_count() == 2);
    CHECK(store.predicate_count() == 1);
    CHECK(store.triple_count() == 2);
    CHECK(store.match(pat("", "likes", "")).empty());
    require_ok(store.audit());

    CHECK(store.delete_triple("ann", "knows", "bob"));
    CHECK(store.delete_triple("bob", "knows", "ann"));
    CHECK(store.triple_count() == 0);
    CHECK(store.term_count() == 0);
    CHECK(store.predicate_count() == 0);
    require_ok(store.audit());
}

TEST_CASE("a term used as both subject and object dies only with its last use") {
    TripleStore store(small_cfg());
    store.add_triple("x", "p", "x");
    CHECK(store.term_count() == 1);
    store.add_triple("x", "q", "y");
    CHECK(store.delete_triple("x", "p", "x"));
    CHECK(store.term_count() == 2);  // x survives via (x, q, y)
    CHECK(store.has_triple("x", "q", "y"));
    require_ok(store.audit());
    CHECK(store.delete_triple("x", "q", "y"));
    CHECK(store.term_count() == 0);
    require_ok(store.audit());
}

TEST_CASE("freed term ids are reused and stay coherent across predicates") {
    TripleStore store(small_cfg());
    store.add_triple("a", "p", "b");
    store.add_triple("b", "q", "c");
    uint64_t a_id = *store.term_dictionary().find("a");
    store.delete_triple("a", "p", "b");  // kills "a" and predicate "p"
    CHECK_FALSE(store.term_dictionary().find("a").has_value());
    require_ok(store.audit());

    store.add_triple("d", "r", "c");
    CHECK(*store.term_dictionary().find("d") == a_id);
    require_ok(store.audit());

    // a predicate created after frees must mirror the full id history
    store.add_triple("b", "s", "d");
    require_ok(store.audit());
    CHECK(spelled(store, store.match(pat("", "", ""))) ==
          std::vector<Row>{{"b", "q", "c"}, {"b", "s", "d"}, {"d", "r", "c"}});
}

TEST_CASE("every pattern shape agrees with a scan over the rows") {
    TripleStore store(small_cfg());
    TripleOracle oracle;
    std::mt19937_64 rng(71);
    auto term = [&](uint64_t n) { return "t" + std::to_string(rng() % n); };
    auto pred = [&](uint64_t n) { return "p" + std::to_string(rng() % n); };

    for (int step = 0; step < 1200; ++step) {
        Row t = {term(35), pred(6), term(35)};
        if (rng() % 4 == 0) {
            CHECK(store.delete_triple(t[0], t[1], t[2]) == oracle.remove(t));
        } else {
            CHECK(store.add_triple(t[0], t[1], t[2]) == oracle.add(t));
        }
        if (step % 100 == 99) require_ok(store.audit());

        std::string s = term(35), p = pred(6), o = term(35);
        for (unsigned shape = 0; shape < 8; ++shape) {
            TriplePattern q;
            if (shape & 4) q.s = s;
            if (shape & 2) q.p = p;
            if (shape & 1) q.o = o;
            CHECK(spelled(store, store.match(q)) ==
                  oracle.match(shape & 4 ? s : "", shape & 2 ? p : "", shape & 1 ? o : ""));
        }
    }
    require_ok(store.audit());

    // bound terms the store has never seen
    CHECK(store.match(pat("nobody", "", "")).empty());
    CHECK(store.match(pat("", "nosuchpred", "")).empty());
    CHECK(store.match(pat("", "", "nothing")).empty());
}

TEST_CASE("all three join strategies agree with each other and with a scan") {
    TripleStore store(small_cfg());
    TripleOracle oracle;
    std::mt19937_64 rng(93);
    for (int i = 0; i < 700; ++i) {
        Row t = {"t" + std::to_string(rng() % 30), "p" + std::to_string(rng() % 5),
                 "t" + std::to_string(rng() % 30)};
        store.add_triple(t[0], t[1], t[2]);
        oracle.add(t);
    }
    require_ok(store.audit());

    std::vector<TriplePattern> sides = {
        pat("", "p0", ""),    // predicate bound, other position free
        pat("", "p1", "t3"),  // object bound (used when the role is subject)
        pat("t5", "p2", ""),  // subject bound (used when the role is object)
        pat("", "", ""),      // predicate variable
        pat("", "p4", "t11"),
    };

    int checked = 0;
    for (size_t i = 0; i < sides.size(); ++i) {
        for (size_t j = 0; j < sides.size(); ++j) {
            for (Role ra : {Role::subject, Role::object}) {
                for (Role rb : {Role::subject, Role::object}) {
                    JoinSide a{sides[i], ra}, b{sides[j], rb};
                    // the join position must be a variable on each side, and
                    // only one side may leave the predicate open
                    if (ra == Role::subject && a.pattern.s) continue;
                    if (ra == Role::object && a.pattern.o) continue;
                    if (rb == Role::subject && b.pattern.s) continue;
                    if (rb == Role::object && b.pattern.o) continue;
                    if (!a.pattern.p && !b.pattern.p) continue;

                    auto indep = store.join_independent(a, b);
                    CHECK(store.join_chain(a, b) == indep);
                    CHECK(store.join_interactive(a, b) == indep);
                    CHECK(spelled_join(store, indep) == oracle_join(oracle, a, b));
                    ++checked;
                }
            }
        }
    }
    CHECK(checked > 40);
}

TEST_CASE("joins against missing terms or predicates are empty") {
    TripleStore store(small_cfg());
    store.add_triple("a", "p", "b");
    JoinSide a{pat("", "p", ""), Role::subject};
    JoinSide gone{pat("", "absent", ""), Role::subject};
    CHECK(store.join_independent(a, gone).empty());
    CHECK(store.join_chain(a, gone).empty());
    CHECK(store.join_interactive(a, gone).empty());

    JoinSide bound_gone{pat("", "p", "nobody"), Role::subject};
    CHECK(store.join_interactive(a, bound_gone).empty());
}

TEST_CASE("join sides with a bound join position or two open predicates are rejected") {
    TripleStore store(small_cfg());
    store.add_triple("a", "p", "b");
    JoinSide ok{pat("", "p", ""), Role::subject};
    JoinSide bound_s{pat("a", "p", ""), Role::subject};
    JoinSide bound_o{pat("", "p", "b"), Role::object};
    JoinSide open_p{pat("", "", ""), Role::subject};
    CHECK_THROWS_AS(store.join_independent(bound_s, ok), std::invalid_argument);
    CHECK_THROWS_AS(store.join_chain(ok, bound_o), std::invalid_argument);
    CHECK_THROWS_AS(store.join_interactive(open_p, open_p), std::invalid_argument);
}

TEST_CASE("store snapshots restore byte for byte") {
    TripleStore store(small_cfg());
    std::mt19937_64 rng(12);
    for (int i = 0; i < 300; ++i)
        store.add_triple("t" + std::to_string(rng() % 25), "p" + std::to_string(rng() % 4),
                         "t" + std::to_string(rng() % 25));
    for (int i = 0; i < 60; ++i)
        store.delete_triple("t" + std::to_string(rng() % 25), "p" + std::to_string(rng() % 4),
                            "t" + std::to_string(rng() % 25));
    require_ok(store.audit());

    ByteWriter w;
    store.save(w);
    ByteReader r(w.buf);
    TripleStore back = TripleStore::load(r);
    CHECK(r.exhausted());
    require_ok(back.audit());
    CHECK(back.triple_count() == store.triple_count());
    CHECK(back.term_count() == store.term_count());
    CHECK(spelled(back, back.match(pat("", "", ""))) ==
          spelled(store, store.match(pat("", "", ""))));
    CHECK(back.term_dictionary() == store.term_dictionary());

    ByteWriter w2;
    back.save(w2);
    CHECK(w2.buf == w.buf);

    ByteReader trunc(std::span(w.buf.data(), w.buf.size() - 2));
    CHECK_THROWS_AS(TripleStore::load(trunc), std::runtime_error);
}

TEST_CASE("empty terms in a triple are rejected") {
    TripleStore store(small_cfg());
    CHECK_THROWS_AS(store.add_triple("", "p", "o"), std::invalid_argument);
    CHECK_THROWS_AS(store.add_triple("s", "", "o"), std::invalid_argument);
    CHECK_THROWS_AS(store.delete_triple("s", "p", ""), std::invalid_argument);
    CHECK(store.triple_count() == 0);
}
