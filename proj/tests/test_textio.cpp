#include <doctest.h>

#include <string>

#include "dk2/textio.hpp"

using namespace dk2;
using textio::ParseError;
using textio::UpdateOp;
using Kind = textio::UpdateOp::Kind;

TEST_CASE("edge lists parse one pair per line, skipping blanks") {
    auto edges = textio::parse_edges("3 4\n\n  7   9 \n0 0");
    REQUIRE(edges.size() == 3);
    CHECK(edges[0] == Cell{3, 4});
    CHECK(edges[1] == Cell{7, 9});
    CHECK(edges[2] == Cell{0, 0});
    CHECK(textio::parse_edges("").empty());
    CHECK(textio::parse_edges("\n\n  \n").empty());
    CHECK(textio::parse_edges("1\t2\r\n").size() == 1);
}

TEST_CASE("malformed edge lines name the offending line") {
    CHECK_THROWS_WITH_AS(textio::parse_edges("1 2\n3\n5 6"), "line 2: expected \"row col\"",
                         ParseError);
    CHECK_THROWS_WITH_AS(textio::parse_edges("1 2 3"), "line 1: expected \"row col\"", ParseError);
    try {
        textio::parse_edges("0 0\n1 1\n2 x");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line == 3);
    }
    CHECK_THROWS_AS(textio::parse_edges("-1 2"), ParseError);
    CHECK_THROWS_AS(textio::parse_edges("1 2.5"), ParseError);
}

TEST_CASE("update streams accept glued and spaced signs plus node ops") {
    auto ops = textio::parse_updates("+3 4\n- 5 6\n+ 7 8\n-9 10\n+node\n-node 2\n");
    REQUIRE(ops.size() == 6);
    CHECK(ops[0].kind == Kind::set);
    CHECK(ops[0].row == 3);
    CHECK(ops[0].col == 4);
    CHECK(ops[1].kind == Kind::clear);
    CHECK(ops[1].row == 5);
    CHECK(ops[2].kind == Kind::set);
    CHECK(ops[2].row == 7);
    CHECK(ops[3].kind == Kind::clear);
    CHECK(ops[3].col == 10);
    CHECK(ops[4].kind == Kind::add_node);
    CHECK(ops[5].kind == Kind::remove_node);
    CHECK(ops[5].row == 2);
}

TEST_CASE("malformed update lines are rejected with their line number") {
    CHECK_THROWS_WITH_AS(textio::parse_updates("+1 2\nx 3 4"),
                         "line 2: expected \"+r c\", \"-r c\", \"+node\" or \"-node id\"",
                         ParseError);
    CHECK_THROWS_WITH_AS(textio::parse_updates("+node 5"), "line 1: \"+node\" takes no arguments",
                         ParseError);
    CHECK_THROWS_AS(textio::parse_updates("-node"), ParseError);
    CHECK_THROWS_AS(textio::parse_updates("-node x"), ParseError);
    CHECK_THROWS_AS(textio::parse_updates("+1"), ParseError);
    CHECK_THROWS_AS(textio::parse_updates("+1 2 3"), ParseError);
    CHECK_THROWS_AS(textio::parse_updates("1 2"), ParseError);
    CHECK(textio::parse_updates("").empty());
}

TEST_CASE("triples split on exactly two tabs and keep inner spaces") {
    auto ts = textio::parse_triples("ann\tknows\tbob\nthe cat\tsat on\tthe mat\r\n");
    REQUIRE(ts.size() == 2);
    CHECK(ts[0] == std::array<std::string, 3>{"ann", "knows", "bob"});
    CHECK(ts[1] == std::array<std::string, 3>{"the cat", "sat on", "the mat"});
    CHECK(textio::parse_triples("\n   \n").empty());
}

TEST_CASE("triple lines with the wrong shape are rejected") {
    CHECK_THROWS_WITH_AS(textio::parse_triples("a b c"),
                         "line 1: expected \"subject<TAB>predicate<TAB>object\"", ParseError);
    CHECK_THROWS_AS(textio::parse_triples("a\tb"), ParseError);
    CHECK_THROWS_AS(textio::parse_triples("a\tb\tc\td"), ParseError);
    CHECK_THROWS_WITH_AS(textio::parse_triples("a\tb\tc\na\t\tc"), "line 2: empty term",
                         ParseError);
    CHECK_THROWS_AS(textio::parse_triples("\tb\tc"), ParseError);
    CHECK_THROWS_AS(textio::parse_triples("a\tb\t"), ParseError);
}
