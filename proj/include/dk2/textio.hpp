#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dk2/config.hpp"

namespace dk2::textio {

// Input parse failure; the message names the 1-based line.
struct ParseError : std::runtime_error {
    size_t line;
    ParseError(size_t line_no, const std::string& what)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
};

// One line per edge: "row col". Blank lines are skipped.
std::vector<Cell> parse_edges(std::string_view text);

struct UpdateOp {
    enum class Kind : uint8_t { set, clear, add_node, remove_node };
    Kind kind = Kind::set;
    uint64_t row = 0, col = 0;  // col unused for node ops, row is the id for remove_node
};

// One op per line: "+r c", "-r c", "+node", "-node id".
std::vector<UpdateOp> parse_updates(std::string_view text);

// One triple per line: subject, predicate, object separated by tabs.
std::vector<std::array<std::string, 3>> parse_triples(std::string_view text);

}  // namespace dk2::textio
