#include "dk2/textio.hpp"

#include <charconv>

namespace dk2::textio {

namespace {

// Applies fn(line, 1-based number) to every line, tolerating a missing final
// newline.
template <class Fn>
void for_lines(std::string_view text, Fn fn) {
    size_t line_no = 1;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            if (pos < text.size()) fn(text.substr(pos), line_no);
            break;
        }
        fn(text.substr(pos, end - pos), line_no);
        pos = end + 1;
        line_no++;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) i++;
        size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') j++;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

uint64_t parse_u64(std::string_view tok, size_t line_no) {
    uint64_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        throw ParseError(line_no, "expected an unsigned integer, got \"" + std::string(tok) + "\"");
    return v;
}

}  // namespace

std::vector<Cell> parse_edges(std::string_view text) {
    std::vector<Cell> edges;
    for_lines(text, [&](std::string_view raw, size_t line_no) {
        std::string_view line = trim(raw);
        if (line.empty()) return;
        auto toks = split_ws(line);
        if (toks.size() != 2) throw ParseError(line_no, "expected \"row col\"");
        edges.push_back({parse_u64(toks[0], line_no), parse_u64(toks[1], line_no)});
    });
    return edges;
}

std::vector<UpdateOp> parse_updates(std::string_view text) {
    std::vector<UpdateOp> ops;
    for_lines(text, [&](std::string_view raw, size_t line_no) {
        std::string_view line = trim(raw);
        if (line.empty()) return;
        auto toks = split_ws(line);
        if (toks[0] == "+node") {
            if (toks.size() != 1) throw ParseError(line_no, "\"+node\" takes no arguments");
            ops.push_back({UpdateOp::Kind::add_node, 0, 0});
            return;
        }
        if (toks[0] == "-node") {
            if (toks.size() != 2) throw ParseError(line_no, "expected \"-node id\"");
            ops.push_back({UpdateOp::Kind::remove_node, parse_u64(toks[1], line_no), 0});
            return;
        }
        char sign = line.front();
        if (sign != '+' && sign != '-')
            throw ParseError(line_no, "expected \"+r c\", \"-r c\", \"+node\" or \"-node id\"");
        // The sign may be glued to the row ("+12 7") or stand alone ("+ 12 7").
        toks[0].remove_prefix(1);
        if (toks[0].empty()) toks.erase(toks.begin());
        if (toks.size() != 2) throw ParseError(line_no, "expected \"row col\" after the sign");
        ops.push_back({sign == '+' ? UpdateOp::Kind::set : UpdateOp::Kind::clear,
                       parse_u64(toks[0], line_no), parse_u64(toks[1], line_no)});
    });
    return ops;
}

std::vector<std::array<std::string, 3>> parse_triples(std::string_view text) {
    std::vector<std::array<std::string, 3>> triples;
    for_lines(text, [&](std::string_view raw, size_t line_no) {
        std::string_view line = raw;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) return;
        size_t t1 = line.find('\t');
        size_t t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
        if (t1 == std::string_view::npos || t2 == std::string_view::npos ||
            line.find('\t', t2 + 1) != std::string_view::npos)
            throw ParseError(line_no, "expected \"subject<TAB>predicate<TAB>object\"");
        std::string s(line.substr(0, t1));
        std::string p(line.substr(t1 + 1, t2 - t1 - 1));
        std::string o(line.substr(t2 + 1));
        if (s.empty() || p.empty() || o.empty()) throw ParseError(line_no, "empty term");
        triples.push_back({std::move(s), std::move(p), std::move(o)});
    });
    return triples;
}

}  // namespace dk2::textio
