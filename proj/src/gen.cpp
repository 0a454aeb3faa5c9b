#include "dk2/gen.hpp"

#include <random>
#include <unordered_set>

namespace dk2::gen {

namespace {

std::vector<Cell> distinct_cells(uint64_t side, uint64_t edges, std::mt19937_64& rng,
                                 auto&& draw) {
    std::unordered_set<uint64_t> seen;
    std::vector<Cell> out;
    out.reserve(edges);
    while (out.size() < edges) {
        Cell c = draw(rng);
        if (seen.insert(c.row * side + c.col).second) out.push_back(c);
    }
    return out;
}

}  // namespace

std::vector<Cell> uniform_graph(uint64_t side, uint64_t edges, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<uint64_t> coord(0, side - 1);
    return distinct_cells(side, edges, rng,
                          [&](std::mt19937_64& r) { return Cell{coord(r), coord(r)}; });
}

std::vector<Cell> clustered_graph(uint64_t side, uint64_t edges, uint64_t seed) {
    std::mt19937_64 rng(seed);
    uint64_t spread = std::max<uint64_t>(2, side / 128);
    uint64_t centers = std::max<uint64_t>(1, edges / 512);
    std::uniform_int_distribution<uint64_t> center(0, centers - 1);
    std::uniform_int_distribution<uint64_t> base(0, side - 1);
    std::uniform_int_distribution<uint64_t> off(0, spread - 1);
    // Fixed hotspot corners drawn first so the edge loop only picks offsets.
    std::vector<Cell> corners;
    corners.reserve(centers);
    for (uint64_t i = 0; i < centers; ++i) {
        uint64_t r = base(rng), c = base(rng);
        corners.push_back({r - std::min(r, spread), c - std::min(c, spread)});
    }
    return distinct_cells(side, edges, rng, [&](std::mt19937_64& r) {
        const Cell& corner = corners[center(r)];
        return Cell{std::min(side - 1, corner.row + off(r)),
                    std::min(side - 1, corner.col + off(r))};
    });
}

std::vector<Cell> separation_grid(uint64_t side_exp, uint64_t sep_exp, uint64_t max_points) {
    uint64_t side = uint64_t(1) << side_exp;
    uint64_t sep = uint64_t(1) << sep_exp;
    std::vector<Cell> out;
    for (uint64_t r = 0; r < side && out.size() < max_points; r += sep)
        for (uint64_t c = 0; c < side && out.size() < max_points; c += sep)
            out.push_back({r, c});
    return out;
}

std::vector<std::array<std::string, 3>> triples(uint64_t count, uint64_t npreds, uint64_t nterms,
                                                uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<uint64_t> term(0, nterms - 1);
    std::uniform_int_distribution<uint64_t> pred(0, npreds - 1);
    std::unordered_set<std::string> seen;
    std::vector<std::array<std::string, 3>> out;
    out.reserve(count);
    while (out.size() < count) {
        std::string s = "s" + std::to_string(term(rng));
        std::string p = "p" + std::to_string(pred(rng));
        std::string o = "s" + std::to_string(term(rng));
        if (seen.insert(s + "\t" + p + "\t" + o).second) out.push_back({s, p, o});
    }
    return out;
}

}  // namespace dk2::gen
