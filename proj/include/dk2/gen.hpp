#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dk2/config.hpp"

namespace dk2::gen {

// Distinct edges drawn uniformly over a side x side matrix.
std::vector<Cell> uniform_graph(uint64_t side, uint64_t edges, uint64_t seed);

// Distinct edges grouped into square hotspots, mimicking the locality of
// real adjacency matrices.
std::vector<Cell> clustered_graph(uint64_t side, uint64_t edges, uint64_t seed);

// Grid of 1s spaced 2^sep_exp apart on a matrix of side 2^side_exp, row-major,
// truncated to max_points.
std::vector<Cell> separation_grid(uint64_t side_exp, uint64_t sep_exp, uint64_t max_points);

// Distinct synthetic triples over nterms subjects/objects and npreds predicates.
std::vector<std::array<std::string, 3>> triples(uint64_t count, uint64_t npreds, uint64_t nterms,
                                                uint64_t seed);

}  // namespace dk2::gen
