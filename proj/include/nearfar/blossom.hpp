#ifndef NEARFAR_BLOSSOM_HPP
#define NEARFAR_BLOSSOM_HPP

#include <vector>

namespace nearfar {

// Maximum-weight matching on a general (possibly non-bipartite) graph,
// Galil/Edmonds blossom algorithm with dual variables, O(n^3).
// Edges are (u, v, weight) with u != v. Returns mate[v] = matched partner
// or -1. With max_cardinality set, every maximum-cardinality matching is
// preferred over any smaller one regardless of weight.
std::vector<int> max_weight_matching(
    int num_vertices,
    const std::vector<std::tuple<int, int, double>>& edges,
    bool max_cardinality);

// Minimum-total-cost perfect matching on a complete graph given by a
// symmetric cost matrix (size must be even). Returns mate[v].
std::vector<int> min_cost_perfect_matching(const std::vector<std::vector<double>>& cost);

}  // namespace nearfar

#endif
