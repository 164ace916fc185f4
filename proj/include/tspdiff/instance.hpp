#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tspdiff/rng.hpp"

namespace tspdiff {

// One real value per edge, in the instance's fixed edge order.
using EdgeVec = std::vector<double>;

inline constexpr double kInfeasible = std::numeric_limits<double>::infinity();

// Index of undirected edge (i, j) in the lexicographic ordering
// (0,1),(0,2),...,(0,n-1),(1,2),... used by every edge vector in the project.
inline int edge_index_of(int n, int i, int j) {
    if (i == j) throw std::invalid_argument("edge_index_of: i == j");
    if (i > j) std::swap(i, j);
    int row_offset = i * (n - 1) - i * (i - 1) / 2;
    return row_offset + (j - i - 1);
}

// Euclidean TSP instance on points in the unit square. Edges are stored
// explicitly so that edge vectors, heatmaps and solution indicators all share
// one ordering.
struct TspInstance {
    int n = 0;
    std::vector<std::array<double, 2>> coords;
    std::vector<std::pair<int, int>> edges;
    std::vector<double> weights;

    int edge_count() const { return n * (n - 1) / 2; }

    int edge_index(int i, int j) const { return edge_index_of(n, i, j); }

    double distance(int i, int j) const {
        return weights[static_cast<std::size_t>(edge_index(i, j))];
    }
};

inline TspInstance make_instance(std::vector<std::array<double, 2>> coords) {
    const int n = static_cast<int>(coords.size());
    if (n < 3) throw std::invalid_argument("make_instance: need at least 3 vertices");
    for (const auto& c : coords) {
        if (!(c[0] >= 0.0 && c[0] <= 1.0 && c[1] >= 0.0 && c[1] <= 1.0))
            throw std::invalid_argument("make_instance: coordinates must lie in the unit square");
    }
    TspInstance inst;
    inst.n = n;
    inst.coords = std::move(coords);
    inst.edges.reserve(static_cast<std::size_t>(inst.edge_count()));
    inst.weights.reserve(static_cast<std::size_t>(inst.edge_count()));
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double dx = inst.coords[i][0] - inst.coords[j][0];
            double dy = inst.coords[i][1] - inst.coords[j][1];
            inst.edges.emplace_back(i, j);
            inst.weights.push_back(std::sqrt(dx * dx + dy * dy));
        }
    }
    return inst;
}

// Uniform random instance; bit-identical for a fixed (n, seed).
inline TspInstance generate_instance(int n, std::uint64_t seed) {
    if (n < 3) throw std::invalid_argument("generate_instance: need at least 3 vertices");
    Rng rng(seed);
    std::vector<std::array<double, 2>> coords(static_cast<std::size_t>(n));
    for (auto& c : coords) {
        c[0] = rng.uniform();
        c[1] = rng.uniform();
    }
    return make_instance(std::move(coords));
}

struct Tour {
    std::vector<int> perm;  // visiting order, a permutation of 0..n-1
    double cost = 0.0;
};

// 0/1 indicator over the instance's edge ordering.
struct SolutionVector {
    std::vector<std::uint8_t> bits;
};

inline double tour_cost(const TspInstance& inst, const std::vector<int>& perm) {
    double total = 0.0;
    const int n = static_cast<int>(perm.size());
    for (int k = 0; k < n; ++k)
        total += inst.distance(perm[static_cast<std::size_t>(k)],
                               perm[static_cast<std::size_t>((k + 1) % n)]);
    return total;
}

inline Tour make_tour(const TspInstance& inst, std::vector<int> perm) {
    if (static_cast<int>(perm.size()) != inst.n)
        throw std::invalid_argument("make_tour: permutation length mismatch");
    std::vector<bool> seen(static_cast<std::size_t>(inst.n), false);
    for (int v : perm) {
        if (v < 0 || v >= inst.n || seen[static_cast<std::size_t>(v)])
            throw std::invalid_argument("make_tour: not a permutation");
        seen[static_cast<std::size_t>(v)] = true;
    }
    Tour t;
    t.cost = tour_cost(inst, perm);
    t.perm = std::move(perm);
    return t;
}

inline SolutionVector tour_to_solution(const TspInstance& inst, const Tour& tour) {
    SolutionVector sol;
    sol.bits.assign(static_cast<std::size_t>(inst.edge_count()), 0);
    const int n = inst.n;
    for (int k = 0; k < n; ++k) {
        int a = tour.perm[static_cast<std::size_t>(k)];
        int b = tour.perm[static_cast<std::size_t>((k + 1) % n)];
        sol.bits[static_cast<std::size_t>(inst.edge_index(a, b))] = 1;
    }
    return sol;
}

// Cost of the selected edge set when it forms a single Hamiltonian cycle,
// +inf otherwise. The feasibility check is exact: degree 2 everywhere plus
// connectivity of the selection.
inline double objective(const TspInstance& inst, const SolutionVector& x) {
    const int n = inst.n;
    const int m = inst.edge_count();
    if (static_cast<int>(x.bits.size()) != m)
        throw std::invalid_argument("objective: solution length mismatch");

    std::vector<int> degree(static_cast<std::size_t>(n), 0);
    std::vector<std::array<int, 2>> adj(static_cast<std::size_t>(n), {-1, -1});
    double cost = 0.0;
    int selected = 0;
    for (int k = 0; k < m; ++k) {
        if (!x.bits[static_cast<std::size_t>(k)]) continue;
        auto [i, j] = inst.edges[static_cast<std::size_t>(k)];
        if (degree[static_cast<std::size_t>(i)] >= 2 || degree[static_cast<std::size_t>(j)] >= 2)
            return kInfeasible;
        adj[static_cast<std::size_t>(i)][degree[static_cast<std::size_t>(i)]++] = j;
        adj[static_cast<std::size_t>(j)][degree[static_cast<std::size_t>(j)]++] = i;
        cost += inst.weights[static_cast<std::size_t>(k)];
        ++selected;
    }
    if (selected != n) return kInfeasible;
    for (int v = 0; v < n; ++v)
        if (degree[static_cast<std::size_t>(v)] != 2) return kInfeasible;

    // Walk the cycle from vertex 0; it must visit every vertex.
    int count = 1;
    int prev = 0;
    int cur = adj[0][0];
    while (cur != 0) {
        ++count;
        int next = (adj[static_cast<std::size_t>(cur)][0] == prev)
                       ? adj[static_cast<std::size_t>(cur)][1]
                       : adj[static_cast<std::size_t>(cur)][0];
        prev = cur;
        cur = next;
    }
    if (count != n) return kInfeasible;
    return cost;
}

// 100 * (solver - optimal) / optimal.
inline double cost_drop_pct(double solver_cost, double optimal_cost) {
    if (!(optimal_cost > 0.0))
        throw std::invalid_argument("cost_drop_pct: optimal cost must be positive");
    return 100.0 * (solver_cost - optimal_cost) / optimal_cost;
}

}  // namespace tspdiff
