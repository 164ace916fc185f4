#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tspdiff/instance.hpp"
#include "tspdiff/rng.hpp"

namespace tspdiff {

inline constexpr int kExactSolverLimit = 16;

// Held-Karp dynamic program over vertex subsets, O(2^n n^2). Paths start at
// vertex 0; dp[mask][j] is the cheapest path covering {0} + mask ending at
// j (vertices 1..n-1 are bits 0..n-2 of mask).
inline Tour solve_exact(const TspInstance& inst) {
    const int n = inst.n;
    if (n > kExactSolverLimit)
        throw std::invalid_argument(
            "solve_exact: instance has more than 16 vertices; use solve_heuristic");

    const int m = n - 1;
    const std::size_t n_masks = std::size_t{1} << m;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dp(n_masks * static_cast<std::size_t>(m), inf);
    std::vector<std::int8_t> parent(n_masks * static_cast<std::size_t>(m), -1);

    auto at = [m](std::size_t mask, int j) { return mask * static_cast<std::size_t>(m) + static_cast<std::size_t>(j); };

    for (int j = 0; j < m; ++j)
        dp[at(std::size_t{1} << j, j)] = inst.distance(0, j + 1);

    for (std::size_t mask = 1; mask < n_masks; ++mask) {
        for (int j = 0; j < m; ++j) {
            if (!(mask & (std::size_t{1} << j))) continue;
            double base = dp[at(mask, j)];
            if (base == inf) continue;
            for (int k = 0; k < m; ++k) {
                if (mask & (std::size_t{1} << k)) continue;
                std::size_t next = mask | (std::size_t{1} << k);
                double cand = base + inst.distance(j + 1, k + 1);
                if (cand < dp[at(next, k)]) {
                    dp[at(next, k)] = cand;
                    parent[at(next, k)] = static_cast<std::int8_t>(j);
                }
            }
        }
    }

    const std::size_t full = n_masks - 1;
    double best = inf;
    int best_end = 0;
    for (int j = 0; j < m; ++j) {
        double cand = dp[at(full, j)] + inst.distance(j + 1, 0);
        if (cand < best) {
            best = cand;
            best_end = j;
        }
    }

    std::vector<int> perm(static_cast<std::size_t>(n));
    std::size_t mask = full;
    int j = best_end;
    for (int pos = n - 1; pos >= 1; --pos) {
        perm[static_cast<std::size_t>(pos)] = j + 1;
        int pj = parent[at(mask, j)];
        mask ^= std::size_t{1} << j;
        j = pj;
    }
    perm[0] = 0;
    return make_tour(inst, std::move(perm));
}

inline std::vector<int> nearest_neighbor_perm(const TspInstance& inst, int start) {
    const int n = inst.n;
    std::vector<bool> visited(static_cast<std::size_t>(n), false);
    std::vector<int> perm;
    perm.reserve(static_cast<std::size_t>(n));
    int cur = start;
    perm.push_back(cur);
    visited[static_cast<std::size_t>(cur)] = true;
    for (int step = 1; step < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        int best_v = -1;
        for (int v = 0; v < n; ++v) {
            if (visited[static_cast<std::size_t>(v)]) continue;
            double d = inst.distance(cur, v);
            if (d < best) {
                best = d;
                best_v = v;
            }
        }
        cur = best_v;
        visited[static_cast<std::size_t>(cur)] = true;
        perm.push_back(cur);
    }
    return perm;
}

// First-improvement 2-opt; terminates when no segment reversal shortens the
// tour by more than the epsilon guard.
inline void two_opt_inplace(const TspInstance& inst, std::vector<int>& perm) {
    const int n = static_cast<int>(perm.size());
    constexpr double kMinGain = 1e-12;
    bool improved = true;
    while (improved) {
        improved = false;
        for (int i = 0; i < n - 1; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (i == 0 && j == n - 1) continue;  // same edge pair
                int a = perm[static_cast<std::size_t>(i == 0 ? n - 1 : i - 1)];
                int b = perm[static_cast<std::size_t>(i)];
                int c = perm[static_cast<std::size_t>(j)];
                int d = perm[static_cast<std::size_t>((j + 1) % n)];
                double delta = inst.distance(a, c) + inst.distance(b, d) -
                               inst.distance(a, b) - inst.distance(c, d);
                if (delta < -kMinGain) {
                    std::reverse(perm.begin() + i, perm.begin() + j + 1);
                    improved = true;
                }
            }
        }
    }
}

// Nearest-neighbor construction from a seed-chosen start, then 2-opt to
// local optimality.
inline Tour solve_heuristic(const TspInstance& inst, std::uint64_t seed) {
    Rng rng(seed);
    int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(inst.n)));
    std::vector<int> perm = nearest_neighbor_perm(inst, start);
    two_opt_inplace(inst, perm);
    return make_tour(inst, std::move(perm));
}

}  // namespace tspdiff
