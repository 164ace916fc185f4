#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "tspdiff/instance.hpp"
#include "tspdiff/solve.hpp"

namespace tspdiff {

namespace detail {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int v) {
        while (parent[static_cast<std::size_t>(v)] != v) {
            parent[static_cast<std::size_t>(v)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
            v = parent[static_cast<std::size_t>(v)];
        }
        return v;
    }
    void unite(int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
};

}  // namespace detail

// Greedy tour construction from per-edge scores: edges are inserted in
// descending score order (ties to the lower edge index), skipping any edge
// that would create degree 3 or close a cycle before all vertices are in.
// The selection is always completable, so the result is a feasible tour.
inline Tour decode_heatmap(const TspInstance& inst, const EdgeVec& scores,
                           bool refine_2opt = false) {
    const int n = inst.n;
    const int m = inst.edge_count();
    if (static_cast<int>(scores.size()) != m)
        throw std::invalid_argument("decode_heatmap: score length mismatch");

    std::vector<int> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    });

    std::vector<int> degree(static_cast<std::size_t>(n), 0);
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    detail::UnionFind uf(n);
    int selected = 0;

    auto try_add = [&](int i, int j) {
        if (degree[static_cast<std::size_t>(i)] >= 2 || degree[static_cast<std::size_t>(j)] >= 2)
            return;
        if (uf.find(i) == uf.find(j) && selected != n - 1) return;  // premature subtour
        adj[static_cast<std::size_t>(i)].push_back(j);
        adj[static_cast<std::size_t>(j)].push_back(i);
        ++degree[static_cast<std::size_t>(i)];
        ++degree[static_cast<std::size_t>(j)];
        uf.unite(i, j);
        ++selected;
    };

    for (int k : order) {
        if (selected == n) break;
        auto [i, j] = inst.edges[static_cast<std::size_t>(k)];
        try_add(i, j);
    }

    // The scan leaves at most one open path; close it.
    if (selected == n - 1) {
        int u = -1, v = -1;
        for (int w = 0; w < n; ++w) {
            if (degree[static_cast<std::size_t>(w)] < 2) {
                (u < 0 ? u : v) = w;
            }
        }
        try_add(u, v);
    }

    std::vector<int> perm;
    perm.reserve(static_cast<std::size_t>(n));
    int prev = -1, cur = 0;
    for (int step = 0; step < n; ++step) {
        perm.push_back(cur);
        int next = (adj[static_cast<std::size_t>(cur)][0] == prev)
                       ? adj[static_cast<std::size_t>(cur)][1]
                       : adj[static_cast<std::size_t>(cur)][0];
        prev = cur;
        cur = next;
    }
    if (refine_2opt) two_opt_inplace(inst, perm);
    return make_tour(inst, std::move(perm));
}

}  // namespace tspdiff
