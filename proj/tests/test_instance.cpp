#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "tspdiff/instance.hpp"
#include "tspdiff/solve.hpp"

using namespace tspdiff;

namespace {

TspInstance unit_square() {
    return make_instance({{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}});
}

}  // namespace

TEST_CASE("edge ordering is lexicographic and complete", "[instance]") {
    for (int n : {3, 4, 7, 12}) {
        const TspInstance inst = generate_instance(n, 42);
        REQUIRE(inst.edge_count() == n * (n - 1) / 2);
        REQUIRE(static_cast<int>(inst.edges.size()) == inst.edge_count());
        for (int k = 0; k < inst.edge_count(); ++k) {
            auto [i, j] = inst.edges[static_cast<std::size_t>(k)];
            REQUIRE(i < j);
            REQUIRE(inst.edge_index(i, j) == k);
            if (k > 0) REQUIRE(inst.edges[static_cast<std::size_t>(k - 1)] < inst.edges[static_cast<std::size_t>(k)]);
        }
    }
}

TEST_CASE("weights match recomputed distances and coords stay in the square", "[instance]") {
    const TspInstance inst = generate_instance(15, 7);
    for (const auto& c : inst.coords) {
        REQUIRE(c[0] >= 0.0);
        REQUIRE(c[0] <= 1.0);
        REQUIRE(c[1] >= 0.0);
        REQUIRE(c[1] <= 1.0);
    }
    for (int k = 0; k < inst.edge_count(); ++k) {
        auto [i, j] = inst.edges[static_cast<std::size_t>(k)];
        const double dx = inst.coords[static_cast<std::size_t>(i)][0] - inst.coords[static_cast<std::size_t>(j)][0];
        const double dy = inst.coords[static_cast<std::size_t>(i)][1] - inst.coords[static_cast<std::size_t>(j)][1];
        const double expected = std::hypot(dx, dy);
        REQUIRE(inst.weights[static_cast<std::size_t>(k)] ==
                Catch::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("instance generation is deterministic and sized correctly", "[instance]") {
    REQUIRE(generate_instance(3, 1).edge_count() == 3);
    REQUIRE(generate_instance(50, 1).edge_count() == 1225);

    const TspInstance a = generate_instance(10, 7);
    const TspInstance b = generate_instance(10, 7);
    REQUIRE(a.coords == b.coords);
    REQUIRE(a.weights == b.weights);

    const TspInstance c = generate_instance(10, 8);
    REQUIRE(a.coords != c.coords);

    REQUIRE_THROWS_AS(generate_instance(2, 1), std::invalid_argument);
}

TEST_CASE("objective scores Hamiltonian cycles and rejects everything else", "[instance]") {
    const TspInstance sq = unit_square();

    SECTION("unit-square perimeter costs 4") {
        const Tour t = make_tour(sq, {0, 1, 2, 3});
        REQUIRE(objective(sq, tour_to_solution(sq, t)) == Catch::Approx(4.0).margin(1e-12));
    }
    SECTION("all-zero selection is infeasible") {
        SolutionVector x;
        x.bits.assign(static_cast<std::size_t>(sq.edge_count()), 0);
        REQUIRE(std::isinf(objective(sq, x)));
    }
    SECTION("two disjoint triangles have degree 2 everywhere but stay infeasible") {
        const TspInstance inst = generate_instance(6, 3);
        SolutionVector x;
        x.bits.assign(static_cast<std::size_t>(inst.edge_count()), 0);
        for (auto [i, j] : {std::pair{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}})
            x.bits[static_cast<std::size_t>(inst.edge_index(i, j))] = 1;
        REQUIRE(std::isinf(objective(inst, x)));
    }
    SECTION("length mismatch is an error") {
        SolutionVector x;
        x.bits.assign(3, 1);
        REQUIRE_THROWS_AS(objective(sq, x), std::invalid_argument);
    }
}

TEST_CASE("tour_to_solution round trips through the objective", "[instance]") {
    SECTION("triangle uses all edges") {
        const TspInstance tri = generate_instance(3, 5);
        const SolutionVector x = tour_to_solution(tri, make_tour(tri, {0, 1, 2}));
        REQUIRE(x.bits == std::vector<std::uint8_t>{1, 1, 1});
    }
    SECTION("square perimeter leaves the diagonals off") {
        const TspInstance sq = unit_square();
        const SolutionVector x = tour_to_solution(sq, make_tour(sq, {0, 1, 2, 3}));
        // lex order: (0,1),(0,2),(0,3),(1,2),(1,3),(2,3); diagonals are (0,2),(1,3)
        REQUIRE(x.bits == std::vector<std::uint8_t>{1, 0, 1, 1, 0, 1});
    }
    SECTION("popcount equals n and cost is preserved, random tours") {
        Rng rng(11);
        for (int rep = 0; rep < 25; ++rep) {
            const int n = 4 + static_cast<int>(rng.below(7));
            const TspInstance inst = generate_instance(n, rng.next_u64());
            std::vector<int> perm(static_cast<std::size_t>(n));
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);
            const Tour t = make_tour(inst, perm);
            const SolutionVector x = tour_to_solution(inst, t);
            int ones = 0;
            for (auto b : x.bits) ones += b;
            REQUIRE(ones == n);
            REQUIRE(objective(inst, x) == Catch::Approx(t.cost).epsilon(1e-9));
        }
    }
}

TEST_CASE("make_tour validates permutations and recomputes cost", "[instance]") {
    const TspInstance sq = unit_square();
    REQUIRE_THROWS_AS(make_tour(sq, {0, 1, 2}), std::invalid_argument);
    REQUIRE_THROWS_AS(make_tour(sq, {0, 1, 2, 2}), std::invalid_argument);
    REQUIRE_THROWS_AS(make_tour(sq, {0, 1, 2, 4}), std::invalid_argument);
    const Tour t = make_tour(sq, {0, 2, 1, 3});
    REQUIRE(t.cost == Catch::Approx(tour_cost(sq, t.perm)).epsilon(1e-12));
}

TEST_CASE("cost drop percentage", "[instance]") {
    REQUIRE(cost_drop_pct(5.0, 5.0) == 0.0);
    REQUIRE(cost_drop_pct(5.05, 5.0) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE_THROWS_AS(cost_drop_pct(1.0, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(cost_drop_pct(1.0, -2.0), std::invalid_argument);
}
