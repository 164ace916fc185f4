#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tspdiff/rng.hpp"
#include "tspdiff/schedule.hpp"

using namespace tspdiff;

TEST_CASE("schedule tables satisfy their invariants", "[schedule]") {
    for (int T : {2, 8, 1024}) {
        const Schedule s = make_schedule(T);
        REQUIRE(s.beta_at(1) == Catch::Approx(1e-4).margin(1e-18));
        REQUIRE(s.beta_at(T) == Catch::Approx(0.02).margin(1e-18));
        REQUIRE(s.alpha_bar_at(0) == 1.0);
        for (int t = 1; t <= T; ++t) {
            REQUIRE(s.beta_at(t) > 0.0);
            REQUIRE(s.beta_at(t) < 1.0);
            if (t > 1) REQUIRE(s.beta_at(t) > s.beta_at(t - 1));
            REQUIRE(s.alpha_bar_at(t) > 0.0);
            REQUIRE(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
            REQUIRE(s.alpha_bar_at(t) / s.alpha_bar_at(t - 1) ==
                    Catch::Approx(1.0 - s.beta_at(t)).epsilon(1e-12));
        }
    }
    REQUIRE_THROWS_AS(make_schedule(1), std::invalid_argument);
}

TEST_CASE("schedule closed forms", "[schedule]") {
    const Schedule two = make_schedule(2);
    REQUIRE(two.beta_at(1) == 1e-4);
    REQUIRE(two.beta_at(2) == 0.02);
    REQUIRE(two.alpha_bar_at(2) == Catch::Approx((1.0 - 1e-4) * (1.0 - 0.02)).epsilon(1e-15));

    // independent product for alpha_bar[3] of the 1024-step table
    const Schedule s = make_schedule(1024);
    auto beta_formula = [](int t) { return 1e-4 + (t - 1) * (0.02 - 1e-4) / 1023.0; };
    const double expected =
        (1.0 - beta_formula(1)) * (1.0 - beta_formula(2)) * (1.0 - beta_formula(3));
    REQUIRE(s.alpha_bar_at(3) == Catch::Approx(expected).epsilon(1e-14));
}

TEST_CASE("rescale maps indicators to signed values and back", "[schedule]") {
    SolutionVector x;
    x.bits = {0, 0, 1};
    REQUIRE(rescale(x) == EdgeVec{-1.0, -1.0, 1.0});

    x.bits = {1, 1, 1, 1};
    const EdgeVec signed_all = rescale(x);
    for (double v : signed_all) REQUIRE(v == 1.0);

    x.bits = {0, 1, 1, 0, 1};
    const EdgeVec v = rescale(x);
    for (std::size_t k = 0; k < v.size(); ++k)
        REQUIRE((v[k] + 1.0) / 2.0 == static_cast<double>(x.bits[k]));

    x.bits = {0, 2};
    REQUIRE_THROWS_AS(rescale(x), std::invalid_argument);
}

TEST_CASE("forward corruption has the marginal coefficients", "[schedule]") {
    const Schedule s = make_schedule(1024);
    const EdgeVec x0{0.5, -1.0, 1.0};
    const EdgeVec zero(3, 0.0);

    SECTION("zero noise leaves the signal scaled by sqrt(alpha_bar)") {
        for (int t : {1, 37, 1024}) {
            const EdgeVec out = forward_sample(s, x0, t, zero);
            const double c = std::sqrt(s.alpha_bar_at(t));
            for (std::size_t k = 0; k < x0.size(); ++k)
                REQUIRE(out[k] == Catch::Approx(c * x0[k]).margin(1e-15));
        }
    }
    SECTION("zero signal leaves the noise scaled by sqrt(1 - alpha_bar)") {
        Rng rng(5);
        const EdgeVec noise = rng.normal_vec(3);
        for (int t : {1, 512, 1024}) {
            const EdgeVec out = forward_sample(s, zero, t, noise);
            const double c = std::sqrt(1.0 - s.alpha_bar_at(t));
            for (std::size_t k = 0; k < noise.size(); ++k)
                REQUIRE(out[k] == Catch::Approx(c * noise[k]).margin(1e-15));
        }
    }
    SECTION("at t = T the signal coefficient is tiny") {
        // basis probes recover both coefficients from the table
        const EdgeVec e1{1.0, 0.0}, e2{0.0, 1.0}, z2(2, 0.0);
        const double c_sig = forward_sample(s, e1, 1024, z2)[0];
        const double c_noise = forward_sample(s, z2, 1024, e2)[1];
        REQUIRE(c_sig == Catch::Approx(std::sqrt(s.alpha_bar_at(1024))).margin(1e-15));
        REQUIRE(c_sig < 0.015);
        REQUIRE(c_noise == Catch::Approx(std::sqrt(1.0 - s.alpha_bar_at(1024))).margin(1e-15));
        REQUIRE(c_noise > 0.9999);
    }
    SECTION("input validation") {
        REQUIRE_THROWS_AS(forward_sample(s, x0, 0, zero), std::invalid_argument);
        REQUIRE_THROWS_AS(forward_sample(s, x0, 1025, zero), std::invalid_argument);
        REQUIRE_THROWS_AS(forward_sample(s, x0, 5, EdgeVec(2, 0.0)), std::invalid_argument);
    }
}

TEST_CASE("ddim step reduces to the identity when alpha_bar is unchanged", "[schedule]") {
    Schedule flat;
    flat.steps = 5;
    flat.beta.assign(6, 0.0);
    flat.alpha_bar = {1.0, 0.9, 0.7, 0.7, 0.5, 0.4};  // equal at indices 2 and 3
    Rng rng(9);
    const EdgeVec v = rng.normal_vec(4);
    const EdgeVec e = rng.normal_vec(4);
    const EdgeVec out = ddim_step(flat, v, e, 3, 2);
    for (std::size_t k = 0; k < v.size(); ++k)
        REQUIRE(out[k] == Catch::Approx(v[k]).margin(1e-12));
}

TEST_CASE("ddim step to time zero inverts the forward draw exactly", "[schedule]") {
    const Schedule s = make_schedule(8);
    Rng rng(13);
    for (int t = 1; t <= 8; ++t) {
        const EdgeVec x0 = rng.normal_vec(6);
        const EdgeVec noise = rng.normal_vec(6);
        const EdgeVec noisy = forward_sample(s, x0, t, noise);
        const EdgeVec back = ddim_step(s, noisy, noise, t, 0);
        for (std::size_t k = 0; k < x0.size(); ++k)
            REQUIRE(back[k] == Catch::Approx(x0[k]).margin(1e-9));
    }
}

TEST_CASE("ddim step matches an independent scalar evaluation", "[schedule]") {
    const Schedule s = make_schedule(8);
    Rng rng(21);
    const EdgeVec x = rng.normal_vec(5);
    const EdgeVec eps = rng.normal_vec(5);
    const EdgeVec out = ddim_step(s, x, eps, 6, 3);
    const double a6 = s.alpha_bar_at(6);
    const double a3 = s.alpha_bar_at(3);
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double expected =
            std::sqrt(a3 / a6) * (x[k] - std::sqrt(1.0 - a6) * eps[k]) + std::sqrt(1.0 - a3) * eps[k];
        REQUIRE(out[k] == Catch::Approx(expected).margin(1e-15));
    }
    REQUIRE_THROWS_AS(ddim_step(s, x, eps, 3, 6), std::invalid_argument);
    REQUIRE_THROWS_AS(ddim_step(s, x, eps, 3, 3), std::invalid_argument);
}

TEST_CASE("ddim steps with a shared noise estimate compose exactly", "[schedule]") {
    const Schedule s = make_schedule(1024);
    Rng rng(33);
    for (int rep = 0; rep < 300; ++rep) {
        const int t = 2 + static_cast<int>(rng.below(1023));          // 2..1024
        const int r = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(t - 1)));
        const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(r)));
        const EdgeVec x = rng.normal_vec(16);
        const EdgeVec eps = rng.normal_vec(16);
        const EdgeVec two_hop = ddim_step(s, ddim_step(s, x, eps, t, r), eps, r, c);
        const EdgeVec direct = ddim_step(s, x, eps, t, c);
        for (std::size_t k = 0; k < x.size(); ++k)
            REQUIRE(two_hop[k] == Catch::Approx(direct[k]).margin(1e-9));
    }
}

TEST_CASE("continuous times map onto the discrete table", "[schedule]") {
    const Schedule s = make_schedule(1024);
    REQUIRE(continuous_to_index(s, 1.0) == 1024);
    REQUIRE(continuous_to_index(s, 3.0 / 64.0) == 48);
    REQUIRE(continuous_to_index(s, 3.0 / 64.0 - 1.0 / 128.0) == 40);
    REQUIRE_THROWS_WITH(continuous_to_index(s, 1.0 / 3.0),
                        Catch::Matchers::ContainsSubstring("divisible"));
    REQUIRE_THROWS_AS(continuous_to_index(s, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(continuous_to_index(s, 1.5), std::invalid_argument);
}

TEST_CASE("linear skip grids are uniform and terminate at zero", "[schedule]") {
    const Schedule s = make_schedule(1024);

    const TimeGrid four = linear_skip_grid(s, 4);
    REQUIRE(four.indices == std::vector<int>{1024, 768, 512, 256, 0});
    REQUIRE(four.transitions() == 4);

    const TimeGrid full = linear_skip_grid(s, 1024);
    REQUIRE(full.indices.size() == 1025);
    REQUIRE(full.indices.front() == 1024);
    REQUIRE(full.indices.back() == 0);

    const TimeGrid m64 = linear_skip_grid(s, 64);
    REQUIRE(m64.transitions() == 64);
    for (std::size_t i = 0; i + 1 < m64.indices.size(); ++i)
        REQUIRE(m64.indices[i] - m64.indices[i + 1] == 16);

    REQUIRE_THROWS_AS(linear_skip_grid(s, 3), std::invalid_argument);
    REQUIRE_THROWS_AS(linear_skip_grid(s, 0), std::invalid_argument);
}

TEST_CASE("quantize shifts signed values to scores", "[schedule]") {
    REQUIRE(quantize(EdgeVec{1.0, 1.0}) == EdgeVec{1.0, 1.0});
    REQUIRE(quantize(EdgeVec{-1.0, -1.0}) == EdgeVec{0.0, 0.0});
    REQUIRE(quantize(EdgeVec{0.0}) == EdgeVec{0.5});
}
