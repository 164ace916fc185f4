#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "tspdiff/trainer.hpp"

using namespace tspdiff;

namespace {

std::vector<DatasetEntry> tiny_dataset(int n, int count, std::uint64_t seed) {
    return build_dataset(n, count, seed);
}

double mean_of(const std::vector<double>& v, std::size_t from, std::size_t to) {
    return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(from),
                           v.begin() + static_cast<std::ptrdiff_t>(to), 0.0) /
           static_cast<double>(to - from);
}

}  // namespace

TEST_CASE("teacher training rejects bad inputs", "[trainer]") {
    TrainConfig cfg;
    REQUIRE_THROWS_AS(train_teacher({}, cfg, DenoiserConfig{1, 8, 4}), std::invalid_argument);
    cfg.epochs = 0;
    REQUIRE_THROWS_AS(train_teacher(tiny_dataset(5, 2, 1), cfg, DenoiserConfig{1, 8, 4}),
                      std::invalid_argument);
}

TEST_CASE("first training loss equals the replayed noise energy", "[trainer]") {
    const auto data = tiny_dataset(6, 3, 11);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 2;
    cfg.learning_rate = 1e-3;
    cfg.seed = 5;
    cfg.diffusion_steps = 64;
    const Schedule schedule = make_schedule(cfg.diffusion_steps);

    const TrainResult result = train_teacher(data, cfg, DenoiserConfig{1, 8, 4});
    REQUIRE_FALSE(result.losses.empty());

    // with a zero output head the first prediction is zero, so the first batch
    // loss is the mean of |noise|^2 / edge_count over the replayed draws
    Rng replay(derive_seed(cfg.seed, 1));
    double expected = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
        const TrainDraw d = draw_train_sample(replay, data, schedule);
        double energy = 0.0;
        for (double v : d.noise) energy += v * v;
        expected += energy / static_cast<double>(d.noise.size());
    }
    expected /= cfg.batch_size;
    REQUIRE(result.losses.front() == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("teacher training makes progress and is reproducible", "[trainer]") {
    const auto data = tiny_dataset(6, 24, 3);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 6;
    cfg.learning_rate = 3e-3;
    cfg.seed = 7;
    cfg.diffusion_steps = 64;
    cfg.adam = true;
    const DenoiserConfig dcfg{2, 16, 8};

    const TrainResult a = train_teacher(data, cfg, dcfg);
    REQUIRE(a.losses.size() == 200);  // 50 epochs * ceil(24 / 6)
    const double head = mean_of(a.losses, 0, 40);
    const double tail = mean_of(a.losses, a.losses.size() - 40, a.losses.size());
    REQUIRE(tail < head);

    const TrainResult b = train_teacher(data, cfg, dcfg);
    REQUIRE(a.params.values == b.params.values);

    SECTION("time conditioning is effective after training") {
        const TspInstance& inst = data[0].instance;
        const EdgeVec noisy = Rng(1).normal_vec(static_cast<std::size_t>(inst.edge_count()));
        const EdgeVec low = denoiser_forward(a.params, inst, noisy, 16.0 / 64.0);
        const EdgeVec high = denoiser_forward(a.params, inst, noisy, 1.0);
        double diff = 0.0;
        for (std::size_t k = 0; k < low.size(); ++k) diff += std::abs(low[k] - high[k]);
        REQUIRE(diff > 1e-6);
    }
}

TEST_CASE("distill times land on the documented grid points", "[trainer]") {
    const Schedule s = make_schedule(1024);
    const DistillTimes at_top = distill_times(s, 64, 64);
    REQUIRE(at_top.src == 1024);
    REQUIRE(at_top.mid == 1016);
    REQUIRE(at_top.dst == 1008);

    const DistillTimes at_bottom = distill_times(s, 1, 64);
    REQUIRE(at_bottom.src == 16);
    REQUIRE(at_bottom.mid == 8);
    REQUIRE(at_bottom.dst == 0);

    REQUIRE_THROWS_AS(distill_times(s, 0, 64), std::invalid_argument);
    REQUIRE_THROWS_AS(distill_times(s, 65, 64), std::invalid_argument);
    REQUIRE_THROWS_AS(distill_times(make_schedule(100), 1, 64), std::invalid_argument);
}

TEST_CASE("distillation loss vanishes for a constant-output network", "[trainer]") {
    const Schedule s = make_schedule(1024);
    const auto data = tiny_dataset(6, 2, 19);
    const DenoiserParams zero_head = init_params({2, 16, 8}, 23);
    const EdgeVec x0 = rescale(tour_to_solution(data[0].instance, data[0].tour));

    for (int n_grid : {4, 64}) {
        for (int i = 1; i <= n_grid; ++i) {
            const DistillStepOut out =
                distill_step(zero_head, zero_head, data[0].instance, x0, i, n_grid, s, 77);
            REQUIRE(std::abs(out.loss) <= 1e-9);
        }
    }
}

TEST_CASE("distill gradients match finite differences of the step loss", "[trainer]") {
    const Schedule s = make_schedule(64);
    const auto data = tiny_dataset(5, 1, 29);
    const EdgeVec x0 = rescale(tour_to_solution(data[0].instance, data[0].tour));
    const DenoiserConfig cfg{1, 8, 4};

    DenoiserParams teacher = init_params(cfg, 31);
    DenoiserParams student = init_params(cfg, 31);
    Rng rng(37);
    for (double& v : teacher.values) v = rng.uniform(-0.3, 0.3);
    for (double& v : student.values) v = rng.uniform(-0.3, 0.3);

    const std::uint64_t seed = 41;
    const int i = 3, n_grid = 4;
    const DistillStepOut base = distill_step(teacher, student, data[0].instance, x0, i, n_grid, s, seed);

    const double h = 1e-5;
    Rng pick(43);
    for (int rep = 0; rep < 12; ++rep) {
        const std::size_t idx = static_cast<std::size_t>(pick.below(student.values.size()));
        DenoiserParams shifted = student;
        shifted.values[idx] += h;
        const double up = distill_step(teacher, shifted, data[0].instance, x0, i, n_grid, s, seed).loss;
        shifted.values[idx] = student.values[idx] - h;
        const double down =
            distill_step(teacher, shifted, data[0].instance, x0, i, n_grid, s, seed).loss;
        const double fd = (up - down) / (2.0 * h);
        REQUIRE(base.grads.values[idx] == Catch::Approx(fd).margin(1e-7).epsilon(1e-4));
    }
}

TEST_CASE("distillation on a trained teacher has a nonzero objective", "[trainer]") {
    const auto data = tiny_dataset(6, 12, 47);
    TrainConfig tc;
    tc.epochs = 25;
    tc.batch_size = 6;
    tc.learning_rate = 3e-3;
    tc.seed = 2;
    tc.diffusion_steps = 64;
    tc.adam = true;
    const TrainResult teacher = train_teacher(data, tc, DenoiserConfig{2, 16, 8});

    const Schedule s = make_schedule(64);
    const EdgeVec x0 = rescale(tour_to_solution(data[0].instance, data[0].tour));
    const DistillStepOut out =
        distill_step(teacher.params, teacher.params, data[0].instance, x0, 2, 4, s, 3);
    REQUIRE(out.loss >= 0.0);
    REQUIRE(out.loss > 1e-12);  // two teacher half-steps re-query the network
}

TEST_CASE("progressive distillation bookkeeping", "[trainer]") {
    const Schedule s = make_schedule(1024);
    const auto data = tiny_dataset(6, 4, 53);
    DenoiserParams teacher = init_params({1, 8, 4}, 59);
    Rng rng(61);
    for (double& v : teacher.values) v = rng.uniform(-0.2, 0.2);
    const std::vector<double> teacher_before = teacher.values;

    SECTION("zero budget is the parameter identity for any round count") {
        for (int rounds : {1, 4}) {
            DistillConfig cfg;
            cfg.initial_steps = 64;
            cfg.rounds = rounds;
            cfg.max_steps_per_round = 0;
            cfg.seed = 1;
            const auto [params, report] = progressive_distill(teacher, data, cfg, s);
            REQUIRE(params.values == teacher.values);
            REQUIRE(static_cast<int>(report.rounds.size()) == rounds);
        }
    }
    SECTION("the sampling-step lineage halves every round") {
        DistillConfig cfg;
        cfg.initial_steps = 64;
        cfg.rounds = 4;
        cfg.max_steps_per_round = 0;
        cfg.seed = 1;
        const auto [params, report] = progressive_distill(teacher, data, cfg, s);
        std::vector<int> lineage;
        for (const auto& r : report.rounds) lineage.push_back(r.sampling_steps);
        REQUIRE(lineage == std::vector<int>{64, 32, 16, 8});
    }
    SECTION("training leaves the input teacher untouched and checkpoints each round") {
        const auto dir = std::filesystem::temp_directory_path() / "tspdiff_distill_test";
        std::filesystem::remove_all(dir);
        DistillConfig cfg;
        cfg.initial_steps = 4;
        cfg.rounds = 2;
        cfg.max_steps_per_round = 3;
        cfg.batch_size = 2;
        cfg.learning_rate = 1e-3;
        cfg.seed = 9;
        cfg.checkpoint_dir = dir.string();
        const auto [params, report] = progressive_distill(teacher, data, cfg, s);
        REQUIRE(teacher.values == teacher_before);
        REQUIRE(report.rounds.size() == 2);
        for (const auto& r : report.rounds) {
            REQUIRE(r.train_steps == 3);
            REQUIRE(std::filesystem::exists(r.checkpoint));
        }
        const auto [params2, report2] = progressive_distill(teacher, data, cfg, s);
        REQUIRE(params.values == params2.values);  // deterministic end to end
    }
    SECTION("config invariants are enforced") {
        DistillConfig cfg;
        cfg.initial_steps = 48;  // not a power of two
        REQUIRE_THROWS_AS(cfg.validate(1024), std::invalid_argument);
        cfg.initial_steps = 4;
        cfg.rounds = 9;  // 4 / 2^8 < 1
        REQUIRE_THROWS_AS(cfg.validate(1024), std::invalid_argument);
        cfg.rounds = 1;
        REQUIRE_THROWS_AS(cfg.validate(100), std::invalid_argument);  // 100 % 8 != 0
    }
}
