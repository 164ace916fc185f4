#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tspdiff/checkpoint.hpp"
#include "tspdiff/dataset.hpp"
#include "tspdiff/denoiser.hpp"
#include "tspdiff/parallel.hpp"
#include "tspdiff/rng.hpp"
#include "tspdiff/schedule.hpp"

namespace tspdiff {

struct TrainConfig {
    int epochs = 80;
    int batch_size = 8;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    int diffusion_steps = kDefaultDiffusionSteps;
    bool adam = false;  // plain gradient descent unless enabled
    unsigned threads = 0;

    void validate() const {
        if (epochs < 1 || batch_size < 1 || !(learning_rate > 0.0) || diffusion_steps < 2)
            throw std::invalid_argument("TrainConfig: all fields must be positive");
    }
};

namespace detail {

struct AdamState {
    std::vector<double> m, v;
    long step = 0;
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    void ensure(std::size_t size) {
        if (m.empty()) {
            m.assign(size, 0.0);
            v.assign(size, 0.0);
        }
    }
};

inline void sgd_update_inplace(DenoiserParams& params, const std::vector<double>& grad, double lr) {
    for (std::size_t k = 0; k < params.values.size(); ++k) params.values[k] -= lr * grad[k];
}

inline void adam_update_inplace(DenoiserParams& params, const std::vector<double>& grad, double lr,
                                AdamState& st) {
    st.ensure(params.values.size());
    ++st.step;
    const double c1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(st.step));
    for (std::size_t k = 0; k < params.values.size(); ++k) {
        st.m[k] = AdamState::kBeta1 * st.m[k] + (1.0 - AdamState::kBeta1) * grad[k];
        st.v[k] = AdamState::kBeta2 * st.v[k] + (1.0 - AdamState::kBeta2) * grad[k] * grad[k];
        params.values[k] -= lr * (st.m[k] / c1) / (std::sqrt(st.v[k] / c2) + AdamState::kEps);
    }
}

inline std::vector<EdgeVec> signed_solutions(const std::vector<DatasetEntry>& data) {
    std::vector<EdgeVec> out;
    out.reserve(data.size());
    for (const auto& entry : data)
        out.push_back(rescale(tour_to_solution(entry.instance, entry.tour)));
    return out;
}

}  // namespace detail

// One training draw: which instance, which timestep, which noise. Update
// step s consumes its batch draws in order from Rng(derive_seed(seed, 1 + s)),
// which makes any individual step replayable.
struct TrainDraw {
    std::size_t instance_index = 0;
    int timestep = 0;
    EdgeVec noise;
};

inline TrainDraw draw_train_sample(Rng& rng, const std::vector<DatasetEntry>& data,
                                   const Schedule& schedule) {
    TrainDraw d;
    d.instance_index = static_cast<std::size_t>(rng.below(data.size()));
    d.timestep = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.steps)));
    d.noise = rng.normal_vec(
        static_cast<std::size_t>(data[d.instance_index].instance.edge_count()));
    return d;
}

struct TrainResult {
    DenoiserParams params;
    std::vector<double> losses;  // per-update batch means
};

// Standard denoising objective: corrupt a ground-truth solution to a uniform
// random timestep and regress the injected noise under a per-edge MSE.
inline TrainResult train_teacher(const std::vector<DatasetEntry>& data, const TrainConfig& cfg,
                                 const DenoiserConfig& dcfg) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("train_teacher: empty dataset");
    const Schedule schedule = make_schedule(cfg.diffusion_steps);
    const std::vector<EdgeVec> x0 = detail::signed_solutions(data);

    TrainResult result;
    result.params = init_params(dcfg, derive_seed(cfg.seed, 0));

    const int steps_per_epoch =
        static_cast<int>((data.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
                         static_cast<std::size_t>(cfg.batch_size));
    const long total_updates = static_cast<long>(cfg.epochs) * steps_per_epoch;
    result.losses.reserve(static_cast<std::size_t>(total_updates));

    detail::AdamState adam;
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
    std::vector<TrainDraw> draws(batch);
    std::vector<double> losses(batch);
    std::vector<ParamGrads> grads(batch);

    for (long step = 0; step < total_updates; ++step) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(1 + step)));
        for (std::size_t b = 0; b < batch; ++b) draws[b] = draw_train_sample(rng, data, schedule);

        const DenoiserParams& params = result.params;
        parallel_for(
            batch,
            [&](std::size_t b) {
                const TrainDraw& d = draws[b];
                const TspInstance& inst = data[d.instance_index].instance;
                const double inv_edges = 1.0 / static_cast<double>(inst.edge_count());
                const EdgeVec noisy =
                    forward_sample(schedule, x0[d.instance_index], d.timestep, d.noise);
                DenoiserTrace trace;
                const EdgeVec pred = denoiser_forward(
                    params, inst, noisy, static_cast<double>(d.timestep) / schedule.steps, &trace);
                double loss = 0.0;
                EdgeVec lg(pred.size());
                for (std::size_t k = 0; k < pred.size(); ++k) {
                    const double diff = pred[k] - d.noise[k];
                    loss += diff * diff;
                    lg[k] = 2.0 * diff * inv_edges;
                }
                losses[b] = loss * inv_edges;
                grads[b] = denoiser_backward_traced(params, inst, noisy, trace, lg);
            },
            cfg.threads);

        // fixed-order reduction keeps runs bit-reproducible
        std::vector<double> mean_grad(result.params.values.size(), 0.0);
        double mean_loss = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            mean_loss += losses[b];
            for (std::size_t k = 0; k < mean_grad.size(); ++k)
                mean_grad[k] += grads[b].values[k];
        }
        const double inv_batch = 1.0 / static_cast<double>(batch);
        mean_loss *= inv_batch;
        for (double& gk : mean_grad) gk *= inv_batch;

        if (cfg.adam)
            detail::adam_update_inplace(result.params, mean_grad, cfg.learning_rate, adam);
        else
            detail::sgd_update_inplace(result.params, mean_grad, cfg.learning_rate);
        result.losses.push_back(mean_loss);
    }
    return result;
}

struct DistillConfig {
    int initial_steps = 64;  // starting student grid size N
    int rounds = 2;          // distillation iterations K
    double learning_rate = 1e-3;
    int max_steps_per_round = 2000;  // convergence budget
    int batch_size = 8;
    double plateau_rel_tol = 0.0;  // > 0 enables early stop on windowed plateau
    int plateau_window = 200;
    std::uint64_t seed = 0;
    std::string checkpoint_dir;  // when set, every round's student is saved here
    bool adam = false;
    unsigned threads = 0;

    void validate(int diffusion_steps) const {
        if (initial_steps < 2 || (initial_steps & (initial_steps - 1)) != 0)
            throw std::invalid_argument("DistillConfig: initial steps must be a power of two >= 2");
        if (rounds < 1) throw std::invalid_argument("DistillConfig: need at least one round");
        if (initial_steps >> (rounds - 1) < 1)
            throw std::invalid_argument("DistillConfig: too many rounds for the initial step count");
        if (!(learning_rate > 0.0) || max_steps_per_round < 0 || batch_size < 1)
            throw std::invalid_argument("DistillConfig: invalid training hyperparameters");
        if (diffusion_steps % (2 * initial_steps) != 0)
            throw std::invalid_argument("DistillConfig: T must be divisible by 2N");
    }
};

// Discrete table times for step i of an N-step student grid: the student
// jumps src -> dst in one move; the teacher passes through mid.
struct DistillTimes {
    int src = 0, mid = 0, dst = 0;
};

inline DistillTimes distill_times(const Schedule& schedule, int i, int N) {
    if (N < 1 || i < 1 || i > N) throw std::invalid_argument("distill_times: need 1 <= i <= N");
    if (schedule.steps % (2 * N) != 0)
        throw std::invalid_argument("distill_times: T must be divisible by 2N");
    DistillTimes t;
    t.src = continuous_to_index(schedule, static_cast<double>(i) / N);
    t.mid = continuous_to_index(schedule, (static_cast<double>(i) - 0.5) / N);
    t.dst = (i == 1) ? 0 : continuous_to_index(schedule, (static_cast<double>(i) - 1.0) / N);
    return t;
}

struct DistillStepOut {
    double loss = 0.0;
    ParamGrads grads;
};

// One distillation sample: corrupt x0 to time i/N, run the teacher through
// two half-steps to build the target, run the student through one full step,
// and return the per-edge MSE plus its gradient with respect to the student
// only (the teacher target is a constant).
inline DistillStepOut distill_step(const DenoiserParams& teacher, const DenoiserParams& student,
                                   const TspInstance& inst, const EdgeVec& x0_signed, int i, int N,
                                   const Schedule& schedule, std::uint64_t seed) {
    const DistillTimes times = distill_times(schedule, i, N);
    const double t_frac = static_cast<double>(times.src) / schedule.steps;
    const double mid_frac = static_cast<double>(times.mid) / schedule.steps;

    Rng rng(seed);
    const EdgeVec noise = rng.normal_vec(static_cast<std::size_t>(inst.edge_count()));
    const EdgeVec noisy = forward_sample(schedule, x0_signed, times.src, noise);

    const EdgeVec teacher_eps1 = denoiser_forward(teacher, inst, noisy, t_frac);
    const EdgeVec x_mid = ddim_step(schedule, noisy, teacher_eps1, times.src, times.mid);
    const EdgeVec teacher_eps2 = denoiser_forward(teacher, inst, x_mid, mid_frac);
    const EdgeVec target = ddim_step(schedule, x_mid, teacher_eps2, times.mid, times.dst);

    DenoiserTrace trace;
    const EdgeVec student_eps = denoiser_forward(student, inst, noisy, t_frac, &trace);
    const EdgeVec pred = ddim_step(schedule, noisy, student_eps, times.src, times.dst);

    // d(pred)/d(student_eps) is a scalar from the DDIM coefficients
    const double a_src = schedule.alpha_bar_at(times.src);
    const double a_dst = schedule.alpha_bar_at(times.dst);
    const double eps_coeff = std::sqrt(1.0 - a_dst) - std::sqrt(a_dst / a_src) * std::sqrt(1.0 - a_src);

    const double inv_edges = 1.0 / static_cast<double>(inst.edge_count());
    double loss = 0.0;
    EdgeVec lg(pred.size());
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double diff = pred[k] - target[k];
        loss += diff * diff;
        lg[k] = 2.0 * diff * inv_edges * eps_coeff;
    }

    DistillStepOut out;
    out.loss = loss * inv_edges;
    out.grads = denoiser_backward_traced(student, inst, noisy, trace, lg);
    return out;
}

struct DistillRound {
    int round = 0;
    int sampling_steps = 0;  // the N used while training this student
    int train_steps = 0;
    double final_loss = 0.0;  // mean over the last recorded window; NaN if no steps ran
    std::string checkpoint;
};

struct DistillReport {
    std::vector<DistillRound> rounds;
};

inline nlohmann::ordered_json distill_report_to_json(const DistillReport& report) {
    nlohmann::ordered_json out;
    out["rounds"] = nlohmann::ordered_json::array();
    for (const auto& r : report.rounds) {
        nlohmann::ordered_json jr;
        jr["round"] = r.round;
        jr["sampling_steps"] = r.sampling_steps;
        jr["train_steps"] = r.train_steps;
        if (std::isfinite(r.final_loss))
            jr["final_loss"] = r.final_loss;
        else
            jr["final_loss"] = nullptr;
        jr["checkpoint"] = r.checkpoint;
        out["rounds"].push_back(std::move(jr));
    }
    return out;
}

// Iterated two-steps-into-one compression: each round initializes the student
// from the current teacher, trains it to match two teacher half-steps with a
// single step on the N-grid, then the student becomes the teacher and N
// halves.
inline std::pair<DenoiserParams, DistillReport> progressive_distill(
    const DenoiserParams& teacher, const std::vector<DatasetEntry>& data, const DistillConfig& cfg,
    const Schedule& schedule) {
    cfg.validate(schedule.steps);
    if (data.empty()) throw std::invalid_argument("progressive_distill: empty dataset");
    const std::vector<EdgeVec> x0 = detail::signed_solutions(data);

    DenoiserParams current = teacher;
    DistillReport report;
    int n_steps = cfg.initial_steps;

    for (int round = 1; round <= cfg.rounds; ++round) {
        DenoiserParams student = current;  // init student from teacher
        detail::AdamState adam;
        const std::uint64_t round_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(round));
        std::vector<double> losses;
        losses.reserve(static_cast<std::size_t>(cfg.max_steps_per_round));

        const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
        std::vector<std::size_t> pick(batch);
        std::vector<int> step_index(batch);
        std::vector<std::uint64_t> elem_seed(batch);
        std::vector<DistillStepOut> outs(batch);

        int steps_done = 0;
        for (int step = 0; step < cfg.max_steps_per_round; ++step) {
            if (cfg.plateau_rel_tol > 0.0 &&
                static_cast<int>(losses.size()) >= 2 * cfg.plateau_window) {
                const auto recent = losses.end() - cfg.plateau_window;
                const double new_mean =
                    std::accumulate(recent, losses.end(), 0.0) / cfg.plateau_window;
                const double old_mean =
                    std::accumulate(recent - cfg.plateau_window, recent, 0.0) / cfg.plateau_window;
                if (old_mean - new_mean < cfg.plateau_rel_tol * std::abs(old_mean)) break;
            }

            Rng rng(derive_seed(round_seed, static_cast<std::uint64_t>(step)));
            for (std::size_t b = 0; b < batch; ++b) {
                pick[b] = static_cast<std::size_t>(rng.below(data.size()));
                step_index[b] = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_steps)));
                elem_seed[b] = rng.next_u64();
            }

            parallel_for(
                batch,
                [&](std::size_t b) {
                    outs[b] = distill_step(current, student, data[pick[b]].instance, x0[pick[b]],
                                           step_index[b], n_steps, schedule, elem_seed[b]);
                },
                cfg.threads);

            std::vector<double> mean_grad(student.values.size(), 0.0);
            double mean_loss = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                mean_loss += outs[b].loss;
                for (std::size_t k = 0; k < mean_grad.size(); ++k)
                    mean_grad[k] += outs[b].grads.values[k];
            }
            const double inv_batch = 1.0 / static_cast<double>(batch);
            mean_loss *= inv_batch;
            for (double& gk : mean_grad) gk *= inv_batch;

            if (cfg.adam)
                detail::adam_update_inplace(student, mean_grad, cfg.learning_rate, adam);
            else
                detail::sgd_update_inplace(student, mean_grad, cfg.learning_rate);
            losses.push_back(mean_loss);
            ++steps_done;
        }

        DistillRound r;
        r.round = round;
        r.sampling_steps = n_steps;
        r.train_steps = steps_done;
        if (losses.empty()) {
            r.final_loss = std::numeric_limits<double>::quiet_NaN();
        } else {
            const std::size_t window = std::min<std::size_t>(losses.size(), 100);
            r.final_loss =
                std::accumulate(losses.end() - static_cast<std::ptrdiff_t>(window), losses.end(), 0.0) /
                static_cast<double>(window);
        }
        if (!cfg.checkpoint_dir.empty()) {
            std::filesystem::create_directories(cfg.checkpoint_dir);
            const std::string prefix =
                (std::filesystem::path(cfg.checkpoint_dir) / ("student_" + std::to_string(round) + "x"))
                    .string();
            checkpoint_save(student, prefix);
            r.checkpoint = prefix + ".json";
        }
        report.rounds.push_back(std::move(r));

        current = std::move(student);  // student becomes the new teacher
        n_steps /= 2;
    }
    return {std::move(current), std::move(report)};
}

}  // namespace tspdiff
