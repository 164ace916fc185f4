#pragma once

#include <chrono>
#include <cstdint>
#include <utility>

#include "tspdiff/decode.hpp"
#include "tspdiff/denoiser.hpp"
#include "tspdiff/instance.hpp"
#include "tspdiff/rng.hpp"
#include "tspdiff/schedule.hpp"

namespace tspdiff {

struct SampleOptions {
    bool refine_2opt = false;   // keep OFF to measure the model, not the local search
    bool measure_time = true;
};

struct SampleResult {
    Tour tour;
    EdgeVec denoised;  // the time-zero edge vector before quantization
    int steps_used = 0;
    double wall_ms = 0.0;
};

// Full inference along a linear-skip grid: start from pure noise, apply the
// deterministic DDIM update per grid transition, quantize and decode. The
// predictor is any callable (instance, edge_vec, t_frac) -> edge_vec.
template <class Predictor>
SampleResult sample_with(const Predictor& predict, const TspInstance& inst, const Schedule& schedule,
                         int inference_steps, std::uint64_t seed, const SampleOptions& opts = {}) {
    const TimeGrid grid = linear_skip_grid(schedule, inference_steps);
    const auto start = std::chrono::steady_clock::now();

    Rng rng(seed);
    EdgeVec state = rng.normal_vec(static_cast<std::size_t>(inst.edge_count()));
    for (std::size_t j = 0; j + 1 < grid.indices.size(); ++j) {
        const int t_src = grid.indices[j];
        const int t_dst = grid.indices[j + 1];
        const EdgeVec eps = predict(inst, state, static_cast<double>(t_src) / schedule.steps);
        state = ddim_step(schedule, state, eps, t_src, t_dst);
    }

    SampleResult result;
    result.tour = decode_heatmap(inst, quantize(state), opts.refine_2opt);
    result.denoised = std::move(state);
    result.steps_used = grid.transitions();
    if (opts.measure_time) {
        result.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
    }
    return result;
}

inline SampleResult sample(const DenoiserParams& params, const TspInstance& inst,
                           const Schedule& schedule, int inference_steps, std::uint64_t seed,
                           const SampleOptions& opts = {}) {
    auto predict = [&params](const TspInstance& i, const EdgeVec& state, double t_frac) {
        return denoiser_forward(params, i, state, t_frac);
    };
    return sample_with(predict, inst, schedule, inference_steps, seed, opts);
}

// Runs S independent chains with derived child seeds and keeps the cheapest
// tour (ties to the lower chain index). Chain results do not depend on
// execution order, so this may be parallelized freely by callers.
template <class Predictor>
SampleResult sample_parallel_with(const Predictor& predict, const TspInstance& inst,
                                  const Schedule& schedule, int inference_steps, int n_samples,
                                  std::uint64_t seed, const SampleOptions& opts = {}) {
    if (n_samples < 1)
        throw std::invalid_argument("sample_parallel: need at least one sample");
    SampleResult best;
    double total_ms = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        SampleResult r =
            sample_with(predict, inst, schedule, inference_steps, derive_seed(seed, static_cast<std::uint64_t>(s)), opts);
        total_ms += r.wall_ms;
        if (s == 0 || r.tour.cost < best.tour.cost) best = std::move(r);
    }
    best.wall_ms = total_ms;  // total work across chains
    return best;
}

inline SampleResult sample_parallel(const DenoiserParams& params, const TspInstance& inst,
                                    const Schedule& schedule, int inference_steps, int n_samples,
                                    std::uint64_t seed, const SampleOptions& opts = {}) {
    auto predict = [&params](const TspInstance& i, const EdgeVec& state, double t_frac) {
        return denoiser_forward(params, i, state, t_frac);
    };
    return sample_parallel_with(predict, inst, schedule, inference_steps, n_samples, seed, opts);
}

}  // namespace tspdiff
