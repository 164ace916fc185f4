#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tspdiff/instance.hpp"

namespace tspdiff {

inline constexpr double kBetaStart = 1e-4;
inline constexpr double kBetaEnd = 0.02;
inline constexpr int kDefaultDiffusionSteps = 1024;

// Variance-preserving noise schedule: linear betas and their cumulative
// alpha-bar products. alpha_bar[0] = 1 (no corruption at time zero), so the
// final denoising transition is an exact inversion of the forward draw.
struct Schedule {
    int steps = 0;                  // T
    std::vector<double> beta;       // size T+1; beta[0] unused
    std::vector<double> alpha_bar;  // size T+1; alpha_bar[0] = 1

    double beta_at(int t) const {
        if (t < 1 || t > steps) throw std::out_of_range("Schedule: beta index out of range");
        return beta[static_cast<std::size_t>(t)];
    }
    double alpha_bar_at(int t) const {
        if (t < 0 || t > steps) throw std::out_of_range("Schedule: alpha_bar index out of range");
        return alpha_bar[static_cast<std::size_t>(t)];
    }
};

inline Schedule make_schedule(int T = kDefaultDiffusionSteps) {
    if (T < 2) throw std::invalid_argument("make_schedule: need at least 2 steps");
    Schedule s;
    s.steps = T;
    s.beta.assign(static_cast<std::size_t>(T) + 1, 0.0);
    s.alpha_bar.assign(static_cast<std::size_t>(T) + 1, 1.0);
    for (int t = 1; t <= T; ++t) {
        s.beta[static_cast<std::size_t>(t)] =
            kBetaStart + (static_cast<double>(t - 1)) * (kBetaEnd - kBetaStart) / (T - 1);
        s.alpha_bar[static_cast<std::size_t>(t)] =
            s.alpha_bar[static_cast<std::size_t>(t - 1)] * (1.0 - s.beta[static_cast<std::size_t>(t)]);
    }
    return s;
}

// {0,1} indicators to {-1,+1} reals.
inline EdgeVec rescale(const SolutionVector& x) {
    EdgeVec out(x.bits.size());
    for (std::size_t k = 0; k < x.bits.size(); ++k) {
        if (x.bits[k] > 1) throw std::invalid_argument("rescale: entries must be 0 or 1");
        out[k] = 2.0 * static_cast<double>(x.bits[k]) - 1.0;
    }
    return out;
}

// Draw from the t-step marginal of the forward process:
// sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * noise.
inline EdgeVec forward_sample(const Schedule& s, const EdgeVec& x0, int t,
                              const EdgeVec& noise) {
    if (t < 1 || t > s.steps)
        throw std::invalid_argument("forward_sample: timestep out of range");
    if (noise.size() != x0.size())
        throw std::invalid_argument("forward_sample: noise length mismatch");
    const double a = s.alpha_bar_at(t);
    const double c0 = std::sqrt(a);
    const double cn = std::sqrt(1.0 - a);
    EdgeVec out(x0.size());
    for (std::size_t k = 0; k < x0.size(); ++k) out[k] = c0 * x0[k] + cn * noise[k];
    return out;
}

// Deterministic DDIM update from timestep t_src down to t_dst (any
// 0 <= t_dst < t_src): estimate x0 from the predicted noise, then re-corrupt
// to the destination level. With a shared noise estimate the update composes
// exactly across intermediate times.
inline EdgeVec ddim_step(const Schedule& s, const EdgeVec& x_src, const EdgeVec& eps,
                         int t_src, int t_dst) {
    if (!(0 <= t_dst && t_dst < t_src && t_src <= s.steps))
        throw std::invalid_argument("ddim_step: need 0 <= t_dst < t_src <= T");
    if (eps.size() != x_src.size())
        throw std::invalid_argument("ddim_step: noise length mismatch");
    const double a_src = s.alpha_bar_at(t_src);
    const double a_dst = s.alpha_bar_at(t_dst);
    const double scale = std::sqrt(a_dst / a_src);
    const double c_src = std::sqrt(1.0 - a_src);
    const double c_dst = std::sqrt(1.0 - a_dst);
    EdgeVec out(x_src.size());
    for (std::size_t k = 0; k < x_src.size(); ++k)
        out[k] = scale * (x_src[k] - c_src * eps[k]) + c_dst * eps[k];
    return out;
}

// Maps a continuous time fraction in (0, 1] onto the discrete table. The
// product t * T must land on an integer index; grids are chosen so it does.
inline int continuous_to_index(const Schedule& s, double t_frac) {
    if (!(t_frac > 0.0 && t_frac <= 1.0))
        throw std::invalid_argument("continuous_to_index: time fraction must be in (0, 1]");
    const double scaled = t_frac * static_cast<double>(s.steps);
    const long long idx = std::llround(scaled);
    if (std::abs(scaled - static_cast<double>(idx)) > 1e-9)
        throw std::invalid_argument(
            "continuous_to_index: t * T = " + std::to_string(scaled) +
            " is not an integer; T must be divisible by the step grid");
    return static_cast<int>(idx);
}

// Strictly decreasing inference grid: M uniform strides from T down to 0.
struct TimeGrid {
    std::vector<int> indices;  // T, T - T/M, ..., T/M, 0

    int transitions() const { return static_cast<int>(indices.size()) - 1; }
};

inline TimeGrid linear_skip_grid(const Schedule& s, int M) {
    if (M < 1) throw std::invalid_argument("linear_skip_grid: need at least one step");
    if (s.steps % M != 0)
        throw std::invalid_argument("linear_skip_grid: M = " + std::to_string(M) +
                                    " does not divide T = " + std::to_string(s.steps));
    const int stride = s.steps / M;
    TimeGrid grid;
    grid.indices.reserve(static_cast<std::size_t>(M) + 1);
    for (int t = s.steps; t > 0; t -= stride) grid.indices.push_back(t);
    grid.indices.push_back(0);
    return grid;
}

// Denoised reals to edge scores in [0, 1]-ish range. Decoding consumes a
// ranking, which this affine map preserves; the shift keeps scores readable
// as pseudo-probabilities.
inline EdgeVec quantize(const EdgeVec& x0) {
    EdgeVec out(x0.size());
    for (std::size_t k = 0; k < x0.size(); ++k) out[k] = 0.5 * (x0[k] + 1.0);
    return out;
}

}  // namespace tspdiff
