#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "tspdiff/instance.hpp"
#include "tspdiff/rng.hpp"

namespace tspdiff {

// Noise-predictor network over the complete instance graph. Edges carry
// features and gate the node aggregation; node->edge and edge->node updates
// alternate with residual connections. All activations are smooth (tanh /
// sigmoid) and all math is double precision, so finite-difference gradient
// checks are clean.
struct DenoiserConfig {
    int layers = 4;
    int width = 64;
    int time_embed_dim = 64;

    void validate() const {
        if (layers < 1 || width < 2 || time_embed_dim < 2)
            throw std::invalid_argument("DenoiserConfig: all dimensions must be positive");
        if (width % 2 != 0 || time_embed_dim % 2 != 0)
            throw std::invalid_argument("DenoiserConfig: width and time_embed_dim must be even");
    }
};

struct TensorSpec {
    std::string name;
    std::vector<int> shape;
    std::size_t offset;  // element offset into the flat parameter vector
    std::size_t count;
};

namespace detail {

struct LayerOffsets {
    std::size_t edge_self_w, edge_pair_w, edge_b;
    std::size_t node_self_w, node_nbr_w, node_b;
};

struct ParamLayout {
    std::size_t embed_node_w, embed_node_b;
    std::size_t embed_edge_w, embed_edge_b;
    std::size_t embed_time_w, embed_time_b;
    std::vector<LayerOffsets> layers;
    std::size_t head_w, head_b;
    std::size_t total;
};

inline ParamLayout make_layout(const DenoiserConfig& cfg) {
    cfg.validate();
    const std::size_t w = static_cast<std::size_t>(cfg.width);
    const std::size_t td = static_cast<std::size_t>(cfg.time_embed_dim);
    ParamLayout lo;
    std::size_t at = 0;
    auto take = [&at](std::size_t count) {
        std::size_t here = at;
        at += count;
        return here;
    };
    lo.embed_node_w = take(w * 2);
    lo.embed_node_b = take(w);
    lo.embed_edge_w = take(w * 2);
    lo.embed_edge_b = take(w);
    lo.embed_time_w = take(w * td);
    lo.embed_time_b = take(w);
    lo.layers.resize(static_cast<std::size_t>(cfg.layers));
    for (auto& l : lo.layers) {
        l.edge_self_w = take(w * w);
        l.edge_pair_w = take(w * w);
        l.edge_b = take(w);
        l.node_self_w = take(w * w);
        l.node_nbr_w = take(w * w);
        l.node_b = take(w);
    }
    lo.head_w = take(w);
    lo.head_b = take(1);
    lo.total = at;
    return lo;
}

// y = A x, A row-major (rows x cols)
inline void matvec(const double* A, const double* x, double* y, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        const double* row = A + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols);
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

// y += A^T x
inline void matvec_t_add(const double* A, const double* x, double* y, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        const double* row = A + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols);
        const double xr = x[r];
        for (int c = 0; c < cols; ++c) y[c] += row[c] * xr;
    }
}

// G += a b^T
inline void outer_add(double* G, const double* a, const double* b, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        double* row = G + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols);
        const double ar = a[r];
        for (int c = 0; c < cols; ++c) row[c] += ar * b[c];
    }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

inline std::vector<TensorSpec> param_tensors(const DenoiserConfig& cfg) {
    const auto lo = detail::make_layout(cfg);
    const int w = cfg.width;
    const int td = cfg.time_embed_dim;
    std::vector<TensorSpec> specs;
    auto add = [&specs](std::string name, std::vector<int> shape, std::size_t offset) {
        std::size_t count = 1;
        for (int d : shape) count *= static_cast<std::size_t>(d);
        specs.push_back({std::move(name), std::move(shape), offset, count});
    };
    add("embed.node.w", {w, 2}, lo.embed_node_w);
    add("embed.node.b", {w}, lo.embed_node_b);
    add("embed.edge.w", {w, 2}, lo.embed_edge_w);
    add("embed.edge.b", {w}, lo.embed_edge_b);
    add("embed.time.w", {w, td}, lo.embed_time_w);
    add("embed.time.b", {w}, lo.embed_time_b);
    for (int l = 0; l < cfg.layers; ++l) {
        const auto& L = lo.layers[static_cast<std::size_t>(l)];
        const std::string p = "layer" + std::to_string(l) + ".";
        add(p + "edge.self.w", {w, w}, L.edge_self_w);
        add(p + "edge.pair.w", {w, w}, L.edge_pair_w);
        add(p + "edge.b", {w}, L.edge_b);
        add(p + "node.self.w", {w, w}, L.node_self_w);
        add(p + "node.nbr.w", {w, w}, L.node_nbr_w);
        add(p + "node.b", {w}, L.node_b);
    }
    add("head.w", {w}, lo.head_w);
    add("head.b", {1}, lo.head_b);
    return specs;
}

inline std::size_t param_count(const DenoiserConfig& cfg) {
    return detail::make_layout(cfg).total;
}

struct DenoiserParams {
    DenoiserConfig config;
    std::vector<double> values;
};

struct ParamGrads {
    std::vector<double> values;
};

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero, output
// head zero so an untrained network predicts zero noise.
inline DenoiserParams init_params(const DenoiserConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    DenoiserParams p;
    p.config = cfg;
    p.values.assign(param_count(cfg), 0.0);
    Rng rng(seed);
    for (const auto& spec : param_tensors(cfg)) {
        if (spec.shape.size() != 2) continue;       // biases stay zero
        if (spec.name == "head.w") continue;        // head stays zero
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.shape[1]));
        for (std::size_t k = 0; k < spec.count; ++k)
            p.values[spec.offset + k] = rng.uniform(-bound, bound);
    }
    return p;
}

// Sinusoidal embedding of the time fraction; frequencies geometric from 2*pi
// up to 2*pi*2048 so neighboring grid times stay distinguishable.
inline std::vector<double> time_embedding(double t_frac, int dim) {
    std::vector<double> emb(static_cast<std::size_t>(dim));
    const int pairs = dim / 2;
    for (int k = 0; k < pairs; ++k) {
        const double expo = (pairs > 1) ? static_cast<double>(k) / (pairs - 1) : 0.0;
        const double freq = 2.0 * std::numbers::pi * std::pow(2048.0, expo);
        emb[static_cast<std::size_t>(2 * k)] = std::sin(freq * t_frac);
        emb[static_cast<std::size_t>(2 * k + 1)] = std::cos(freq * t_frac);
    }
    return emb;
}

// Intermediate activations kept for the backward pass.
struct DenoiserTrace {
    std::vector<double> temb, tvec;
    std::vector<std::vector<double>> h;    // layers+1 entries of n*w
    std::vector<std::vector<double>> e;    // layers+1 entries of m*w
    std::vector<std::vector<double>> u;    // tanh of edge pre-activation, m*w
    std::vector<std::vector<double>> g;    // edge gates, m*w
    std::vector<std::vector<double>> msg;  // neighbor messages, n*w
    std::vector<std::vector<double>> v;    // tanh of node pre-activation, n*w
};

inline EdgeVec denoiser_forward(const DenoiserParams& params, const TspInstance& inst,
                                const EdgeVec& noisy, double t_frac,
                                DenoiserTrace* trace = nullptr) {
    const DenoiserConfig& cfg = params.config;
    const auto lo = detail::make_layout(cfg);
    if (params.values.size() != lo.total)
        throw std::invalid_argument("denoiser_forward: parameter vector size mismatch");
    const int n = inst.n;
    const int m = inst.edge_count();
    const int w = cfg.width;
    if (static_cast<int>(noisy.size()) != m)
        throw std::invalid_argument("denoiser_forward: edge vector length mismatch");
    for (double x : noisy)
        if (!std::isfinite(x)) throw std::invalid_argument("denoiser_forward: non-finite input");
    if (!(t_frac > 0.0 && t_frac <= 1.0))
        throw std::invalid_argument("denoiser_forward: time fraction must be in (0, 1]");

    const double* P = params.values.data();
    const std::size_t sw = static_cast<std::size_t>(w);

    DenoiserTrace local;
    DenoiserTrace& tr = trace ? *trace : local;
    tr.temb = time_embedding(t_frac, cfg.time_embed_dim);
    tr.tvec.assign(sw, 0.0);
    detail::matvec(P + lo.embed_time_w, tr.temb.data(), tr.tvec.data(), w, cfg.time_embed_dim);
    for (int c = 0; c < w; ++c) tr.tvec[static_cast<std::size_t>(c)] += P[lo.embed_time_b + static_cast<std::size_t>(c)];

    tr.h.assign(static_cast<std::size_t>(cfg.layers) + 1, {});
    tr.e.assign(static_cast<std::size_t>(cfg.layers) + 1, {});
    tr.u.assign(static_cast<std::size_t>(cfg.layers), {});
    tr.g.assign(static_cast<std::size_t>(cfg.layers), {});
    tr.msg.assign(static_cast<std::size_t>(cfg.layers), {});
    tr.v.assign(static_cast<std::size_t>(cfg.layers), {});

    // input embeddings
    tr.h[0].assign(static_cast<std::size_t>(n) * sw, 0.0);
    for (int i = 0; i < n; ++i) {
        double in[2] = {inst.coords[static_cast<std::size_t>(i)][0],
                        inst.coords[static_cast<std::size_t>(i)][1]};
        double* hi = tr.h[0].data() + static_cast<std::size_t>(i) * sw;
        detail::matvec(P + lo.embed_node_w, in, hi, w, 2);
        for (int c = 0; c < w; ++c) hi[c] += P[lo.embed_node_b + static_cast<std::size_t>(c)];
    }
    tr.e[0].assign(static_cast<std::size_t>(m) * sw, 0.0);
    for (int k = 0; k < m; ++k) {
        double in[2] = {noisy[static_cast<std::size_t>(k)], inst.weights[static_cast<std::size_t>(k)]};
        double* ek = tr.e[0].data() + static_cast<std::size_t>(k) * sw;
        detail::matvec(P + lo.embed_edge_w, in, ek, w, 2);
        for (int c = 0; c < w; ++c) ek[c] += P[lo.embed_edge_b + static_cast<std::size_t>(c)];
    }

    std::vector<double> pair_proj(static_cast<std::size_t>(n) * sw);  // edge-update term per node
    std::vector<double> self_proj(static_cast<std::size_t>(n) * sw);  // node-update self term
    const double inv_nbrs = 1.0 / static_cast<double>(n - 1);

    for (int l = 0; l < cfg.layers; ++l) {
        const auto& L = lo.layers[static_cast<std::size_t>(l)];
        const auto& h_in = tr.h[static_cast<std::size_t>(l)];
        const auto& e_in = tr.e[static_cast<std::size_t>(l)];
        auto& h_out = tr.h[static_cast<std::size_t>(l) + 1];
        auto& e_out = tr.e[static_cast<std::size_t>(l) + 1];
        auto& u = tr.u[static_cast<std::size_t>(l)];
        auto& g = tr.g[static_cast<std::size_t>(l)];
        auto& msg = tr.msg[static_cast<std::size_t>(l)];
        auto& v = tr.v[static_cast<std::size_t>(l)];
        e_out.assign(static_cast<std::size_t>(m) * sw, 0.0);
        h_out.assign(static_cast<std::size_t>(n) * sw, 0.0);
        u.assign(static_cast<std::size_t>(m) * sw, 0.0);
        g.assign(static_cast<std::size_t>(m) * sw, 0.0);
        msg.assign(static_cast<std::size_t>(n) * sw, 0.0);
        v.assign(static_cast<std::size_t>(n) * sw, 0.0);

        for (int i = 0; i < n; ++i) {
            const double* hi = h_in.data() + static_cast<std::size_t>(i) * sw;
            detail::matvec(P + L.edge_pair_w, hi, pair_proj.data() + static_cast<std::size_t>(i) * sw, w, w);
            detail::matvec(P + L.node_nbr_w, hi, msg.data() + static_cast<std::size_t>(i) * sw, w, w);
            detail::matvec(P + L.node_self_w, hi, self_proj.data() + static_cast<std::size_t>(i) * sw, w, w);
        }

        // edge update + gate
        for (int k = 0; k < m; ++k) {
            auto [i, j] = inst.edges[static_cast<std::size_t>(k)];
            const double* ek = e_in.data() + static_cast<std::size_t>(k) * sw;
            const double* pi = pair_proj.data() + static_cast<std::size_t>(i) * sw;
            const double* pj = pair_proj.data() + static_cast<std::size_t>(j) * sw;
            double* uk = u.data() + static_cast<std::size_t>(k) * sw;
            double* eo = e_out.data() + static_cast<std::size_t>(k) * sw;
            double* gk = g.data() + static_cast<std::size_t>(k) * sw;
            detail::matvec(P + L.edge_self_w, ek, uk, w, w);
            for (int c = 0; c < w; ++c) {
                double pre = uk[c] + pi[c] + pj[c] + P[L.edge_b + static_cast<std::size_t>(c)] +
                             tr.tvec[static_cast<std::size_t>(c)];
                uk[c] = std::tanh(pre);
                eo[c] = ek[c] + uk[c];
                gk[c] = detail::sigmoid(eo[c]);
            }
        }

        // gated aggregation into nodes
        std::vector<double>& agg = v;  // reuse buffer; overwritten by tanh below
        for (int k = 0; k < m; ++k) {
            auto [i, j] = inst.edges[static_cast<std::size_t>(k)];
            const double* gk = g.data() + static_cast<std::size_t>(k) * sw;
            const double* mi = msg.data() + static_cast<std::size_t>(i) * sw;
            const double* mj = msg.data() + static_cast<std::size_t>(j) * sw;
            double* ai = agg.data() + static_cast<std::size_t>(i) * sw;
            double* aj = agg.data() + static_cast<std::size_t>(j) * sw;
            for (int c = 0; c < w; ++c) {
                ai[c] += gk[c] * mj[c];
                aj[c] += gk[c] * mi[c];
            }
        }
        for (int i = 0; i < n; ++i) {
            const double* hi = h_in.data() + static_cast<std::size_t>(i) * sw;
            const double* si = self_proj.data() + static_cast<std::size_t>(i) * sw;
            double* vi = v.data() + static_cast<std::size_t>(i) * sw;
            double* ho = h_out.data() + static_cast<std::size_t>(i) * sw;
            for (int c = 0; c < w; ++c) {
                double pre = si[c] + P[L.node_b + static_cast<std::size_t>(c)] + vi[c] * inv_nbrs;
                vi[c] = std::tanh(pre);
                ho[c] = hi[c] + vi[c];
            }
        }
    }

    EdgeVec out(static_cast<std::size_t>(m));
    const double* head_w = P + lo.head_w;
    const double head_b = P[lo.head_b];
    const auto& e_last = tr.e[static_cast<std::size_t>(cfg.layers)];
    for (int k = 0; k < m; ++k) {
        const double* ek = e_last.data() + static_cast<std::size_t>(k) * sw;
        double acc = head_b;
        for (int c = 0; c < w; ++c) acc += head_w[c] * ek[c];
        out[static_cast<std::size_t>(k)] = acc;
    }
    return out;
}

// Reverse-mode gradients of loss_grad . forward(params) with respect to every
// parameter. The trace must come from denoiser_forward on identical inputs.
inline ParamGrads denoiser_backward_traced(const DenoiserParams& params, const TspInstance& inst,
                                           const EdgeVec& noisy, const DenoiserTrace& tr,
                                           const EdgeVec& loss_grad) {
    const DenoiserConfig& cfg = params.config;
    const auto lo = detail::make_layout(cfg);
    const int n = inst.n;
    const int m = inst.edge_count();
    const int w = cfg.width;
    if (static_cast<int>(loss_grad.size()) != m)
        throw std::invalid_argument("denoiser_backward: loss gradient length mismatch");
    const double* P = params.values.data();
    const std::size_t sw = static_cast<std::size_t>(w);

    ParamGrads grads;
    grads.values.assign(lo.total, 0.0);
    double* G = grads.values.data();

    // head
    std::vector<double> d_e(static_cast<std::size_t>(m) * sw, 0.0);
    const auto& e_last = tr.e[static_cast<std::size_t>(cfg.layers)];
    for (int k = 0; k < m; ++k) {
        const double lg = loss_grad[static_cast<std::size_t>(k)];
        const double* ek = e_last.data() + static_cast<std::size_t>(k) * sw;
        double* dek = d_e.data() + static_cast<std::size_t>(k) * sw;
        for (int c = 0; c < w; ++c) {
            G[lo.head_w + static_cast<std::size_t>(c)] += lg * ek[c];
            dek[c] = lg * P[lo.head_w + static_cast<std::size_t>(c)];
        }
        G[lo.head_b] += lg;
    }

    std::vector<double> d_h(static_cast<std::size_t>(n) * sw, 0.0);
    std::vector<double> d_tvec(sw, 0.0);
    std::vector<double> d_q(static_cast<std::size_t>(n) * sw);
    std::vector<double> d_msg(static_cast<std::size_t>(n) * sw);
    std::vector<double> node_sum(static_cast<std::size_t>(n) * sw);
    std::vector<double> d_h_in(static_cast<std::size_t>(n) * sw);
    std::vector<double> d_e_in(static_cast<std::size_t>(m) * sw);
    std::vector<double> d_gk(sw);
    const double inv_nbrs = 1.0 / static_cast<double>(n - 1);

    for (int l = cfg.layers - 1; l >= 0; --l) {
        const auto& L = lo.layers[static_cast<std::size_t>(l)];
        const auto& h_in = tr.h[static_cast<std::size_t>(l)];
        const auto& e_in = tr.e[static_cast<std::size_t>(l)];
        const auto& u = tr.u[static_cast<std::size_t>(l)];
        const auto& g = tr.g[static_cast<std::size_t>(l)];
        const auto& msg = tr.msg[static_cast<std::size_t>(l)];
        const auto& v = tr.v[static_cast<std::size_t>(l)];

        // node update: h_out_i = h_in_i + tanh(q_i)
        d_h_in = d_h;  // residual path
        for (int i = 0; i < n; ++i) {
            const double* dhi = d_h.data() + static_cast<std::size_t>(i) * sw;
            const double* vi = v.data() + static_cast<std::size_t>(i) * sw;
            double* dqi = d_q.data() + static_cast<std::size_t>(i) * sw;
            for (int c = 0; c < w; ++c) dqi[c] = dhi[c] * (1.0 - vi[c] * vi[c]);
        }
        for (int i = 0; i < n; ++i) {
            const double* hi = h_in.data() + static_cast<std::size_t>(i) * sw;
            const double* dqi = d_q.data() + static_cast<std::size_t>(i) * sw;
            detail::outer_add(G + L.node_self_w, dqi, hi, w, w);
            detail::matvec_t_add(P + L.node_self_w, dqi, d_h_in.data() + static_cast<std::size_t>(i) * sw, w, w);
            for (int c = 0; c < w; ++c) G[L.node_b + static_cast<std::size_t>(c)] += dqi[c];
        }

        // aggregation: d_q is also d_agg up to the 1/(n-1) factor
        std::fill(d_msg.begin(), d_msg.end(), 0.0);
        for (int k = 0; k < m; ++k) {
            auto [i, j] = inst.edges[static_cast<std::size_t>(k)];
            const double* dai = d_q.data() + static_cast<std::size_t>(i) * sw;
            const double* daj = d_q.data() + static_cast<std::size_t>(j) * sw;
            const double* mi = msg.data() + static_cast<std::size_t>(i) * sw;
            const double* mj = msg.data() + static_cast<std::size_t>(j) * sw;
            const double* gk = g.data() + static_cast<std::size_t>(k) * sw;
            double* dmi = d_msg.data() + static_cast<std::size_t>(i) * sw;
            double* dmj = d_msg.data() + static_cast<std::size_t>(j) * sw;
            double* dek = d_e.data() + static_cast<std::size_t>(k) * sw;
            for (int c = 0; c < w; ++c) {
                const double dg = (dai[c] * mj[c] + daj[c] * mi[c]) * inv_nbrs;
                dmj[c] += dai[c] * gk[c] * inv_nbrs;
                dmi[c] += daj[c] * gk[c] * inv_nbrs;
                dek[c] += dg * gk[c] * (1.0 - gk[c]);  // gate path into e_out
            }
        }
        for (int i = 0; i < n; ++i) {
            const double* hi = h_in.data() + static_cast<std::size_t>(i) * sw;
            const double* dmi = d_msg.data() + static_cast<std::size_t>(i) * sw;
            detail::outer_add(G + L.node_nbr_w, dmi, hi, w, w);
            detail::matvec_t_add(P + L.node_nbr_w, dmi, d_h_in.data() + static_cast<std::size_t>(i) * sw, w, w);
        }

        // edge update: e_out_k = e_in_k + tanh(p_k), d_e now holds d(e_out)
        d_e_in = d_e;  // residual path
        std::fill(node_sum.begin(), node_sum.end(), 0.0);
        for (int k = 0; k < m; ++k) {
            auto [i, j] = inst.edges[static_cast<std::size_t>(k)];
            const double* uk = u.data() + static_cast<std::size_t>(k) * sw;
            const double* ek = e_in.data() + static_cast<std::size_t>(k) * sw;
            double* dek = d_e.data() + static_cast<std::size_t>(k) * sw;  // becomes d_p in place
            double* si = node_sum.data() + static_cast<std::size_t>(i) * sw;
            double* sj = node_sum.data() + static_cast<std::size_t>(j) * sw;
            for (int c = 0; c < w; ++c) {
                const double dp = dek[c] * (1.0 - uk[c] * uk[c]);
                dek[c] = dp;
                si[c] += dp;
                sj[c] += dp;
                G[L.edge_b + static_cast<std::size_t>(c)] += dp;
                d_tvec[static_cast<std::size_t>(c)] += dp;
            }
            detail::outer_add(G + L.edge_self_w, dek, ek, w, w);
            detail::matvec_t_add(P + L.edge_self_w, dek, d_e_in.data() + static_cast<std::size_t>(k) * sw, w, w);
        }
        for (int i = 0; i < n; ++i) {
            const double* hi = h_in.data() + static_cast<std::size_t>(i) * sw;
            const double* si = node_sum.data() + static_cast<std::size_t>(i) * sw;
            detail::outer_add(G + L.edge_pair_w, si, hi, w, w);
            detail::matvec_t_add(P + L.edge_pair_w, si, d_h_in.data() + static_cast<std::size_t>(i) * sw, w, w);
        }

        d_h = d_h_in;
        d_e = d_e_in;
    }

    // input embeddings
    for (int i = 0; i < n; ++i) {
        double in[2] = {inst.coords[static_cast<std::size_t>(i)][0],
                        inst.coords[static_cast<std::size_t>(i)][1]};
        const double* dhi = d_h.data() + static_cast<std::size_t>(i) * sw;
        detail::outer_add(G + lo.embed_node_w, dhi, in, w, 2);
        for (int c = 0; c < w; ++c) G[lo.embed_node_b + static_cast<std::size_t>(c)] += dhi[c];
    }
    for (int k = 0; k < m; ++k) {
        double in[2] = {noisy[static_cast<std::size_t>(k)], inst.weights[static_cast<std::size_t>(k)]};
        const double* dek = d_e.data() + static_cast<std::size_t>(k) * sw;
        detail::outer_add(G + lo.embed_edge_w, dek, in, w, 2);
        for (int c = 0; c < w; ++c) G[lo.embed_edge_b + static_cast<std::size_t>(c)] += dek[c];
    }
    detail::outer_add(G + lo.embed_time_w, d_tvec.data(), tr.temb.data(), w, cfg.time_embed_dim);
    for (int c = 0; c < w; ++c) G[lo.embed_time_b + static_cast<std::size_t>(c)] += d_tvec[static_cast<std::size_t>(c)];

    return grads;
}

inline ParamGrads denoiser_backward(const DenoiserParams& params, const TspInstance& inst,
                                    const EdgeVec& noisy, double t_frac,
                                    const EdgeVec& loss_grad) {
    DenoiserTrace trace;
    denoiser_forward(params, inst, noisy, t_frac, &trace);
    return denoiser_backward_traced(params, inst, noisy, trace, loss_grad);
}

// params - lr * grads, entrywise.
inline DenoiserParams apply_update(const DenoiserParams& params, const ParamGrads& grads,
                                   double learning_rate) {
    if (!(learning_rate >= 0.0))
        throw std::invalid_argument("apply_update: learning rate must be non-negative");
    if (grads.values.size() != params.values.size())
        throw std::invalid_argument("apply_update: shape mismatch");
    DenoiserParams out = params;
    for (std::size_t k = 0; k < out.values.size(); ++k)
        out.values[k] -= learning_rate * grads.values[k];
    return out;
}

}  // namespace tspdiff
