#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tspdiff/eval.hpp"

namespace tspdiff {

namespace detail {

inline std::string fmt_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace detail

// Drop-percentage vs. inference-steps chart, one panel per parallel-sample
// setting, one polyline per model. Hand-rolled SVG so reports need no
// plotting dependency; the CSV remains the machine-readable contract.
inline void write_drop_plot(const std::string& path, const std::vector<EvalRow>& rows,
                            const std::string& config_json = "") {
    if (rows.empty()) throw std::invalid_argument("write_drop_plot: no rows");

    std::vector<int> samples;
    std::vector<std::string> models;
    std::set<int> steps_seen;
    double y_max = 0.0;
    for (const auto& r : rows) {
        if (std::find(samples.begin(), samples.end(), r.parallel_samples) == samples.end())
            samples.push_back(r.parallel_samples);
        if (std::find(models.begin(), models.end(), r.model_id) == models.end())
            models.push_back(r.model_id);
        steps_seen.insert(r.inference_steps);
        y_max = std::max(y_max, r.mean_drop_pct);
    }
    std::sort(samples.begin(), samples.end());
    y_max = std::max(y_max * 1.15, 1e-6);

    const std::vector<int> steps(steps_seen.begin(), steps_seen.end());
    const double x_lo = std::log2(static_cast<double>(steps.front()));
    const double x_hi = std::log2(static_cast<double>(steps.back()));
    const double panel_w = 340.0, panel_h = 280.0, margin_l = 58.0, margin_b = 46.0,
                 margin_t = 34.0, gap = 30.0;
    const double width = margin_l + (panel_w + gap) * static_cast<double>(samples.size());
    const double height = margin_t + panel_h + margin_b;

    static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                              "#9467bd", "#ff7f0e", "#8c564b"};
    const std::size_t n_colors = sizeof(kColors) / sizeof(kColors[0]);

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_drop_plot: cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    if (!config_json.empty()) out << "<!-- config " << config_json << " -->\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (std::size_t p = 0; p < samples.size(); ++p) {
        const double ox = margin_l + (panel_w + gap) * static_cast<double>(p);
        const double oy = margin_t;
        auto x_of = [&](int m) {
            const double f = (x_hi > x_lo)
                                 ? (std::log2(static_cast<double>(m)) - x_lo) / (x_hi - x_lo)
                                 : 0.5;
            return ox + f * panel_w;
        };
        auto y_of = [&](double drop) { return oy + panel_h * (1.0 - drop / y_max); };

        out << "<rect x=\"" << detail::fmt_coord(ox) << "\" y=\"" << detail::fmt_coord(oy)
            << "\" width=\"" << panel_w << "\" height=\"" << panel_h
            << "\" fill=\"none\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << detail::fmt_coord(ox + panel_w / 2) << "\" y=\""
            << detail::fmt_coord(oy - 10) << "\" text-anchor=\"middle\">" << samples[p]
            << " parallel sample" << (samples[p] == 1 ? "" : "s") << "</text>\n";

        for (int m : steps) {
            const double x = x_of(m);
            out << "<line x1=\"" << detail::fmt_coord(x) << "\" y1=\""
                << detail::fmt_coord(oy + panel_h) << "\" x2=\"" << detail::fmt_coord(x)
                << "\" y2=\"" << detail::fmt_coord(oy + panel_h + 5) << "\" stroke=\"#444\"/>\n";
            out << "<text x=\"" << detail::fmt_coord(x) << "\" y=\""
                << detail::fmt_coord(oy + panel_h + 18) << "\" text-anchor=\"middle\">" << m
                << "</text>\n";
        }
        out << "<text x=\"" << detail::fmt_coord(ox + panel_w / 2) << "\" y=\""
            << detail::fmt_coord(oy + panel_h + 36) << "\" text-anchor=\"middle\">inference steps"
            << "</text>\n";

        for (int tick = 0; tick <= 4; ++tick) {
            const double drop = y_max * tick / 4.0;
            const double y = y_of(drop);
            out << "<line x1=\"" << detail::fmt_coord(ox - 5) << "\" y1=\"" << detail::fmt_coord(y)
                << "\" x2=\"" << detail::fmt_coord(ox) << "\" y2=\"" << detail::fmt_coord(y)
                << "\" stroke=\"#444\"/>\n";
            char label[32];
            std::snprintf(label, sizeof(label), "%.2f", drop);
            out << "<text x=\"" << detail::fmt_coord(ox - 8) << "\" y=\""
                << detail::fmt_coord(y + 4) << "\" text-anchor=\"end\">" << label << "</text>\n";
        }
        if (p == 0) {
            out << "<text x=\"14\" y=\"" << detail::fmt_coord(oy + panel_h / 2)
                << "\" transform=\"rotate(-90 14 " << detail::fmt_coord(oy + panel_h / 2)
                << ")\" text-anchor=\"middle\">cost drop (%)</text>\n";
        }

        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            const char* color = kColors[mi % n_colors];
            std::map<int, double> series;
            for (const auto& r : rows)
                if (r.model_id == models[mi] && r.parallel_samples == samples[p])
                    series[r.inference_steps] = r.mean_drop_pct;
            if (series.empty()) continue;
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
            for (const auto& [m, drop] : series)
                out << detail::fmt_coord(x_of(m)) << "," << detail::fmt_coord(y_of(drop)) << " ";
            out << "\"/>\n";
            for (const auto& [m, drop] : series)
                out << "<circle cx=\"" << detail::fmt_coord(x_of(m)) << "\" cy=\""
                    << detail::fmt_coord(y_of(drop)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
    }

    // legend
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const double y = margin_t + 16.0 * static_cast<double>(mi);
        const double x = width - 150.0;
        out << "<line x1=\"" << detail::fmt_coord(x) << "\" y1=\"" << detail::fmt_coord(y)
            << "\" x2=\"" << detail::fmt_coord(x + 18) << "\" y2=\"" << detail::fmt_coord(y)
            << "\" stroke=\"" << kColors[mi % n_colors] << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << detail::fmt_coord(x + 24) << "\" y=\"" << detail::fmt_coord(y + 4)
            << "\">" << models[mi] << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw std::runtime_error("write_drop_plot: write failed on " + path);
}

}  // namespace tspdiff
