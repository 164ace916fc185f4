#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "tspdiff/dataset.hpp"
#include "tspdiff/denoiser.hpp"
#include "tspdiff/parallel.hpp"
#include "tspdiff/sampler.hpp"
#include "tspdiff/schedule.hpp"

namespace tspdiff {

struct EvalModel {
    std::string id;
    DenoiserParams params;
};

struct EvalConfig {
    std::vector<int> inference_steps{4, 8, 16, 32, 64};
    std::vector<int> parallel_samples{1, 4};
    std::uint64_t seed = 0;
    bool refine_2opt = false;
    bool measure_time = true;  // off: wall columns are written as zero, runs are byte-reproducible
    int timing_repeats = 3;    // median-of-repeats damps scheduler noise
    unsigned threads = 0;
};

struct EvalRow {
    std::string model_id;
    int inference_steps = 0;
    int parallel_samples = 0;
    double mean_drop_pct = 0.0;
    double mean_cost = 0.0;
    double mean_opt_cost = 0.0;
    int n_instances = 0;
    double mean_wall_ms = 0.0;
};

struct InstanceRecord {
    std::string model_id;
    int inference_steps = 0;
    int parallel_samples = 0;
    int instance = 0;
    double cost = 0.0;
    double opt_cost = 0.0;
    double drop_pct = 0.0;
    double wall_ms = 0.0;
    std::uint64_t seed = 0;
};

struct EvalOutput {
    std::vector<EvalRow> rows;
    std::vector<InstanceRecord> records;
    std::vector<std::string> cell_errors;  // machine-readable, one per failed cell
};

// Sweeps {models} x {inference steps} x {parallel samples} over the test set.
// Instance i always uses base seed derive_seed(seed, i), shared across cells:
// comparisons between cells are paired, and the S-sample candidate set always
// contains the single-sample chain.
inline EvalOutput run_eval(const std::vector<EvalModel>& models,
                           const std::vector<DatasetEntry>& test, const Schedule& schedule,
                           const EvalConfig& cfg,
                           const std::vector<DatasetEntry>* train_set = nullptr) {
    if (models.empty()) throw std::invalid_argument("run_eval: no models");
    if (test.empty()) throw std::invalid_argument("run_eval: empty test set");

    if (train_set) {
        std::unordered_set<std::uint64_t> train_prints;
        train_prints.reserve(train_set->size());
        for (const auto& entry : *train_set) train_prints.insert(instance_fingerprint(entry.instance));
        for (std::size_t i = 0; i < test.size(); ++i) {
            if (train_prints.count(instance_fingerprint(test[i].instance)))
                throw std::invalid_argument("run_eval: test instance " + std::to_string(i) +
                                            " appears in the training set");
        }
    }

    EvalOutput out;
    const std::size_t count = test.size();
    std::vector<SampleResult> results(count);

    for (const auto& model : models) {
        for (int steps : cfg.inference_steps) {
            if (schedule.steps % steps != 0) {
                nlohmann::ordered_json err;
                err["error"] = "inference steps do not divide T";
                err["model_id"] = model.id;
                err["inference_steps"] = steps;
                err["T"] = schedule.steps;
                out.cell_errors.push_back(err.dump());
                continue;
            }
            for (int n_samples : cfg.parallel_samples) {
                SampleOptions opts;
                opts.refine_2opt = cfg.refine_2opt;
                opts.measure_time = cfg.measure_time;
                const int repeats = cfg.measure_time ? std::max(1, cfg.timing_repeats) : 1;

                std::vector<double> repeat_means(static_cast<std::size_t>(repeats), 0.0);
                std::vector<std::vector<double>> repeat_walls(
                    static_cast<std::size_t>(repeats), std::vector<double>(count, 0.0));
                for (int rep = 0; rep < repeats; ++rep) {
                    parallel_for(
                        count,
                        [&](std::size_t i) {
                            results[i] = sample_parallel(
                                model.params, test[i].instance, schedule, steps, n_samples,
                                derive_seed(cfg.seed, static_cast<std::uint64_t>(i)), opts);
                        },
                        cfg.threads);
                    double total = 0.0;
                    for (std::size_t i = 0; i < count; ++i) {
                        repeat_walls[static_cast<std::size_t>(rep)][i] = results[i].wall_ms;
                        total += results[i].wall_ms;
                    }
                    repeat_means[static_cast<std::size_t>(rep)] = total / static_cast<double>(count);
                }
                // median-of-repeats: pick the repeat whose mean is the median
                std::vector<int> order(static_cast<std::size_t>(repeats));
                for (int r = 0; r < repeats; ++r) order[static_cast<std::size_t>(r)] = r;
                std::sort(order.begin(), order.end(), [&](int a, int b) {
                    return repeat_means[static_cast<std::size_t>(a)] <
                           repeat_means[static_cast<std::size_t>(b)];
                });
                const int median_rep = order[static_cast<std::size_t>(repeats / 2)];

                EvalRow row;
                row.model_id = model.id;
                row.inference_steps = steps;
                row.parallel_samples = n_samples;
                row.n_instances = static_cast<int>(count);
                for (std::size_t i = 0; i < count; ++i) {
                    InstanceRecord rec;
                    rec.model_id = model.id;
                    rec.inference_steps = steps;
                    rec.parallel_samples = n_samples;
                    rec.instance = static_cast<int>(i);
                    rec.cost = results[i].tour.cost;
                    rec.opt_cost = test[i].tour.cost;
                    rec.drop_pct = cost_drop_pct(rec.cost, rec.opt_cost);
                    rec.wall_ms = repeat_walls[static_cast<std::size_t>(median_rep)][i];
                    rec.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
                    row.mean_drop_pct += rec.drop_pct;
                    row.mean_cost += rec.cost;
                    row.mean_opt_cost += rec.opt_cost;
                    row.mean_wall_ms += rec.wall_ms;
                    out.records.push_back(std::move(rec));
                }
                const double inv = 1.0 / static_cast<double>(count);
                row.mean_drop_pct *= inv;
                row.mean_cost *= inv;
                row.mean_opt_cost *= inv;
                row.mean_wall_ms *= inv;
                out.rows.push_back(std::move(row));
            }
        }
    }
    return out;
}

inline constexpr const char* kCsvHeader =
    "model_id,inference_steps,parallel_samples,mean_drop_pct,mean_cost,mean_opt_cost,"
    "n_instances,mean_wall_ms";

namespace detail {

inline std::string fmt_metric(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return buf;
}

}  // namespace detail

// CSV with the run configuration embedded as a leading comment line.
inline void write_csv(const std::string& path, const std::vector<EvalRow>& rows,
                      const std::string& config_json) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_csv: cannot write " + path);
    if (!config_json.empty()) out << "# config " << config_json << "\n";
    out << kCsvHeader << "\n";
    for (const auto& r : rows) {
        out << r.model_id << ',' << r.inference_steps << ',' << r.parallel_samples << ','
            << detail::fmt_metric(r.mean_drop_pct) << ',' << detail::fmt_metric(r.mean_cost) << ','
            << detail::fmt_metric(r.mean_opt_cost) << ',' << r.n_instances << ','
            << detail::fmt_metric(r.mean_wall_ms) << "\n";
    }
    if (!out) throw std::runtime_error("write_csv: write failed on " + path);
}

inline std::vector<EvalRow> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_csv: cannot open " + path);
    std::vector<EvalRow> rows;
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            if (line != kCsvHeader) throw std::runtime_error("read_csv: unexpected header in " + path);
            saw_header = true;
            continue;
        }
        std::stringstream ss(line);
        std::string field;
        EvalRow r;
        std::getline(ss, r.model_id, ',');
        std::getline(ss, field, ',');
        r.inference_steps = std::stoi(field);
        std::getline(ss, field, ',');
        r.parallel_samples = std::stoi(field);
        std::getline(ss, field, ',');
        r.mean_drop_pct = std::stod(field);
        std::getline(ss, field, ',');
        r.mean_cost = std::stod(field);
        std::getline(ss, field, ',');
        r.mean_opt_cost = std::stod(field);
        std::getline(ss, field, ',');
        r.n_instances = std::stoi(field);
        std::getline(ss, field, ',');
        r.mean_wall_ms = std::stod(field);
        rows.push_back(std::move(r));
    }
    if (!saw_header) throw std::runtime_error("read_csv: no header in " + path);
    return rows;
}

// Per-instance audit trail: first line carries the configuration, then one
// JSON object per evaluated (cell, instance) pair. Every CSV aggregate is
// recomputable from this file.
inline void write_audit(const std::string& path, const std::vector<InstanceRecord>& records,
                        const std::string& config_json) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_audit: cannot write " + path);
    out << "{\"config\": " << (config_json.empty() ? "null" : config_json) << "}\n";
    for (const auto& r : records) {
        out << "{\"model_id\": \"" << r.model_id << "\", \"inference_steps\": " << r.inference_steps
            << ", \"parallel_samples\": " << r.parallel_samples << ", \"instance\": " << r.instance
            << ", \"cost\": " << detail::fmt_double(r.cost)
            << ", \"opt_cost\": " << detail::fmt_double(r.opt_cost)
            << ", \"drop_pct\": " << detail::fmt_double(r.drop_pct)
            << ", \"wall_ms\": " << detail::fmt_double(r.wall_ms) << ", \"seed\": " << r.seed
            << "}\n";
    }
    if (!out) throw std::runtime_error("write_audit: write failed on " + path);
}

inline std::vector<InstanceRecord> read_audit(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_audit: cannot open " + path);
    std::vector<InstanceRecord> records;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;  // config line
            continue;
        }
        const nlohmann::json j = nlohmann::json::parse(line);
        InstanceRecord r;
        r.model_id = j.at("model_id").get<std::string>();
        r.inference_steps = j.at("inference_steps").get<int>();
        r.parallel_samples = j.at("parallel_samples").get<int>();
        r.instance = j.at("instance").get<int>();
        r.cost = j.at("cost").get<double>();
        r.opt_cost = j.at("opt_cost").get<double>();
        r.drop_pct = j.at("drop_pct").get<double>();
        r.wall_ms = j.at("wall_ms").get<double>();
        r.seed = j.at("seed").get<std::uint64_t>();
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace tspdiff
