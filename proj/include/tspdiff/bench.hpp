#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tspdiff/checkpoint.hpp"
#include "tspdiff/dataset.hpp"
#include "tspdiff/eval.hpp"
#include "tspdiff/svg.hpp"
#include "tspdiff/trainer.hpp"

namespace tspdiff {

// One JSON document with sections {data, schedule, denoiser, train, distill,
// eval}; command-line flags override file values. The resolved config is
// embedded in every output artifact.
struct BenchConfig {
    struct Data {
        int n = 10;
        int train_count = 200;
        int test_count = 100;
        std::uint64_t train_seed = 1;
        std::uint64_t test_seed = 2;
    } data;
    struct Sched {
        int steps = kDefaultDiffusionSteps;
    } schedule;
    DenoiserConfig denoiser;
    std::uint64_t denoiser_init_seed = 0;  // folded into train.seed stream
    TrainConfig train;
    DistillConfig distill;
    EvalConfig eval;
};

inline nlohmann::ordered_json bench_config_to_json(const BenchConfig& cfg) {
    nlohmann::ordered_json j;
    j["data"] = {{"n", cfg.data.n},
                 {"train_count", cfg.data.train_count},
                 {"test_count", cfg.data.test_count},
                 {"train_seed", cfg.data.train_seed},
                 {"test_seed", cfg.data.test_seed}};
    j["schedule"] = {{"steps", cfg.schedule.steps}};
    j["denoiser"] = {{"layers", cfg.denoiser.layers},
                     {"width", cfg.denoiser.width},
                     {"time_embed_dim", cfg.denoiser.time_embed_dim}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"learning_rate", cfg.train.learning_rate},
                  {"seed", cfg.train.seed},
                  {"adam", cfg.train.adam}};
    j["distill"] = {{"initial_steps", cfg.distill.initial_steps},
                    {"rounds", cfg.distill.rounds},
                    {"learning_rate", cfg.distill.learning_rate},
                    {"max_steps_per_round", cfg.distill.max_steps_per_round},
                    {"batch_size", cfg.distill.batch_size},
                    {"plateau_rel_tol", cfg.distill.plateau_rel_tol},
                    {"plateau_window", cfg.distill.plateau_window},
                    {"seed", cfg.distill.seed},
                    {"adam", cfg.distill.adam}};
    j["eval"] = {{"inference_steps", cfg.eval.inference_steps},
                 {"parallel_samples", cfg.eval.parallel_samples},
                 {"seed", cfg.eval.seed},
                 {"refine_2opt", cfg.eval.refine_2opt},
                 {"measure_time", cfg.eval.measure_time},
                 {"timing_repeats", cfg.eval.timing_repeats}};
    return j;
}

inline BenchConfig bench_config_from_json(const nlohmann::json& j) {
    BenchConfig cfg;
    if (j.contains("data")) {
        const auto& d = j.at("data");
        if (d.contains("n")) cfg.data.n = d.at("n").get<int>();
        if (d.contains("train_count")) cfg.data.train_count = d.at("train_count").get<int>();
        if (d.contains("test_count")) cfg.data.test_count = d.at("test_count").get<int>();
        if (d.contains("train_seed")) cfg.data.train_seed = d.at("train_seed").get<std::uint64_t>();
        if (d.contains("test_seed")) cfg.data.test_seed = d.at("test_seed").get<std::uint64_t>();
    }
    if (j.contains("schedule") && j.at("schedule").contains("steps"))
        cfg.schedule.steps = j.at("schedule").at("steps").get<int>();
    if (j.contains("denoiser")) {
        const auto& d = j.at("denoiser");
        if (d.contains("layers")) cfg.denoiser.layers = d.at("layers").get<int>();
        if (d.contains("width")) cfg.denoiser.width = d.at("width").get<int>();
        if (d.contains("time_embed_dim"))
            cfg.denoiser.time_embed_dim = d.at("time_embed_dim").get<int>();
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        if (t.contains("epochs")) cfg.train.epochs = t.at("epochs").get<int>();
        if (t.contains("batch_size")) cfg.train.batch_size = t.at("batch_size").get<int>();
        if (t.contains("learning_rate")) cfg.train.learning_rate = t.at("learning_rate").get<double>();
        if (t.contains("seed")) cfg.train.seed = t.at("seed").get<std::uint64_t>();
        if (t.contains("adam")) cfg.train.adam = t.at("adam").get<bool>();
    }
    if (j.contains("distill")) {
        const auto& d = j.at("distill");
        if (d.contains("initial_steps")) cfg.distill.initial_steps = d.at("initial_steps").get<int>();
        if (d.contains("rounds")) cfg.distill.rounds = d.at("rounds").get<int>();
        if (d.contains("learning_rate"))
            cfg.distill.learning_rate = d.at("learning_rate").get<double>();
        if (d.contains("max_steps_per_round"))
            cfg.distill.max_steps_per_round = d.at("max_steps_per_round").get<int>();
        if (d.contains("batch_size")) cfg.distill.batch_size = d.at("batch_size").get<int>();
        if (d.contains("plateau_rel_tol"))
            cfg.distill.plateau_rel_tol = d.at("plateau_rel_tol").get<double>();
        if (d.contains("plateau_window"))
            cfg.distill.plateau_window = d.at("plateau_window").get<int>();
        if (d.contains("seed")) cfg.distill.seed = d.at("seed").get<std::uint64_t>();
        if (d.contains("adam")) cfg.distill.adam = d.at("adam").get<bool>();
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        if (e.contains("inference_steps"))
            cfg.eval.inference_steps = e.at("inference_steps").get<std::vector<int>>();
        if (e.contains("parallel_samples"))
            cfg.eval.parallel_samples = e.at("parallel_samples").get<std::vector<int>>();
        if (e.contains("seed")) cfg.eval.seed = e.at("seed").get<std::uint64_t>();
        if (e.contains("refine_2opt")) cfg.eval.refine_2opt = e.at("refine_2opt").get<bool>();
        if (e.contains("measure_time")) cfg.eval.measure_time = e.at("measure_time").get<bool>();
        if (e.contains("timing_repeats")) cfg.eval.timing_repeats = e.at("timing_repeats").get<int>();
    }
    return cfg;
}

inline BenchConfig load_bench_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_bench_config: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return bench_config_from_json(j);
}

inline void cmd_generate(int n, int count, std::uint64_t seed, const std::string& out_path) {
    write_dataset(out_path, build_dataset(n, count, seed));
}

// Trains the teacher, saves the checkpoint at <out_prefix>.{json,bin} and the
// loss curve at <out_prefix>_train_log.json.
inline TrainResult cmd_train(const BenchConfig& cfg, const std::string& data_path,
                             const std::string& out_prefix) {
    const auto data = load_dataset(data_path);
    TrainConfig tc = cfg.train;
    tc.diffusion_steps = cfg.schedule.steps;
    TrainResult result = train_teacher(data, tc, cfg.denoiser);
    checkpoint_save(result.params, out_prefix);

    nlohmann::ordered_json log;
    log["config"] = bench_config_to_json(cfg);
    log["losses"] = result.losses;
    std::ofstream out(out_prefix + "_train_log.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cmd_train: cannot write training log");
    out << log.dump(2) << "\n";
    return result;
}

inline DistillReport cmd_distill(const BenchConfig& cfg, const std::string& teacher_manifest,
                                 const std::string& data_path, const std::string& out_dir) {
    const auto data = load_dataset(data_path);
    const DenoiserParams teacher = checkpoint_load(teacher_manifest);
    const Schedule schedule = make_schedule(cfg.schedule.steps);
    DistillConfig dc = cfg.distill;
    dc.checkpoint_dir = out_dir;
    auto [student, report] = progressive_distill(teacher, data, dc, schedule);
    (void)student;

    nlohmann::ordered_json jr = distill_report_to_json(report);
    jr["config"] = bench_config_to_json(cfg);
    std::filesystem::create_directories(out_dir);
    const std::string report_path =
        (std::filesystem::path(out_dir) / "distill_report.json").string();
    std::ofstream out(report_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cmd_distill: cannot write " + report_path);
    out << jr.dump(2) << "\n";
    return report;
}

struct EvalModelRef {
    std::string id;
    std::string manifest_path;
};

inline EvalOutput cmd_eval(const BenchConfig& cfg, const std::vector<EvalModelRef>& model_refs,
                           const std::string& test_path, const std::string& train_path,
                           const std::string& csv_path, const std::string& audit_path,
                           const std::string& svg_path = "") {
    std::vector<EvalModel> models;
    models.reserve(model_refs.size());
    for (const auto& ref : model_refs) models.push_back({ref.id, checkpoint_load(ref.manifest_path)});
    const auto test = load_dataset(test_path);
    std::vector<DatasetEntry> train;
    if (!train_path.empty()) train = load_dataset(train_path);
    const Schedule schedule = make_schedule(cfg.schedule.steps);

    EvalOutput out =
        run_eval(models, test, schedule, cfg.eval, train_path.empty() ? nullptr : &train);
    const std::string config_json = bench_config_to_json(cfg).dump();
    write_csv(csv_path, out.rows, config_json);
    write_audit(audit_path, out.records, config_json);
    if (!svg_path.empty()) write_drop_plot(svg_path, out.rows, config_json);
    return out;
}

inline void cmd_plot(const std::string& csv_path, const std::string& svg_path) {
    // carry the embedded config comment over from the CSV when present
    std::string config_json;
    {
        std::ifstream in(csv_path);
        std::string first;
        if (in && std::getline(in, first) && first.rfind("# config ", 0) == 0)
            config_json = first.substr(9);
    }
    write_drop_plot(svg_path, read_csv(csv_path), config_json);
}

struct ExperimentPaths {
    std::string train_data, test_data;
    std::string teacher_manifest;
    std::vector<std::string> student_manifests;  // in distillation order
    std::string report_path;
    std::string csv_path, audit_path, svg_path;
};

// Full pipeline in one call, staged through the same files the CLI
// subcommands use: generate data, train the teacher, distill students,
// evaluate everything.
inline std::pair<ExperimentPaths, EvalOutput> run_experiment(const BenchConfig& cfg,
                                                             const std::string& work_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(work_dir);
    ExperimentPaths paths;
    paths.train_data = (fs::path(work_dir) / "train.jsonl").string();
    paths.test_data = (fs::path(work_dir) / "test.jsonl").string();

    if (cfg.data.train_seed == cfg.data.test_seed)
        throw std::invalid_argument("run_experiment: train and test seeds must differ");
    cmd_generate(cfg.data.n, cfg.data.train_count, cfg.data.train_seed, paths.train_data);
    cmd_generate(cfg.data.n, cfg.data.test_count, cfg.data.test_seed, paths.test_data);

    const std::string teacher_prefix = (fs::path(work_dir) / "teacher").string();
    cmd_train(cfg, paths.train_data, teacher_prefix);
    paths.teacher_manifest = teacher_prefix + ".json";

    const std::string student_dir = (fs::path(work_dir) / "students").string();
    const DistillReport report = cmd_distill(cfg, paths.teacher_manifest, paths.train_data, student_dir);
    paths.report_path = (fs::path(student_dir) / "distill_report.json").string();
    for (const auto& round : report.rounds) paths.student_manifests.push_back(round.checkpoint);

    std::vector<EvalModelRef> refs;
    refs.push_back({"teacher", paths.teacher_manifest});
    for (const auto& round : report.rounds)
        refs.push_back({std::to_string(round.round) + "x_student", round.checkpoint});

    paths.csv_path = (fs::path(work_dir) / "eval.csv").string();
    paths.audit_path = (fs::path(work_dir) / "eval_audit.jsonl").string();
    paths.svg_path = (fs::path(work_dir) / "eval.svg").string();
    EvalOutput out = cmd_eval(cfg, refs, paths.test_data, paths.train_data, paths.csv_path,
                              paths.audit_path, paths.svg_path);
    return {std::move(paths), std::move(out)};
}

}  // namespace tspdiff
