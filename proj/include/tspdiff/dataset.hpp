#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tspdiff/instance.hpp"
#include "tspdiff/rng.hpp"
#include "tspdiff/solve.hpp"

namespace tspdiff {

struct DatasetEntry {
    TspInstance instance;
    Tour tour;
    std::string label_kind;  // "exact" or "2opt"
};

namespace detail {

// Shortest-but-exact double formatting: 17 significant digits always
// round-trip, and fixed formatting keeps regenerated files byte-identical.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// One instance per line:
// {"n": ..., "coords": [[x, y], ...], "tour": [...], "cost": ..., "label_kind": "..."}
inline std::string dataset_line(const DatasetEntry& entry) {
    std::string line = "{\"n\": " + std::to_string(entry.instance.n) + ", \"coords\": [";
    for (int i = 0; i < entry.instance.n; ++i) {
        if (i) line += ", ";
        line += "[" + detail::fmt_double(entry.instance.coords[static_cast<std::size_t>(i)][0]) +
                ", " + detail::fmt_double(entry.instance.coords[static_cast<std::size_t>(i)][1]) + "]";
    }
    line += "], \"tour\": [";
    for (std::size_t i = 0; i < entry.tour.perm.size(); ++i) {
        if (i) line += ", ";
        line += std::to_string(entry.tour.perm[i]);
    }
    line += "], \"cost\": " + detail::fmt_double(entry.tour.cost) + ", \"label_kind\": \"" +
            entry.label_kind + "\"}";
    return line;
}

inline void write_dataset(const std::string& path, const std::vector<DatasetEntry>& entries) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_dataset: cannot write " + path);
    for (const auto& entry : entries) out << dataset_line(entry) << "\n";
    if (!out) throw std::runtime_error("write_dataset: write failed on " + path);
}

inline DatasetEntry parse_dataset_line(const std::string& line) {
    const nlohmann::json j = nlohmann::json::parse(line);
    std::vector<std::array<double, 2>> coords;
    for (const auto& c : j.at("coords"))
        coords.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    if (static_cast<int>(coords.size()) != j.at("n").get<int>())
        throw std::runtime_error("dataset: vertex count does not match coords");

    DatasetEntry entry;
    entry.instance = make_instance(std::move(coords));
    std::vector<int> perm = j.at("tour").get<std::vector<int>>();
    entry.tour = make_tour(entry.instance, std::move(perm));
    const double stored_cost = j.at("cost").get<double>();
    if (std::abs(stored_cost - entry.tour.cost) > 1e-9 * std::max(1.0, entry.tour.cost))
        throw std::runtime_error("dataset: stored cost disagrees with recomputed tour cost");
    entry.tour.cost = stored_cost;
    entry.label_kind = j.at("label_kind").get<std::string>();
    return entry;
}

inline std::vector<DatasetEntry> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
    std::vector<DatasetEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        entries.push_back(parse_dataset_line(line));
    }
    if (entries.empty()) throw std::runtime_error("load_dataset: no instances in " + path);
    return entries;
}

// Random instances with tour labels: exact (Held-Karp) up to 16 vertices,
// 2-opt above. Row i is generated from derive_seed(seed, i), so the file is
// byte-identical across regenerations and rows may be produced in parallel.
inline std::vector<DatasetEntry> build_dataset(int n, int count, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("build_dataset: need at least one instance");
    std::vector<DatasetEntry> entries;
    entries.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const std::uint64_t row_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
        DatasetEntry entry;
        entry.instance = generate_instance(n, row_seed);
        if (n <= kExactSolverLimit) {
            entry.tour = solve_exact(entry.instance);
            entry.label_kind = "exact";
        } else {
            entry.tour = solve_heuristic(entry.instance, derive_seed(row_seed, 1));
            entry.label_kind = "2opt";
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

// Order-independent fingerprint of the point set; used to refuse evaluation
// on instances that appear in a training file.
inline std::uint64_t instance_fingerprint(const TspInstance& inst) {
    std::uint64_t h = 0x243F6A8885A308D3ull ^ static_cast<std::uint64_t>(inst.n);
    for (const auto& c : inst.coords) {
        std::uint64_t bits_x, bits_y;
        static_assert(sizeof(double) == sizeof(std::uint64_t));
        std::memcpy(&bits_x, &c[0], sizeof(bits_x));
        std::memcpy(&bits_y, &c[1], sizeof(bits_y));
        std::uint64_t s = h ^ bits_x;
        h = splitmix64(s) ^ bits_y;
        h = splitmix64(h);
    }
    return h;
}

}  // namespace tspdiff
