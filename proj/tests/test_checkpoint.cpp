#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tspdiff/checkpoint.hpp"

using namespace tspdiff;

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path work_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "tspdiff_ckpt_test";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact at the file level", "[checkpoint]") {
    const DenoiserConfig cfg{2, 16, 8};
    DenoiserParams p = init_params(cfg, 5);
    Rng rng(1);
    for (double& v : p.values) v = rng.normal();  // generic values, incl. head

    const auto dir = work_dir();
    const std::string first = (dir / "a").string();
    const std::string second = (dir / "b").string();
    checkpoint_save(p, first);
    const DenoiserParams loaded = checkpoint_load(first + ".json");
    checkpoint_save(loaded, second);

    REQUIRE(slurp(first + ".bin") == slurp(second + ".bin"));
    REQUIRE(slurp(first + ".json") == slurp(second + ".json"));

    // loading reproduces exactly the float32-rounded values
    REQUIRE(loaded.config.layers == cfg.layers);
    REQUIRE(loaded.values.size() == p.values.size());
    for (std::size_t k = 0; k < p.values.size(); ++k)
        REQUIRE(loaded.values[k] == static_cast<double>(static_cast<float>(p.values[k])));

    // a reload is identical to the first load
    const DenoiserParams reloaded = checkpoint_load(first + ".json");
    REQUIRE(reloaded.values == loaded.values);
}

TEST_CASE("loaded parameters drive identical forwards", "[checkpoint]") {
    const DenoiserConfig cfg{2, 16, 8};
    DenoiserParams p = init_params(cfg, 9);
    Rng rng(2);
    for (double& v : p.values) v = rng.uniform(-0.3, 0.3);

    const auto dir = work_dir();
    const std::string prefix = (dir / "fwd").string();
    checkpoint_save(p, prefix);
    const DenoiserParams a = checkpoint_load(prefix + ".json");
    const DenoiserParams b = checkpoint_load(prefix + ".json");

    const TspInstance inst = generate_instance(6, 3);
    const EdgeVec noisy = Rng(4).normal_vec(static_cast<std::size_t>(inst.edge_count()));
    REQUIRE(denoiser_forward(a, inst, noisy, 0.5) == denoiser_forward(b, inst, noisy, 0.5));
}

TEST_CASE("checkpoint loader rejects corrupt inputs", "[checkpoint]") {
    const auto dir = work_dir();
    REQUIRE_THROWS_AS(checkpoint_load((dir / "missing.json").string()), std::runtime_error);

    const DenoiserConfig cfg{1, 8, 4};
    const std::string prefix = (dir / "tamper").string();
    checkpoint_save(init_params(cfg, 1), prefix);

    SECTION("wrong format version") {
        auto text = slurp(prefix + ".json");
        const auto at = text.find("\"format_version\": 1");
        REQUIRE(at != std::string::npos);
        text.replace(at, std::string("\"format_version\": 1").size(), "\"format_version\": 9");
        std::ofstream(prefix + ".json", std::ios::trunc) << text;
        REQUIRE_THROWS_WITH(checkpoint_load(prefix + ".json"),
                            Catch::Matchers::ContainsSubstring("format version"));
    }
    SECTION("truncated blob") {
        auto blob = slurp(prefix + ".bin");
        blob.resize(blob.size() - 4);
        std::ofstream(prefix + ".bin", std::ios::binary | std::ios::trunc) << blob;
        REQUIRE_THROWS_WITH(checkpoint_load(prefix + ".json"),
                            Catch::Matchers::ContainsSubstring("truncated"));
    }
}
