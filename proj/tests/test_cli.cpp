#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "leo/run_config.hpp"

using namespace leo;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const fs::path& cwd, std::string* output = nullptr,
            const std::string& env = "") {
    fs::path out = cwd / "cli_out.txt";
    std::string cmd = "cd " + cwd.string() + " && " + env + (env.empty() ? "" : " ") +
                      LEO_CLI_PATH + " " + args + " > " + out.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    if (output) {
        std::ifstream in(out);
        output->assign((std::istreambuf_iterator<char>(in)), {});
    }
    return WEXITSTATUS(status);
}

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("leo_cli_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_micro_config(const fs::path& file, uint64_t seed = 3) {
    nlohmann::json j = {
        {"seed", seed},
        {"workdir", "runs"},
        {"data",
         {{"n_videos", 2}, {"length", 4}, {"height", 16}, {"width", 16}, {"channels", 1},
          {"amplitude", 3.0}}},
        {"animator",
         {{"motion_dim", 4}, {"enc_base", 4}, {"feat_base", 4}, {"inpaint_base", 4},
          {"steps", 4}, {"batch", 2}, {"lr", 3e-4}}},
        {"diffusion", {{"timesteps", 8}, {"ddim_stride", 2}}},
        {"lmdm", {{"seq_len", 4}, {"base_channels", 8}, {"steps", 4}, {"batch", 2}}},
        {"simple_dm", {{"hidden", 16}, {"steps", 4}, {"batch", 4}}},
        {"cddpm", {{"base_channels", 4}, {"steps", 2}, {"batch", 1}}},
        {"transition", {{"window", 3}, {"steps", 2}, {"batch", 2}}},
        {"sample", {{"n_frames", 3}, {"count", 1}}},
        {"rollout", {{"n_chunks", 2}, {"chunk_len", 4}, {"t_trans", 3}}},
        {"eval", {{"clip_len", 3}, {"n_clips", 2}}}};
    std::ofstream out(file);
    out << j.dump(2);
}

}  // namespace

TEST_CASE("help lists every subcommand and unknown flags are rejected") {
    auto dir = temp_dir("help");
    std::string out;
    CHECK(run_cli("--help", dir, &out) == 0);
    for (const char* verb :
         {"make-data", "train-animator", "encode-codes", "train-lmdm", "train-simple-dm",
          "train-cddpm", "sample", "rollout", "edit", "eval"})
        CHECK(out.find(verb) != std::string::npos);

    CHECK(run_cli("make-data --no-such-flag", dir, &out) != 0);
    fs::remove_all(dir);
}

TEST_CASE("invalid config exits 1 and lists the offending fields") {
    auto dir = temp_dir("badcfg");
    nlohmann::json j = {{"seed", 1},
                        {"data", {{"n_videos", 0}, {"height", 10}}},
                        {"lmdm", {{"seq_len", 1}}}};
    std::ofstream(dir / "bad.json") << j.dump();
    std::string out;
    CHECK(run_cli("make-data -c bad.json", dir, &out) == 1);
    CHECK(out.find("data.n_videos") != std::string::npos);
    CHECK(out.find("data.height") != std::string::npos);
    CHECK(out.find("lmdm.seq_len") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("missing stage dependency exits 2 and names the stage") {
    auto dir = temp_dir("deps");
    write_micro_config(dir / "cfg.json");
    std::string out;
    CHECK(run_cli("train-lmdm -c cfg.json", dir, &out) == 2);
    CHECK(out.find("codes") != std::string::npos);
    CHECK(run_cli("train-animator -c cfg.json", dir, &out) == 2);
    CHECK(out.find("dataset") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("LEO_SEED overrides the config seed (changes the run directory)") {
    auto dir = temp_dir("seedenv");
    write_micro_config(dir / "cfg.json");
    std::string out;
    CHECK(run_cli("make-data -c cfg.json", dir, &out) == 0);
    CHECK(run_cli("make-data -c cfg.json", dir, &out, "LEO_SEED=99") == 0);
    // two run dirs now exist: one per effective seed
    int run_dirs = 0;
    for (auto& e : fs::directory_iterator(dir / "runs"))
        if (e.is_directory()) ++run_dirs;
    CHECK(run_dirs == 2);
    fs::remove_all(dir);
}

TEST_SUITE("slow") {
    TEST_CASE("identical config and seed reproduce identical artifacts") {
        auto d1 = temp_dir("repro1");
        auto d2 = temp_dir("repro2");
        for (auto& d : {d1, d2}) {
            write_micro_config(d / "cfg.json");
            std::string out;
            REQUIRE(run_cli("make-data -c cfg.json", d, &out) == 0);
            REQUIRE(run_cli("train-animator -c cfg.json", d, &out) == 0);
            REQUIRE(run_cli("encode-codes -c cfg.json", d, &out) == 0);
        }
        // byte-compare every dataset frame, checkpoint blob and code blob
        int compared = 0;
        for (const auto& entry : fs::recursive_directory_iterator(d1 / "runs")) {
            if (!entry.is_regular_file()) continue;
            auto rel = fs::relative(entry.path(), d1);
            if (entry.path().extension() == ".jsonl") continue;  // wallclock in logs
            std::ifstream f1(entry.path(), std::ios::binary), f2(d2 / rel, std::ios::binary);
            REQUIRE(f2.good());
            std::string s1((std::istreambuf_iterator<char>(f1)), {});
            std::string s2((std::istreambuf_iterator<char>(f2)), {});
            CHECK(s1 == s2);
            ++compared;
        }
        CHECK(compared > 10);
        fs::remove_all(d1);
        fs::remove_all(d2);
    }
}
