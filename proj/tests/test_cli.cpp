#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "tlab/io.hpp"
#include "tlab/runner.hpp"

using namespace tlab;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "tlab_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

int run_binary(const std::string& args) {
    const char* bin = std::getenv("TLAB_BIN");
    REQUIRE(bin != nullptr);
    const int rc = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("config round trip is the identity") {
    const json cfg = {{"system", "gauss"}, {"sigma", 0.5}, {"n_max", 20},
                      {"seed", 7},         {"t_list", {30.0, 60.0}}};
    const json reparsed = json::parse(cfg.dump());
    CHECK(reparsed == cfg);
}

TEST_CASE("federer pipeline writes balanced tables at sigma zero") {
    const auto out = fresh_dir("federer0");
    json cfg{{"sigma", 0.0}, {"n_max", 8}, {"cross_check_n", 4}, {"grid_n", 24}};
    CHECK(run_pipeline_json("federer", cfg, out) == kExitOk);

    const json manifest = json::parse(slurp(out / "manifest.json"));
    REQUIRE(manifest.at("experiments").size() == 1);
    CHECK(manifest.at("experiments")[0].at("pass").get<bool>());

    const std::string csv = slurp(out / "federer_sigma0.csv");
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    CHECK(line == "n,left,right,ratio,log2_ratio");
    while (std::getline(is, line)) {
        const auto last_two = line.rfind(",1,0");
        CHECK(last_two != std::string::npos);  // ratio 1, log2 ratio 0
    }
}

TEST_CASE("unknown config keys are rejected") {
    const auto out = fresh_dir("badkey");
    json cfg{{"sigma", 0.0}, {"n_max", 8}, {"bogus_knob", 3}};
    CHECK(run_pipeline_json("federer", cfg, out) == kExitError);
}

TEST_CASE("randomized pipelines demand a seed") {
    const auto out = fresh_dir("noseed");
    json cfg{{"system", "gauss"}, {"t_list", {40.0}}, {"n_max", 6}, {"sample_count", 2}};
    CHECK(run_pipeline_json("decay", cfg, out) == kExitError);
}

TEST_CASE("decay below the frequency threshold exits with the assumption code") {
    const auto out = fresh_dir("lowt");
    json cfg{{"system", "gauss"}, {"t_list", {1.0}}, {"n_max", 8},
             {"sample_count", 2}, {"seed", 3},       {"grid_n", 48}};
    CHECK(run_pipeline_json("decay", cfg, out) == kExitAssumption);
}

TEST_CASE("seeded reruns are byte identical") {
    json cfg{{"system", "gauss"}, {"t_list", {12.0}}, {"n_max", 8},
             {"sample_count", 4}, {"seed", 11},       {"grid_n", 48}};
    const auto out1 = fresh_dir("rerun1");
    const auto out2 = fresh_dir("rerun2");
    REQUIRE(run_pipeline_json("decay", cfg, out1) == kExitOk);
    REQUIRE(run_pipeline_json("decay", cfg, out2) == kExitOk);
    const std::string name = "decay_gauss_sigma0_t12_seed11.csv";
    const std::string a = slurp(out1 / name);
    const std::string b = slurp(out2 / name);
    REQUIRE(!a.empty());
    CHECK(a == b);
}

TEST_CASE("spectrum summary line carries the nine-digit lambda") {
    const auto out = fresh_dir("spectrum");
    json cfg{{"system", "gauss"}, {"grid_n", 64}, {"sigma", 0.0}};
    REQUIRE(run_pipeline_json("spectrum", cfg, out) == kExitOk);
    CHECK(run_binary("summary " + (out / "manifest.json").string()) == 0);

    // capture the line through a pipe
    const char* bin = std::getenv("TLAB_BIN");
    REQUIRE(bin != nullptr);
    const std::string cmd = std::string(bin) + " summary " +
                            (out / "manifest.json").string() + " > " +
                            (out / "summary.txt").string();
    REQUIRE(std::system(cmd.c_str()) == 0);
    const std::string text = slurp(out / "summary.txt");
    CHECK(text.find("lambda=1.000000000") != std::string::npos);
    CHECK(text.find("PASS") != std::string::npos);
}

TEST_CASE("uni summary reproduces the stored D digits") {
    const auto out = fresh_dir("uni");
    json cfg{{"system", "gauss"}, {"n", 10}};
    REQUIRE(run_pipeline_json("uni", cfg, out) == kExitOk);
    const json rep = json::parse(slurp(out / "uni_gauss_n10.json"));
    const std::string d_digits = json(rep.at("D")).dump();

    const char* bin = std::getenv("TLAB_BIN");
    REQUIRE(bin != nullptr);
    const std::string cmd = std::string(bin) + " summary " +
                            (out / "manifest.json").string() + " > " +
                            (out / "summary.txt").string();
    REQUIRE(std::system(cmd.c_str()) == 0);
    const std::string text = slurp(out / "summary.txt");
    CHECK(text.find("D=" + d_digits) != std::string::npos);
}

TEST_CASE("empty manifest summarizes to zero experiments") {
    const auto out = fresh_dir("empty");
    write_json_atomic(out / "manifest.json",
                      json{{"schema_version", 1}, {"experiments", json::array()}});
    CHECK(run_binary("summary " + (out / "manifest.json").string()) == 0);
}

TEST_CASE("summary fails when outputs are missing") {
    const auto out = fresh_dir("missing");
    json manifest{{"schema_version", 1},
                  {"experiments",
                   json::array({json{{"pipeline", "uni"},
                                     {"params", json::object()},
                                     {"metrics", json::object()},
                                     {"outputs", {"gone.json"}},
                                     {"pass", true}}})}};
    write_json_atomic(out / "manifest.json", manifest);
    CHECK(run_binary("summary " + (out / "manifest.json").string()) == kExitError);
}

TEST_CASE("binary exit codes") {
    CHECK(run_binary("nonsense --config x.json") == kExitError);

    const auto out = fresh_dir("binary");
    // malformed config
    write_text_atomic(out / "bad.json", "{not json");
    CHECK(run_binary("federer --config " + (out / "bad.json").string()) == kExitError);

    // a real run through the binary with overrides
    write_json_atomic(out / "fed.json",
                      json{{"sigma", 0.5}, {"n_max", 6}, {"cross_check_n", 0}});
    CHECK(run_binary("federer --config " + (out / "fed.json").string() + " --out " +
                     (out / "run").string()) == 0);
    CHECK(fs::exists(out / "run" / "federer_sigma0p5.csv"));

    // validate through the binary on a custom system config
    CHECK(run_binary("validate --config /root/proj/configs/custom_tripling.json --out " +
                     (out / "valrun").string()) == 0);
}

TEST_CASE("experiments write only inside the output directory") {
    const auto out = fresh_dir("contained");
    json cfg{{"sigma", 0.25}, {"n_max", 6}, {"cross_check_n", 0}};
    REQUIRE(run_pipeline_json("federer", cfg, out) == kExitOk);
    std::size_t files = 0;
    for (auto& entry : fs::recursive_directory_iterator(out)) {
        (void)entry;
        ++files;
    }
    CHECK(files == 3);  // report json, csv, manifest
}
