#ifndef TLAB_RUNNER_HPP
#define TLAB_RUNNER_HPP

#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

namespace tlab {

// exit codes: 0 success, 1 error (bad config, internal failure),
// 2 assumption violation (theorem hypotheses not met)
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitAssumption = 2;

struct RunOptions {
    std::filesystem::path config_path;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::pair<std::string, std::string>> overrides;  // --set key=value
};

const std::vector<std::string>& pipeline_names();

// Parses and strictly validates the config (unknown keys rejected), runs the
// pipeline, writes JSON reports, CSV series and a manifest under the output
// directory.
int run_pipeline(const std::string& pipeline, const RunOptions& opt);

// Library entry used by tests: config already parsed.
int run_pipeline_json(const std::string& pipeline, nlohmann::json config,
                      const std::filesystem::path& out_dir);

// One line per experiment from the manifest; exit 1 when a referenced
// output file is missing.
int summarize(const std::filesystem::path& manifest_path);

}  // namespace tlab

#endif
