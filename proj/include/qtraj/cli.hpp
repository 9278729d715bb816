// cli.hpp — run configuration, artifact emission, and the command layer
// behind the command-line front-end.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "qtraj/trajectory.hpp"

#include <json.hpp>

namespace qtraj {

struct EmissionOptions {
    int histogram_bins = 0;  // <= 0 selects Freedman-Diaconis
    std::vector<double> snapshot_times;
};

struct SweepOptions {
    std::vector<double> gammas;
    std::pair<int, int> pair{0, 1};
};

// One JSON document drives a whole run. Command-line flags (--seed, --out,
// --n-traj, --threads) override the corresponding fields.
struct RunConfig {
    nlohmann::json model;  // model recipe, see model_from_json
    UnravelingConfig unraveling;
    std::string experiment = "trajectory";
    std::string out_dir = "out";
    int n_traj = 1;
    int threads = 1;
    EmissionOptions emission;
    SweepOptions sweep;
    std::pair<int, int> pair{-1, -1};  // sector selector; (-1,-1) means all
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);

// FNV-1a 64-bit, hex encoded.
std::string content_hash(const std::string& content);

// Full double precision, scientific, locale independent.
std::string format_double(double x);

// Writes `content` prefixed by two comment lines carrying the serialized
// config and the content hash; returns the hash.
std::string write_csv_artifact(const std::string& path, const nlohmann::json& config,
                               const std::string& content);

// Writes `payload` wrapped with "config" and "content_hash" fields.
std::string write_json_artifact(const std::string& path, const nlohmann::json& config,
                                const nlohmann::json& payload);

void cmd_trajectory(const RunConfig& c);
void cmd_ensemble(const RunConfig& c);
void cmd_sweep_gamma(const RunConfig& c);
void cmd_spectrum(const RunConfig& c);
void cmd_steady_states(const RunConfig& c);
void cmd_detect_traceless(const RunConfig& c);
void cmd_validate_model(const RunConfig& c);

// Dispatches on c.experiment; returns the process exit code (0 success,
// 2 config error, 3 numerical failure, 4 internal-consistency failure) and
// prints an error JSON to stderr on failure.
int run_command(const RunConfig& c);

int cli_main(int argc, char** argv);

}  // namespace qtraj
