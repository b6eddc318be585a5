#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace multicam::cli {

/// Every knob of a pipeline run. Loaded from --config (JSON), then
/// overridden by explicit flags.
struct RunConfig {
  std::vector<std::string> inputs;
  std::string output;
  std::string gt;
  std::string models;
  double inlier_thresh = 0.05;    // meters
  double keyframe_thresh = 0.05;  // meters
  double huber_delta = 0.02;      // meters
  std::size_t min_inliers = 3;
  bool ba = true;
  int ba_iters = 30;
  double ba_tol = 1e-6;
  double align_window = 0.033;  // seconds
  // meters along the viewing ray; unset keeps the noise preset's value
  std::optional<double> depth_noise;
  std::uint64_t seed = 0;
  std::string preset = "near";
  std::string noise = "default";
  double drift_trans = 0.0;  // m / sqrt(s)
  double drift_rot = 0.0;    // rad / sqrt(s)
  double duration = 10.0;
  std::string format = "csv";
  bool with_timing = false;
  std::string method;
};

/// Throws InvalidConfig on non-positive thresholds or unknown enums.
void validate(const RunConfig &config);
nlohmann::json to_json(const RunConfig &config);
RunConfig run_config_from_json(const nlohmann::json &doc);

/// Entry point shared by the executable and in-process tests. `args`
/// excludes the program name. Returns the process exit code.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitIo = 4,
  kExitData = 5,
  kExitPipeline = 6,
};

}  // namespace multicam::cli
