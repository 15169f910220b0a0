#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dogiqa/backends.hpp"
#include "dogiqa/core.hpp"

namespace dogiqa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBackend = 3;

struct RunConfig {
  AggregationConfig agg = default_config();
  bool cmax_given = false;
  bool discover_cmax = false;
  std::filesystem::path manifest;
  std::filesystem::path masks_dir;
  std::filesystem::path raw_masks_dir;
  std::optional<std::filesystem::path> cache_dir;
  std::filesystem::path out;
  std::filesystem::path csv;
  std::filesystem::path scatter;
  std::string scorer_url;
  std::string scorer_id;
  std::string segmenter_url;
  std::string segmenter_id;
  std::string bearer_token;
  int jobs = 1;
  int retries = 3;
  std::uint64_t seed = 0;
  bool force = false;

  // Everything except scheduling knobs and secrets.
  nlohmann::json snapshot() const;
};

// Applies the keys of a JSON config file onto `cfg`.
void apply_config_file(RunConfig& cfg, const nlohmann::json& j);

// "mock:brightness", "mock:constant:<text>", or an http(s) base URL.
std::unique_ptr<ScorerBackend> make_scorer(const RunConfig& cfg);
std::unique_ptr<SegmenterBackend> make_segmenter(const RunConfig& cfg);

// Full command line entry point; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dogiqa::cli
