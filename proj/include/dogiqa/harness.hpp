#pragma once

// Dataset ingestion, c_max discovery, the scoring pipeline, and report
// emission.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dogiqa/backends.hpp"
#include "dogiqa/cache.hpp"
#include "dogiqa/core.hpp"
#include "dogiqa/imageio.hpp"

namespace dogiqa {

struct ManifestEntry {
  std::string image_id;  // image_path exactly as written in the manifest
  std::filesystem::path image_path;
  double mos = 0.0;
};

struct DatasetManifest {
  std::string name;
  std::vector<ManifestEntry> entries;
};

// Calls `row` for every data row of an `image_path,mos` CSV without holding
// the rows in memory. Returns the row count.
std::size_t stream_manifest(const std::filesystem::path& path,
                            const std::function<void(ManifestEntry&&)>& row);

// Relative paths resolve against the manifest's directory.
DatasetManifest ingest_manifest(const std::filesystem::path& path);

struct Failure {
  std::string image_id;
  ErrorCode code = ErrorCode::Io;
  std::string reason;
};

class MaskSource {
 public:
  virtual ~MaskSource() = default;
  virtual std::string describe() const = 0;
  virtual MaskSet raw_masks(const LoadedImage& image) = 0;
};

// Reads <dir>/<mask_file_name(image id)>.
class MaskDirSource : public MaskSource {
 public:
  explicit MaskDirSource(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::string describe() const override { return "masks-dir:" + dir_.string(); }
  MaskSet raw_masks(const LoadedImage& image) override;

 private:
  std::filesystem::path dir_;
};

class SegmenterSource : public MaskSource {
 public:
  SegmenterSource(SegmenterBackend& backend, RetryPolicy retry = {})
      : backend_(backend), retry_(retry) {}
  std::string describe() const override { return "segmenter:" + backend_.backend_id(); }
  MaskSet raw_masks(const LoadedImage& image) override;

 private:
  SegmenterBackend& backend_;
  RetryPolicy retry_;
};

nlohmann::json config_to_json(const AggregationConfig& cfg);
// Missing keys keep the defaults of `base`.
AggregationConfig config_from_json(const nlohmann::json& j, AggregationConfig base = default_config());

struct CmaxResult {
  int c_max = 0;
  std::vector<std::pair<std::string, int>> counts;  // manifest order, successes only
  std::vector<Failure> failures;
};

CmaxResult discover_cmax(const DatasetManifest& manifest, MaskSource& masks,
                         const AggregationConfig& cfg, int jobs = 1);

inline constexpr const char* kCmaxFileName = "cmax.json";

void write_cmax_record(const std::filesystem::path& cache_dir, const CmaxResult& result,
                       const AggregationConfig& cfg, const std::string& dataset);
// The persisted c_max, if one exists for the same area threshold.
std::optional<int> read_cmax_record(const std::filesystem::path& cache_dir, const AggregationConfig& cfg);

struct ImageResult {
  ImageVerdict verdict;
  double mos = 0.0;
};

struct PipelineOptions {
  int jobs = 1;
  RetryPolicy retry;
  // Embedded verbatim as the report's "config"; defaults to config_to_json(cfg).
  std::optional<nlohmann::json> config_snapshot;
};

struct EvalReport {
  nlohmann::json config;
  std::vector<ImageResult> images;
  std::vector<Failure> failures;
  std::optional<double> srcc;
  std::optional<double> plcc;
  std::string metric_status = "ok";
  nlohmann::json provenance;
  std::string generated_at;

  int n_ok() const { return static_cast<int>(images.size()); }
  int n_failed() const { return static_cast<int>(failures.size()); }
  // Every image failed and at least one failure was a backend outage.
  bool backend_exhausted() const;

  nlohmann::json to_json(bool include_timestamp = true) const;
  static EvalReport from_json(const nlohmann::json& j);
};

// Scores every manifest image and aggregates. `masks` may be null only for
// WholeOnly runs. Verdicts follow manifest order.
EvalReport run_pipeline(const DatasetManifest& manifest, const AggregationConfig& cfg,
                        ScorerBackend& scorer, MaskSource* masks, ScoreCache& cache,
                        const PipelineOptions& options = {});

void write_report(const std::filesystem::path& path, const EvalReport& report);
EvalReport read_report(const std::filesystem::path& path);
void write_images_csv(const std::filesystem::path& path, const EvalReport& report);
// Two columns: mos, s_dog.
void write_scatter_csv(const std::filesystem::path& path, const EvalReport& report);

// Runs `fn(i)` for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace dogiqa
