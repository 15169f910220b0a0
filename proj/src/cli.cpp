#include "dogiqa/cli.hpp"

#include <cstdio>
#include <fstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "dogiqa/cache.hpp"
#include "dogiqa/harness.hpp"
#include "dogiqa/maskproc.hpp"
#include "dogiqa/metrics.hpp"
#include "dogiqa/prompting.hpp"

namespace dogiqa::cli {

namespace {

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> manifest;
  std::optional<std::string> masks_dir;
  std::optional<std::string> raw_masks_dir;
  std::optional<std::string> scorer_url;
  std::optional<std::string> scorer_id;
  std::optional<std::string> segmenter_url;
  std::optional<std::string> segmenter_id;
  std::optional<std::string> bearer_token;
  std::optional<int> k;
  std::optional<double> area_threshold;
  std::optional<int> cmax;
  std::optional<std::string> crop_mode;
  std::optional<std::string> agg;
  std::optional<std::string> seg_score;
  std::optional<std::string> standard;
  std::optional<std::vector<std::string>> labels;
  std::optional<int> jobs;
  std::optional<int> retries;
  std::optional<std::string> cache_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> csv;
  std::optional<std::string> scatter;
  bool force = false;
  bool discover_cmax = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file; flags override its values");
  cmd->add_option("--manifest", f.manifest, "CSV with image_path,mos columns");
  cmd->add_option("--cache-dir", f.cache_dir, "Score cache directory (env DOGIQA_CACHE_DIR)");
  cmd->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Recorded in the report for reproducibility");
  cmd->add_option("--area-threshold", f.area_threshold, "Minimum mask area as a fraction of the image");
  cmd->add_option("--segmenter-url", f.segmenter_url, "Segmentation server base URL");
  cmd->add_option("--segmenter-id", f.segmenter_id, "Backend id recorded for the segmenter");
  cmd->add_option("--bearer-token", f.bearer_token, "Static bearer token for remote backends");
  cmd->add_option("--retries", f.retries, "Retries for transient backend failures");
}

void add_scoring(CLI::App* cmd, Flags& f) {
  cmd->add_option("--masks-dir", f.masks_dir, "Directory of per-image mask files");
  cmd->add_option("--scorer-url", f.scorer_url, "Scoring server base URL, or mock:brightness");
  cmd->add_option("--scorer-id", f.scorer_id, "Backend id used in cache keys");
  cmd->add_option("--k", f.k, "Number of quality levels")->check(CLI::Range(2, 100));
  cmd->add_option("--cmax", f.cmax, "Dataset maximum mask count")->check(CLI::PositiveNumber);
  cmd->add_flag("--discover-cmax", f.discover_cmax, "Run the c_max discovery pass first");
  cmd->add_option("--crop-mode", f.crop_mode, "Sub-image extraction")
      ->check(CLI::IsMember({"bbox", "mask", "whole", "bbox+whole"}));
  cmd->add_option("--agg", f.agg, "Local score aggregation")->check(CLI::IsMember({"area", "mean"}));
  cmd->add_option("--seg-score", f.seg_score, "Mask-count bonus")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--standard", f.standard, "Prompt standard form")
      ->check(CLI::IsMember({"number", "word", "sentence"}));
  cmd->add_option("--labels", f.labels, "Word labels, best first (K entries)")->delimiter(',');
}

RunConfig resolve(const Flags& f) {
  RunConfig cfg;
  if (f.config) {
    std::ifstream in(*f.config);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config file " + *f.config);
    try {
      apply_config_file(cfg, nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, *f.config + ": " + e.what());
    }
  }
  if (f.manifest) cfg.manifest = *f.manifest;
  if (f.masks_dir) cfg.masks_dir = *f.masks_dir;
  if (f.raw_masks_dir) cfg.raw_masks_dir = *f.raw_masks_dir;
  if (f.scorer_url) cfg.scorer_url = *f.scorer_url;
  if (f.scorer_id) cfg.scorer_id = *f.scorer_id;
  if (f.segmenter_url) cfg.segmenter_url = *f.segmenter_url;
  if (f.segmenter_id) cfg.segmenter_id = *f.segmenter_id;
  if (f.bearer_token) cfg.bearer_token = *f.bearer_token;
  if (f.k) {
    cfg.agg.k_levels = *f.k;
    cfg.agg.word_standard = preset_word_labels(*f.k).value_or(std::vector<std::string>{});
  }
  if (f.labels) cfg.agg.word_standard = *f.labels;
  if (f.area_threshold) cfg.agg.area_threshold_frac = *f.area_threshold;
  if (f.cmax) {
    cfg.agg.c_max = *f.cmax;
    cfg.cmax_given = true;
  }
  if (f.crop_mode) cfg.agg.crop_mode = parse_crop_mode(*f.crop_mode);
  if (f.agg) cfg.agg.agg_mode = parse_agg_mode(*f.agg);
  if (f.seg_score) cfg.agg.seg_score_enabled = *f.seg_score == "on";
  if (f.standard) cfg.agg.standard_form = parse_standard_form(*f.standard);
  if (f.jobs) cfg.jobs = *f.jobs;
  if (f.retries) cfg.retries = *f.retries;
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  if (f.csv) cfg.csv = *f.csv;
  if (f.scatter) cfg.scatter = *f.scatter;
  if (f.force) cfg.force = true;
  if (f.discover_cmax) cfg.discover_cmax = true;
  cfg.cache_dir = resolve_cache_dir(f.cache_dir ? std::optional<std::filesystem::path>(*f.cache_dir)
                                                : std::nullopt,
                                    cfg.cache_dir);
  if (cfg.agg.standard_form == StandardForm::Number && cfg.agg.word_standard.empty()) {
    cfg.agg.word_standard.assign(static_cast<std::size_t>(cfg.agg.k_levels), std::string{});
  }
  cfg.agg.validate();
  return cfg;
}

RetryPolicy retry_of(const RunConfig& cfg) {
  RetryPolicy r;
  r.max_retries = cfg.retries;
  return r;
}

DatasetManifest require_manifest(const RunConfig& cfg) {
  if (cfg.manifest.empty()) throw Error(ErrorCode::InvalidConfig, "--manifest is required");
  return ingest_manifest(cfg.manifest);
}

int exit_code_for(const Error& e) {
  return e.code() == ErrorCode::BackendUnavailable ? kExitBackend : kExitConfig;
}

// Mask source for scoring runs: --masks-dir wins over --segmenter-url.
struct MaskSourceHolder {
  std::unique_ptr<SegmenterBackend> segmenter;
  std::unique_ptr<MaskSource> source;
};

MaskSourceHolder make_mask_source(const RunConfig& cfg) {
  MaskSourceHolder h;
  if (!cfg.masks_dir.empty()) {
    h.source = std::make_unique<MaskDirSource>(cfg.masks_dir);
  } else if (!cfg.segmenter_url.empty()) {
    h.segmenter = make_segmenter(cfg);
    h.source = std::make_unique<SegmenterSource>(*h.segmenter, retry_of(cfg));
  }
  return h;
}

// Fixes c_max for a scoring run. Returns a description of where it came from.
std::string settle_cmax(RunConfig& cfg, const DatasetManifest& manifest, MaskSource* masks,
                        std::ostream& out) {
  const bool needs_cmax = cfg.agg.crop_mode != CropMode::WholeOnly && cfg.agg.seg_score_enabled;
  if (cfg.cmax_given) return "flag";
  if (!needs_cmax) return "unused";
  if (cfg.discover_cmax) {
    if (!masks) throw Error(ErrorCode::InvalidConfig, "--discover-cmax needs --masks-dir or --segmenter-url");
    const auto found = discover_cmax(manifest, *masks, cfg.agg, cfg.jobs);
    if (found.c_max < 1) throw Error(ErrorCode::InvalidConfig, "c_max discovery found no masks");
    write_cmax_record(*cfg.cache_dir, found, cfg.agg, manifest.name);
    cfg.agg.c_max = found.c_max;
    out << "discovered c_max = " << found.c_max << "\n";
    return "discovered";
  }
  if (auto persisted = read_cmax_record(*cfg.cache_dir, cfg.agg)) {
    cfg.agg.c_max = *persisted;
    return "persisted";
  }
  throw Error(ErrorCode::InvalidConfig,
              "c_max unknown: pass --cmax, --discover-cmax, or run `segment` first");
}

int cmd_segment(RunConfig cfg, std::ostream& out, std::ostream& err) {
  const auto manifest = require_manifest(cfg);
  if (cfg.masks_dir.empty()) throw Error(ErrorCode::InvalidConfig, "--masks-dir (output) is required");

  std::unique_ptr<SegmenterBackend> segmenter;
  std::unique_ptr<MaskSource> source;
  if (!cfg.raw_masks_dir.empty()) {
    source = std::make_unique<MaskDirSource>(cfg.raw_masks_dir);
  } else if (!cfg.segmenter_url.empty()) {
    segmenter = make_segmenter(cfg);
    source = std::make_unique<SegmenterSource>(*segmenter, retry_of(cfg));
  } else {
    throw Error(ErrorCode::InvalidConfig, "segment needs --segmenter-url or --raw-masks-dir");
  }
  std::filesystem::create_directories(cfg.masks_dir);

  const auto n = manifest.entries.size();
  std::vector<int> status(n, 0);  // 0 written, 1 skipped, 2 failed
  std::vector<int> counts(n, 0);
  std::vector<Failure> failures(n);
  parallel_for(n, cfg.jobs, [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    const auto target = cfg.masks_dir / mask_file_name(e.image_id);
    try {
      if (!cfg.force && std::filesystem::exists(target)) {
        counts[i] = count_masks(process_masks(read_mask_file(target), cfg.agg));
        status[i] = 1;
        return;
      }
      const auto loaded = load_image(e.image_path, e.image_id);
      const auto processed = process_masks(source->raw_masks(loaded), cfg.agg);
      write_mask_file(target, processed);
      counts[i] = count_masks(processed);
    } catch (const std::exception& ex) {
      status[i] = 2;
      failures[i].image_id = e.image_id;
      failures[i].reason = ex.what();
      if (const auto* er = dynamic_cast<const Error*>(&ex)) failures[i].code = er->code();
    }
  });

  CmaxResult cmax;
  int written = 0, skipped = 0;
  bool all_backend = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (status[i] == 2) {
      err << "error: " << failures[i].image_id << ": " << failures[i].reason << "\n";
      all_backend = all_backend && failures[i].code == ErrorCode::BackendUnavailable;
      cmax.failures.push_back(failures[i]);
      continue;
    }
    (status[i] == 0 ? written : skipped)++;
    cmax.counts.emplace_back(manifest.entries[i].image_id, counts[i]);
    cmax.c_max = std::max(cmax.c_max, counts[i]);
  }
  if (!cmax.counts.empty()) write_cmax_record(*cfg.cache_dir, cmax, cfg.agg, manifest.name);
  out << "segmented " << written << ", skipped " << skipped << ", failed " << cmax.failures.size()
      << "; c_max = " << cmax.c_max << "\n";
  if (cmax.failures.empty()) return kExitOk;
  return (cmax.counts.empty() && all_backend) ? kExitBackend : kExitConfig;
}

EvalReport evaluate_run(RunConfig& cfg, std::ostream& out, std::string& cmax_source) {
  const auto manifest = require_manifest(cfg);
  if (cfg.scorer_url.empty()) throw Error(ErrorCode::InvalidConfig, "--scorer-url is required");
  auto masks = make_mask_source(cfg);
  if (cfg.agg.crop_mode != CropMode::WholeOnly && !masks.source) {
    throw Error(ErrorCode::InvalidConfig, "crop mode needs --masks-dir or --segmenter-url");
  }
  cmax_source = settle_cmax(cfg, manifest, masks.source.get(), out);
  auto scorer = make_scorer(cfg);
  ScoreCache cache(*cfg.cache_dir);

  PipelineOptions opts;
  opts.jobs = cfg.jobs;
  opts.retry = retry_of(cfg);
  auto snap = cfg.snapshot();
  snap["c_max_source"] = cmax_source;
  opts.config_snapshot = snap;
  auto report = run_pipeline(manifest, cfg.agg, *scorer, masks.source.get(), cache, opts);
  if (auto* http = dynamic_cast<HttpScorer*>(scorer.get())) {
    report.provenance["observed_backend_ids"] = http->observed_ids();
  }
  return report;
}

void print_summary(const EvalReport& report, std::ostream& out) {
  if (report.srcc && report.plcc) {
    out << "SRCC: " << fixed3(*report.srcc) << " PLCC: " << fixed3(*report.plcc) << "\n";
  } else {
    out << "SRCC: n/a PLCC: n/a (" << report.metric_status << ")\n";
  }
  out << "images: " << report.n_ok() << " ok, " << report.n_failed() << " failed\n";
}

int cmd_score(RunConfig cfg, std::ostream& out, std::ostream& err) {
  // Scoring only warms the cache; a c_max is not needed for that.
  if (!cfg.cmax_given) {
    cfg.cmax_given = true;
    if (auto persisted = read_cmax_record(*cfg.cache_dir, cfg.agg)) {
      cfg.agg.c_max = *persisted;
    }
  }
  std::string source;
  const auto report = evaluate_run(cfg, out, source);
  for (const auto& f : report.failures) err << "error: " << f.image_id << ": " << f.reason << "\n";
  out << "scored " << report.n_ok() << " images (" << report.provenance["cache"]["misses"].get<long>()
      << " backend calls, " << report.provenance["cache"]["hits"].get<long>() << " cache hits), "
      << report.n_failed() << " failed\n";
  if (report.backend_exhausted()) return kExitBackend;
  return kExitOk;
}

int cmd_evaluate(RunConfig cfg, std::ostream& out, std::ostream& err) {
  std::string source;
  const auto report = evaluate_run(cfg, out, source);
  for (const auto& f : report.failures) err << "error: " << f.image_id << ": " << f.reason << "\n";
  const auto path = cfg.out.empty() ? std::filesystem::path("report.json") : cfg.out;
  write_report(path, report);
  if (!cfg.csv.empty()) write_images_csv(cfg.csv, report);
  if (!cfg.scatter.empty()) write_scatter_csv(cfg.scatter, report);
  print_summary(report, out);
  if (report.backend_exhausted()) return kExitBackend;
  return kExitOk;
}

std::vector<double> read_mos_column(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::EmptyManifest, path.string() + " is empty");
  int col = -1;
  {
    std::size_t start = 0;
    int idx = 0;
    while (true) {
      const auto comma = line.find(',', start);
      auto name = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      while (!name.empty() && (name.back() == '\r' || name.back() == ' ')) name.pop_back();
      while (!name.empty() && name.front() == ' ') name.erase(0, 1);
      if (name == "mos" || name == "MOS") col = idx;
      if (comma == std::string::npos) break;
      start = comma + 1;
      ++idx;
    }
  }
  if (col < 0) throw Error(ErrorCode::MissingColumn, path.string() + " lacks a 'mos' column");
  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    std::size_t start = 0;
    for (int i = 0; i < col; ++i) {
      start = line.find(',', start);
      if (start == std::string::npos) {
        throw Error(ErrorCode::UnparsableRow, "row " + std::to_string(row) + ": too few fields");
      }
      ++start;
    }
    const auto end = line.find(',', start);
    const auto field = line.substr(start, end == std::string::npos ? std::string::npos : end - start);
    try {
      std::size_t used = 0;
      const double v = std::stod(field, &used);
      if (field.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(field);
      values.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::UnparsableRow, "row " + std::to_string(row) + ": '" + field + "'");
    }
  }
  if (values.empty()) throw Error(ErrorCode::EmptyManifest, path.string() + " has no MOS rows");
  return values;
}

int cmd_quantize_bound(const std::string& mos_csv, const std::vector<int>& ks, std::ostream& out,
                       std::ostream& err) {
  const auto mos = MosVector::from_values(read_mos_column(mos_csv));
  if (near_degenerate(mos)) {
    err << "warning: MOS spread " << (mos.max_gt - mos.min_gt)
        << " is near-degenerate; correlations are dominated by rounding\n";
  }
  out << "K\tSRCC\tPLCC\t(SRCC+PLCC)/2\n";
  for (int k : ks) {
    const auto ub = quantization_upper_bound(mos, k);
    out << k << "\t" << fixed3(ub.srcc) << "\t" << fixed3(ub.plcc) << "\t" << fixed3(ub.avg) << "\n";
  }
  return kExitOk;
}

int cmd_report(const std::string& report_path, const Flags& f, std::ostream& out) {
  const auto report = read_report(report_path);
  if (f.csv) write_images_csv(*f.csv, report);
  if (f.scatter) write_scatter_csv(*f.scatter, report);
  print_summary(report, out);
  return kExitOk;
}

}  // namespace

nlohmann::json RunConfig::snapshot() const {
  nlohmann::json j = config_to_json(agg);
  j["manifest"] = manifest.string();
  j["masks_dir"] = masks_dir.string();
  j["cache_dir"] = cache_dir ? cache_dir->string() : std::string{};
  j["scorer_url"] = scorer_url;
  j["scorer_id"] = scorer_id;
  j["segmenter_url"] = segmenter_url;
  j["segmenter_id"] = segmenter_id;
  j["retries"] = retries;
  j["seed"] = seed;
  j["label_preset"] = preset_word_labels(agg.k_levels) == std::optional(agg.word_standard)
                          ? "preset-k" + std::to_string(agg.k_levels)
                          : "custom";
  return j;
}

void apply_config_file(RunConfig& cfg, const nlohmann::json& j) {
  cfg.agg = config_from_json(j, cfg.agg);
  if (j.contains("c_max")) cfg.cmax_given = true;
  auto str = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::string>();
  };
  str("manifest", cfg.manifest);
  str("masks_dir", cfg.masks_dir);
  str("raw_masks_dir", cfg.raw_masks_dir);
  str("out", cfg.out);
  str("csv", cfg.csv);
  str("scatter", cfg.scatter);
  str("scorer_url", cfg.scorer_url);
  str("scorer_id", cfg.scorer_id);
  str("segmenter_url", cfg.segmenter_url);
  str("segmenter_id", cfg.segmenter_id);
  str("bearer_token", cfg.bearer_token);
  if (j.contains("cache_dir")) cfg.cache_dir = j.at("cache_dir").get<std::string>();
  if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
  if (j.contains("retries")) cfg.retries = j.at("retries").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("force")) cfg.force = j.at("force").get<bool>();
  if (j.contains("discover_cmax")) cfg.discover_cmax = j.at("discover_cmax").get<bool>();
}

std::unique_ptr<ScorerBackend> make_scorer(const RunConfig& cfg) {
  const auto& url = cfg.scorer_url;
  if (url == "mock:brightness") return std::make_unique<BrightnessScorer>(cfg.agg.k_levels);
  if (url.rfind("mock:constant:", 0) == 0) {
    const auto text = url.substr(14);
    return std::make_unique<FunctionScorer>("constant:" + text,
                                            [text](const Image&, const PromptPair&) { return text; });
  }
  if (url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0) {
    HttpOptions opts;
    opts.bearer_token = cfg.bearer_token;
    return std::make_unique<HttpScorer>(url, cfg.scorer_id, opts);
  }
  throw Error(ErrorCode::InvalidConfig, "unsupported scorer url '" + url + "'");
}

std::unique_ptr<SegmenterBackend> make_segmenter(const RunConfig& cfg) {
  const auto& url = cfg.segmenter_url;
  if (url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0) {
    HttpOptions opts;
    opts.bearer_token = cfg.bearer_token;
    return std::make_unique<HttpSegmenter>(url, cfg.segmenter_id, opts);
  }
  throw Error(ErrorCode::InvalidConfig, "unsupported segmenter url '" + url + "'");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Training-free image quality assessment with segmentation-guided prompt scoring"};
  app.require_subcommand(1);

  Flags f;
  auto* segment = app.add_subcommand("segment", "Segment images, filter masks, and record c_max");
  add_common(segment, f);
  segment->add_option("--masks-dir", f.masks_dir, "Output directory for mask files");
  segment->add_option("--raw-masks-dir", f.raw_masks_dir, "Precomputed raw masks to post-process");
  segment->add_flag("--force", f.force, "Overwrite existing mask files");

  auto* score = app.add_subcommand("score", "Score all subjects into the cache");
  add_common(score, f);
  add_scoring(score, f);

  auto* evaluate = app.add_subcommand("evaluate", "Score, aggregate, and correlate against MOS");
  add_common(evaluate, f);
  add_scoring(evaluate, f);
  evaluate->add_option("--out", f.out, "Report path (default report.json)");
  evaluate->add_option("--csv", f.csv, "Also write the per-image table as CSV");
  evaluate->add_option("--scatter", f.scatter, "Also write (mos, s_dog) pairs as CSV");

  std::string mos_csv;
  std::vector<int> ks{3, 5, 7, 9};
  auto* qb = app.add_subcommand("quantize-bound", "Correlation upper bound of K-level quantized MOS");
  qb->add_option("--mos-csv,--manifest", mos_csv, "CSV with a mos column")->required();
  qb->add_option("--k", ks, "Levels to evaluate")->delimiter(',')->check(CLI::Range(2, 1000));

  std::string report_path;
  auto* rep = app.add_subcommand("report", "Summarize or export an existing report");
  rep->add_option("report", report_path, "Report JSON")->required();
  rep->add_option("--csv", f.csv, "Write the per-image table as CSV");
  rep->add_option("--scatter", f.scatter, "Write (mos, s_dog) pairs as CSV");

  std::vector<std::string> argv_store{"dogiqa"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*qb) return cmd_quantize_bound(mos_csv, ks, out, err);
    if (*rep) return cmd_report(report_path, f, out);
    RunConfig cfg = resolve(f);
    if (*segment) return cmd_segment(cfg, out, err);
    if (*score) return cmd_score(cfg, out, err);
    return cmd_evaluate(cfg, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace dogiqa::cli
