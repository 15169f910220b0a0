#include "dogiqa/harness.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "dogiqa/aggregate.hpp"
#include "dogiqa/digest.hpp"
#include "dogiqa/maskproc.hpp"
#include "dogiqa/metrics.hpp"
#include "dogiqa/prompting.hpp"

namespace dogiqa {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string mask_digest(const Mask& m) {
  Sha256 h;
  for (auto c : m.rle) h.update(std::to_string(c) + ",");
  return to_hex(h.finish()).substr(0, 16);
}

Failure failure_from(const std::string& id, const std::exception& e) {
  Failure f;
  f.image_id = id;
  f.reason = e.what();
  if (const auto* err = dynamic_cast<const Error*>(&e)) f.code = err->code();
  return f;
}

ErrorCode error_code_from(const std::string& s) {
  for (int c = 0; c <= static_cast<int>(ErrorCode::Io); ++c) {
    if (s == to_string(static_cast<ErrorCode>(c))) return static_cast<ErrorCode>(c);
  }
  return ErrorCode::Io;
}

}  // namespace

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (auto i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
}

std::size_t stream_manifest(const std::filesystem::path& path,
                            const std::function<void(ManifestEntry&&)>& row) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::EmptyManifest, path.string() + " is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = split_csv_line(line);
  int path_col = -1, mos_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto name = trim(header[i]);
    if (name == "image_path") path_col = static_cast<int>(i);
    if (name == "mos") mos_col = static_cast<int>(i);
  }
  if (path_col < 0) throw Error(ErrorCode::MissingColumn, "manifest lacks an 'image_path' column");
  if (mos_col < 0) throw Error(ErrorCode::MissingColumn, "manifest lacks a 'mos' column");

  const auto base = path.parent_path();
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++n;
    const auto fields = split_csv_line(line);
    const auto need = static_cast<std::size_t>(std::max(path_col, mos_col));
    if (fields.size() <= need) {
      throw Error(ErrorCode::UnparsableRow, "row " + std::to_string(n) + ": too few fields");
    }
    const auto id = trim(fields[static_cast<std::size_t>(path_col)]);
    const auto mos = parse_double(trim(fields[static_cast<std::size_t>(mos_col)]));
    if (id.empty() || !mos) {
      throw Error(ErrorCode::UnparsableRow, "row " + std::to_string(n) + ": '" + line + "'");
    }
    ManifestEntry e;
    e.image_id = id;
    const std::filesystem::path p(id);
    e.image_path = p.is_absolute() ? p : base / p;
    e.mos = *mos;
    row(std::move(e));
  }
  if (n == 0) throw Error(ErrorCode::EmptyManifest, path.string() + " has no data rows");
  return n;
}

DatasetManifest ingest_manifest(const std::filesystem::path& path) {
  DatasetManifest m;
  m.name = path.stem().string();
  stream_manifest(path, [&](ManifestEntry&& e) { m.entries.push_back(std::move(e)); });
  return m;
}

MaskSet MaskDirSource::raw_masks(const LoadedImage& image) {
  return read_mask_file(dir_ / mask_file_name(image.ref.id), image.ref);
}

MaskSet SegmenterSource::raw_masks(const LoadedImage& image) {
  MaskSet set = segment_with_retry(backend_, image.pixels, image.ref, retry_);
  set.image = image.ref;
  for (auto& m : set.masks) validate_mask(m, image.ref);
  sort_masks(set);
  return set;
}

nlohmann::json config_to_json(const AggregationConfig& cfg) {
  return {{"k_levels", cfg.k_levels},
          {"area_threshold_frac", cfg.area_threshold_frac},
          {"c_max", cfg.c_max},
          {"crop_mode", to_string(cfg.crop_mode)},
          {"agg_mode", to_string(cfg.agg_mode)},
          {"seg_score_enabled", cfg.seg_score_enabled},
          {"standard_form", to_string(cfg.standard_form)},
          {"word_standard", cfg.word_standard}};
}

AggregationConfig config_from_json(const nlohmann::json& j, AggregationConfig base) {
  try {
    if (j.contains("k_levels")) {
      base.k_levels = j.at("k_levels").get<int>();
      if (!j.contains("word_standard")) {
        base.word_standard = preset_word_labels(base.k_levels).value_or(std::vector<std::string>{});
      }
    }
    if (j.contains("area_threshold_frac")) base.area_threshold_frac = j.at("area_threshold_frac").get<double>();
    if (j.contains("c_max")) base.c_max = j.at("c_max").get<int>();
    if (j.contains("crop_mode")) base.crop_mode = parse_crop_mode(j.at("crop_mode").get<std::string>());
    if (j.contains("agg_mode")) base.agg_mode = parse_agg_mode(j.at("agg_mode").get<std::string>());
    if (j.contains("seg_score_enabled")) base.seg_score_enabled = j.at("seg_score_enabled").get<bool>();
    if (j.contains("standard_form")) {
      base.standard_form = parse_standard_form(j.at("standard_form").get<std::string>());
    }
    if (j.contains("word_standard")) base.word_standard = j.at("word_standard").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return base;
}

CmaxResult discover_cmax(const DatasetManifest& manifest, MaskSource& masks,
                         const AggregationConfig& cfg, int jobs) {
  if (manifest.entries.empty()) throw Error(ErrorCode::EmptyManifest, "no images to segment");
  const auto n = manifest.entries.size();
  std::vector<std::optional<int>> counts(n);
  std::vector<std::optional<Failure>> failures(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    try {
      const auto loaded = load_image(e.image_path, e.image_id);
      counts[i] = count_masks(process_masks(masks.raw_masks(loaded), cfg));
    } catch (const std::exception& ex) {
      failures[i] = failure_from(e.image_id, ex);
    }
  });

  CmaxResult out;
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i]) {
      out.counts.emplace_back(manifest.entries[i].image_id, *counts[i]);
      out.c_max = std::max(out.c_max, *counts[i]);
    } else {
      spdlog::error("c_max discovery skipped {}: {}", failures[i]->image_id, failures[i]->reason);
      out.failures.push_back(*failures[i]);
    }
  }
  return out;
}

void write_cmax_record(const std::filesystem::path& cache_dir, const CmaxResult& result,
                       const AggregationConfig& cfg, const std::string& dataset) {
  std::filesystem::create_directories(cache_dir);
  const nlohmann::json j{{"c_max", result.c_max},
                         {"area_threshold_frac", cfg.area_threshold_frac},
                         {"dataset", dataset},
                         {"n_images", result.counts.size()},
                         {"n_failed", result.failures.size()}};
  std::ofstream out(cache_dir / kCmaxFileName);
  if (!out) throw Error(ErrorCode::Io, "cannot write c_max record in " + cache_dir.string());
  out << j.dump(2) << '\n';
}

std::optional<int> read_cmax_record(const std::filesystem::path& cache_dir, const AggregationConfig& cfg) {
  std::ifstream in(cache_dir / kCmaxFileName);
  if (!in) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("area_threshold_frac").get<double>() != cfg.area_threshold_frac) return std::nullopt;
    const int c = j.at("c_max").get<int>();
    return c >= 1 ? std::optional<int>(c) : std::nullopt;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

bool EvalReport::backend_exhausted() const {
  if (!images.empty() || failures.empty()) return false;
  return std::any_of(failures.begin(), failures.end(),
                     [](const Failure& f) { return f.code == ErrorCode::BackendUnavailable; });
}

nlohmann::json EvalReport::to_json(bool include_timestamp) const {
  nlohmann::json imgs = nlohmann::json::array();
  for (const auto& r : images) {
    imgs.push_back({{"image_id", r.verdict.image_id},
                    {"s_global", r.verdict.s_global},
                    {"s_local", r.verdict.s_local},
                    {"s_seg", r.verdict.s_seg},
                    {"s_dog", r.verdict.s_dog},
                    {"mask_count", r.verdict.mask_count},
                    {"mos", r.mos}});
  }
  nlohmann::json fails = nlohmann::json::array();
  for (const auto& f : failures) {
    fails.push_back({{"image_id", f.image_id}, {"code", to_string(f.code)}, {"reason", f.reason}});
  }
  nlohmann::json j{{"config", config},
                   {"summary",
                    {{"srcc", srcc ? nlohmann::json(*srcc) : nlohmann::json(nullptr)},
                     {"plcc", plcc ? nlohmann::json(*plcc) : nlohmann::json(nullptr)},
                     {"metric_status", metric_status},
                     {"n_ok", n_ok()},
                     {"n_failed", n_failed()},
                     {"complete", failures.empty()}}},
                   {"images", std::move(imgs)},
                   {"failures", std::move(fails)},
                   {"provenance", provenance}};
  if (include_timestamp) j["generated_at"] = generated_at;
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.config = j.at("config");
    const auto& s = j.at("summary");
    if (!s.at("srcc").is_null()) r.srcc = s.at("srcc").get<double>();
    if (!s.at("plcc").is_null()) r.plcc = s.at("plcc").get<double>();
    r.metric_status = s.value("metric_status", "ok");
    for (const auto& im : j.at("images")) {
      ImageResult ir;
      ir.verdict.image_id = im.at("image_id").get<std::string>();
      ir.verdict.s_global = im.at("s_global").get<double>();
      ir.verdict.s_local = im.at("s_local").get<double>();
      ir.verdict.s_seg = im.at("s_seg").get<double>();
      ir.verdict.s_dog = im.at("s_dog").get<double>();
      ir.verdict.mask_count = im.at("mask_count").get<int>();
      ir.mos = im.at("mos").get<double>();
      r.images.push_back(std::move(ir));
    }
    for (const auto& f : j.value("failures", nlohmann::json::array())) {
      r.failures.push_back({f.at("image_id").get<std::string>(), error_code_from(f.at("code").get<std::string>()),
                            f.at("reason").get<std::string>()});
    }
    r.provenance = j.value("provenance", nlohmann::json::object());
    r.generated_at = j.value("generated_at", "");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed report: ") + e.what());
  }
  return r;
}

EvalReport run_pipeline(const DatasetManifest& manifest, const AggregationConfig& cfg,
                        ScorerBackend& scorer, MaskSource* masks, ScoreCache& cache,
                        const PipelineOptions& options) {
  cfg.validate();
  const bool need_masks = cfg.crop_mode != CropMode::WholeOnly;
  const bool need_whole = cfg.crop_mode == CropMode::WholeOnly || cfg.crop_mode == CropMode::BBoxPlusWhole;
  if (need_masks && masks == nullptr) {
    throw Error(ErrorCode::InvalidConfig, std::string("crop mode '") + to_string(cfg.crop_mode) +
                                              "' needs a masks directory or a segmenter");
  }
  const CropMode mask_crop = cfg.crop_mode == CropMode::BBoxPlusWhole ? CropMode::BBox : cfg.crop_mode;
  const PromptPair prompt = build_prompt(Standard::from_config(cfg));
  const CacheStats before = cache.stats();

  const auto n = manifest.entries.size();
  std::vector<std::optional<ImageResult>> results(n);
  std::vector<std::optional<Failure>> failures(n);

  parallel_for(n, options.jobs, [&](std::size_t i) {
    const auto& entry = manifest.entries[i];
    try {
      const auto loaded = load_image(entry.image_path, entry.image_id);
      std::optional<double> s_global, s_local;
      int mask_count = 0;

      if (need_masks) {
        const MaskSet processed = process_masks(masks->raw_masks(loaded), cfg);
        mask_count = count_masks(processed);
        if (!processed.masks.empty()) {
          std::vector<int> scores;
          for (const auto& m : processed.masks) {
            const SubImage sub = extract_subimage(loaded.pixels, m, mask_crop);
            const SubjectKey key{loaded.ref.content_hash,
                                 "mask:" + m.id + ":" + to_string(mask_crop) + ":" + mask_digest(m)};
            scores.push_back(cached_score(cache, scorer, key, Subject::mask(m.id), sub.pixels, prompt,
                                          cfg.k_levels, options.retry)
                                 .score);
          }
          s_local = local_score(scores, area_weights(processed), cfg.agg_mode);
        }
      }
      if (need_whole) {
        const SubjectKey key{loaded.ref.content_hash, kWholeId};
        s_global = cached_score(cache, scorer, key, Subject::whole(), loaded.pixels, prompt, cfg.k_levels,
                                options.retry)
                       .score;
      }
      ImageResult r;
      r.verdict = compose_verdict(entry.image_id, s_global, s_local, mask_count, cfg);
      r.mos = entry.mos;
      results[i] = std::move(r);
    } catch (const std::exception& ex) {
      failures[i] = failure_from(entry.image_id, ex);
    }
  });

  EvalReport report;
  report.config = options.config_snapshot.value_or(config_to_json(cfg));
  std::vector<double> pred, mos;
  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) {
      pred.push_back(results[i]->verdict.s_dog);
      mos.push_back(results[i]->mos);
      report.images.push_back(std::move(*results[i]));
    } else {
      spdlog::error("image {} failed: {}", failures[i]->image_id, failures[i]->reason);
      report.failures.push_back(std::move(*failures[i]));
    }
  }

  try {
    report.srcc = srcc(pred, mos);
    report.plcc = plcc(pred, mos);
  } catch (const Error& e) {
    report.srcc.reset();
    report.plcc.reset();
    report.metric_status = std::string("undefined: ") + e.what();
  }

  const CacheStats after = cache.stats();
  nlohmann::json substitutions = nlohmann::json::array();
  if (!need_whole) substitutions.push_back("s_global := s_local (no whole-image pass)");
  if (!need_masks) substitutions.push_back("s_local := s_global; s_seg := 0 (whole-image only)");
  if (need_masks && !cfg.seg_score_enabled) substitutions.push_back("s_seg := 0 (disabled)");

  report.provenance = {
      {"scorer_backend_id", scorer.backend_id()},
      {"mask_source", need_masks ? nlohmann::json(masks->describe()) : nlohmann::json(nullptr)},
      {"c_max", cfg.c_max},
      {"prompt_digest", prompt_digest(prompt)},
      {"system_prompt", prompt.system_text},
      {"user_prompt", prompt.user_text},
      {"word_standard", cfg.word_standard},
      {"substitutions", std::move(substitutions)},
      {"cache",
       {{"hits", (after.hits - before.hits) + (after.joined - before.joined)},
        {"misses", after.misses - before.misses},
        {"corrupt_entries", after.corrupt}}},
  };
  report.generated_at = utc_now();
  return report;
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write report " + path.string());
  out << report.to_json().dump(2) << '\n';
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read report " + path.string());
  try {
    return EvalReport::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_images_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "image_id,s_global,s_local,s_seg,s_dog,mask_count,mos\n";
  for (const auto& r : report.images) {
    const auto& v = r.verdict;
    out << csv_field(v.image_id) << ',' << num(v.s_global) << ',' << num(v.s_local) << ','
        << num(v.s_seg) << ',' << num(v.s_dog) << ',' << v.mask_count << ',' << num(r.mos) << '\n';
  }
}

void write_scatter_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "mos,s_dog\n";
  for (const auto& r : report.images) out << num(r.mos) << ',' << num(r.verdict.s_dog) << '\n';
}

}  // namespace dogiqa
