#include "dogiqa/cache.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "dogiqa/digest.hpp"

namespace dogiqa {

namespace {

std::string entry_checksum(const CacheEntry& e) {
  Sha256 h;
  h.update(e.key);
  h.update(std::string_view("\0", 1));
  h.update(e.record.raw_response);
  h.update(std::string_view("\0", 1));
  h.update(std::to_string(e.record.score));
  h.update(e.record.parse_status == ParseStatus::Parsed ? "P" : "F");
  return to_hex(h.finish()).substr(0, 16);
}

nlohmann::json to_json(const CacheEntry& e) {
  return {{"key", e.key},
          {"subject", e.record.subject.label()},
          {"raw_response", e.record.raw_response},
          {"score", e.record.score},
          {"parse_status", e.record.parse_status == ParseStatus::Parsed ? "parsed" : "fallback"},
          {"backend_id", e.backend_id},
          {"timestamp", e.timestamp},
          {"checksum", entry_checksum(e)}};
}

CacheEntry from_json(const nlohmann::json& j) {
  CacheEntry e;
  e.key = j.at("key").get<std::string>();
  const auto subject = j.at("subject").get<std::string>();
  e.record.subject = subject.rfind("mask:", 0) == 0 ? Subject::mask(subject.substr(5)) : Subject::whole();
  e.record.raw_response = j.at("raw_response").get<std::string>();
  e.record.score = j.at("score").get<int>();
  e.record.parse_status =
      j.at("parse_status").get<std::string>() == "parsed" ? ParseStatus::Parsed : ParseStatus::Fallback;
  e.backend_id = j.at("backend_id").get<std::string>();
  e.timestamp = j.value("timestamp", "");
  if (j.at("checksum").get<std::string>() != entry_checksum(e)) {
    throw Error(ErrorCode::CacheCorrupt, "checksum mismatch for key " + e.key);
  }
  return e;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string cache_key(const Digest& content_hash, const std::string& subject_key,
                      const std::string& prompt_digest, const std::string& backend_id) {
  Sha256 h;
  const std::string_view sep("\0", 1);
  h.update(to_hex(content_hash));
  h.update(sep);
  h.update(subject_key);
  h.update(sep);
  h.update(prompt_digest);
  h.update(sep);
  h.update(backend_id);
  return to_hex(h.finish());
}

std::filesystem::path resolve_cache_dir(const std::optional<std::filesystem::path>& flag,
                                        const std::optional<std::filesystem::path>& configured) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv(kCacheDirEnv); env && *env) return env;
  if (configured && !configured->empty()) return *configured;
  return kDefaultCacheDir;
}

ScoreCache::ScoreCache(std::filesystem::path dir, bool dedup_in_flight)
    : dir_(std::move(dir)), dedup_(dedup_in_flight) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create cache dir " + dir_.string() + ": " + ec.message());
  load();
  log_.open(dir_ / kScoreLogName, std::ios::app);
  if (!log_) throw Error(ErrorCode::Io, "cannot open cache log in " + dir_.string());
}

void ScoreCache::load() {
  std::ifstream in(dir_ / kScoreLogName);
  if (!in) return;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto e = from_json(nlohmann::json::parse(line));
      index_[e.key] = std::move(e);
    } catch (const std::exception& ex) {
      ++stats_.corrupt;
      spdlog::warn("score cache {}: skipping corrupt line {} ({})", dir_.string(), line_no, ex.what());
    }
  }
}

void ScoreCache::append_line(const CacheEntry& entry) {
  log_ << to_json(entry).dump() << '\n';
  log_.flush();
}

std::optional<CacheEntry> ScoreCache::lookup(const std::string& key) const {
  std::lock_guard lock(mu_);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  return std::nullopt;
}

void ScoreCache::put(const CacheEntry& entry) {
  std::lock_guard lock(mu_);
  append_line(entry);
  index_[entry.key] = entry;
}

CacheStats ScoreCache::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::size_t ScoreCache::size() const {
  std::lock_guard lock(mu_);
  return index_.size();
}

ScoreRecord ScoreCache::get_or_score(const std::string& key, const Subject& subject,
                                     ScorerBackend& backend, const Image& pixels,
                                     const PromptPair& prompt, int k_levels, const RetryPolicy& retry) {
  std::promise<ScoreRecord> promise;
  {
    std::unique_lock lock(mu_);
    if (auto it = index_.find(key); it != index_.end()) {
      ++stats_.hits;
      ScoreRecord rec = it->second.record;
      rec.subject = subject;
      return rec;
    }
    if (dedup_) {
      if (auto it = in_flight_.find(key); it != in_flight_.end()) {
        auto fut = it->second;
        ++stats_.joined;
        lock.unlock();
        ScoreRecord rec = fut.get();
        rec.subject = subject;
        return rec;
      }
      in_flight_.emplace(key, promise.get_future().share());
    }
    ++stats_.misses;
  }

  try {
    const auto text = score_subject(backend, pixels, prompt, retry);
    CacheEntry entry;
    entry.key = key;
    entry.record = parse_score(text, k_levels, subject);
    entry.backend_id = backend.backend_id();
    entry.timestamp = utc_now();
    {
      std::lock_guard lock(mu_);
      append_line(entry);
      index_[key] = entry;
      in_flight_.erase(key);
    }
    if (dedup_) promise.set_value(entry.record);
    return entry.record;
  } catch (...) {
    if (dedup_) {
      {
        std::lock_guard lock(mu_);
        in_flight_.erase(key);
      }
      promise.set_exception(std::current_exception());
    }
    throw;
  }
}

ScoreRecord cached_score(ScoreCache& cache, ScorerBackend& backend, const SubjectKey& key,
                         const Subject& subject, const Image& pixels, const PromptPair& prompt,
                         int k_levels, const RetryPolicy& retry) {
  const auto k = cache_key(key.content_hash, key.subject_key, prompt_digest(prompt), backend.backend_id());
  return cache.get_or_score(k, subject, backend, pixels, prompt, k_levels, retry);
}

}  // namespace dogiqa
