#pragma once

// Persistent score cache: an append-only JSON-lines log with an in-memory
// index. Writes are serialized; concurrent misses on one key share a single
// backend call.

#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "dogiqa/backends.hpp"
#include "dogiqa/core.hpp"
#include "dogiqa/prompting.hpp"

namespace dogiqa {

inline constexpr const char* kCacheDirEnv = "DOGIQA_CACHE_DIR";
inline constexpr const char* kDefaultCacheDir = ".dogiqa_cache";
inline constexpr const char* kScoreLogName = "scores.jsonl";

struct CacheEntry {
  std::string key;
  ScoreRecord record;
  std::string backend_id;
  std::string timestamp;
};

struct CacheStats {
  long hits = 0;
  long joined = 0;  // waited on an in-flight request for the same key
  long misses = 0;  // backend calls
  long corrupt = 0;
};

// Digest over (content hash, subject key, prompt digest, backend id).
std::string cache_key(const Digest& content_hash, const std::string& subject_key,
                      const std::string& prompt_digest, const std::string& backend_id);

// Flag value wins, then DOGIQA_CACHE_DIR, then the configured path, then
// the default directory.
std::filesystem::path resolve_cache_dir(const std::optional<std::filesystem::path>& flag,
                                        const std::optional<std::filesystem::path>& configured = {});

class ScoreCache {
 public:
  explicit ScoreCache(std::filesystem::path dir, bool dedup_in_flight = true);

  const std::filesystem::path& dir() const { return dir_; }

  std::optional<CacheEntry> lookup(const std::string& key) const;
  void put(const CacheEntry& entry);

  CacheStats stats() const;
  std::size_t size() const;

  // Returns the cached record, or scores via the backend, parses, persists.
  ScoreRecord get_or_score(const std::string& key, const Subject& subject, ScorerBackend& backend,
                           const Image& pixels, const PromptPair& prompt, int k_levels,
                           const RetryPolicy& retry);

 private:
  void load();
  void append_line(const CacheEntry& entry);

  std::filesystem::path dir_;
  bool dedup_;
  mutable std::mutex mu_;
  std::ofstream log_;
  std::unordered_map<std::string, CacheEntry> index_;
  std::map<std::string, std::shared_future<ScoreRecord>> in_flight_;
  CacheStats stats_;
};

struct SubjectKey {
  Digest content_hash{};
  // Identifies the crop: "whole", or mask id + crop mode + mask digest.
  std::string subject_key;
};

ScoreRecord cached_score(ScoreCache& cache, ScorerBackend& backend, const SubjectKey& key,
                         const Subject& subject, const Image& pixels, const PromptPair& prompt,
                         int k_levels, const RetryPolicy& retry = {});

}  // namespace dogiqa
