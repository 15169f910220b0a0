#pragma once

// Scorer and segmenter interfaces, the HTTP wire-protocol clients, and
// deterministic in-process backends used for tests and dry runs.

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>

#include "dogiqa/core.hpp"
#include "dogiqa/prompting.hpp"

namespace dogiqa {

// Thrown by backends for failures worth retrying (5xx, connection loss).
class TransientBackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScorerBackend {
 public:
  virtual ~ScorerBackend() = default;
  virtual std::string backend_id() const = 0;
  virtual bool deterministic() const { return false; }
  // Must be safe to call concurrently.
  virtual std::string score(const Image& pixels, const PromptPair& prompt) = 0;
};

class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;
  virtual std::string backend_id() const = 0;
  // Raw masks (before filtering) for the image described by `ref`.
  virtual MaskSet segment(const Image& pixels, const ImageRef& ref) = 0;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{5000};
};

// Calls the backend, retrying transient failures with exponential backoff.
// Throws BackendUnavailable once retries are exhausted and MalformedResponse
// for text that is not valid UTF-8.
std::string score_subject(ScorerBackend& backend, const Image& pixels, const PromptPair& prompt,
                          const RetryPolicy& retry = {});

MaskSet segment_with_retry(SegmenterBackend& backend, const Image& pixels, const ImageRef& ref,
                           const RetryPolicy& retry = {});

bool is_valid_utf8(std::string_view text);

// Hex SHA-256 over raster dimensions and bytes.
std::string raster_digest(const Image& image);

struct HttpOptions {
  std::string bearer_token;
  std::chrono::seconds timeout{120};
};

// POST {base_url}/v1/score with {"image_png_b64", "system_prompt", "user_prompt"}.
class HttpScorer : public ScorerBackend {
 public:
  HttpScorer(std::string base_url, std::string backend_id = {}, HttpOptions options = {});

  std::string backend_id() const override { return backend_id_; }
  std::string score(const Image& pixels, const PromptPair& prompt) override;

  // backend_id values reported by the server so far.
  std::set<std::string> observed_ids() const;

 private:
  std::string base_url_;
  std::string backend_id_;
  HttpOptions options_;
  mutable std::mutex mu_;
  std::set<std::string> observed_;
};

// POST {base_url}/v1/segment with {"image_png_b64"}; response is a mask document.
class HttpSegmenter : public SegmenterBackend {
 public:
  HttpSegmenter(std::string base_url, std::string backend_id = {}, HttpOptions options = {});

  std::string backend_id() const override { return backend_id_; }
  MaskSet segment(const Image& pixels, const ImageRef& ref) override;

 private:
  std::string base_url_;
  std::string backend_id_;
  HttpOptions options_;
};

// Deterministic scorer driven by a callable; counts calls.
class FunctionScorer : public ScorerBackend {
 public:
  using Fn = std::function<std::string(const Image&, const PromptPair&)>;

  FunctionScorer(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}

  std::string backend_id() const override { return id_; }
  bool deterministic() const override { return true; }
  std::string score(const Image& pixels, const PromptPair& prompt) override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return fn_(pixels, prompt);
  }
  long calls() const { return calls_.load(); }

 private:
  std::string id_;
  Fn fn_;
  std::atomic<long> calls_{0};
};

// Lookup table keyed by raster_digest(pixels); unknown rasters get the default.
class ScriptedScorer : public ScorerBackend {
 public:
  explicit ScriptedScorer(std::map<std::string, std::string> table, std::string fallback = "1",
                          std::string id = "scripted")
      : table_(std::move(table)), fallback_(std::move(fallback)), id_(std::move(id)) {}

  std::string backend_id() const override { return id_; }
  bool deterministic() const override { return true; }
  std::string score(const Image& pixels, const PromptPair&) override;
  long calls() const { return calls_.load(); }

 private:
  std::map<std::string, std::string> table_;
  std::string fallback_;
  std::string id_;
  std::atomic<long> calls_{0};
};

// Maps mean brightness in [0, 255] linearly onto {1..K}.
class BrightnessScorer : public ScorerBackend {
 public:
  explicit BrightnessScorer(int k_levels) : k_(k_levels) {}

  std::string backend_id() const override { return "brightness-oracle/k" + std::to_string(k_); }
  bool deterministic() const override { return true; }
  std::string score(const Image& pixels, const PromptPair&) override;
  long calls() const { return calls_.load(); }

  static int level_for(const Image& pixels, int k_levels);

 private:
  int k_;
  std::atomic<long> calls_{0};
};

class FunctionSegmenter : public SegmenterBackend {
 public:
  using Fn = std::function<MaskSet(const Image&, const ImageRef&)>;

  FunctionSegmenter(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}

  std::string backend_id() const override { return id_; }
  MaskSet segment(const Image& pixels, const ImageRef& ref) override { return fn_(pixels, ref); }

 private:
  std::string id_;
  Fn fn_;
};

}  // namespace dogiqa
