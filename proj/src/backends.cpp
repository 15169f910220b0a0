#include "dogiqa/backends.hpp"

#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "dogiqa/digest.hpp"
#include "dogiqa/imageio.hpp"
#include "dogiqa/maskproc.hpp"

namespace dogiqa {

namespace {

struct Endpoint {
  std::string host;    // scheme://host:port
  std::string prefix;  // path prefix without trailing slash
};

Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', start);
  Endpoint ep;
  ep.host = url.substr(0, slash);
  if (slash != std::string::npos) ep.prefix = url.substr(slash);
  while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  return ep;
}

// Returns the parsed JSON body of a 200 response. 5xx and transport errors are
// transient; other statuses are permanent.
nlohmann::json post_json(const std::string& base_url, const std::string& path,
                         const nlohmann::json& body, const HttpOptions& options) {
  const Endpoint ep = split_url(base_url);
  httplib::Client client(ep.host);
  client.set_connection_timeout(options.timeout);
  client.set_read_timeout(options.timeout);
  client.set_write_timeout(options.timeout);
  if (!options.bearer_token.empty()) client.set_bearer_token_auth(options.bearer_token);

  auto res = client.Post(ep.prefix + path, body.dump(), "application/json");
  if (!res) {
    throw TransientBackendError("POST " + base_url + path + ": " + httplib::to_string(res.error()));
  }
  if (res->status >= 500) {
    throw TransientBackendError("POST " + base_url + path + " returned HTTP " +
                                std::to_string(res->status));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::BackendUnavailable,
                "POST " + base_url + path + " rejected with HTTP " + std::to_string(res->status));
  }
  if (!is_valid_utf8(res->body)) {
    throw Error(ErrorCode::MalformedResponse, "response body is not valid UTF-8");
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("response is not JSON: ") + e.what());
  }
}

template <typename Fn>
auto with_retry(const RetryPolicy& retry, const std::string& what, Fn&& fn) {
  auto backoff = retry.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const TransientBackendError& e) {
      if (attempt >= retry.max_retries) {
        throw Error(ErrorCode::BackendUnavailable,
                    what + " failed after " + std::to_string(attempt + 1) + " attempts: " + e.what());
      }
      spdlog::debug("{}: transient failure ({}), retrying in {} ms", what, e.what(), backoff.count());
      std::this_thread::sleep_for(backoff);
      backoff = std::min(retry.max_backoff,
                         std::chrono::milliseconds(static_cast<long>(backoff.count() * retry.multiplier)));
    }
  }
}

}  // namespace

bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  const auto n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    int extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= n) return false;
    for (int k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong encodings, surrogates, and values past U+10FFFF.
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += static_cast<std::size_t>(extra) + 1;
  }
  return true;
}

std::string raster_digest(const Image& image) {
  Sha256 h;
  const std::string dims = std::to_string(image.height) + "x" + std::to_string(image.width) + "x" +
                           std::to_string(image.channels);
  h.update(dims);
  h.update(image.data);
  return to_hex(h.finish());
}

std::string score_subject(ScorerBackend& backend, const Image& pixels, const PromptPair& prompt,
                          const RetryPolicy& retry) {
  if (pixels.empty()) throw Error(ErrorCode::OutOfRange, "cannot score an empty raster");
  auto text = with_retry(retry, "score via " + backend.backend_id(),
                         [&] { return backend.score(pixels, prompt); });
  if (!is_valid_utf8(text)) {
    throw Error(ErrorCode::MalformedResponse, "backend " + backend.backend_id() + " returned non-UTF-8 text");
  }
  return text;
}

MaskSet segment_with_retry(SegmenterBackend& backend, const Image& pixels, const ImageRef& ref,
                           const RetryPolicy& retry) {
  return with_retry(retry, "segment via " + backend.backend_id(),
                    [&] { return backend.segment(pixels, ref); });
}

HttpScorer::HttpScorer(std::string base_url, std::string backend_id, HttpOptions options)
    : base_url_(std::move(base_url)),
      backend_id_(backend_id.empty() ? "remote:" + base_url_ : std::move(backend_id)),
      options_(std::move(options)) {}

std::string HttpScorer::score(const Image& pixels, const PromptPair& prompt) {
  const auto png = encode_png(pixels);
  const nlohmann::json body{{"image_png_b64", base64_encode(png)},
                            {"system_prompt", prompt.system_text},
                            {"user_prompt", prompt.user_text}};
  const auto doc = post_json(base_url_, "/v1/score", body, options_);
  if (!doc.is_object() || !doc.contains("text") || !doc["text"].is_string()) {
    throw Error(ErrorCode::MalformedResponse, "score response lacks a string 'text' field");
  }
  if (doc.contains("backend_id") && doc["backend_id"].is_string()) {
    std::lock_guard lock(mu_);
    observed_.insert(doc["backend_id"].get<std::string>());
  }
  return doc["text"].get<std::string>();
}

std::set<std::string> HttpScorer::observed_ids() const {
  std::lock_guard lock(mu_);
  return observed_;
}

HttpSegmenter::HttpSegmenter(std::string base_url, std::string backend_id, HttpOptions options)
    : base_url_(std::move(base_url)),
      backend_id_(backend_id.empty() ? "remote:" + base_url_ : std::move(backend_id)),
      options_(std::move(options)) {}

MaskSet HttpSegmenter::segment(const Image& pixels, const ImageRef& ref) {
  const auto png = encode_png(pixels);
  const nlohmann::json body{{"image_png_b64", base64_encode(png)}};
  const auto doc = post_json(base_url_, "/v1/segment", body, options_);
  try {
    return mask_set_from_json(doc, ref);
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("segment response: ") + e.what());
  }
}

std::string ScriptedScorer::score(const Image& pixels, const PromptPair&) {
  calls_.fetch_add(1, std::memory_order_relaxed);
  if (auto it = table_.find(raster_digest(pixels)); it != table_.end()) return it->second;
  return fallback_;
}

int BrightnessScorer::level_for(const Image& pixels, int k_levels) {
  double sum = 0.0;
  for (auto v : pixels.data) sum += v;
  const double mean = pixels.data.empty() ? 0.0 : sum / static_cast<double>(pixels.data.size());
  return 1 + static_cast<int>(std::round(mean / 255.0 * (k_levels - 1)));
}

std::string BrightnessScorer::score(const Image& pixels, const PromptPair&) {
  calls_.fetch_add(1, std::memory_order_relaxed);
  return std::to_string(level_for(pixels, k_));
}

}  // namespace dogiqa
