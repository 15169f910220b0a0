#pragma once

// Standard-guided prompt construction and score extraction.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dogiqa/core.hpp"

namespace dogiqa {

struct Level {
  int score = 0;
  std::string label;
};

// Levels are ordered from K down to 1.
struct Standard {
  StandardForm form = StandardForm::Word;
  std::vector<Level> levels;

  int k() const noexcept { return static_cast<int>(levels.size()); }

  // Labels are ignored for the Number form and may be empty there.
  static Standard make(StandardForm form, int k, const std::vector<std::string>& labels = {});
  static Standard from_config(const AggregationConfig& cfg);
};

struct PromptPair {
  std::string system_text;
  std::string user_text;

  friend bool operator==(const PromptPair&, const PromptPair&) = default;
};

// Word label presets for K in {3, 5, 7, 9}; best label first.
std::optional<std::vector<std::string>> preset_word_labels(int k);

// Descriptive sentence for a word label, used by the Sentence form.
std::string sentence_for_label(const std::string& label);

PromptPair build_prompt(const Standard& standard);

// SHA-256 over both prompt texts, hex encoded.
std::string prompt_digest(const PromptPair& prompt);

// First maximal run of ASCII digits whose value lies in [1, k_levels];
// otherwise score 1 with Fallback status.
ScoreRecord parse_score(std::string_view response, int k_levels, Subject subject = Subject::whole());

}  // namespace dogiqa
