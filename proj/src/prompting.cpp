#include "dogiqa/prompting.hpp"

#include <map>

#include "dogiqa/digest.hpp"

namespace dogiqa {

namespace {

constexpr std::string_view kSystemHead =
    "You are a helpful assistant to evaluate image quality. You will be given standards for each "
    "quality level. The quality standard is listed as follows: ";
constexpr std::string_view kSystemTail =
    "The higher the image quality is, the higher the score should be.";
constexpr std::string_view kUserHead = "Please evaluate the quality of the image and score in ";

const std::map<std::string, std::string>& sentence_table() {
  static const std::map<std::string, std::string> table{
      {"Perfect", "The overall quality of the image is perfect. There are no visible deficiencies at all."},
      {"Excellent", "The overall quality of the image is excellent. There are many merits and almost no deficiencies."},
      {"Very Good", "The overall quality of the image is very good. There are clear merits and only minor deficiencies."},
      {"Good", "The overall quality of the image is good. There are more merits than deficiencies."},
      {"Fair", "The overall quality of the image is fair. There are certain merits but also some deficiencies."},
      {"Mediocre", "The overall quality of the image is mediocre. There are a few merits but noticeable deficiencies."},
      {"Poor", "The overall quality of the image is poor. There are few merits and obvious deficiencies."},
      {"Bad", "The overall quality of the image is bad. There are hardly any merits and many deficiencies."},
      {"Very Bad", "The overall quality of the image is very bad. There are no merits and severe deficiencies."},
  };
  return table;
}

}  // namespace

std::optional<std::vector<std::string>> preset_word_labels(int k) {
  switch (k) {
    case 3: return std::vector<std::string>{"Good", "Fair", "Bad"};
    case 5: return std::vector<std::string>{"Excellent", "Good", "Fair", "Poor", "Bad"};
    case 7:
      return std::vector<std::string>{"Perfect", "Excellent", "Good", "Fair", "Bad", "Poor", "Very Bad"};
    case 9:
      return std::vector<std::string>{"Perfect", "Excellent", "Very Good", "Good", "Fair",
                                      "Mediocre", "Poor",    "Bad",       "Very Bad"};
    default: return std::nullopt;
  }
}

std::string sentence_for_label(const std::string& label) {
  const auto& table = sentence_table();
  if (auto it = table.find(label); it != table.end()) return it->second;
  return "The overall quality of the image is " + label + ".";
}

Standard Standard::make(StandardForm form, int k, const std::vector<std::string>& labels) {
  if (k < 2) throw Error(ErrorCode::InvalidConfig, "a standard needs at least 2 levels");
  std::vector<std::string> names = labels;
  if (form != StandardForm::Number && names.empty()) {
    auto preset = preset_word_labels(k);
    if (!preset) {
      throw Error(ErrorCode::InvalidConfig,
                  "no preset word labels for K=" + std::to_string(k) + "; supply word_standard");
    }
    names = *preset;
  }
  if (form != StandardForm::Number && names.size() != static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::InvalidConfig, "expected " + std::to_string(k) + " labels");
  }
  Standard s;
  s.form = form;
  for (int i = 0; i < k; ++i) {
    s.levels.push_back({k - i, form == StandardForm::Number ? std::string{} : names[i]});
  }
  return s;
}

Standard Standard::from_config(const AggregationConfig& cfg) {
  return make(cfg.standard_form, cfg.k_levels, cfg.word_standard);
}

PromptPair build_prompt(const Standard& standard) {
  std::string levels;
  for (std::size_t i = 0; i < standard.levels.size(); ++i) {
    const auto& lv = standard.levels[i];
    switch (standard.form) {
      case StandardForm::Number:
        if (i) levels += ", ";
        levels += std::to_string(lv.score);
        break;
      case StandardForm::Word:
        if (i) levels += ", ";
        levels += std::to_string(lv.score) + ": " + lv.label;
        break;
      case StandardForm::Sentence:
        if (i) levels += " ";
        levels += std::to_string(lv.score) + ": " + lv.label + "! " + sentence_for_label(lv.label);
        break;
    }
  }

  PromptPair p;
  p.system_text.append(kSystemHead).append(levels);
  p.system_text += levels.ends_with('.') ? " " : ". ";
  p.system_text.append(kSystemTail);

  p.user_text.append(kUserHead).append("[");
  for (int s = 1; s <= standard.k(); ++s) {
    if (s > 1) p.user_text += ", ";
    p.user_text += std::to_string(s);
  }
  p.user_text += "].";
  return p;
}

std::string prompt_digest(const PromptPair& prompt) {
  Sha256 h;
  h.update(prompt.system_text);
  h.update(std::string_view("\0", 1));
  h.update(prompt.user_text);
  return to_hex(h.finish());
}

ScoreRecord parse_score(std::string_view response, int k_levels, Subject subject) {
  ScoreRecord rec;
  rec.subject = std::move(subject);
  rec.raw_response = std::string(response);

  std::size_t i = 0;
  while (i < response.size()) {
    if (response[i] < '0' || response[i] > '9') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < response.size() && response[j] >= '0' && response[j] <= '9') ++j;
    // Leading zeros do not change the value; overly long runs are out of range.
    std::size_t first = i;
    while (first + 1 < j && response[first] == '0') ++first;
    if (j - first <= 9) {
      long value = 0;
      for (std::size_t p = first; p < j; ++p) value = value * 10 + (response[p] - '0');
      if (value >= 1 && value <= k_levels) {
        rec.score = static_cast<int>(value);
        rec.parse_status = ParseStatus::Parsed;
        return rec;
      }
    }
    i = j;
  }
  rec.score = 1;
  rec.parse_status = ParseStatus::Fallback;
  return rec;
}

}  // namespace dogiqa
