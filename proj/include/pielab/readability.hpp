#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pielab/harness.hpp"
#include "pielab/pie.hpp"

namespace pielab::readability {

/// Lowercase word set; lookups are case-insensitive.
class EasyWordList {
 public:
  EasyWordList() = default;
  explicit EasyWordList(std::set<std::string, std::less<>> words);

  /// One word per line; blank lines and lines starting with '#' are skipped.
  static EasyWordList load(const std::filesystem::path& file);

  bool contains(std::string_view word) const;
  std::size_t size() const { return words_.size(); }

 private:
  std::set<std::string, std::less<>> words_;
};

/// Default location of the bundled list: $PIELAB_DATA/easy_words.txt when set,
/// otherwise the data directory of the source tree.
std::filesystem::path default_easy_words_path();

/// Splits after '.', '!', '?' or ';' when followed by whitespace or the end of
/// the text. Segments without any letter or digit are dropped; a text without
/// a terminator is one sentence.
std::vector<std::string> split_sentences(std::string_view text);

/// Vowel groups (a, e, i, o, u, y), minus one for a silent final 'e' (one that
/// follows a non-vowel and does not end a consonant + "le"), at least 1.
int count_syllables(std::string_view word);

struct TextStats {
  int words = 0;
  int sentences = 0;
  int letters = 0;
  std::vector<int> syllables_per_word;
  int syllables = 0;
  /// Words with three or more syllables.
  int complex_words = 0;
  /// Words absent from the easy-word list.
  int difficult_words = 0;
  int token_length = 0;
};

TextStats compute_stats(std::string_view text, const EasyWordList& easy);

struct GradeScores {
  double ari = 0.0;
  double coleman_liau = 0.0;
  double flesch_kincaid = 0.0;
  double linsear_write = 0.0;
  double gunning_fog = 0.0;
  double dale_chall = 0.0;
};

/// The six grade-level formulas; nullopt for a text without words or sentences.
std::optional<GradeScores> grade_scores(const TextStats& stats);

/// The eight metrics of the battery in report order.
inline constexpr std::string_view kMetricNames[] = {"ari",        "coleman_liau", "flesch_kincaid",
                                                     "linsear_write", "gunning_fog", "dale_chall",
                                                     "difficult_words", "token_length"};
inline constexpr std::size_t kMetricCount = std::size(kMetricNames);

/// All eight metrics of one text; nullopt for an empty text.
std::optional<std::array<double, kMetricCount>> metrics(const TextStats& stats);

/// mean over PIE rows / mean over all rows, per metric. nullopt ("undefined")
/// when there are no PIEs or the overall mean is 0. Rows whose metrics are
/// undefined (empty texts) are skipped in both means.
std::array<std::optional<double>, kMetricCount> pie_ratios(
    std::span<const std::optional<std::array<double, kMetricCount>>> per_example,
    std::span<const pie::Verdict> verdicts);

struct RatioRow {
  std::string pruner_id;  // "MEAN" for the across-pruner mean
  double threshold = 0.0;
  std::string metric;
  std::optional<double> ratio;
};

struct AnalysisOptions {
  std::string split = "test";
};

/// Scores every example of the split, writes analysis/<condition>/<split>/readability.csv
/// for every pruned condition and analysis/readability_ratios.csv (pruner rows
/// followed by MEAN rows, which average the defined pruner ratios per threshold).
std::vector<RatioRow> analyze_run(const harness::RunData& run, const EasyWordList& easy,
                                  const AnalysisOptions& options = {});

}  // namespace pielab::readability
