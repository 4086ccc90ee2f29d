#include "pielab/readability.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>

#include "pielab/corpus.hpp"

#ifndef PIELAB_DEFAULT_DATA_DIR
#define PIELAB_DEFAULT_DATA_DIR "data"
#endif

namespace pielab::readability {

namespace {

bool is_vowel(char c) {
  switch (c) {
    case 'a': case 'e': case 'i': case 'o': case 'u': case 'y': return true;
    default: return false;
  }
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

EasyWordList::EasyWordList(std::set<std::string, std::less<>> words) {
  for (const auto& w : words) words_.insert(lower_ascii(w));
}

EasyWordList EasyWordList::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw MissingInputError("easy-word list not found: " + file.string());
  std::set<std::string, std::less<>> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    words.insert(lower_ascii(line.substr(start)));
  }
  if (words.empty()) throw ConfigError("easy-word list " + file.string() + " is empty");
  return EasyWordList(std::move(words));
}

bool EasyWordList::contains(std::string_view word) const { return words_.contains(lower_ascii(word)); }

std::filesystem::path default_easy_words_path() {
  if (const char* root = std::getenv("PIELAB_DATA"); root && *root) {
    const auto p = std::filesystem::path(root) / "easy_words.txt";
    if (std::filesystem::exists(p)) return p;
  }
  return std::filesystem::path(PIELAB_DEFAULT_DATA_DIR) / "easy_words.txt";
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  const auto keep = [&](std::string_view seg) {
    if (std::any_of(seg.begin(), seg.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }))
      out.emplace_back(seg);
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?' && c != ';') continue;
    if (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))) {
      keep(text.substr(start, i + 1 - start));
      start = i + 1;
    }
  }
  if (start < text.size()) keep(text.substr(start));
  return out;
}

int count_syllables(std::string_view word) {
  std::string w;
  for (char c : word)
    if (std::isalpha(static_cast<unsigned char>(c))) w += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  int groups = 0;
  bool in_group = false;
  for (char c : w) {
    const bool v = is_vowel(c);
    if (v && !in_group) ++groups;
    in_group = v;
  }
  const auto n = w.size();
  if (n >= 2 && w[n - 1] == 'e' && !is_vowel(w[n - 2])) {
    const bool consonant_le = n >= 3 && w[n - 2] == 'l' && !is_vowel(w[n - 3]);
    if (!consonant_le) --groups;
  }
  return std::max(groups, 1);
}

TextStats compute_stats(std::string_view text, const EasyWordList& easy) {
  TextStats st;
  const auto words = corpus::tokenize(text);
  st.words = static_cast<int>(words.size());
  st.token_length = st.words;
  st.sentences = static_cast<int>(split_sentences(text).size());
  for (const auto& w : words) {
    st.letters += static_cast<int>(std::count_if(w.begin(), w.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }));
    const int s = count_syllables(w);
    st.syllables_per_word.push_back(s);
    st.syllables += s;
    st.complex_words += s >= 3;
    st.difficult_words += !easy.contains(w);
  }
  return st;
}

std::optional<GradeScores> grade_scores(const TextStats& st) {
  if (st.words < 1 || st.sentences < 1) return std::nullopt;
  const double words = st.words;
  const double wps = words / st.sentences;
  GradeScores g;
  g.ari = 4.71 * (st.letters / words) + 0.5 * wps - 21.43;
  const double L = 100.0 * st.letters / words;
  const double S = 100.0 * st.sentences / words;
  g.coleman_liau = 0.0588 * L - 0.296 * S - 15.8;
  g.flesch_kincaid = 0.39 * wps + 11.8 * (st.syllables / words) - 15.59;
  int points = 0;
  for (int s : st.syllables_per_word) points += s >= 3 ? 3 : 1;
  const double r = static_cast<double>(points) / st.sentences;
  g.linsear_write = r > 20.0 ? r / 2.0 : r / 2.0 - 1.0;
  g.gunning_fog = 0.4 * (wps + 100.0 * st.complex_words / words);
  const double pdw = 100.0 * st.difficult_words / words;
  g.dale_chall = 0.1579 * pdw + 0.0496 * wps + (pdw > 5.0 ? 3.6365 : 0.0);
  return g;
}

std::optional<std::array<double, kMetricCount>> metrics(const TextStats& stats) {
  const auto g = grade_scores(stats);
  if (!g) return std::nullopt;
  return std::array<double, kMetricCount>{g->ari,         g->coleman_liau, g->flesch_kincaid,
                                          g->linsear_write, g->gunning_fog,  g->dale_chall,
                                          static_cast<double>(stats.difficult_words),
                                          static_cast<double>(stats.token_length)};
}

std::array<std::optional<double>, kMetricCount> pie_ratios(
    std::span<const std::optional<std::array<double, kMetricCount>>> per_example,
    std::span<const pie::Verdict> verdicts) {
  if (per_example.size() != verdicts.size()) throw Error("readability scores and PIE verdicts differ in length");
  std::array<double, kMetricCount> sum_all{}, sum_pie{};
  std::size_t n_all = 0, n_pie = 0;
  for (std::size_t i = 0; i < per_example.size(); ++i) {
    if (!per_example[i]) continue;
    ++n_all;
    for (std::size_t m = 0; m < kMetricCount; ++m) sum_all[m] += (*per_example[i])[m];
    if (verdicts[i].is_pie) {
      ++n_pie;
      for (std::size_t m = 0; m < kMetricCount; ++m) sum_pie[m] += (*per_example[i])[m];
    }
  }
  std::array<std::optional<double>, kMetricCount> out{};
  if (n_pie == 0) return out;
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    const double mean_all = sum_all[m] / static_cast<double>(n_all);
    const double mean_pie = sum_pie[m] / static_cast<double>(n_pie);
    if (mean_all != 0.0) out[m] = mean_pie / mean_all;
  }
  return out;
}

std::vector<RatioRow> analyze_run(const harness::RunData& run, const EasyWordList& easy,
                                  const AnalysisOptions& options) {
  const auto& examples = run.corpus.split(options.split);
  std::vector<std::optional<std::array<double, kMetricCount>>> scores;
  scores.reserve(examples.size());
  for (const auto& ex : examples) scores.push_back(metrics(compute_stats(ex.text, easy)));

  std::vector<RatioRow> rows;
  std::vector<double> thresholds;
  for (const auto& cond : harness::conditions(run.config)) {
    if (!cond.pruned()) continue;
    const auto verdicts = pie::verdicts_for(run, cond, options.split);
    std::string csv =
        "example_id,is_pie,ari,coleman_liau,flesch_kincaid,linsear_write,gunning_fog,dale_chall,difficult_words,"
        "token_length\n";
    for (std::size_t i = 0; i < examples.size(); ++i) {
      csv += std::to_string(examples[i].id) + (verdicts[i].is_pie ? ",1" : ",0");
      for (std::size_t m = 0; m < kMetricCount; ++m) csv += "," + (scores[i] ? format_stat((*scores[i])[m]) : "undefined");
      csv += "\n";
    }
    harness::write_file(run.layout.analysis() / cond.directory_name() / options.split / "readability.csv", csv);
    const auto ratios = pie_ratios(scores, verdicts);
    for (std::size_t m = 0; m < kMetricCount; ++m)
      rows.push_back({cond.pruner_id, cond.threshold, std::string(kMetricNames[m]), ratios[m]});
    if (std::find(thresholds.begin(), thresholds.end(), cond.threshold) == thresholds.end())
      thresholds.push_back(cond.threshold);
  }
  // across-pruner mean line, per threshold and metric, over the defined ratios
  const auto n_pruner_rows = rows.size();
  for (double t : thresholds) {
    for (auto metric : kMetricNames) {
      double sum = 0.0;
      int n = 0;
      for (std::size_t i = 0; i < n_pruner_rows; ++i) {
        const auto& r = rows[i];
        if (r.threshold == t && r.metric == metric && r.ratio) {
          sum += *r.ratio;
          ++n;
        }
      }
      rows.push_back({"MEAN", t, std::string(metric), n > 0 ? std::optional<double>(sum / n) : std::nullopt});
    }
  }
  std::string csv = "pruner_id,threshold,metric,ratio\n";
  for (const auto& r : rows)
    csv += r.pruner_id + "," + format_threshold(r.threshold) + "," + r.metric + "," +
           (r.ratio ? format_stat(*r.ratio) : "undefined") + "\n";
  harness::write_file(run.layout.analysis() / "readability_ratios.csv", csv);
  return rows;
}

}  // namespace pielab::readability
