#include "pielab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace pielab::corpus {

using nlohmann::json;

const std::vector<RawExample>& CorpusSplits::split(std::string_view name) const {
  if (name == "train") return train;
  if (name == "validation") return validation;
  if (name == "test") return test;
  throw ConfigError("unknown split \"" + std::string(name) + "\"");
}

// ---------------------------------------------------------------------------
// Tokenization

namespace {

bool is_ascii_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (is_ascii_letter(c)) {
      current.push_back(lower(c));
    } else if (c == '\'' && !current.empty() && i + 1 < text.size() && is_ascii_letter(text[i + 1])) {
      current.push_back('\'');
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

int compute_max_tokens(std::span<const int> lengths, double coverage) {
  if (lengths.empty()) throw ConfigError("compute_max_tokens: empty length list");
  if (!(coverage > 0.0 && coverage <= 1.0)) throw ConfigError("compute_max_tokens: coverage must be in (0, 1]");
  std::vector<int> sorted(lengths.begin(), lengths.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  for (std::int64_t cap = 1;; cap *= 2) {
    const auto covered = std::upper_bound(sorted.begin(), sorted.end(), cap) - sorted.begin();
    if (static_cast<double>(covered) >= coverage * n) return static_cast<int>(cap);
    if (cap > (std::int64_t{1} << 30)) throw ConfigError("compute_max_tokens: lengths too large");
  }
}

// ---------------------------------------------------------------------------
// Vocabulary and encoding

Vocabulary Vocabulary::build(std::span<const RawExample> train) {
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& ex : train)
    for (auto& tok : tokenize(ex.text)) ++counts[std::move(tok)];

  std::vector<std::pair<std::string, std::int64_t>> ordered(counts.begin(), counts.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  vocab.tokens_ = {"<pad>", "<oov>"};
  vocab.frequencies_ = {0, 0};
  for (auto& [tok, count] : ordered) {
    vocab.index_.emplace(tok, static_cast<std::int32_t>(vocab.tokens_.size()));
    vocab.tokens_.push_back(tok);
    vocab.frequencies_.push_back(count);
  }
  return vocab;
}

std::int32_t Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kOovId : it->second;
}

EncodedExample encode(const RawExample& example, const Vocabulary& vocab, int max_tokens,
                      const LabelSpace& label_space) {
  EncodedExample out;
  out.id = example.id;
  out.labels = example.labels;
  out.token_ids.assign(static_cast<std::size_t>(max_tokens), kPadId);
  const auto tokens = tokenize(example.text);
  const auto kept = std::min<std::size_t>(tokens.size(), static_cast<std::size_t>(max_tokens));
  for (std::size_t i = 0; i < kept; ++i) out.token_ids[i] = vocab.id(tokens[i]);
  out.true_length = static_cast<int>(kept);
  out.label_vector.assign(static_cast<std::size_t>(label_space.num_classes()), 0.0F);
  for (int label : example.labels) out.label_vector.at(static_cast<std::size_t>(label)) = 1.0F;
  return out;
}

std::vector<EncodedExample> encode_all(std::span<const RawExample> examples, const Vocabulary& vocab,
                                       int max_tokens, const LabelSpace& label_space) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(encode(ex, vocab, max_tokens, label_space));
  return out;
}

std::vector<std::string> decode(const EncodedExample& example, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int i = 0; i < example.true_length; ++i) out.push_back(vocab.token(example.token_ids[static_cast<std::size_t>(i)]));
  return out;
}

// ---------------------------------------------------------------------------
// File layout

namespace {

std::vector<RawExample> load_split(const std::filesystem::path& file, const LabelSpace& space,
                                   std::set<std::int64_t>& seen_ids, std::vector<std::string>& warnings) {
  std::ifstream in(file);
  if (!in) throw MissingInputError("missing corpus file " + file.string());
  std::vector<RawExample> out;
  std::string line;
  int line_no = 0;
  const auto fail = [&](const std::string& msg) {
    throw ConfigError(file.filename().string() + ": " + msg + " at line " + std::to_string(line_no));
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error&) {
      fail("malformed record");
    }
    if (!rec.is_object() || !rec.contains("id") || !rec.contains("text") || !rec.contains("labels") ||
        !rec["id"].is_number_integer() || !rec["text"].is_string() || !rec["labels"].is_array())
      fail("malformed record (need integer id, string text, label array)");
    RawExample ex;
    ex.id = rec["id"].get<std::int64_t>();
    if (ex.id < 0) fail("negative id");
    ex.text = rec["text"].get<std::string>();
    for (const auto& l : rec["labels"]) {
      if (!l.is_number_integer()) fail("non-integer label");
      const auto v = l.get<std::int64_t>();
      if (v < 0 || v >= space.num_classes())
        fail("label index " + std::to_string(v) + " out of range");
      ex.labels.push_back(static_cast<int>(v));
    }
    if (ex.labels.empty()) fail("empty label set");
    if (space.kind == LabelKind::Single && ex.labels.size() != 1) fail("single-label record with several labels");
    std::vector<int> dedup = ex.labels;
    std::sort(dedup.begin(), dedup.end());
    dedup.erase(std::unique(dedup.begin(), dedup.end()), dedup.end());
    if (dedup.size() != ex.labels.size()) {
      warnings.push_back(file.filename().string() + ": duplicate labels deduplicated at line " + std::to_string(line_no));
      log_warning(warnings.back());
    }
    ex.labels = std::move(dedup);
    if (!seen_ids.insert(ex.id).second) fail("duplicate id " + std::to_string(ex.id));
    out.push_back(std::move(ex));
  }
  return out;
}

void write_split(const std::vector<RawExample>& examples, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  for (const auto& ex : examples) {
    json rec;
    rec["id"] = ex.id;
    rec["text"] = ex.text;
    rec["labels"] = ex.labels;
    out << rec.dump() << '\n';
  }
}

}  // namespace

CorpusSplits load_corpus(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw MissingInputError("missing corpus manifest " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  CorpusSplits corpus;
  if (!manifest.contains("classes") || !manifest["classes"].is_array() || manifest["classes"].size() < 2)
    throw ConfigError("manifest needs a \"classes\" array with at least two entries");
  corpus.label_space.class_names = manifest["classes"].get<std::vector<std::string>>();
  corpus.label_space.kind = label_kind_from_string(manifest.value("kind", std::string("single")));
  if (manifest.contains("max_tokens_override") && !manifest["max_tokens_override"].is_null())
    corpus.max_tokens_override = manifest["max_tokens_override"].get<int>();

  std::set<std::int64_t> seen;
  corpus.train = load_split(dir / "train.jsonl", corpus.label_space, seen, corpus.warnings);
  corpus.validation = load_split(dir / "validation.jsonl", corpus.label_space, seen, corpus.warnings);
  corpus.test = load_split(dir / "test.jsonl", corpus.label_space, seen, corpus.warnings);
  if (corpus.train.empty()) throw ConfigError("empty train split in " + dir.string());
  return corpus;
}

void save_corpus(const CorpusSplits& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["classes"] = corpus.label_space.class_names;
  manifest["kind"] = std::string(to_string(corpus.label_space.kind));
  if (corpus.max_tokens_override > 0) manifest["max_tokens_override"] = corpus.max_tokens_override;
  std::ofstream(dir / "manifest.json", std::ios::binary) << manifest.dump(2) << '\n';
  write_split(corpus.train, dir / "train.jsonl");
  write_split(corpus.validation, dir / "validation.jsonl");
  write_split(corpus.test, dir / "test.jsonl");
}

std::vector<std::int64_t> class_frequencies(std::span<const RawExample> examples, int num_classes) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (const auto& ex : examples)
    for (int l : ex.labels) ++counts.at(static_cast<std::size_t>(l));
  return counts;
}

int resolve_max_tokens(const CorpusSplits& corpus, int override_value, double coverage) {
  if (override_value > 0) return override_value;
  if (corpus.max_tokens_override > 0) return corpus.max_tokens_override;
  std::vector<int> lengths;
  lengths.reserve(corpus.train.size());
  for (const auto& ex : corpus.train) lengths.push_back(static_cast<int>(tokenize(ex.text).size()));
  return compute_max_tokens(lengths, coverage);
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

// Common words from the Dale-Chall easy list; they form the noise background.
constexpr const char* kNoiseWords[] = {
    "the",   "a",     "and",   "of",    "to",    "in",    "is",    "it",    "that",  "was",   "for",
    "on",    "are",   "with",  "as",    "at",    "be",    "this",  "have",  "from",  "or",    "one",
    "had",   "by",    "but",   "not",   "what",  "all",   "were",  "we",    "when",  "your",  "can",
    "said",  "there", "use",   "each",  "which", "she",   "do",    "how",   "their", "if",    "will",
    "up",    "other", "about", "out",   "many",  "then",  "them",  "these", "so",    "some",  "her",
    "would", "make",  "like",  "him",   "into",  "time",  "has",   "look",  "two",   "more",  "write",
    "go",    "see",   "no",    "way",   "could", "people", "my",   "than",  "first", "water", "been",
    "call",  "who",   "now",   "find",  "long",  "down",  "day",   "did",   "get",   "come",  "made",
    "may",   "part",  "over",  "new",   "sound", "take",  "only",  "little", "work", "know",  "place",
    "year",  "live",  "me",    "back",  "give",  "most",  "very",  "after", "thing", "our",   "just",
    "name",  "good",  "man",   "think", "say",   "great", "where", "help",  "much",  "before", "line",
    "right", "too",   "mean",  "old",   "any",   "same",  "tell",  "boy",   "follow", "came", "want",
    "show",  "also",  "around", "form", "three", "small", "set",   "put",   "end",   "does",  "another",
    "well",  "large", "must",  "big",   "even",  "such",  "because", "turn", "here", "why",   "ask",
};

constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t",
                                        "v", "z", "br", "cr", "dr", "gl", "pl", "st", "tr", "sk"};
constexpr std::string_view kNuclei[] = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
constexpr std::string_view kCodas[] = {"", "", "", "n", "r", "l", "s", "m", "x", "th"};

template <typename T, std::size_t N>
const T& pick(const T (&arr)[N], Rng& rng) {
  return arr[rng.below(N)];
}

class PseudoWords {
 public:
  explicit PseudoWords(std::uint64_t seed) : rng_(seed) {
    for (const char* w : kNoiseWords) used_.insert(w);
  }

  std::string make(int syllables) {
    for (;;) {
      std::string w;
      for (int s = 0; s < syllables; ++s) {
        w += pick(kOnsets, rng_);
        w += pick(kNuclei, rng_);
        w += pick(kCodas, rng_);
      }
      if (used_.insert(w).second) return w;
    }
  }

  std::vector<std::string> make_many(std::size_t n, int min_syl, int max_syl) {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(make(min_syl + static_cast<int>(rng_.below(static_cast<std::uint64_t>(max_syl - min_syl + 1)))));
    return out;
  }

 private:
  Rng rng_;
  std::set<std::string> used_;
};

struct Lexicon {
  std::vector<std::vector<std::string>> class_words;
  std::vector<std::string> shared;
  std::vector<std::string> rare;
};

constexpr std::size_t kWordsPerClass = 24;
constexpr std::size_t kSharedWords = 40;
constexpr std::size_t kRareWords = 4000;

Lexicon make_lexicon(const SyntheticSpec& spec) {
  PseudoWords words(mix_seed(spec.seed, 0x4c4558));
  Lexicon lex;
  for (int c = 0; c < spec.num_classes; ++c) lex.class_words.push_back(words.make_many(kWordsPerClass, 2, 3));
  lex.shared = words.make_many(kSharedWords, 1, 2);
  lex.rare = words.make_many(kRareWords, 3, 5);
  return lex;
}

int sample_class(const std::vector<double>& priors, Rng& rng) {
  double u = rng.uniform();
  for (std::size_t c = 0; c < priors.size(); ++c) {
    if (u < priors[c]) return static_cast<int>(c);
    u -= priors[c];
  }
  return static_cast<int>(priors.size() - 1);
}

std::string render_text(const std::vector<std::string>& tokens, Rng& rng) {
  std::string text;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const std::size_t len = 5 + rng.below(8);
    const std::size_t end = std::min(tokens.size(), i + len);
    for (std::size_t j = i; j < end; ++j) {
      std::string w = tokens[j];
      if (j == i) w[0] = static_cast<char>(w[0] - 'a' + 'A');
      if (!text.empty()) text += ' ';
      text += w;
      if (j + 1 < end && rng.uniform() < 0.06) text += ',';
      if (j + 1 < end && rng.uniform() < 0.02) text += " " + std::to_string(1 + rng.below(99));
    }
    const double u = rng.uniform();
    text += u < 0.85 ? "." : (u < 0.93 ? "?" : "!");
    i = end;
  }
  return text;
}

RawExample make_example(std::int64_t id, const SyntheticSpec& spec, const Lexicon& lex,
                        const std::vector<double>& priors, Rng& rng) {
  RawExample ex;
  ex.id = id;
  const int primary = sample_class(priors, rng);
  ex.labels.push_back(primary);
  if (spec.kind == LabelKind::Multi) {
    for (int c = 0; c < spec.num_classes; ++c) {
      if (c == primary) continue;
      if (rng.uniform() < spec.extra_label_rate * std::pow(spec.class_skew, c)) ex.labels.push_back(c);
    }
    std::sort(ex.labels.begin(), ex.labels.end());
  }
  const bool hard = rng.uniform() < spec.hard_fraction;

  const auto own_word = [&] {
    const int c = ex.labels[rng.below(ex.labels.size())];
    return lex.class_words[static_cast<std::size_t>(c)][rng.below(kWordsPerClass)];
  };
  const auto other_word = [&] {
    int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.num_classes)));
    if (std::find(ex.labels.begin(), ex.labels.end(), c) != ex.labels.end())
      c = (c + 1) % spec.num_classes;
    return lex.class_words[static_cast<std::size_t>(c)][rng.below(kWordsPerClass)];
  };

  std::vector<std::string> tokens;
  if (!hard) {
    const auto len = 12 + rng.below(14);
    for (std::uint64_t i = 0; i < len; ++i) {
      const double u = rng.uniform();
      if (u < 0.30) tokens.push_back(own_word());
      else if (u < 0.38) tokens.push_back(lex.shared[rng.below(kSharedWords)]);
      else tokens.push_back(pick(kNoiseWords, rng));
    }
  } else {
    const auto len = 24 + rng.below(24);
    for (std::uint64_t i = 0; i < len; ++i) {
      const double u = rng.uniform();
      if (u < 0.07) tokens.push_back(own_word());
      else if (u < 0.13) tokens.push_back(other_word());
      else if (u < 0.43) tokens.push_back(lex.rare[rng.below(kRareWords)]);
      else if (u < 0.50) tokens.push_back(lex.shared[rng.below(kSharedWords)]);
      else tokens.push_back(pick(kNoiseWords, rng));
    }
  }
  ex.text = render_text(tokens, rng);
  return ex;
}

}  // namespace

void validate(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) throw ConfigError("synthetic corpus needs at least 2 classes");
  if (spec.train_size < 10 || spec.validation_size < 10 || spec.test_size < 10)
    throw ConfigError("synthetic corpus needs at least 10 examples per split");
  if (!(spec.hard_fraction >= 0.0 && spec.hard_fraction <= 1.0))
    throw ConfigError("hard_fraction must be in [0, 1]");
  if (!(spec.class_skew > 0.0 && spec.class_skew <= 1.0)) throw ConfigError("class_skew must be in (0, 1]");
  if (!(spec.extra_label_rate >= 0.0 && spec.extra_label_rate <= 1.0))
    throw ConfigError("extra_label_rate must be in [0, 1]");
}

std::vector<double> class_priors(const SyntheticSpec& spec) {
  std::vector<double> w(static_cast<std::size_t>(spec.num_classes));
  double total = 0.0;
  for (int c = 0; c < spec.num_classes; ++c) total += (w[static_cast<std::size_t>(c)] = std::pow(spec.class_skew, c));
  for (auto& x : w) x /= total;
  return w;
}

CorpusSplits generate_synthetic_corpus(const SyntheticSpec& spec) {
  validate(spec);
  const Lexicon lex = make_lexicon(spec);
  const auto priors = class_priors(spec);
  Rng rng(mix_seed(spec.seed, 0x53594e));

  CorpusSplits corpus;
  corpus.label_space.kind = spec.kind;
  for (int c = 0; c < spec.num_classes; ++c) corpus.label_space.class_names.push_back("class_" + std::to_string(c));

  std::int64_t next_id = 0;
  const auto fill = [&](std::vector<RawExample>& split, int n) {
    split.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) split.push_back(make_example(next_id++, spec, lex, priors, rng));
  };
  fill(corpus.train, spec.train_size);
  fill(corpus.validation, spec.validation_size);
  fill(corpus.test, spec.test_size);
  return corpus;
}

}  // namespace pielab::corpus
