#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pielab/common.hpp"

namespace pielab::corpus {

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kOovId = 1;

struct RawExample {
  std::int64_t id = 0;
  std::string text;
  std::vector<int> labels;
};

struct LabelSpace {
  std::vector<std::string> class_names;
  LabelKind kind = LabelKind::Single;

  int num_classes() const { return static_cast<int>(class_names.size()); }
};

struct CorpusSplits {
  std::vector<RawExample> train;
  std::vector<RawExample> validation;
  std::vector<RawExample> test;
  LabelSpace label_space;
  /// From the manifest; 0 when absent.
  int max_tokens_override = 0;
  /// Non-fatal loader diagnostics (e.g. deduplicated labels), in file order.
  std::vector<std::string> warnings;

  const std::vector<RawExample>& split(std::string_view name) const;
};

/// Token ids are dense: 0 = PAD, 1 = OOV, corpus tokens from 2 upward ordered
/// by descending train frequency, then lexicographically.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary build(std::span<const RawExample> train);

  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::int64_t frequency(std::int32_t id) const { return frequencies_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::int64_t> frequencies_;
  std::map<std::string, std::int32_t, std::less<>> index_;
};

struct EncodedExample {
  std::int64_t id = 0;
  std::vector<std::int32_t> token_ids;  // exactly max_tokens entries
  int true_length = 0;
  std::vector<float> label_vector;  // one-hot or multi-hot
  std::vector<int> labels;
};

/// Lowercases, keeps ASCII letters and apostrophes between two letters, turns
/// everything else (digits, punctuation, non-ASCII bytes) into separators.
std::vector<std::string> tokenize(std::string_view text);

/// Smallest power of two 2^k such that at least `coverage` of the lengths are <= 2^k.
int compute_max_tokens(std::span<const int> lengths, double coverage = 0.85);

EncodedExample encode(const RawExample& example, const Vocabulary& vocab, int max_tokens,
                      const LabelSpace& label_space);

std::vector<EncodedExample> encode_all(std::span<const RawExample> examples, const Vocabulary& vocab,
                                       int max_tokens, const LabelSpace& label_space);

/// Maps ids back to tokens for the first true_length positions (OOV renders as "<oov>").
std::vector<std::string> decode(const EncodedExample& example, const Vocabulary& vocab);

/// Reads manifest.json plus train/validation/test.jsonl from `dir`.
CorpusSplits load_corpus(const std::filesystem::path& dir);

/// Writes the same layout `load_corpus` reads.
void save_corpus(const CorpusSplits& corpus, const std::filesystem::path& dir);

/// Knobs for the synthetic stand-in corpus.
struct SyntheticSpec {
  int num_classes = 3;
  int train_size = 2000;
  int validation_size = 400;
  int test_size = 400;
  std::uint64_t seed = 0;
  LabelKind kind = LabelKind::Single;
  /// Fraction of examples drawn from the "hard" generator.
  double hard_fraction = 0.25;
  /// Class c gets prior weight class_skew^c (1 = balanced).
  double class_skew = 0.6;
  /// Multi-label only: chance that each further class joins an example's label set.
  double extra_label_rate = 0.35;
};

void validate(const SyntheticSpec& spec);

/// Expected class frequencies (fraction of examples carrying each class) for the
/// single-label generator.
std::vector<double> class_priors(const SyntheticSpec& spec);

CorpusSplits generate_synthetic_corpus(const SyntheticSpec& spec);

/// Per-class count of examples carrying that class in the split.
std::vector<std::int64_t> class_frequencies(std::span<const RawExample> examples, int num_classes);

/// Resolves max_tokens for a corpus: manifest/config override if > 0, otherwise
/// computed from train token counts.
int resolve_max_tokens(const CorpusSplits& corpus, int override_value, double coverage);

}  // namespace pielab::corpus
