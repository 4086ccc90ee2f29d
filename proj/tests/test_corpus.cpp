#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "pielab/corpus.hpp"

using namespace pielab;
using namespace pielab::corpus;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("pielab_test_corpus_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& content) { std::ofstream(p, std::ios::binary) << content; }

fs::path write_corpus(const std::string& name, const std::string& kind, const std::string& train,
                      const std::string& test = "{\"id\": 100, \"text\": \"x\", \"labels\": [0]}\n") {
  auto dir = fresh_dir(name);
  write_file(dir / "manifest.json", "{\"classes\": [\"a\", \"b\", \"c\"], \"kind\": \"" + kind + "\"}");
  write_file(dir / "train.jsonl", train);
  write_file(dir / "validation.jsonl", "{\"id\": 50, \"text\": \"v\", \"labels\": [1]}\n");
  write_file(dir / "test.jsonl", test);
  return dir;
}

}  // namespace

TEST_CASE("tokenize lowercases and strips punctuation and digits") {
  CHECK(tokenize("The cat sat.") == std::vector<std::string>{"the", "cat", "sat"});
  CHECK(tokenize("Price: 42 dollars!") == std::vector<std::string>{"price", "dollars"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("Don't stop") == std::vector<std::string>{"don't", "stop"});
  CHECK(tokenize("'quoted' rock'n'roll x'") == std::vector<std::string>{"quoted", "rock'n'roll", "x"});
  CHECK(tokenize("abc123def") == std::vector<std::string>{"abc", "def"});
}

TEST_CASE("tokenize is idempotent on its joined output") {
  Rng rng(7);
  const std::string alphabet = "aBc De'f9 .,!?'xyZ\t\n-'";
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    const auto len = rng.below(60);
    for (std::uint64_t i = 0; i < len; ++i) text.push_back(alphabet[rng.below(alphabet.size())]);
    const auto once = tokenize(text);
    std::string joined;
    for (const auto& t : once) joined += (joined.empty() ? "" : " ") + t;
    CHECK(tokenize(joined) == once);
  }
}

TEST_CASE("compute_max_tokens picks the first covering power of two") {
  // 85th-percentile length 430 (IMDB-like): 256 covers too little, 512 suffices
  std::vector<int> imdb(100, 200);
  for (int i = 0; i < 20; ++i) imdb[static_cast<std::size_t>(i)] = 300 + 6 * i;  // 300..414
  imdb[20] = 430;
  for (int i = 85; i < 100; ++i) imdb[static_cast<std::size_t>(i)] = 2000;
  CHECK(compute_max_tokens(imdb) == 512);

  // 85th percentile 242 (AAPD-like)
  std::vector<int> aapd(100, 100);
  for (int i = 70; i < 85; ++i) aapd[static_cast<std::size_t>(i)] = 242;
  for (int i = 85; i < 100; ++i) aapd[static_cast<std::size_t>(i)] = 900;
  CHECK(compute_max_tokens(aapd) == 256);

  CHECK(compute_max_tokens(std::vector<int>(5, 1)) == 1);
  CHECK(compute_max_tokens(std::vector<int>{4, 4, 4, 4, 4, 4, 4, 4, 4, 100}, 0.85) == 4);
  CHECK_THROWS_AS(compute_max_tokens(std::vector<int>{}), ConfigError);
  CHECK_THROWS_AS(compute_max_tokens(std::vector<int>{1}, 0.0), ConfigError);
}

TEST_CASE("compute_max_tokens is monotone in coverage") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> lengths(1 + rng.below(40));
    for (auto& l : lengths) l = static_cast<int>(rng.below(700));
    double a = 0.01 + 0.99 * rng.uniform();
    double b = 0.01 + 0.99 * rng.uniform();
    if (a > b) std::swap(a, b);
    CHECK(compute_max_tokens(lengths, a) <= compute_max_tokens(lengths, b));
  }
}

TEST_CASE("encode pads, truncates the tail and maps unknown tokens to OOV") {
  const std::vector<RawExample> train = {{0, "alpha beta gamma delta epsilon zeta eta", {0}}};
  const auto vocab = Vocabulary::build(train);
  const LabelSpace space{{"a", "b"}, LabelKind::Single};

  const auto short_ex = encode({1, "alpha beta gamma", {1}}, vocab, 5, space);
  CHECK(short_ex.true_length == 3);
  CHECK(short_ex.token_ids[3] == kPadId);
  CHECK(short_ex.token_ids[4] == kPadId);
  CHECK(short_ex.label_vector == std::vector<float>{0.0F, 1.0F});

  const auto long_ex = encode(train[0], vocab, 4, space);
  CHECK(long_ex.true_length == 4);
  CHECK(decode(long_ex, vocab) == std::vector<std::string>{"alpha", "beta", "gamma", "delta"});

  const auto oov = encode({2, "alpha unseen beta", {0}}, vocab, 4, space);
  CHECK(oov.token_ids[1] == kOovId);
  CHECK(oov.token_ids[0] != kOovId);
}

TEST_CASE("decode(encode(x)) recovers the kept prefix with OOV substitutions") {
  const auto corpus = generate_synthetic_corpus({.train_size = 200, .validation_size = 20, .test_size = 50});
  const auto vocab = Vocabulary::build(corpus.train);
  for (int max_tokens : {8, 32}) {
    for (const auto& ex : corpus.test) {
      const auto enc = encode(ex, vocab, max_tokens, corpus.label_space);
      const auto tokens = tokenize(ex.text);
      const auto decoded = decode(enc, vocab);
      REQUIRE(decoded.size() == std::min<std::size_t>(tokens.size(), static_cast<std::size_t>(max_tokens)));
      for (std::size_t i = 0; i < decoded.size(); ++i)
        CHECK(decoded[i] == (vocab.id(tokens[i]) == kOovId ? "<oov>" : tokens[i]));
      for (std::size_t i = decoded.size(); i < enc.token_ids.size(); ++i) CHECK(enc.token_ids[i] == kPadId);
    }
  }
}

TEST_CASE("vocabulary depends on the train split only") {
  auto corpus = generate_synthetic_corpus({.train_size = 100, .validation_size = 10, .test_size = 10});
  const auto before = Vocabulary::build(corpus.train);
  corpus.test[0].text = "completely different words here";
  const auto after = Vocabulary::build(corpus.train);
  REQUIRE(before.size() == after.size());
  for (int i = 0; i < before.size(); ++i) CHECK(before.token(i) == after.token(i));
  CHECK(before.id("<pad>") == kOovId);  // reserved strings are not corpus tokens
}

TEST_CASE("load_corpus reads the manifest layout") {
  const auto dir = write_corpus("ok", "single",
                                "{\"id\": 0, \"text\": \"a b\", \"labels\": [0]}\n"
                                "{\"id\": 1, \"text\": \"c\", \"labels\": [2]}\n");
  const auto c = load_corpus(dir);
  CHECK(c.train.size() == 2);
  CHECK(c.validation.size() == 1);
  CHECK(c.test.size() == 1);
  CHECK(c.label_space.num_classes() == 3);
  CHECK(c.train[1].labels == std::vector<int>{2});
}

TEST_CASE("load_corpus reports malformed records with line numbers") {
  SUBCASE("empty label set") {
    const auto dir = write_corpus("empty", "single",
                                  "{\"id\": 0, \"text\": \"a\", \"labels\": [0]}\n"
                                  "{\"id\": 1, \"text\": \"b\", \"labels\": []}\n");
    CHECK_THROWS_WITH_AS(load_corpus(dir), doctest::Contains("empty label set at line 2"), ConfigError);
  }
  SUBCASE("label out of range") {
    const auto dir = write_corpus("range", "single", "{\"id\": 0, \"text\": \"a\", \"labels\": [3]}\n");
    CHECK_THROWS_WITH_AS(load_corpus(dir), doctest::Contains("at line 1"), ConfigError);
  }
  SUBCASE("duplicate id across splits") {
    const auto dir = write_corpus("dup", "single", "{\"id\": 100, \"text\": \"a\", \"labels\": [0]}\n");
    CHECK_THROWS_WITH_AS(load_corpus(dir), doctest::Contains("duplicate id"), ConfigError);
  }
  SUBCASE("not json") {
    const auto dir = write_corpus("bad", "single", "{\"id\": 0, \"text\": \n");
    CHECK_THROWS_WITH_AS(load_corpus(dir), doctest::Contains("malformed record at line 1"), ConfigError);
  }
  SUBCASE("missing file") {
    auto dir = fresh_dir("missing");
    CHECK_THROWS_AS(load_corpus(dir), MissingInputError);
  }
}

TEST_CASE("multi-label duplicates are deduplicated with a warning") {
  const auto dir = write_corpus("multi", "multi", "{\"id\": 0, \"text\": \"a\", \"labels\": [0, 2, 2]}\n");
  const auto c = load_corpus(dir);
  CHECK(c.train[0].labels == std::vector<int>{0, 2});
  REQUIRE(c.warnings.size() == 1);
  CHECK(c.warnings[0].find("line 1") != std::string::npos);
}

TEST_CASE("synthetic corpus is deterministic and survives a save/load round trip") {
  const SyntheticSpec spec{.train_size = 120, .validation_size = 30, .test_size = 30, .seed = 11};
  const auto a = generate_synthetic_corpus(spec);
  const auto b = generate_synthetic_corpus(spec);
  const auto da = fresh_dir("det_a");
  const auto db = fresh_dir("det_b");
  save_corpus(a, da);
  save_corpus(b, db);
  for (const char* f : {"manifest.json", "train.jsonl", "validation.jsonl", "test.jsonl"}) {
    std::ifstream fa(da / f, std::ios::binary), fb(db / f, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {});
    const std::string sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
  }
  const auto loaded = load_corpus(da);
  REQUIRE(loaded.train.size() == a.train.size());
  CHECK(loaded.train[5].text == a.train[5].text);

  auto other = spec;
  other.seed = 12;
  CHECK(generate_synthetic_corpus(other).train[0].text != a.train[0].text);
}

TEST_CASE("synthetic class frequencies follow the configured skew") {
  const SyntheticSpec spec{.num_classes = 3, .train_size = 2000, .validation_size = 400, .test_size = 400, .seed = 0};
  const auto corpus = generate_synthetic_corpus(spec);
  const auto priors = class_priors(spec);
  const auto counts = class_frequencies(corpus.train, 3);
  for (std::size_t c = 0; c < 3; ++c)
    CHECK(std::abs(static_cast<double>(counts[c]) / 2000.0 - priors[c]) < 0.05);
  CHECK(counts[0] > counts[1]);
  CHECK(counts[1] > counts[2]);
}

TEST_CASE("hard fraction 0 gives one length distribution") {
  const auto corpus = generate_synthetic_corpus({.train_size = 300, .validation_size = 10, .test_size = 10, .hard_fraction = 0.0});
  for (const auto& ex : corpus.train) {
    const auto n = tokenize(ex.text).size();
    CHECK(n >= 12);
    CHECK(n <= 25);
  }
  const auto hard = generate_synthetic_corpus({.train_size = 300, .validation_size = 10, .test_size = 10, .hard_fraction = 1.0});
  for (const auto& ex : hard.train) CHECK(tokenize(ex.text).size() >= 24);
}

TEST_CASE("multi-label synthetic corpus produces label sets") {
  const auto corpus = generate_synthetic_corpus(
      {.num_classes = 5, .train_size = 500, .validation_size = 10, .test_size = 10, .kind = LabelKind::Multi});
  std::size_t multi = 0;
  for (const auto& ex : corpus.train) {
    CHECK(std::is_sorted(ex.labels.begin(), ex.labels.end()));
    multi += ex.labels.size() > 1;
  }
  CHECK(multi > 50);
  const auto freq = class_frequencies(corpus.train, 5);
  CHECK(freq[0] > freq[4]);
}

TEST_CASE("invalid synthetic specs are rejected") {
  CHECK_THROWS_AS(generate_synthetic_corpus({.num_classes = 1}), ConfigError);
  CHECK_THROWS_AS(generate_synthetic_corpus({.train_size = 5}), ConfigError);
  CHECK_THROWS_AS(generate_synthetic_corpus({.hard_fraction = 1.5}), ConfigError);
}
