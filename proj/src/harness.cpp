#include "pielab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "pielab/nn/checkpoint.hpp"
#include "pielab/nn/train.hpp"

namespace pielab::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key \"" + key + "\" in " + std::string(where));
  }
}

template <typename T>
void read_field(const json& j, std::string_view key, T& out, std::string_view where) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("invalid value for \"" + std::string(key) + "\" in " + std::string(where));
  }
}

std::string pruner_from_json(const json& j) {
  if (j.is_string()) return prune::PrunerSpec::from_id(j.get<std::string>(), 0.5).canonical_id();
  reject_unknown(j, {"scoring", "schedule", "tuning"}, "pruner");
  for (const char* key : {"scoring", "schedule", "tuning"})
    if (!j.contains(key) || !j[key].is_string())
      throw ConfigError(std::string("pruner object needs a string \"") + key + "\"");
  const auto scoring = prune::scoring_from_string(j["scoring"].get<std::string>());
  const auto schedule = prune::schedule_from_string(j["schedule"].get<std::string>());
  const auto tuning = prune::tuning_from_string(j["tuning"].get<std::string>());
  // the target does not matter for validating the combination
  return prune::PrunerSpec(scoring, schedule, tuning, 0.5).canonical_id();
}

}  // namespace

corpus::SyntheticSpec synthetic_from_json(const json& j) {
  reject_unknown(j,
                 {"num_classes", "train_size", "validation_size", "test_size", "seed", "kind", "hard_fraction",
                  "class_skew", "extra_label_rate"},
                 "corpus.synthetic");
  corpus::SyntheticSpec s;
  read_field(j, "num_classes", s.num_classes, "corpus.synthetic");
  read_field(j, "train_size", s.train_size, "corpus.synthetic");
  read_field(j, "validation_size", s.validation_size, "corpus.synthetic");
  read_field(j, "test_size", s.test_size, "corpus.synthetic");
  read_field(j, "seed", s.seed, "corpus.synthetic");
  std::string kind(to_string(s.kind));
  read_field(j, "kind", kind, "corpus.synthetic");
  s.kind = label_kind_from_string(kind);
  read_field(j, "hard_fraction", s.hard_fraction, "corpus.synthetic");
  read_field(j, "class_skew", s.class_skew, "corpus.synthetic");
  read_field(j, "extra_label_rate", s.extra_label_rate, "corpus.synthetic");
  corpus::validate(s);
  return s;
}

json synthetic_to_json(const corpus::SyntheticSpec& s) {
  return json{{"num_classes", s.num_classes},     {"train_size", s.train_size},
              {"validation_size", s.validation_size}, {"test_size", s.test_size},
              {"seed", s.seed},                   {"kind", std::string(to_string(s.kind))},
              {"hard_fraction", s.hard_fraction}, {"class_skew", s.class_skew},
              {"extra_label_rate", s.extra_label_rate}};
}

void ExperimentConfig::validate() const {
  if (name.empty() || name.find('/') != std::string::npos) throw ConfigError("name must be non-empty without '/'");
  if (corpus.path.has_value() == corpus.synthetic.has_value())
    throw ConfigError("corpus needs exactly one of \"path\" or \"synthetic\"");
  if (corpus.synthetic) corpus::validate(*corpus.synthetic);
  if (!(corpus.coverage > 0.0 && corpus.coverage <= 1.0)) throw ConfigError("corpus.coverage must be in (0, 1]");
  if (corpus.max_tokens < 0) throw ConfigError("corpus.max_tokens must be >= 0");
  if (embedding_dim < 1 || hidden_dim < 1) throw ConfigError("model dimensions must be >= 1");
  if (n_initializations < 1) throw ConfigError("n_initializations must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (impact_sample_size < 1) throw ConfigError("impact_sample_size must be >= 1");
  std::set<std::string> seen;
  for (const auto& id : pruners) {
    (void)prune::PrunerSpec::from_id(id, 0.5);
    if (!seen.insert(id).second) throw ConfigError("pruner " + id + " listed twice");
  }
  if (!pruners.empty() && thresholds.empty()) throw ConfigError("pruners given but no thresholds");
  std::set<double> seen_t;
  for (double t : thresholds) {
    if (!(t > 0.0 && t < 1.0)) throw ConfigError("thresholds must be in (0, 1), got " + format_threshold(t));
    if (!seen_t.insert(t).second) throw ConfigError("threshold " + format_threshold(t) + " listed twice");
  }
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j,
                 {"name", "corpus", "model", "pruners", "thresholds", "n_initializations", "epochs", "batch_size",
                  "learning_rate", "momentum", "impact_sample_size", "base_seed"},
                 "config");
  ExperimentConfig c;
  read_field(j, "name", c.name, "config");
  if (!j.contains("corpus")) throw ConfigError("config needs a \"corpus\" section");
  const auto& cj = j["corpus"];
  reject_unknown(cj, {"path", "synthetic", "coverage", "max_tokens"}, "corpus");
  if (cj.contains("path")) {
    std::string p;
    read_field(cj, "path", p, "corpus");
    c.corpus.path = p;
  }
  if (cj.contains("synthetic")) c.corpus.synthetic = synthetic_from_json(cj["synthetic"]);
  read_field(cj, "coverage", c.corpus.coverage, "corpus");
  if (cj.contains("max_tokens") && !cj["max_tokens"].is_null()) read_field(cj, "max_tokens", c.corpus.max_tokens, "corpus");
  if (j.contains("model")) {
    const auto& mj = j["model"];
    reject_unknown(mj, {"family", "embedding_dim", "hidden_dim"}, "model");
    std::string family(nn::to_string(c.family));
    read_field(mj, "family", family, "model");
    c.family = nn::family_from_string(family);
    read_field(mj, "embedding_dim", c.embedding_dim, "model");
    read_field(mj, "hidden_dim", c.hidden_dim, "model");
  }
  if (j.contains("pruners")) {
    if (!j["pruners"].is_array()) throw ConfigError("\"pruners\" must be an array");
    for (const auto& p : j["pruners"]) c.pruners.push_back(pruner_from_json(p));
  }
  read_field(j, "thresholds", c.thresholds, "config");
  read_field(j, "n_initializations", c.n_initializations, "config");
  read_field(j, "epochs", c.epochs, "config");
  read_field(j, "batch_size", c.batch_size, "config");
  read_field(j, "learning_rate", c.learning_rate, "config");
  read_field(j, "momentum", c.momentum, "config");
  read_field(j, "impact_sample_size", c.impact_sample_size, "config");
  read_field(j, "base_seed", c.base_seed, "config");
  c.validate();
  return c;
}

ExperimentConfig parse_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  auto config = config_from_json(j);
  // relative corpus paths are relative to the config file
  if (config.corpus.path && config.corpus.path->is_relative()) {
    const auto candidate = path.parent_path() / *config.corpus.path;
    if (fs::exists(candidate)) config.corpus.path = fs::absolute(candidate).lexically_normal();
  }
  return config;
}

json config_to_json(const ExperimentConfig& c) {
  json corpus_j;
  if (c.corpus.path) corpus_j["path"] = c.corpus.path->string();
  if (c.corpus.synthetic) corpus_j["synthetic"] = synthetic_to_json(*c.corpus.synthetic);
  corpus_j["coverage"] = c.corpus.coverage;
  corpus_j["max_tokens"] = c.corpus.max_tokens;
  return json{{"name", c.name},
              {"corpus", corpus_j},
              {"model",
               {{"family", std::string(nn::to_string(c.family))},
                {"embedding_dim", c.embedding_dim},
                {"hidden_dim", c.hidden_dim}}},
              {"pruners", c.pruners},
              {"thresholds", c.thresholds},
              {"n_initializations", c.n_initializations},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"momentum", c.momentum},
              {"impact_sample_size", c.impact_sample_size},
              {"base_seed", c.base_seed}};
}

corpus::CorpusSplits materialize_corpus(const CorpusSource& source, const fs::path& base_dir) {
  if (source.synthetic) return corpus::generate_synthetic_corpus(*source.synthetic);
  if (!source.path) throw ConfigError("corpus source is empty");
  fs::path p = *source.path;
  if (p.is_relative()) {
    if (!base_dir.empty() && fs::exists(base_dir / p)) {
      p = base_dir / p;
    } else if (const char* root = std::getenv("PIELAB_DATA"); root && *root && !fs::exists(p)) {
      p = fs::path(root) / p;
    }
  }
  if (!fs::exists(p)) throw MissingInputError("corpus directory not found: " + p.string());
  auto corpus = corpus::load_corpus(p);
  for (const auto& w : corpus.warnings) log_warning(w);
  return corpus;
}

const std::vector<corpus::EncodedExample>& EncodedCorpus::split(std::string_view name) const {
  if (name == "train") return train;
  if (name == "test") return test;
  throw Error("no encoded split named " + std::string(name));
}

EncodedCorpus encode_corpus(const corpus::CorpusSplits& corpus, const ExperimentConfig& config) {
  EncodedCorpus out;
  out.vocab = corpus::Vocabulary::build(corpus.train);
  out.max_tokens = corpus::resolve_max_tokens(corpus, config.corpus.max_tokens, config.corpus.coverage);
  out.train = corpus::encode_all(corpus.train, out.vocab, out.max_tokens, corpus.label_space);
  out.test = corpus::encode_all(corpus.test, out.vocab, out.max_tokens, corpus.label_space);
  out.model = {config.family,
               out.vocab.size(),
               config.embedding_dim,
               config.hidden_dim,
               corpus.label_space.num_classes(),
               corpus.label_space.kind};
  out.model.validate();
  return out;
}

std::string Condition::directory_name() const {
  return pruned() ? pruner_id + "_" + format_threshold(threshold) : "unpruned";
}

std::vector<Condition> conditions(const ExperimentConfig& config) {
  std::vector<Condition> out{{}};
  for (const auto& id : config.pruners)
    for (double t : config.thresholds) out.push_back({id, t});
  return out;
}

int argmax(const nn::Matrix<float>& probs, Eigen::Index row) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < probs.cols(); ++c)
    if (probs(row, c) > probs(row, best)) best = c;
  return static_cast<int>(best);
}

std::vector<int> predicted_set(const nn::Matrix<float>& probs, Eigen::Index row) {
  std::vector<int> out;
  for (Eigen::Index c = 0; c < probs.cols(); ++c)
    if (probs(row, c) >= kPositiveThreshold) out.push_back(static_cast<int>(c));
  return out;
}

double accuracy(std::span<const int> predictions, std::span<const int> gold) {
  if (predictions.size() != gold.size())
    throw Error("accuracy: " + std::to_string(predictions.size()) + " predictions for " + std::to_string(gold.size()) +
                " gold labels");
  if (gold.empty()) throw NumericError("accuracy of an empty split is undefined");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predictions[i] == gold[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double accuracy(const nn::Matrix<float>& probs, std::span<const std::vector<int>> gold) {
  std::vector<int> pred(static_cast<std::size_t>(probs.rows()));
  std::vector<int> g(gold.size());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) pred[static_cast<std::size_t>(r)] = argmax(probs, r);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != 1) throw Error("accuracy needs exactly one gold label per example");
    g[i] = gold[i].front();
  }
  return accuracy(pred, g);
}

double macro_f1(const nn::Matrix<float>& probs, std::span<const std::vector<int>> gold) {
  if (static_cast<std::size_t>(probs.rows()) != gold.size()) throw Error("macro_f1: row count differs from gold count");
  const auto C = static_cast<std::size_t>(probs.cols());
  if (C == 0) throw NumericError("macro_f1 needs at least one class");
  std::vector<std::int64_t> tp(C), fp(C), fn(C);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::vector<bool> g(C, false);
    for (int c : gold[i]) g.at(static_cast<std::size_t>(c)) = true;
    for (std::size_t c = 0; c < C; ++c) {
      const bool p = probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) >= kPositiveThreshold;
      tp[c] += p && g[c];
      fp[c] += p && !g[c];
      fn[c] += !p && g[c];
    }
  }
  double total = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    const auto denom = 2 * tp[c] + fp[c] + fn[c];
    // F1 = 2PR/(P+R) = 2tp / (2tp + fp + fn); 0 when undefined
    if (denom > 0) total += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
  }
  return total / static_cast<double>(C);
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw NumericError("mean of an empty set is undefined");
  MeanStd out;
  // identical values give exactly that value and a zero spread
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    out.mean = values.front();
    return out;
  }
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

fs::path RunLayout::init(const Condition& c, int k) const { return condition(c) / ("init_" + std::to_string(k)); }

fs::path RunLayout::checkpoint(const Condition& c, int k, int epoch) const {
  return init(c, k) / ("checkpoint_epoch_" + std::to_string(epoch) + ".bin");
}

fs::path RunLayout::predictions(const Condition& c, int k, std::string_view split) const {
  return init(c, k) / ("predictions_" + std::string(split) + ".csv");
}

fs::path RunLayout::run_metadata(const Condition& c, int k) const { return init(c, k) / "run.json"; }

void write_file(const fs::path& file, std::string_view content) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, file);
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw MissingInputError("missing file " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_predictions(const fs::path& file, std::span<const std::int64_t> ids, const nn::Matrix<float>& probs) {
  if (static_cast<std::size_t>(probs.rows()) != ids.size()) throw Error("prediction rows differ from id count");
  std::string out = "example_id";
  for (Eigen::Index c = 0; c < probs.cols(); ++c) out += ",p_class_" + std::to_string(c);
  out += '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += std::to_string(ids[i]);
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      const float v = probs(static_cast<Eigen::Index>(i), c);
      if (!std::isfinite(v)) throw NumericError("non-finite probability for example " + std::to_string(ids[i]));
      out += ',';
      out += format_float(v);
    }
    out += '\n';
  }
  write_file(file, out);
}

PredictionMatrix read_prediction_matrix(std::span<const fs::path> files, std::string_view split, int num_classes) {
  PredictionMatrix m;
  m.split = std::string(split);
  for (std::size_t k = 0; k < files.size(); ++k) {
    if (!fs::exists(files[k]))
      throw MissingInputError("missing predictions of initialization " + std::to_string(k) + ": " + files[k].string());
    std::istringstream in(read_file(files[k]));
    std::string line;
    std::getline(in, line);
    std::vector<std::int64_t> ids;
    std::vector<float> values;
    int line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const char* p = line.data();
      const char* end = line.data() + line.size();
      std::int64_t id = 0;
      auto r = std::from_chars(p, end, id);
      if (r.ec != std::errc()) throw FormatError(files[k].string() + ": bad example id at line " + std::to_string(line_no));
      p = r.ptr;
      for (int c = 0; c < num_classes; ++c) {
        if (p == end || *p != ',') throw FormatError(files[k].string() + ": too few columns at line " + std::to_string(line_no));
        float v = 0;
        r = std::from_chars(p + 1, end, v);
        if (r.ec != std::errc()) throw FormatError(files[k].string() + ": bad probability at line " + std::to_string(line_no));
        if (!(v >= 0.0F && v <= 1.0F)) throw NumericError(files[k].string() + ": probability out of [0,1] at line " + std::to_string(line_no));
        values.push_back(v);
        p = r.ptr;
      }
      if (p != end) throw FormatError(files[k].string() + ": too many columns at line " + std::to_string(line_no));
      ids.push_back(id);
    }
    if (k == 0) {
      m.example_ids = ids;
    } else if (ids != m.example_ids) {
      throw FormatError("initialization " + std::to_string(k) + " covers different examples than initialization 0");
    }
    nn::Matrix<float> probs(static_cast<Eigen::Index>(ids.size()), num_classes);
    std::copy(values.begin(), values.end(), probs.data());
    m.per_init.push_back(std::move(probs));
  }
  return m;
}

namespace {

struct Task {
  Condition condition;
  int init = 0;
};

void write_run(const ExperimentConfig& config, const EncodedCorpus& data, const RunLayout& layout, const Task& task) {
  const auto seed = config.base_seed + static_cast<std::uint64_t>(task.init);
  const auto& cond = task.condition;
  prune::PrunerRunHyper hyper;
  hyper.epochs = config.epochs;
  hyper.impact_sample_size = config.impact_sample_size;
  hyper.train.batch_size = config.batch_size;
  hyper.train.sgd = {config.learning_rate, config.momentum};

  const auto save = [&](const nn::TrainState& s) {
    nn::save_checkpoint(layout.checkpoint(cond, task.init, s.epoch), s.checkpoint());
  };
  fs::create_directories(layout.init(cond, task.init));

  json meta{{"condition", cond.directory_name()},
            {"pruner_id", cond.pruner_id},
            {"threshold", cond.pruned() ? json(cond.threshold) : json(nullptr)},
            {"init", task.init},
            {"seed", seed}};
  nn::ParamSet<float> final_params;
  std::vector<double> losses;
  if (!cond.pruned()) {
    auto state = nn::initial_state(data.model, seed);
    for (int e = 0; e < config.epochs; ++e) {
      losses.push_back(nn::train_epoch(state, data.train, hyper.train));
      save(state);
    }
    meta["total_epochs"] = state.epoch;
    meta["prune_events"] = json::array();
    final_params = std::move(state.params);
  } else {
    const auto spec = prune::PrunerSpec::from_id(cond.pruner_id, cond.threshold);
    auto run = prune::run_pruner(spec, data.model, seed, data.train, hyper, save);
    meta["total_epochs"] = run.total_epochs;
    json events = json::array();
    for (const auto& ev : run.events)
      events.push_back({{"after_epoch", ev.after_epoch},
                        {"step_fraction", ev.step_fraction},
                        {"nominal_pruned_fraction", ev.stats.nominal_pruned_fraction},
                        {"effective_pruned_fraction", ev.stats.effective_pruned_fraction}});
    meta["prune_events"] = events;
    losses = run.epoch_losses;
    final_params = std::move(run.final_state.params);
  }
  meta["epoch_losses"] = losses;
  for (auto split : kPredictionSplits) {
    const auto& examples = data.split(split);
    std::vector<std::int64_t> ids;
    for (const auto& ex : examples) ids.push_back(ex.id);
    write_predictions(layout.predictions(cond, task.init, split), ids, nn::predict<float>(final_params, examples));
  }
  // run.json last: its presence marks a complete run
  write_file(layout.run_metadata(cond, task.init), meta.dump(2) + "\n");
}

}  // namespace

void run_experiment(const ExperimentConfig& config, const fs::path& run_dir, const RunOptions& options) {
  config.validate();
  if (options.jobs < 1) throw ConfigError("--jobs must be >= 1");
  const RunLayout layout{run_dir};
  const auto config_text = config_to_json(config).dump(2) + "\n";
  if (fs::exists(layout.config())) {
    if (read_file(layout.config()) != config_text)
      throw ConfigError("run directory " + run_dir.string() + " holds a different experiment; choose another output");
  }
  fs::create_directories(run_dir);
  write_file(layout.config(), config_text);

  const auto corpus = materialize_corpus(config.corpus);
  if (!fs::exists(layout.corpus() / "manifest.json")) {
    corpus::save_corpus(corpus, layout.corpus());
  }
  const auto data = encode_corpus(corpus, config);
  log_info("corpus: " + std::to_string(corpus.train.size()) + " train / " + std::to_string(corpus.test.size()) +
           " test examples, vocabulary " + std::to_string(data.vocab.size()) + ", max_tokens " +
           std::to_string(data.max_tokens));

  std::vector<Task> tasks;
  for (const auto& cond : conditions(config)) {
    if (options.unpruned_only && cond.pruned()) continue;
    for (int k = 0; k < config.n_initializations; ++k)
      if (!fs::exists(layout.run_metadata(cond, k))) tasks.push_back({cond, k});
  }
  log_info(std::to_string(tasks.size()) + " model runs to train with " + std::to_string(options.jobs) + " worker(s)");

  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::atomic<bool> failed{false};
  const auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= tasks.size() || failed.load()) return;
      try {
        write_run(config, data, layout, tasks[i]);
        const auto n = done.fetch_add(1) + 1;
        log_info("finished " + tasks[i].condition.directory_name() + "/init_" + std::to_string(tasks[i].init) + " (" +
                 std::to_string(n) + "/" + std::to_string(tasks.size()) + ")");
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(options.jobs), tasks.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

RunData RunData::open(const fs::path& run_dir) {
  RunData d;
  d.layout.root = run_dir;
  if (!fs::exists(d.layout.config())) throw MissingInputError("not a run directory (no config.json): " + run_dir.string());
  json j;
  try {
    j = json::parse(read_file(d.layout.config()));
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed " + d.layout.config().string() + ": " + e.what());
  }
  d.config = config_from_json(j);
  d.corpus = corpus::load_corpus(d.layout.corpus());
  return d;
}

std::vector<std::vector<int>> RunData::gold(std::string_view split) const {
  std::vector<std::vector<int>> out;
  for (const auto& ex : corpus.split(split)) out.push_back(ex.labels);
  return out;
}

PredictionMatrix RunData::predictions(const Condition& condition, std::string_view split) const {
  std::vector<fs::path> files;
  for (int k = 0; k < config.n_initializations; ++k) files.push_back(layout.predictions(condition, k, split));
  auto m = read_prediction_matrix(files, split, corpus.label_space.num_classes());
  const auto& examples = corpus.split(split);
  if (m.example_ids.size() != examples.size())
    throw FormatError("predictions for " + condition.directory_name() + " cover " + std::to_string(m.example_ids.size()) +
                      " examples, the " + std::string(split) + " split has " + std::to_string(examples.size()));
  for (std::size_t i = 0; i < examples.size(); ++i)
    if (m.example_ids[i] != examples[i].id)
      throw FormatError("predictions for " + condition.directory_name() + " are not aligned with the " +
                        std::string(split) + " split");
  return m;
}

int RunData::total_epochs(const Condition& condition) const {
  if (!condition.pruned()) return config.epochs;
  const auto spec = prune::PrunerSpec::from_id(condition.pruner_id, condition.threshold);
  return spec.schedule() == prune::Schedule::Iterative ? 4 * config.epochs : config.epochs;
}

std::vector<SummaryRow> summarize(const fs::path& run_dir) {
  const auto data = RunData::open(run_dir);
  const bool single = data.corpus.label_space.kind == LabelKind::Single;
  std::vector<SummaryRow> rows;
  for (const auto& cond : conditions(data.config)) {
    for (auto split : kPredictionSplits) {
      const auto m = data.predictions(cond, split);
      const auto gold = data.gold(split);
      std::vector<double> values;
      for (const auto& probs : m.per_init) values.push_back(single ? accuracy(probs, gold) : macro_f1(probs, gold));
      rows.push_back({cond, std::string(split), single ? "accuracy" : "macro_f1", mean_std(values)});
    }
  }
  std::string out = "condition,pruner_id,threshold,split,metric,mean,std\n";
  for (const auto& r : rows) {
    out += r.condition.pruned() ? "pruned," : "unpruned,";
    out += r.condition.pruner_id + ",";
    out += (r.condition.pruned() ? format_threshold(r.condition.threshold) : std::string()) + ",";
    out += r.split + "," + r.metric + "," + format_stat(r.value.mean) + "," + format_stat(r.value.std) + "\n";
  }
  write_file(data.layout.summary(), out);
  return rows;
}

}  // namespace pielab::harness
