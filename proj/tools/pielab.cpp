// Command-line front end: corpus generation, training, pruning experiments,
// PIE / influence / readability analyses and the report bundle.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

#include "pielab/common.hpp"
#include "pielab/corpus.hpp"
#include "pielab/harness.hpp"
#include "pielab/influence.hpp"
#include "pielab/pie.hpp"
#include "pielab/readability.hpp"
#include "pielab/report.hpp"

namespace fs = std::filesystem;
using namespace pielab;

namespace {

struct SharedFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

void add_shared(CLI::App* cmd, SharedFlags& f) {
  cmd->add_option("--config", f.config, "Experiment configuration (JSON)");
  cmd->add_option("--out", f.out, "Output location");
  cmd->add_option("--seed", f.seed, "Override the base seed");
  cmd->add_option("--jobs", f.jobs, "Worker threads (changes wall time only)")->check(CLI::PositiveNumber);
}

harness::ExperimentConfig load_config(const SharedFlags& f) {
  if (f.config.empty()) throw ConfigError("--config is required");
  auto config = harness::parse_config(f.config);
  if (f.seed) config.base_seed = *f.seed;
  return config;
}

fs::path default_run_dir(const harness::ExperimentConfig& config) { return fs::path("runs") / config.name; }

// Analysis commands take the run directory as a positional argument, or derive
// it from --config.
fs::path resolve_run_dir(const std::string& positional, const SharedFlags& f) {
  if (!positional.empty()) return positional;
  if (!f.config.empty()) return default_run_dir(harness::parse_config(f.config));
  throw ConfigError("give the run directory or --config");
}

void gen_corpus(const SharedFlags& f) {
  corpus::SyntheticSpec spec;
  if (!f.config.empty()) {
    const auto j = nlohmann::json::parse(harness::read_file(f.config), nullptr, false);
    if (j.is_discarded()) throw ConfigError("malformed JSON in " + f.config);
    if (j.contains("corpus")) {
      const auto config = harness::config_from_json(j);
      if (!config.corpus.synthetic) throw ConfigError("the configuration does not describe a synthetic corpus");
      spec = *config.corpus.synthetic;
    } else {
      spec = harness::synthetic_from_json(j);
    }
  }
  if (f.seed) spec.seed = *f.seed;
  const fs::path out = f.out.empty() ? fs::path("corpus") : fs::path(f.out);
  corpus::save_corpus(corpus::generate_synthetic_corpus(spec), out);
  log_info("wrote synthetic corpus to " + out.string());
}

void train(const SharedFlags& f, bool unpruned_only) {
  const auto config = load_config(f);
  const fs::path run_dir = f.out.empty() ? default_run_dir(config) : fs::path(f.out);
  harness::run_experiment(config, run_dir, {f.jobs, unpruned_only});
  if (!unpruned_only) {
    harness::summarize(run_dir);
    log_info("wrote " + (run_dir / "summary.csv").string());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pielab: pruning-identified exemplars in small text classifiers"};
  app.require_subcommand(1);

  SharedFlags f;
  std::string run_dir_arg;

  auto* gen = app.add_subcommand("gen-corpus", "Write the synthetic corpus to --out");
  add_shared(gen, f);

  auto* train_cmd = app.add_subcommand("train", "Train the unpruned baseline initializations");
  add_shared(train_cmd, f);

  auto* prune_cmd = app.add_subcommand("prune-exp", "Train baseline and pruned conditions, then summarize");
  add_shared(prune_cmd, f);

  auto* pies_cmd = app.add_subcommand("pies", "Detect PIEs for every pruned condition");
  add_shared(pies_cmd, f);
  pies_cmd->add_option("run_dir", run_dir_arg, "Run directory");

  bool pruned_source = false;
  int n_bins = 20;
  auto* infl_cmd = app.add_subcommand("influence", "EL2N profile, bins and PIE fraction per bin");
  add_shared(infl_cmd, f);
  infl_cmd->add_option("run_dir", run_dir_arg, "Run directory");
  infl_cmd->add_flag("--pruned-source", pruned_source, "Profile each pruned condition from its own checkpoints");
  infl_cmd->add_option("--bins", n_bins, "Number of EL2N bins")->check(CLI::PositiveNumber);

  std::string easy_words;
  std::string split = "test";
  auto* read_cmd = app.add_subcommand("readability", "Readability battery and PIE/all ratios");
  add_shared(read_cmd, f);
  read_cmd->add_option("run_dir", run_dir_arg, "Run directory");
  read_cmd->add_option("--easy-words", easy_words, "Easy-word list (one word per line)");
  read_cmd->add_option("--split", split, "Split to analyze")->check(CLI::IsMember({"train", "test"}));

  auto* report_cmd = app.add_subcommand("report", "Write the CSV + SVG report bundle");
  add_shared(report_cmd, f);
  report_cmd->add_option("run_dir", run_dir_arg, "Run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::Config);
  }

  try {
    if (gen->parsed()) {
      gen_corpus(f);
    } else if (train_cmd->parsed()) {
      train(f, true);
    } else if (prune_cmd->parsed()) {
      train(f, false);
    } else if (pies_cmd->parsed()) {
      const auto run = harness::RunData::open(resolve_run_dir(run_dir_arg, f));
      const auto reports = pie::analyze_run(run);
      for (const auto& r : reports)
        std::cout << r.condition.directory_name() << " " << r.split << " pie_fraction " << format_stat(r.pie_fraction)
                  << "\n";
    } else if (infl_cmd->parsed()) {
      const auto run = harness::RunData::open(resolve_run_dir(run_dir_arg, f));
      influence::analyze_run(run, {pruned_source, n_bins, f.jobs});
      log_info("wrote " + (run.layout.analysis() / "influence_bins.csv").string());
    } else if (read_cmd->parsed()) {
      const auto run = harness::RunData::open(resolve_run_dir(run_dir_arg, f));
      const auto easy = readability::EasyWordList::load(easy_words.empty() ? readability::default_easy_words_path()
                                                                           : fs::path(easy_words));
      readability::analyze_run(run, easy, {split});
      log_info("wrote " + (run.layout.analysis() / "readability_ratios.csv").string());
    } else if (report_cmd->parsed()) {
      const auto run_dir = resolve_run_dir(run_dir_arg, f);
      const fs::path out = f.out.empty() ? run_dir / "report" : fs::path(f.out);
      const auto bundle = report::write_report(run_dir, out);
      for (const auto& file : bundle.files) std::cout << file.string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "pielab: error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "pielab: error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Failure);
  }
  return 0;
}
