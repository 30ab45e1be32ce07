// fairrf: train, sweep, compare and evaluate fair classifiers from JSON configs.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fairrf/error.hpp"
#include "fairrf/experiment.hpp"

namespace {

using namespace fairrf;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> output_dir;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("-s,--seed", c.seed, "Run this single seed instead of the config's seed list");
  cmd->add_option("-w,--workers", c.workers, "Parallel runs")->check(CLI::PositiveNumber);
  cmd->add_option("-o,--output-dir", c.output_dir, "Output directory (overrides the config)");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = load_experiment_config(c.config);
  if (c.seed) cfg.seeds = {*c.seed};
  if (c.workers) cfg.workers = *c.workers;
  if (c.output_dir) cfg.output_dir = *c.output_dir;
  cfg.validate();
  return cfg;
}

std::vector<double> parse_grid(const std::string& text, const char* name) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, end - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string(name) + ": cannot parse '" + item + "' as a number");
    }
    pos = end + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair classification with related-feature correlation regularization"};
  app.require_subcommand(1);

  Common train_opts, sweep_opts, compare_opts, eval_opts;
  auto* train = app.add_subcommand("train", "Train one variant for every seed and write a report");
  add_common(train, train_opts);

  auto* sweep = app.add_subcommand("sweep", "Grid over eta x beta; writes sweep.tsv");
  add_common(sweep, sweep_opts);
  std::string eta_grid = "0.2,0.25,0.3,0.35,0.4", beta_grid = "0.4,0.5,0.6,0.7,0.8";
  sweep->add_option("--eta-grid", eta_grid, "Comma-separated eta values")->capture_default_str();
  sweep->add_option("--beta-grid", beta_grid, "Comma-separated beta values")->capture_default_str();

  auto* compare = app.add_subcommand("compare", "Run several variants under shared seeds");
  add_common(compare, compare_opts);
  std::string variants = "vanilla,fairrf";
  compare->add_option("--variants", variants,
                      "Comma-separated: vanilla, fairrf, fix-lambda, remove-r, constrain-all, random, noisy, "
                      "top-1, constrain-s")
      ->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "Metrics of a saved checkpoint");
  add_common(evaluate, eval_opts);
  std::string checkpoint, split_name = "test";
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint.json written by train")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--split", split_name, "train, eval or test")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Write the generated benchmark as CSV");
  SyntheticOptions synth_opts;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--rows", synth_opts.rows, "Rows")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  synth->add_option("--label-shift", synth_opts.label_shift, "Weight of s in the label logit")->capture_default_str();
  synth->add_flag("--case-study", synth_opts.case_study, "Add features a and b");
  synth->add_option("--out", synth_out, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const ExperimentConfig cfg = load(train_opts);
      const FairnessReport r = run_train(cfg);
      std::cout << format_table({{std::string(display_name(cfg.variant)), r}});
      std::cout << "wrote " << cfg.output_dir.string() << "\n";
    } else if (*sweep) {
      const ExperimentConfig cfg = load(sweep_opts);
      const auto rows = run_sweep(cfg, parse_grid(eta_grid, "--eta-grid"), parse_grid(beta_grid, "--beta-grid"));
      std::size_t failed = 0;
      for (const auto& r : rows) failed += r.status != "ok";
      std::cout << sweep_tsv(rows);
      if (failed > 0) std::cerr << "warning: " << failed << " of " << rows.size() << " runs failed\n";
      std::cout << "wrote " << cfg.output_dir.string() << "\n";
      if (failed == rows.size()) return 1;
    } else if (*compare) {
      const ExperimentConfig cfg = load(compare_opts);
      std::vector<Variant> list;
      std::size_t pos = 0;
      while (pos <= variants.size()) {
        const std::size_t end = std::min(variants.find(',', pos), variants.size());
        list.push_back(parse_variant(variants.substr(pos, end - pos)));
        pos = end + 1;
      }
      std::cout << format_table(run_compare(cfg, list));
      std::cout << "wrote " << cfg.output_dir.string() << "\n";
    } else if (*evaluate) {
      const ExperimentConfig cfg = load(eval_opts);
      const LoadedCheckpoint ckpt = load_checkpoint(checkpoint);
      const MetricSet m = evaluate_checkpoint(cfg, load_dataset(cfg), ckpt, split_name);
      nlohmann::ordered_json j;
      j["checkpoint"] = checkpoint;
      j["split"] = split_name;
      j["accuracy"] = m.accuracy;
      j["delta_eo"] = m.delta_eo;
      j["delta_dp"] = m.delta_dp;
      j["delta_eo_hard"] = m.delta_eo_hard;
      j["delta_dp_hard"] = m.delta_dp_hard;
      std::cout << j.dump(2) << "\n";
      if (eval_opts.output_dir) {
        const std::filesystem::path out = std::filesystem::path(*eval_opts.output_dir) / "evaluation.json";
        std::filesystem::create_directories(out.parent_path());
        std::ofstream(out) << j.dump(2) << "\n";
      }
    } else if (*synth) {
      std::ofstream out(synth_out, std::ios::binary);
      if (!out) throw Error("cannot write '" + synth_out + "'");
      out << synthetic_csv(synth_opts, synth_seed);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
