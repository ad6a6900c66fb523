// revprio: run the review-prioritization pipeline stage by stage.
//
//   revprio synth --out corpus.jsonl [--reviews N] [--seed N]
//   revprio <stage> --config run.json [--seed N] [--stage-dir DIR]
//   revprio all --config run.json
//
// Exit codes: 0 success, 2 invalid config or arguments, 1 any other failure.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "revprio/pipeline.hpp"
#include "revprio/synth.hpp"

namespace {

struct StageArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> stage_dir;
  std::optional<std::string> input;
  std::size_t limit = 20;
};

CLI::App* add_stage(CLI::App& app, const std::string& name, const std::string& help, StageArgs& args) {
  auto* sub = app.add_subcommand(name, help);
  sub->add_option("--config", args.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", args.seed, "override the config seed");
  sub->add_option("--stage-dir", args.stage_dir, "override paths.work_dir");
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prioritize app reviews by predicted helpfulness votes"};
  app.require_subcommand(1);

  StageArgs args;
  std::vector<std::pair<CLI::App*, std::string>> stages;
  stages.emplace_back(add_stage(app, "ingest", "parse, filter and split the corpus; build the vocabulary", args), "ingest");
  stages.emplace_back(add_stage(app, "pretrain", "phase one: denoising adaptation of the encoder", args), "pretrain");
  stages.emplace_back(add_stage(app, "pairs", "sample positive and negative training pairs", args), "pairs");
  stages.emplace_back(add_stage(app, "train", "phase two: contrastive fine-tuning", args), "train");
  stages.emplace_back(add_stage(app, "index", "phase three: index training embeddings", args), "index");
  auto* predict = add_stage(app, "predict", "classify and rank reviews", args);
  predict->add_option("--input", args.input, "review JSONL to rank (default: the test split)")
      ->check(CLI::ExistingFile);
  stages.emplace_back(predict, "predict");
  stages.emplace_back(add_stage(app, "evaluate", "score the test split against baselines", args), "evaluate");
  auto* report = add_stage(app, "report", "print the evaluation and priority tables", args);
  report->add_option("--limit", args.limit, "priority rows to print (0 = all)");
  auto* all = add_stage(app, "all", "run every stage from ingest to evaluate", args);
  all->add_option("--limit", args.limit, "priority rows to print (0 = all)");

  revprio::SynthConfig synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "write the seeded synthetic review corpus");
  synth_cmd->add_option("--out", synth_out, "output JSONL path")->required();
  synth_cmd->add_option("--reviews", synth.reviews, "number of records")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth.seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth_cmd->parsed()) {
      revprio::write_jsonl_file(synth_out, revprio::generate_corpus(synth));
      std::cerr << "synth: wrote " << synth.reviews << " records to " << synth_out << '\n';
      return 0;
    }
    revprio::Pipeline pipeline(revprio::load_run_config(args.config, args.seed, args.stage_dir), &std::cerr);
    if (report->parsed()) {
      pipeline.report(std::cout, args.limit);
    } else if (all->parsed()) {
      pipeline.run_all();
      pipeline.report(std::cout, args.limit);
    } else {
      for (const auto& [cmd, name] : stages)
        if (cmd->parsed()) pipeline.run(name, args.input);
    }
    return 0;
  } catch (const revprio::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const revprio::PrerequisiteError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
