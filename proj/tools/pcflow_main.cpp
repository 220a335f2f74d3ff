#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pcflow/parallel.hpp"
#include "pcflow/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "pipeline config (JSON)")->required();
  cmd->add_option("--set", args.overrides,
                  "override a config field, e.g. --set rl.steps=50 (repeatable)");
  cmd->add_option("--threads", args.threads, "cap worker threads (overrides config)");
}

pcflow::PipelineConfig load_config(const CommonArgs& args) {
  pcflow::PipelineConfig config = pcflow::PipelineConfig::load(args.config_path, args.overrides);
  if (args.threads >= 0) config.threads = args.threads;
  pcflow::set_max_threads(config.threads);
  std::cout << "resolved config:\n" << config.resolved().dump(2) << "\n";
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"point-cloud conditioned video pipeline"};
  app.require_subcommand(1);

  CommonArgs synth_args, aggregate_args, complete_args, render_args, sft_args, prefs_args,
      reward_args, rl_args, eval_args, demo_args;

  CLI::App* synth = app.add_subcommand("synth", "generate synthetic scenes");
  add_common(synth, synth_args);

  CLI::App* aggregate = app.add_subcommand("aggregate", "build aggregated point-cloud assets");
  add_common(aggregate, aggregate_args);

  CLI::App* complete = app.add_subcommand("complete", "rebuild assets with vehicle completion");
  add_common(complete, complete_args);

  CLI::App* render = app.add_subcommand("render", "render an edited clip to pseudo-images");
  add_common(render, render_args);
  std::string render_scene, render_edit, render_out;
  int render_first = 0, render_len = 0;
  render->add_option("--scene", render_scene, "scene directory")->required();
  render->add_option("--edit", render_edit, "EditSpec JSON file");
  render->add_option("--out", render_out, "output clip directory")->required();
  render->add_option("--first-frame", render_first, "clip start frame");
  render->add_option("--clip-length", render_len, "clip length (0 = generator frames)");

  CLI::App* train_sft = app.add_subcommand("train-sft", "supervised fine-tuning of the generator");
  add_common(train_sft, sft_args);

  CLI::App* build_prefs = app.add_subcommand("build-prefs", "construct the preference-pair dataset");
  add_common(build_prefs, prefs_args);

  CLI::App* train_reward =
      app.add_subcommand("train-reward", "train the pairwise (and pointwise) reward models");
  add_common(train_reward, reward_args);

  CLI::App* rl_train = app.add_subcommand("rl-train", "reinforcement post-training on OOD edits");
  add_common(rl_train, rl_args);

  CLI::App* eval = app.add_subcommand("eval", "fixed-seed paired evaluation of two checkpoints");
  add_common(eval, eval_args);
  std::string eval_a, eval_b, eval_out = "eval.csv";
  eval->add_option("--checkpoint-a", eval_a, "checkpoint stem (policy under test)")->required();
  eval->add_option("--checkpoint-b", eval_b, "checkpoint stem (baseline)")->required();
  eval->add_option("--out", eval_out, "output CSV path");

  CLI::App* demo = app.add_subcommand("demo", "tiny end-to-end run exercising every stage");
  add_common(demo, demo_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      pcflow::run_synth(load_config(synth_args));
    } else if (aggregate->parsed()) {
      pcflow::run_aggregate(load_config(aggregate_args), false);
    } else if (complete->parsed()) {
      pcflow::run_aggregate(load_config(complete_args), true);
    } else if (render->parsed()) {
      auto config = load_config(render_args);
      const int len = render_len > 0 ? render_len : config.generator.frames;
      pcflow::run_render(config, render_scene, render_edit, render_out, render_first, len);
    } else if (train_sft->parsed()) {
      pcflow::run_train_sft(load_config(sft_args));
    } else if (build_prefs->parsed()) {
      pcflow::run_build_prefs(load_config(prefs_args));
    } else if (train_reward->parsed()) {
      pcflow::run_train_reward(load_config(reward_args));
    } else if (rl_train->parsed()) {
      pcflow::run_rl_train(load_config(rl_args));
    } else if (eval->parsed()) {
      pcflow::run_eval(load_config(eval_args), eval_a, eval_b, eval_out);
    } else if (demo->parsed()) {
      pcflow::run_demo(load_config(demo_args));
    }
  } catch (const pcflow::ValidationError& e) {
    std::cerr << "config error at " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
