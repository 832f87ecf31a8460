// motad: dataset generation, flow precomputation, training, scoring,
// evaluation and the A/B sweep.
//
// Exit codes: 0 success, 1 validation error, 2 an upstream stage is missing.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "motad/errors.hpp"
#include "motad/log.hpp"
#include "motad/pipeline/config.hpp"
#include "motad/pipeline/stages.hpp"

namespace {

using namespace motad;
using namespace motad::pipeline;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::string> root;
  std::optional<int> jobs;
  std::vector<int> a_list, b_list;
  bool force = false;
  bool include_warmup = false;
  bool quiet = false;
};

PipelineConfig resolve(const Flags& f) {
  PipelineConfig c = f.config.empty() ? PipelineConfig{} : load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.root) c.root = *f.root;
  if (f.jobs) c.jobs = *f.jobs;
  if (f.include_warmup) c.include_warmup = true;
  if (f.variant) {
    try {
      c.variant = nn::variant_from_string(*f.variant);
    } catch (const InvalidArgument&) {
      throw ValidationError("--variant: unknown variant '" + *f.variant + "'");
    }
  }
  if (!f.a_list.empty()) c.sweep.A = f.a_list;
  if (!f.b_list.empty()) c.sweep.B = f.b_list;
  c.validate();
  return c;
}

int run(const std::string& verb, const Flags& f) {
  const PipelineConfig c = resolve(f);
  if (verb == "gen") {
    const auto r = cmd_gen(c, f.force);
    std::printf("%d executions written to %s\n", r.executions, c.root.c_str());
  } else if (verb == "flow") {
    const auto r = cmd_flow(c, f.force);
    std::printf("processed %d, up to date %d, skipped %zu, files written %zu\n", r.processed, r.up_to_date,
                r.skipped.size(), r.files_written);
  } else if (verb == "train") {
    const auto r = cmd_train(c, f.force);
    std::printf("%s %s", r.reused ? "up to date:" : "trained:", r.checkpoint.c_str());
    if (!r.epoch_loss.empty()) std::printf(" (loss %.6g -> %.6g)", r.epoch_loss.front(), r.epoch_loss.back());
    std::printf("\n");
  } else if (verb == "score") {
    const auto r = cmd_score(c);
    std::printf("%d traces in %s\n", r.executions, r.dir.c_str());
  } else if (verb == "eval") {
    const auto r = cmd_eval(c);
    std::printf("AUC-ROC %.4f  AUC-PR %.4f  (optical flow only: %.4f / %.4f)\n", r.fused.auc_roc, r.fused.auc_pr,
                r.of_only.auc_roc, r.of_only.auc_pr);
    std::printf("%zu frames, %zu anomalous; report in %s\n", r.frames, r.anomalous_frames, eval_dir(c).c_str());
  } else if (verb == "sweep") {
    for (const auto& cell : cmd_sweep(c)) {
      std::printf("A=%d B=%d  AUC-ROC %.4f  AUC-PR %.4f\n", cell.A, cell.B, cell.fused.auc_roc, cell.fused.auc_pr);
    }
    std::printf("grid written to %s\n", sweep_path(c).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robot execution anomaly detection from optical flow and kinematics"};
  app.require_subcommand(1, 1);
  Flags f;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "Seed (overrides the config)");
    sub->add_option("--variant", f.variant, "raw | registered | masked | masked_registered");
    sub->add_option("--root", f.root, "Dataset root (overrides the config)");
    sub->add_option("--jobs", f.jobs, "Executions processed in parallel")->check(CLI::PositiveNumber);
    sub->add_flag("--force", f.force, "Overwrite existing outputs");
    sub->add_flag("-q,--quiet", f.quiet, "Only print warnings and errors");
  };
  const std::vector<std::pair<const char*, const char*>> verbs = {
      {"gen", "Write the synthetic dataset and its manifest"},
      {"flow", "Compute optical flow, registration and feature caches"},
      {"train", "Train the network (and the HMM baseline) on the train split"},
      {"score", "Write per-execution anomaly traces for the val and test splits"},
      {"eval", "Pool test frames into AUC-ROC / AUC-PR and plots"},
      {"sweep", "Train, score and evaluate a grid of input ranges"}};
  for (const auto& [name, help] : verbs) {
    auto* sub = app.add_subcommand(name, help);
    common(sub);
    if (std::string(name) == "eval") sub->add_flag("--include-warmup", f.include_warmup, "Score warm-up frames too");
    if (std::string(name) == "sweep") {
      sub->add_option("--A", f.a_list, "Smallest offsets to try")->delimiter(',');
      sub->add_option("--B", f.b_list, "Offset range widths to try")->delimiter(',');
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (f.quiet) log::set_level(log::Level::warn);

  const std::string verb = app.get_subcommands().front()->get_name();
  try {
    return run(verb, f);
  } catch (const MissingStage& e) {
    std::fprintf(stderr, "motad %s: missing %s stage: %s\n", verb.c_str(), e.stage().c_str(), e.what());
    return 2;
  } catch (const SingleClassError& e) {
    std::fprintf(stderr, "motad %s: single-class evaluation: %s\n", verb.c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "motad %s: %s\n", verb.c_str(), e.what());
    return 1;
  }
}
