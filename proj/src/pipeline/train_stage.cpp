#include <json.hpp>

#include "common.hpp"
#include "motad/errors.hpp"
#include "motad/imaging/ops.hpp"
#include "motad/log.hpp"
#include "motad/neural/training.hpp"
#include "motad/pipeline/stages.hpp"

namespace motad::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Keeps HMM likelihoods of frames off the training paths finite.
constexpr double kHmmProbabilityFloor = 1e-10;

// Everything that changes the trained weights.
std::string training_key(const PipelineConfig& cfg, const std::vector<const ExecutionEntry*>& execs) {
  std::string s = "variant " + std::string(nn::to_string(cfg.variant)) + " A " + std::to_string(cfg.range.A) +
                  " B " + std::to_string(cfg.range.B) + " seed " + std::to_string(cfg.seed);
  const auto& m = cfg.model;
  s += " model " + std::to_string(m.side) + " " + std::to_string(m.depth) + " " + std::to_string(m.base) + " " +
       std::to_string(m.latent) + " " + detail::num(m.beta);
  s += " train " + std::to_string(cfg.train.epochs) + " " + std::to_string(cfg.train.batch) + " " +
       detail::num(cfg.train.lr);
  s += " flow " + detail::hex(fnv1a(detail::flow_stamp(cfg, 0)));
  for (const auto* e : execs) s += " " + e->id;
  return detail::hex(fnv1a(s));
}

std::string hmm_key(const PipelineConfig& cfg, const std::vector<const ExecutionEntry*>& execs) {
  std::string s = "hmm " + std::to_string(cfg.hmm.n_states) + " " + std::to_string(cfg.hmm.max_iters) + " " +
                  detail::num(cfg.hmm.tol) + " " + detail::num(cfg.hmm.var_floor) + " seed " +
                  std::to_string(cfg.seed) + " flow " + detail::hex(fnv1a(detail::flow_stamp(cfg, 0)));
  for (const auto* e : execs) s += " " + e->id;
  return detail::hex(fnv1a(s));
}

std::optional<json> read_json_if(const fs::path& p) {
  if (!fs::exists(p)) return std::nullopt;
  try {
    return json::parse(detail::read_text(p));
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

}  // namespace

std::string checkpoint_tag(const PipelineConfig& cfg) {
  return std::string(nn::to_string(cfg.variant)) + "_A" + std::to_string(cfg.range.A) + "_B" +
         std::to_string(cfg.range.B);
}

std::string score_tag(const PipelineConfig& cfg) { return checkpoint_tag(cfg) + "_M" + std::to_string(cfg.range.M); }

fs::path checkpoint_path(const PipelineConfig& cfg) { return cfg.root / "models" / (checkpoint_tag(cfg) + ".pun"); }
fs::path score_dir(const PipelineConfig& cfg) { return cfg.root / "scores" / score_tag(cfg); }
fs::path eval_dir(const PipelineConfig& cfg) { return cfg.root / "eval" / score_tag(cfg); }

std::unique_ptr<AccessLog> open_access_log(const PipelineConfig& cfg, const std::string& command) {
  if (!cfg.access_log) return nullptr;
  return std::make_unique<AccessLog>(*cfg.access_log, command);
}

std::vector<FlowField> detail::model_inputs(const Dataset& ds, const ExecutionEntry& e, const PipelineConfig& cfg) {
  const int n = detail::stamped_frames(ds.exec_dir(e.id));
  auto flows = ds.flows(e, nn::to_string(cfg.variant), n - 1);
  for (auto& f : flows) {
    if (f.width() != cfg.model.side || f.height() != cfg.model.side) f = resize_center_crop(f, cfg.model.side);
  }
  return flows;
}

void save_hmm(const hmm::GaussianHmm& m, const fs::path& path) {
  m.validate();
  const json j = {{"pi", m.pi}, {"trans", m.trans}, {"mean", m.mean}, {"var", m.var}};
  detail::write_text_atomic(path, j.dump(2) + "\n");
}

hmm::GaussianHmm load_hmm(const fs::path& path) {
  hmm::GaussianHmm m;
  try {
    const json j = json::parse(detail::read_text(path));
    m.pi = j.at("pi").get<std::vector<double>>();
    m.trans = j.at("trans").get<std::vector<std::vector<double>>>();
    m.mean = j.at("mean").get<std::vector<std::vector<double>>>();
    m.var = j.at("var").get<std::vector<std::vector<double>>>();
    m.validate();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return m;
}

TrainReport cmd_train(const PipelineConfig& cfg, bool force) {
  cfg.validate();
  const auto access = open_access_log(cfg, "train");
  const Dataset ds(cfg.root, read_manifest(cfg.root), access.get());
  const auto execs = detail::flowed(ds, Split::train);
  if (execs.empty()) throw MissingStage("flow", "no train-split executions with flow outputs; run `motad flow`");

  TrainReport r;
  r.checkpoint = checkpoint_path(cfg);
  r.sequences = static_cast<int>(execs.size());
  const fs::path meta_path = fs::path(r.checkpoint).replace_extension(".json");
  const std::string key = training_key(cfg, execs);
  const auto meta = read_json_if(meta_path);
  if (!force && fs::exists(r.checkpoint) && meta && meta->value("key", "") == key) {
    r.reused = true;
    r.epoch_loss = meta->at("epoch_loss").get<std::vector<double>>();
    log::info("train: checkpoint " + r.checkpoint.string() + " is up to date");
  } else {
    std::vector<std::vector<FlowField>> sequences;
    for (const auto* e : execs) sequences.push_back(detail::model_inputs(ds, *e, cfg));
    nn::ProbUNet model(cfg.model, cfg.seed);
    nn::TrainOptions opts;
    opts.epochs = cfg.train.epochs;
    opts.batch = cfg.train.batch;
    opts.lr = cfg.train.lr;
    opts.seed = cfg.seed;
    opts.on_epoch = [&](int epoch, double loss) {
      log::info("train: epoch " + std::to_string(epoch + 1) + "/" + std::to_string(opts.epochs) +
                " loss " + detail::num(loss));
    };
    const nn::TrainResult tr = nn::train(model, sequences, cfg.range, opts);
    fs::create_directories(r.checkpoint.parent_path());
    model.save(r.checkpoint);
    r.epoch_loss = tr.epoch_loss;
    const json m = {{"key", key},
                    {"epoch_loss", tr.epoch_loss},
                    {"samples_per_epoch", tr.samples_per_epoch},
                    {"skipped_sequences", tr.skipped_sequences},
                    {"flow_scale", model.flow_scale()},
                    {"parameters", model.parameter_count()},
                    {"config", json::parse(to_json(cfg))}};
    detail::write_text_atomic(meta_path, m.dump(2) + "\n");
  }

  if (cfg.hmm.enabled) {
    const fs::path hmm_path = cfg.root / "models" / "hmm.json";
    const fs::path hmm_meta = cfg.root / "models" / "hmm.key";
    const std::string hkey = hmm_key(cfg, execs);
    if (force || !fs::exists(hmm_path) || !fs::exists(hmm_meta) || detail::read_text(hmm_meta) != hkey) {
      std::vector<hmm::Sequence> seqs;
      for (const auto* e : execs) {
        seqs.push_back(hmm::to_sequence(read_features_csv(ds.derived(*e, "flow/features.csv"))));
      }
      hmm::FitOptions fo;
      fo.n_states = cfg.hmm.n_states;
      fo.max_iters = cfg.hmm.max_iters;
      fo.tol = cfg.hmm.tol;
      fo.var_floor = cfg.hmm.var_floor;
      fo.seed = cfg.seed;
      const auto fit = hmm::fit(seqs, fo);
      save_hmm(hmm::with_probability_floor(fit.model, kHmmProbabilityFloor), hmm_path);
      detail::write_text_atomic(hmm_meta, hkey);
      log::info("train: HMM fit in " + std::to_string(fit.iterations) + " iterations");
    }
    r.hmm_model = hmm_path;
  }
  return r;
}

}  // namespace motad::pipeline
