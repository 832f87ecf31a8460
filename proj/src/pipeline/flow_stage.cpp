#include <cmath>
#include <json.hpp>

#include "common.hpp"
#include "motad/errors.hpp"
#include "motad/flow/tvl1.hpp"
#include "motad/imaging/io.hpp"
#include "motad/imaging/ops.hpp"
#include "motad/kinematics/expectation.hpp"
#include "motad/log.hpp"
#include "motad/neural/variants.hpp"
#include "motad/pipeline/parallel.hpp"
#include "motad/pipeline/stages.hpp"
#include "motad/registration/fourier_mellin.hpp"

namespace motad::pipeline {

namespace fs = std::filesystem;

namespace {

const char* kRegistrationHeader = "frame,tx,ty,sigma,theta,peak,low_confidence";
const char* kFeaturesHeader = "frame,max_flow_mag,body_motion_mag,camera_motion_mag";

struct ExecOutcome {
  enum { processed, up_to_date, skipped } status = processed;
  std::size_t files = 0;
  std::string reason;
};

fs::file_time_type newest_input(const fs::path& dir, int frames) {
  auto t = fs::file_time_type::min();
  for (int i = 0; i < frames; ++i) {
    t = std::max({t, fs::last_write_time(frame_path(dir, FrameStream::rgb, i)),
                  fs::last_write_time(frame_path(dir, FrameStream::rendered, i))});
  }
  return t;
}

bool outputs_current(const fs::path& dir, const std::string& stamp, int frames) {
  const fs::path sp = detail::stamp_path(dir);
  if (!fs::exists(sp) || detail::read_text(sp) != stamp) return false;
  for (const char* f : {"registration.csv", "features.csv"}) {
    if (!fs::exists(dir / "flow" / f)) return false;
  }
  for (int t = 1; t < frames; ++t) {
    if (!fs::exists(flow_path(dir, "real", t)) || !fs::exists(flow_path(dir, "rendered", t))) return false;
    for (const char* s : kVariantStreams) {
      if (!fs::exists(flow_path(dir, s, t))) return false;
    }
  }
  return fs::last_write_time(sp) >= newest_input(dir, frames);
}

ExecOutcome process(const Dataset& ds, const ExecutionEntry& e, const PipelineConfig& cfg, bool force) {
  const fs::path dir = ds.exec_dir(e.id);
  const int n = count_frames(dir);
  if (n < 2) return {ExecOutcome::skipped, 0, "fewer than two frames"};
  const std::string stamp = detail::flow_stamp(cfg, n);
  if (!force && outputs_current(dir, stamp, n)) return {ExecOutcome::up_to_date, 0, {}};
  fs::remove(detail::stamp_path(dir));

  std::vector<Image> gray(n), rendered(n);
  std::vector<Mask> masks(n);
  try {
    for (int t = 0; t < n; ++t) {
      gray[t] = to_gray(ds.frame(e, FrameStream::rgb, t));
      rendered[t] = to_gray(ds.frame(e, FrameStream::rendered, t));
      if (!gray[t].same_shape(gray[0]) || !rendered[t].same_shape(gray[0])) {
        throw FormatError("frame " + std::to_string(t) + " differs in size from frame 0");
      }
      masks[t] = kinematics::body_mask(rendered[t], cfg.flow.mask_threshold, cfg.flow.mask_dilation);
    }
  } catch (const std::exception& ex) {
    return {ExecOutcome::skipped, 0, ex.what()};
  }

  const int side = cfg.model.side;
  if (std::min(gray[0].width(), gray[0].height()) < side) {
    return {ExecOutcome::skipped, 0, "frames are smaller than the model side"};
  }
  const double cx = gray[0].width() / 2.0, cy = gray[0].height() / 2.0;
  for (const char* s : {"real", "rendered"}) fs::create_directories(dir / "flow" / s);
  for (const char* s : kVariantStreams) fs::create_directories(dir / "flow" / s);

  const auto& tv = cfg.flow.tvl1;
  std::string reg_csv = std::string(kRegistrationHeader) + "\n";
  std::string feat_csv = std::string(kFeaturesHeader) + "\n";
  std::size_t files = 0;
  auto put = [&](const FlowField& f, const char* stream, int t) {
    write_flo(f, flow_path(dir, stream, t));
    ++files;
  };
  for (int t = 1; t < n; ++t) {
    const FlowField observed = flow::compute_flow(gray[t - 1], gray[t], tv);
    const FlowField body = flow::compute_flow(rendered[t - 1], rendered[t], tv);
    const Mask pair_mask = masks[t - 1] | masks[t];
    const auto reg = registration::register_similarity(gray[t - 1], gray[t], &pair_mask);
    const Image aligned = nn::align_to_previous(gray[t], reg.transform);

    FlowField raw_c, registered_c;
    if (cfg.flow.native_resolution) {
      raw_c = resize_center_crop(observed, side);
      registered_c = resize_center_crop(flow::compute_flow(gray[t - 1], aligned, tv), side);
    } else {
      const Image prev_s = resize_center_crop(gray[t - 1], side);
      raw_c = flow::compute_flow(prev_s, resize_center_crop(gray[t], side), tv);
      registered_c = flow::compute_flow(prev_s, resize_center_crop(aligned, side), tv);
    }
    const Mask m_c = cache_mask(rendered[t - 1], rendered[t], cfg);

    put(observed, "real", t);
    put(body, "rendered", t);
    put(raw_c, "raw", t);
    put(registered_c, "registered", t);
    put(nn::preprocess_variant(raw_c, nn::Variant::masked, &m_c, nullptr), "masked", t);
    put(nn::preprocess_variant(raw_c, nn::Variant::masked_registered, &m_c, &registered_c), "masked_registered", t);

    const auto& tf = reg.transform;
    reg_csv += std::to_string(t) + "," + detail::num(tf.tx) + "," + detail::num(tf.ty) + "," + detail::num(tf.sigma) +
               "," + detail::num(tf.theta) + "," + detail::num(reg.peak_response) + "," +
               (reg.low_confidence ? "1" : "0") + "\n";

    hmm::FeatureVector fv;
    for (float m : flow_magnitude(observed)) fv.max_flow_mag = std::max(fv.max_flow_mag, static_cast<double>(m));
    if (masks[t - 1].any()) {
      const auto [mx, my] = masked_median(observed, masks[t - 1]);
      fv.body_motion_mag = std::hypot(mx, my);
    }
    const auto centred = tf.about(cx, cy);
    fv.camera_motion_mag = std::hypot(centred.tx, centred.ty);
    feat_csv += std::to_string(t) + "," + detail::num(fv.max_flow_mag) + "," + detail::num(fv.body_motion_mag) + "," +
                detail::num(fv.camera_motion_mag) + "\n";
  }
  detail::write_text_atomic(dir / "flow" / "registration.csv", reg_csv);
  detail::write_text_atomic(dir / "flow" / "features.csv", feat_csv);
  // Written last: the stamp certifies a complete set of outputs.
  detail::write_text_atomic(detail::stamp_path(dir), stamp);
  return {ExecOutcome::processed, files + 3, {}};
}

}  // namespace

Mask cache_mask(const Image& rendered_prev, const Image& rendered_next, const PipelineConfig& cfg) {
  const int side = cfg.model.side;
  const int native = std::min(rendered_prev.width(), rendered_prev.height());
  const int dilation = static_cast<int>(std::lround(cfg.flow.mask_dilation * static_cast<double>(side) / native));
  const float thr = cfg.flow.mask_threshold;
  return kinematics::body_mask(resize_center_crop(to_gray(rendered_prev), side), thr, dilation) |
         kinematics::body_mask(resize_center_crop(to_gray(rendered_next), side), thr, dilation);
}

FlowReport cmd_flow(const PipelineConfig& cfg, bool force) {
  cfg.validate();
  const auto log = open_access_log(cfg, "flow");
  const Dataset ds(cfg.root, read_manifest(cfg.root), log.get());
  const auto& execs = ds.manifest().executions;
  std::vector<ExecOutcome> out(execs.size());
  parallel_for(static_cast<int>(execs.size()), cfg.jobs, [&](int i) { out[i] = process(ds, execs[i], cfg, force); });

  FlowReport r;
  nlohmann::json skipped = nlohmann::json::array();
  for (std::size_t i = 0; i < execs.size(); ++i) {
    switch (out[i].status) {
      case ExecOutcome::processed: ++r.processed; break;
      case ExecOutcome::up_to_date: ++r.up_to_date; break;
      case ExecOutcome::skipped:
        r.skipped.emplace_back(execs[i].id, out[i].reason);
        skipped.push_back({{"id", execs[i].id}, {"reason", out[i].reason}});
        log::warn("flow: skipping " + execs[i].id + ": " + out[i].reason);
        break;
    }
    r.files_written += out[i].files;
  }
  const nlohmann::json report = {{"processed", r.processed},
                                 {"up_to_date", r.up_to_date},
                                 {"files_written", r.files_written},
                                 {"skipped", skipped}};
  detail::write_text_atomic(cfg.root / "flow_report.json", report.dump(2) + "\n");
  log::info("flow: " + std::to_string(r.processed) + " processed, " + std::to_string(r.up_to_date) +
            " up to date, " + std::to_string(r.skipped.size()) + " skipped");
  return r;
}

std::vector<RegistrationRow> read_registration_csv(const fs::path& path) {
  std::vector<RegistrationRow> out;
  for (const auto& r : detail::read_numeric_csv(path, kRegistrationHeader, 1)) {
    RegistrationRow row;
    row.frame = static_cast<int>(r[0]);
    row.transform = {r[1], r[2], r[3], r[4]};
    row.peak = r[5];
    row.low_confidence = r[6] != 0.0;
    out.push_back(row);
  }
  return out;
}

std::vector<hmm::FeatureVector> read_features_csv(const fs::path& path) {
  std::vector<hmm::FeatureVector> out;
  for (const auto& r : detail::read_numeric_csv(path, kFeaturesHeader, 1)) out.push_back({r[1], r[2], r[3]});
  return out;
}

}  // namespace motad::pipeline
