#include "common.hpp"

#include <json.hpp>
#include <sstream>

#include "motad/errors.hpp"
#include "motad/log.hpp"

namespace motad::pipeline::detail {

namespace fs = std::filesystem;

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw InvalidArgument("cannot write " + tmp.string());
    os << text;
    if (!os) throw InvalidArgument("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::vector<double>> read_numeric_csv(const fs::path& path, const std::string& header, int first_frame) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != header) throw FormatError(path.string() + ": header mismatch");
  std::size_t n_fields = 1;
  for (char c : header) n_fields += c == ',';
  std::vector<std::vector<double>> rows;
  for (int n = 2; std::getline(is, line); ++n) {
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(n);
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      double v = 0.0;
      const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (r.ec != std::errc() || r.ptr != cell.data() + cell.size()) {
        throw FormatError(where + ": bad number '" + cell + "'");
      }
      row.push_back(v);
    }
    if (row.size() != n_fields) throw FormatError(where + ": wrong field count");
    if (row[0] != static_cast<double>(first_frame + static_cast<int>(rows.size()))) {
      throw FormatError(where + ": frames must count up from " + std::to_string(first_frame) + " without gaps");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string flow_stamp(const PipelineConfig& cfg, int frames) {
  const auto& p = cfg.flow.tvl1;
  std::ostringstream settings;
  settings << "tvl1 " << num(p.lambda) << ' ' << num(p.theta) << ' ' << num(p.tau) << ' ' << p.n_scales << ' '
           << num(p.zoom) << ' ' << p.n_warps << ' ' << p.n_iters << ' ' << num(p.stop_eps) << ' '
           << p.median_filter << " native " << cfg.flow.native_resolution << " mask "
           << num(cfg.flow.mask_threshold) << ' ' << cfg.flow.mask_dilation << " side " << cfg.model.side;
  return "motad-flow 1\nframes " + std::to_string(frames) + "\nsettings " + hex(fnv1a(settings.str())) + "\n";
}

int stamped_frames(const fs::path& exec_dir) {
  std::istringstream is(read_text(stamp_path(exec_dir)));
  std::string magic, version, key;
  int frames = 0;
  if (!(is >> magic >> version >> key >> frames) || magic != "motad-flow" || key != "frames" || frames < 2) {
    throw FormatError("malformed flow stamp in " + exec_dir.string());
  }
  return frames;
}

std::vector<const ExecutionEntry*> flowed(const Dataset& ds, Split s) {
  std::set<std::string> skipped;
  const fs::path report = ds.root() / "flow_report.json";
  if (fs::exists(report)) {
    try {
      const nlohmann::json j = nlohmann::json::parse(read_text(report));
      for (const auto& e : j.at("skipped")) {
        skipped.insert(e.at("id").get<std::string>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(report.string() + ": " + e.what());
    }
  }
  std::vector<const ExecutionEntry*> out;
  for (const ExecutionEntry* e : ds.manifest().in_split(s)) {
    if (fs::exists(stamp_path(ds.exec_dir(e->id)))) {
      out.push_back(e);
    } else if (skipped.count(e->id)) {
      log::warn("execution " + e->id + " was skipped by the flow stage and is left out");
    } else {
      throw MissingStage("flow", "no flow outputs for " + e->id + "; run `motad flow` first");
    }
  }
  return out;
}

}  // namespace motad::pipeline::detail
