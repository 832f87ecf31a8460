#pragma once
// Helpers shared by the pipeline stages; not part of the public API.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "motad/pipeline/config.hpp"
#include "motad/pipeline/dataset.hpp"

namespace motad::pipeline::detail {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string hex(std::uint64_t v) {
  char buf[17];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, 16);
  return std::string(buf, r.ptr);
}

/// Writes through a temporary file and renames, so readers never see a
/// half-written file.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Rows of a numeric CSV with exactly this header; first column must count up
/// from first_frame. Throws FormatError.
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path, const std::string& header,
                                                  int first_frame);

/// Content of <exec>/flow/stamp for the given settings and frame count.
std::string flow_stamp(const PipelineConfig& cfg, int frames);
inline std::filesystem::path stamp_path(const std::filesystem::path& exec_dir) { return exec_dir / "flow" / "stamp"; }

/// Executions of a split whose flow stage completed. Executions the flow stage
/// reported as skipped are dropped with a warning; any other execution
/// without flow outputs raises MissingStage("flow").
std::vector<const ExecutionEntry*> flowed(const Dataset& ds, Split s);

/// Variant caches of one execution at the model resolution; element i is the
/// flow from frame i to i+1.
std::vector<FlowField> model_inputs(const Dataset& ds, const ExecutionEntry& e, const PipelineConfig& cfg);

/// Frame count recorded in the execution's flow stamp.
int stamped_frames(const std::filesystem::path& exec_dir);

}  // namespace motad::pipeline::detail
