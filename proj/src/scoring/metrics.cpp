#include "motad/scoring/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "motad/errors.hpp"

namespace motad::scoring {

namespace {

double max_finite(std::span<const double> v, const char* name) {
  if (v.empty()) throw InvalidArgument(std::string(name) + " list is empty");
  double m = v[0];
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidArgument(std::string(name) + " list has a non-finite value");
    m = std::max(m, x);
  }
  return m;
}

struct Group {
  double threshold;
  double tp;  // cumulative counts at this threshold
  double fp;
};

// Cumulative counts at each distinct score, highest first.
std::vector<Group> tie_groups(std::span<const double> scores, std::span<const int> labels, double& pos, double& neg) {
  if (scores.size() != labels.size()) throw InvalidArgument("scores and labels differ in length");
  pos = neg = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw InvalidArgument("scores must be finite");
    if (labels[i] != 0 && labels[i] != 1) throw InvalidArgument("labels must be 0 or 1");
    (labels[i] ? pos : neg) += 1.0;
  }
  if (pos == 0.0 || neg == 0.0) throw SingleClassError("metric needs both positive and negative frames");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<Group> g;
  double tp = 0.0, fp = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    for (; k < order.size() && scores[order[k]] == s; ++k) (labels[order[k]] ? tp : fp) += 1.0;
    g.push_back({s, tp, fp});
  }
  return g;
}

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s, int line) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw FormatError("trace line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

Thresholds compute_thresholds(std::span<const double> train_e_c, std::span<const double> train_e_b) {
  return {max_finite(train_e_c, "e_c"), max_finite(train_e_b, "e_b")};
}

double fuse(double e_c, double e_b, double e_o, const Thresholds& th) {
  return (e_c >= th.e_c_thres || e_b >= th.e_b_thres) ? 1.0 : e_o;
}

CurveSummary auc_roc(std::span<const double> scores, std::span<const int> labels) {
  double pos = 0.0, neg = 0.0;
  const auto groups = tie_groups(scores, labels, pos, neg);
  CurveSummary c;
  double px = 0.0, py = 0.0;
  for (const auto& g : groups) {
    const double x = g.fp / neg;
    const double y = g.tp / pos;
    c.auc += (x - px) * (y + py) * 0.5;
    c.points.push_back({g.threshold, x, y});
    px = x;
    py = y;
  }
  return c;
}

CurveSummary auc_pr(std::span<const double> scores, std::span<const int> labels) {
  double pos = 0.0, neg = 0.0;
  const auto groups = tie_groups(scores, labels, pos, neg);
  CurveSummary c;
  double prev_recall = 0.0;
  for (const auto& g : groups) {
    const double recall = g.tp / pos;
    const double precision = g.tp / (g.tp + g.fp);
    c.auc += (recall - prev_recall) * precision;
    c.points.push_back({g.threshold, recall, precision});
    prev_recall = recall;
  }
  return c;
}

void AnomalyTrace::validate() const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (i > 0 && r.frame <= rows[i - 1].frame) throw InvalidArgument("trace frames must be strictly increasing");
    for (double v : {r.e_c, r.e_b, r.e_o, r.score}) {
      if (!std::isfinite(v)) throw InvalidArgument("trace values must be finite");
    }
  }
}

void write_trace_csv(const AnomalyTrace& trace, const std::filesystem::path& path) {
  trace.validate();
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InvalidArgument("cannot write " + path.string());
  os << "frame,e_c,e_b,e_o,score,label\n";
  for (const auto& r : trace.rows) {
    os << r.frame << ',' << format_double(r.e_c) << ',' << format_double(r.e_b) << ',' << format_double(r.e_o)
       << ',' << format_double(r.score) << ',' << (r.label ? 1 : 0) << '\n';
  }
  if (!os) throw InvalidArgument("failed writing " + path.string());
}

AnomalyTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open trace " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "frame,e_c,e_b,e_o,score,label") {
    throw FormatError("trace header mismatch in " + path.string());
  }
  AnomalyTrace t;
  t.execution = path.stem().string();
  int n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw FormatError("trace line " + std::to_string(n) + ": expected 6 fields");
    TraceRow r;
    r.frame = static_cast<int>(parse_double(f[0], n));
    r.e_c = parse_double(f[1], n);
    r.e_b = parse_double(f[2], n);
    r.e_o = parse_double(f[3], n);
    r.score = parse_double(f[4], n);
    if (f[5] != "0" && f[5] != "1") throw FormatError("trace line " + std::to_string(n) + ": label must be 0/1");
    r.label = f[5] == "1";
    t.rows.push_back(r);
  }
  try {
    t.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return t;
}

PooledScores pool(const std::vector<AnomalyTrace>& traces, int first_scored, bool include_warmup) {
  PooledScores p;
  for (const auto& t : traces) {
    for (const auto& r : t.rows) {
      if (!include_warmup && r.frame < first_scored) continue;
      p.scores.push_back(r.score);
      p.labels.push_back(r.label ? 1 : 0);
      p.e_o.push_back(r.e_o);
    }
  }
  return p;
}

double fraction_above_one(std::span<const double> e_o) {
  if (e_o.empty()) return 0.0;
  const auto n = std::count_if(e_o.begin(), e_o.end(), [](double v) { return v > 1.0; });
  return static_cast<double>(n) / static_cast<double>(e_o.size());
}

}  // namespace motad::scoring
