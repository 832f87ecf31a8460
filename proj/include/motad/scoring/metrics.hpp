#pragma once
// Fusing the motion errors into one anomaly score and ranking metrics over
// pooled frames.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace motad::scoring {

struct Thresholds {
  double e_c_thres = 0.0;
  double e_b_thres = 0.0;
};

/// Maxima over the nominal training errors. Throws InvalidArgument when
/// either list is empty or holds a non-finite value.
Thresholds compute_thresholds(std::span<const double> train_e_c, std::span<const double> train_e_b);

/// 1 when either kinematic error reaches its threshold (inclusive), e_o otherwise.
double fuse(double e_c, double e_b, double e_o, const Thresholds& th);

struct CurvePoint {
  double threshold;  // frames with score >= threshold are flagged
  double x;          // ROC: false-positive rate; PR: recall
  double y;          // ROC: true-positive rate; PR: precision
};

struct CurveSummary {
  std::vector<CurvePoint> points;  // one per distinct score, descending threshold
  double auc = 0.0;
};

/// Trapezoid over the tie-grouped ROC staircase, starting at (0, 0). Equals
/// the Mann-Whitney statistic with ties counted 1/2. Throws SingleClassError.
CurveSummary auc_roc(std::span<const double> scores, std::span<const int> labels);

/// Average precision: sum over tie groups of recall gain times the precision
/// of the group's threshold. Throws SingleClassError.
CurveSummary auc_pr(std::span<const double> scores, std::span<const int> labels);

struct TraceRow {
  int frame = 0;
  double e_c = 0.0;
  double e_b = 0.0;
  double e_o = 0.0;
  double score = 0.0;
  bool label = false;
};

/// Per-frame records of one execution; frames strictly increasing.
struct AnomalyTrace {
  std::string execution;
  std::vector<TraceRow> rows;

  /// Throws InvalidArgument on non-increasing frames or non-finite values.
  void validate() const;
};

/// CSV with header frame,e_c,e_b,e_o,score,label; values at full precision.
void write_trace_csv(const AnomalyTrace& trace, const std::filesystem::path& path);
/// Throws FormatError on a malformed file.
AnomalyTrace read_trace_csv(const std::filesystem::path& path);

/// Frames that enter the metrics: frame >= first_scored unless warm-up
/// frames are included.
struct PooledScores {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<double> e_o;
};
PooledScores pool(const std::vector<AnomalyTrace>& traces, int first_scored, bool include_warmup);

/// Fraction of values strictly above 1 (e_o competing with the threshold
/// branch); 0 for an empty list.
double fraction_above_one(std::span<const double> e_o);

}  // namespace motad::scoring
