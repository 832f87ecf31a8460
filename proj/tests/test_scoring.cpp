#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "motad/errors.hpp"
#include "motad/scoring/metrics.hpp"
#include "support/oracles.hpp"

using namespace motad;
using namespace motad::scoring;

namespace {

struct Labeled {
  std::vector<double> s;
  std::vector<int> y;
};

// Random scores with a controllable share of ties (coarse rounding) and both
// classes present.
Labeled random_set(std::mt19937_64& rng, int n, double tie_grid) {
  Labeled d;
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution b(0.3);
  for (int i = 0; i < n; ++i) {
    const int y = b(rng) ? 1 : 0;
    double s = g(rng) + 0.8 * y;
    if (tie_grid > 0) s = std::round(s / tie_grid) * tie_grid;
    d.s.push_back(s);
    d.y.push_back(y);
  }
  d.y[0] = 1;
  d.y[1] = 0;
  return d;
}

}  // namespace

TEST_CASE("thresholds are the training maxima") {
  const std::vector<double> ec{0.1, 0.3, 0.2}, eb{0.5};
  const Thresholds th = compute_thresholds(ec, eb);
  CHECK(th.e_c_thres == 0.3);
  CHECK(th.e_b_thres == 0.5);
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(compute_thresholds(zeros, zeros).e_c_thres == 0.0);
  CHECK(fuse(1e-9, 0.0, 0.2, compute_thresholds(zeros, std::vector<double>{1.0})) == 1.0);
  CHECK_THROWS_AS(compute_thresholds({}, eb), InvalidArgument);
  CHECK_THROWS_AS(compute_thresholds(ec, {}), InvalidArgument);
}

TEST_CASE("fuse takes the threshold branch inclusively") {
  const Thresholds th{0.5, 0.6};
  CHECK(fuse(0.1, 0.2, 0.03, th) == 0.03);
  CHECK(fuse(0.5, 0.2, 0.03, th) == 1.0);
  CHECK(fuse(0.1, 0.7, 0.9, th) == 1.0);
  CHECK(fuse(0.1, 0.6, 0.0, th) == 1.0);
  CHECK(fuse(0.49, 0.59, 7.5, th) == 7.5);
}

TEST_CASE("threshold branch is invariant to rescaling e_o") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Thresholds th{0.5, 0.5};
  for (int i = 0; i < 1000; ++i) {
    const double ec = u(rng), eb = u(rng), eo = u(rng);
    const double a = fuse(ec, eb, eo, th), b = fuse(ec, eb, 3.0 * eo, th);
    if (ec >= 0.5 || eb >= 0.5) {
      CHECK(a == b);
    } else {
      CHECK(b == doctest::Approx(3.0 * a));
    }
  }
}

TEST_CASE("AUC-ROC worked examples") {
  const std::vector<double> s{0.9, 0.8, 0.2, 0.1};
  CHECK(auc_roc(s, std::vector<int>{1, 1, 0, 0}).auc == 1.0);
  CHECK(auc_roc(s, std::vector<int>{1, 0, 1, 0}).auc == 0.75);
  CHECK(auc_roc(std::vector<double>(6, 0.4), std::vector<int>{1, 0, 0, 1, 0, 0}).auc == 0.5);
  CHECK_THROWS_AS(auc_roc(s, std::vector<int>{1, 1, 1, 1}), SingleClassError);
  CHECK_THROWS_AS(auc_roc(s, std::vector<int>{0, 0, 0, 0}), SingleClassError);
  CHECK_THROWS_AS(auc_roc(s, std::vector<int>{1, 0}), InvalidArgument);
}

TEST_CASE("AUC-PR worked examples") {
  const std::vector<double> s{0.9, 0.8, 0.2, 0.1};
  CHECK(auc_pr(s, std::vector<int>{1, 1, 0, 0}).auc == 1.0);
  CHECK(std::fabs(auc_pr(s, std::vector<int>{1, 0, 1, 0}).auc - (0.5 + 0.5 * 2.0 / 3.0)) <= 1e-12);
  CHECK(std::fabs(auc_pr(s, std::vector<int>{1, 0, 1, 0}).auc - 0.8333) <= 1e-4);
  CHECK(auc_pr(std::vector<double>(5, 0.4), std::vector<int>{1, 0, 0, 1, 0}).auc == doctest::Approx(0.4));
  CHECK_THROWS_AS(auc_pr(s, std::vector<int>{1, 1, 1, 1}), SingleClassError);
}

TEST_CASE("AUC-ROC equals pairwise counting with half credit for ties") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = trial < 95 ? 2 + static_cast<int>(rng() % 500) : 10000;
    const Labeled d = random_set(rng, n, trial % 3 == 0 ? 0.5 : 0.0);
    CHECK(std::fabs(auc_roc(d.s, d.y).auc - oracle::pairwise_auc(d.s, d.y)) <= 1e-9);
  }
}

TEST_CASE("AP equals the grouped-threshold oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Labeled d = random_set(rng, 2 + static_cast<int>(rng() % 400), trial % 2 == 0 ? 0.25 : 0.0);
    CHECK(std::fabs(auc_pr(d.s, d.y).auc - oracle::tied_average_precision(d.s, d.y)) <= 1e-9);
  }
}

TEST_CASE("AUC-ROC is a rank statistic and flips under label complement") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Labeled d = random_set(rng, 300, trial % 2 ? 0.3 : 0.0);
    const double a = auc_roc(d.s, d.y).auc;
    std::vector<double> t(d.s.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::exp(2.0 * d.s[i]) + 5.0;
    CHECK(auc_roc(t, d.y).auc == doctest::Approx(a).epsilon(1e-12));
    std::vector<int> flipped(d.y.size());
    for (std::size_t i = 0; i < flipped.size(); ++i) flipped[i] = 1 - d.y[i];
    CHECK(auc_roc(d.s, flipped).auc == doctest::Approx(1.0 - a).epsilon(1e-12));
  }
}

TEST_CASE("ROC points are monotone and end at (1, 1)") {
  std::mt19937_64 rng(5);
  const Labeled d = random_set(rng, 500, 0.2);
  const CurveSummary c = auc_roc(d.s, d.y);
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    CHECK(c.points[i].x >= c.points[i - 1].x);
    CHECK(c.points[i].y >= c.points[i - 1].y);
    CHECK(c.points[i].threshold < c.points[i - 1].threshold);
  }
  CHECK(c.points.back().x == 1.0);
  CHECK(c.points.back().y == 1.0);
  CHECK(c.auc >= 0.0);
  CHECK(c.auc <= 1.0);
}

TEST_CASE("trace CSV round trip") {
  AnomalyTrace t{"exec_7", {{1, 0.1, 0.2, 0.0, 0.0, false}, {11, 0.123456789012345, 1.5, 0.07, 1.0, true}}};
  const auto path = std::filesystem::temp_directory_path() / "exec_7.csv";
  write_trace_csv(t, path);
  const AnomalyTrace back = read_trace_csv(path);
  CHECK(back.execution == "exec_7");
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[1].e_c == t.rows[1].e_c);
  CHECK(back.rows[1].label);
  CHECK_FALSE(back.rows[0].label);
  {
    std::ofstream os(path, std::ios::app);
    os << "5,0,0,0,0,1\n";
  }
  CHECK_THROWS_AS(read_trace_csv(path), FormatError);
  std::filesystem::remove(path);
  t.rows[1].frame = 1;
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
}

TEST_CASE("pooling drops warm-up frames unless asked") {
  const std::vector<AnomalyTrace> traces{
      {"a", {{1, 0, 0, 0, 0, false}, {10, 0, 0, 2.0, 2.0, true}, {11, 0, 0, 0.5, 0.5, false}}},
      {"b", {{3, 0, 0, 0, 0, false}, {12, 0, 0, 3.0, 3.0, true}}}};
  const PooledScores p = pool(traces, 10, false);
  CHECK(p.scores == std::vector<double>{2.0, 0.5, 3.0});
  CHECK(p.labels == std::vector<int>{1, 0, 1});
  CHECK(pool(traces, 10, true).scores.size() == 5);
  CHECK(fraction_above_one(p.e_o) == doctest::Approx(2.0 / 3.0));
  CHECK(fraction_above_one({}) == 0.0);
}
