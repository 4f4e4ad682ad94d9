#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cds/eval.hpp"
#include "support.hpp"

using namespace cds;
using testing_support::TempDir;

namespace {

SegmentationMask mask(int w, int h, std::initializer_list<int> v) {
  SegmentationMask m(w, h);
  std::size_t k = 0;
  for (int x : v) m.fg[k++] = static_cast<std::uint8_t>(x);
  return m;
}

SegmentationMask random_mask(std::mt19937_64& rng, double p) {
  std::bernoulli_distribution b(p);
  SegmentationMask m(13, 11);
  for (auto& v : m.fg) v = b(rng);
  return m;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string source_dir = CDS_SOURCE_DIR;

}  // namespace

// ---------------------------------------------------------------------------
// Metrics

TEST(ErrorRate, Identities) {
  const auto gt = mask(4, 4, {0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0});
  const Box box{1, 1, 2, 2};
  EXPECT_EQ(error_rate(gt, gt, box), 0.0);
  EXPECT_EQ(error_rate(complement(gt), gt, box), 1.0);
}

TEST(ErrorRate, HandCountedFourByFour) {
  const auto gt = mask(4, 4, {0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0});
  const auto out = mask(4, 4, {1, 0, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 0, 0, 0, 1});
  // Wrong pixels: (0,0), (2,1), (3,2), (3,3).
  EXPECT_DOUBLE_EQ(error_rate(out, gt, Box{0, 0, 3, 3}), 4.0 / 16.0);
  EXPECT_DOUBLE_EQ(error_rate(out, gt, Box{1, 1, 2, 2}), 1.0 / 4.0);
  EXPECT_DOUBLE_EQ(error_rate(out, gt, Box{0, 0, 1, 1}), 1.0 / 4.0);
  // Clipped to the image.
  EXPECT_DOUBLE_EQ(error_rate(out, gt, Box{2, 2, 9, 9}), 2.0 / 4.0);
}

TEST(ErrorRate, Errors) {
  const SegmentationMask a(4, 4), b(3, 4);
  EXPECT_THROW(error_rate(a, b, Box{0, 0, 1, 1}), InvalidArgument);
  EXPECT_THROW(error_rate(a, a, Box{2, 2, 1, 1}), InvalidArgument);
  EXPECT_THROW(error_rate(a, a, Box{5, 5, 8, 8}), InvalidArgument);
}

TEST(Jaccard, Identities) {
  const auto a = mask(4, 1, {1, 1, 0, 0});
  EXPECT_EQ(jaccard(a, a), 1.0);
  EXPECT_EQ(jaccard(a, mask(4, 1, {0, 0, 1, 1})), 0.0);
  EXPECT_DOUBLE_EQ(jaccard(a, mask(4, 1, {0, 1, 1, 0})), 1.0 / 3.0);
  Diagnostics d;
  EXPECT_EQ(jaccard(SegmentationMask(4, 1), SegmentationMask(4, 1), &d), 1.0);
  EXPECT_EQ(d.warnings.size(), 1u);
  EXPECT_THROW(jaccard(a, SegmentationMask(3, 1)), InvalidArgument);
}

TEST(Dsc, Identities) {
  const auto a = mask(4, 1, {1, 1, 0, 0});
  EXPECT_EQ(dsc(a, a), 1.0);
  EXPECT_EQ(dsc(a, mask(4, 1, {0, 0, 1, 1})), 0.0);
  EXPECT_DOUBLE_EQ(dsc(a, mask(4, 1, {0, 1, 1, 0})), 0.5);
  Diagnostics d;
  EXPECT_EQ(dsc(SegmentationMask(4, 1), SegmentationMask(4, 1), &d), 1.0);
  EXPECT_EQ(d.warnings.size(), 1u);
}

TEST(Dsc, EqualsTwoJOverOnePlusJOnRandomPairs) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> p(0.05, 0.95);
  for (int t = 0; t < 1000; ++t) {
    const auto a = random_mask(rng, p(rng)), b = random_mask(rng, p(rng));
    const double j = jaccard(a, b), d = dsc(a, b);
    EXPECT_NEAR(d, 2 * j / (1 + j), 1e-12);
    EXPECT_LE(0.0, j);
    EXPECT_LE(j, d);
    EXPECT_LE(d, 1.0);
  }
}

TEST(Prf, PerfectMask) {
  const auto a = mask(3, 1, {1, 0, 1});
  const auto r = prf(a, a);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f_measure, 1.0);
}

TEST(Prf, EqualPrecisionAndRecall) {
  for (double p : {0.1, 0.37, 0.5, 0.9})
    for (double g : {0.3, 1.0, 2.5}) EXPECT_NEAR(f_measure(p, p, g), p, 1e-12);
}

TEST(Prf, BetweenPrecisionAndRecall) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int t = 0; t < 500; ++t) {
    const double p = u(rng), r = u(rng), f = f_measure(p, r);
    EXPECT_GE(f, std::min(p, r) - 1e-15);
    EXPECT_LE(f, std::max(p, r) + 1e-15);
  }
}

TEST(Prf, EmptyConventions) {
  const SegmentationMask empty(3, 1);
  const auto gt = mask(3, 1, {1, 0, 0});
  const auto r = prf(empty, gt);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.f_measure, 0.0);
  EXPECT_EQ(prf(empty, empty).f_measure, 0.0);
  EXPECT_THROW(f_measure(0.5, 0.5, 0.0), InvalidArgument);
}

TEST(Prf, MeanOfPerImageFDiffersFromFOfMeans) {
  // Mean precision 0.7076 and mean recall 0.8208 alongside a mean F of 0.7140:
  // the F can only come from averaging per-image values.
  const double f_of_means = f_measure(0.7076, 0.8208);
  EXPECT_NEAR(f_of_means, 0.7309, 5e-4);
  EXPECT_GT(std::abs(f_of_means - 0.7140), 0.01);

  // Two images: per-image F averaged vs F of averaged P/R.
  EvalReport r;
  for (auto [p, rc] : {std::pair{0.9, 0.5}, std::pair{0.5, 0.9}}) {
    CaseResult c;
    c.ok = true;
    c.metrics.precision = p;
    c.metrics.recall = rc;
    c.metrics.f_measure = f_measure(p, rc);
    r.cases.push_back(c);
  }
  const auto m = r.mean();
  EXPECT_DOUBLE_EQ(m.f_measure, (f_measure(0.9, 0.5) + f_measure(0.5, 0.9)) / 2);
  EXPECT_GT(std::abs(m.f_measure - f_measure(m.precision, m.recall)), 1e-3);
}

TEST(Evaluate, WholeImageErrorRateByDefault) {
  const auto gt = mask(2, 2, {1, 0, 0, 0});
  const auto out = mask(2, 2, {1, 1, 0, 0});
  const auto m = evaluate(out, gt);
  EXPECT_DOUBLE_EQ(m.error_rate, 0.25);
  EXPECT_DOUBLE_EQ(m.jaccard, 0.5);
  EXPECT_DOUBLE_EQ(m.precision, 0.5);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_DOUBLE_EQ(evaluate(out, gt, Box{0, 0, 0, 1}).error_rate, 0.0);
}

// ---------------------------------------------------------------------------
// Benchmark harness

TEST(Benchmark, EmptyManifest) {
  const auto r = run_benchmark(Json::array());
  EXPECT_TRUE(r.cases.empty());
  EXPECT_EQ(r.failed(), 0u);
  const auto j = report_to_json(r);
  EXPECT_EQ(j["aggregate"]["cases"], 0);
  EXPECT_EQ(report_to_csv(r).find('\n'), report_to_csv(r).size() - 1);
  EXPECT_TRUE(run_benchmark(Json{{"cases", Json::array()}}).cases.empty());
}

TEST(Benchmark, MalformedManifest) {
  EXPECT_THROW(run_benchmark(Json{{"x", 1}}), ParseError);
  EXPECT_THROW(run_benchmark(Json::array({1})), ParseError);
  EXPECT_THROW(run_benchmark(Json::array({{{"id", "a"}, {"mode", "box"}, {"sweep", {{"sigma", {1}}}}}})),
               ParseError);
  EXPECT_THROW(run_benchmark_file("/nonexistent/manifest.json"), NotFound);
}

TEST(Benchmark, FailingCasesAreRecorded) {
  const Json m = Json::array({
      {{"id", "missing"}, {"mode", "box"}, {"image", "/nonexistent.png"}, {"gt", "/nonexistent_gt.png"}},
      {{"id", "unknown-mode"}, {"mode", "lasso"}, {"image", "synthetic:blob-square"}},
      {{"id", "bad-annotation"}, {"mode", "box"}, {"image", "synthetic:blob-square"},
       {"annotation", {{"type", "box"}, {"box", {1, 2}}}}},
      {{"id", "mismatch"}, {"mode", "scribble"}, {"image", "synthetic:blob-square"},
       {"annotation", {{"type", "box"}, {"box", {1, 2, 30, 30}}}}},
      {{"id", "good"}, {"mode", "box"}, {"image", "synthetic:blob-square"}, {"features", "color"},
       {"strategy", {{"kind", "single"}, {"sigma", 0.2}}}},
      {{"mode", "box"}},
  });
  const auto r = run_benchmark(m);
  ASSERT_EQ(r.cases.size(), 6u);
  EXPECT_EQ(r.failed(), 5u);
  EXPECT_FALSE(r.cases[0].ok);
  EXPECT_NE(r.cases[1].error.find("lasso"), std::string::npos);
  EXPECT_TRUE(r.cases[4].ok);
  EXPECT_EQ(r.cases[5].id, "?");
  EXPECT_DOUBLE_EQ(r.mean().jaccard, r.cases[4].metrics.jaccard);
  const auto csv = report_to_csv(r);
  EXPECT_NE(csv.find("missing,box,failed,,,,,,,0,"), std::string::npos);
}

TEST(Benchmark, SyntheticSuiteManifest) {
  const auto r = run_benchmark_file(source_dir + "/bench/synthetic_suite.json");
  ASSERT_EQ(r.cases.size(), 60u);
  EXPECT_EQ(r.failed(), 0u);
  EXPECT_GE(r.mean().jaccard, 0.95);
  for (const auto& c : r.cases) {
    for (double v : {c.metrics.error_rate, c.metrics.jaccard, c.metrics.dsc, c.metrics.precision, c.metrics.recall,
                     c.metrics.f_measure}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_LE(c.metrics.jaccard, c.metrics.dsc);
  }
}

TEST(Benchmark, ErrorSweepHasSevenRows) {
  const auto r = run_benchmark_file(source_dir + "/bench/error_sweep.json");
  ASSERT_EQ(r.cases.size(), 7u);
  EXPECT_EQ(r.cases[0].id, "blob-square/error-tolerant@errors=0");
  EXPECT_EQ(r.cases[6].id, "blob-square/error-tolerant@errors=50");
  EXPECT_EQ(r.failed(), 0u);
}

TEST(Benchmark, CosegManifest) {
  const auto r = run_benchmark_file(source_dir + "/bench/coseg_pair.json");
  ASSERT_EQ(r.cases.size(), 4u);
  EXPECT_EQ(r.failed(), 0u);
  EXPECT_EQ(r.cases[0].id, "common-blob/unsupervised/0");
  for (const auto& c : r.cases) EXPECT_GE(c.metrics.jaccard, 0.9) << c.id;
}

TEST(Benchmark, FilesRelativeToManifest) {
  TempDir dir("bench");
  const auto f = synthetic::suite().front();
  cv::imwrite(dir.file("img.png"), f.image);
  save_mask(dir.file("gt.png"), f.gt);
  cv::imwrite(dir.file("labels.png"), labels_to_mat(grid_superpixels(f.image, synthetic::grid_target)));
  {
    std::ofstream out(dir.file("m.json"));
    out << Json{{"cases",
                 {{{"id", "file"},
                   {"mode", "scribble"},
                   {"image", "img.png"},
                   {"gt", "gt.png"},
                   {"superpixels", "labels.png"},
                   {"features", "color"},
                   {"strategy", {{"kind", "single"}, {"sigma", 0.2}}},
                   {"annotation", {{"type", "scribble"}, {"fg", {{55, 45}}}}}}}}};
  }
  const auto r = run_benchmark_file(dir.file("m.json"));
  ASSERT_EQ(r.cases.size(), 1u);
  ASSERT_TRUE(r.cases[0].ok) << r.cases[0].error;
  EXPECT_GE(r.cases[0].metrics.jaccard, 0.95);
  EXPECT_TRUE(r.cases[0].seconds.count("solve"));
}

TEST(Benchmark, ReportsAreDeterministic) {
  const Json m = Json::array({{{"id", "a"},
                               {"mode", "error-tolerant"},
                               {"image", "synthetic:two-blob-side"},
                               {"features", "color"},
                               {"errors", 20},
                               {"seed", 3},
                               {"strategy", {{"kind", "single"}, {"sigma", 0.2}}}},
                              {{"id", "b"}, {"mode", "loose-box"}, {"image", "synthetic:blob-L"}, {"looseness", 240}}});
  TempDir d1("rep1"), d2("rep2");
  write_report(run_benchmark(m), d1.path());
  write_report(run_benchmark(m), d2.path());
  for (const char* name : {"report.json", "report.csv"}) EXPECT_EQ(slurp(d1.path() / name), slurp(d2.path() / name));
  EXPECT_TRUE(std::filesystem::exists(d1.path() / "timing.csv"));
  const auto j = Json::parse(slurp(d1.path() / "report.json"));
  EXPECT_EQ(j["cases"].size(), 2u);
  EXPECT_EQ(j["cases"][0]["status"], "ok");
  EXPECT_FALSE(j["cases"][0].contains("seconds"));
}
