#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "airway_crowd/evaluation.hpp"
#include "airway_crowd/measurement.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace airway_crowd;
using testsupport::circle;
using testsupport::pearson_oracle;

namespace {

PairedAnnotation paired(std::string id, std::string image, std::vector<EllipsePair> pairs) {
  const int k = static_cast<int>(pairs.size());
  return {std::move(id), std::move(image), "w",
          std::move(pairs), {k == 1 ? QcKind::SinglePair : QcKind::MultiPair, k}};
}

AirwayMeasurement m(std::string image, double lumen, double wall) {
  static int n = 0;
  return {"m" + std::to_string(n++), std::move(image), "w", lumen, wall};
}

}  // namespace

TEST(Measure, AnalyticEllipseAreas) {
  Ellipse inner{25, 25, 2, 3, 0.4, true, KindHint::Unspecified};
  Ellipse outer{25, 25, 4, 5, 0.4, true, KindHint::Unspecified};
  const auto r = measure(paired("a", "i", {{inner, outer}}));
  EXPECT_DOUBLE_EQ(r.lumen_area, 6 * std::numbers::pi);
  EXPECT_DOUBLE_EQ(r.wall_area, 20 * std::numbers::pi);
}

TEST(Measure, MultiPairOnlyWhenEnabled) {
  const auto pa = paired("a", "i", {{circle(10, 10, 2), circle(10, 10, 4)},
                                    {circle(40, 40, 3), circle(40, 40, 5)}});
  EXPECT_THROW(measure(pa), ValidationError);
  const auto r = measure(pa, MeasureOptions{true});
  EXPECT_DOUBLE_EQ(r.lumen_area, 9 * std::numbers::pi);  // largest lumen wins
  EXPECT_TRUE(measure_all({pa}).empty());
  EXPECT_EQ(measure_all({pa}, MeasureOptions{true}).size(), 1u);
}

TEST(Median, OddEvenAndOrderFree) {
  EXPECT_EQ(median({3, 1, 2}), 2);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(median({7}), 7);
  EXPECT_THROW(median({}), ValidationError);
  std::vector<double> v{5, 9, 1, 3, 3, 8, 2};
  const double base = median(v);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_EQ(median(v), base);
  }
}

TEST(Median, RobustToSingleOutlier) {
  EXPECT_EQ(median({10, 11, 12, 13, 1e9}), 12);
  const auto agg = aggregate_image({m("i", 10, 20), m("i", 11, 22), m("i", 500, 21),
                                    m("i", 12, 9000), m("i", 13, 23)},
                                   AggregateConfig{});
  ASSERT_TRUE(agg);
  EXPECT_EQ(agg->lumen_area_median, 12);
  EXPECT_EQ(agg->wall_area_median, 22);  // lumen and wall take independent medians
}

TEST(Aggregate, ThresholdThree) {
  std::vector<AirwayMeasurement> ms;
  const std::map<std::string, int> counts{{"c0", 0}, {"c1", 1}, {"c2", 2}, {"c3", 3}, {"c5", 5}};
  for (const auto& [id, n] : counts)
    for (int i = 0; i < n; ++i) ms.push_back(m(id, 10 + i, 30 + i));
  const auto aggs = aggregate_all(ms, AggregateConfig{});
  ASSERT_EQ(aggs.size(), 2u);
  EXPECT_EQ(aggs[0].image_id, "c3");
  EXPECT_EQ(aggs[0].n_used, 3u);
  EXPECT_EQ(aggs[0].lumen_area_median, 11);
  EXPECT_EQ(aggs[1].image_id, "c5");
  EXPECT_EQ(aggs[1].wall_area_median, 32);
  EXPECT_EQ(aggregate_all(ms, AggregateConfig{2}).size(), 3u);
}

TEST(Units, PixelAreaToMm2) {
  EXPECT_DOUBLE_EQ(area_px2_to_mm2(100, 0.7), 49);
  EXPECT_DOUBLE_EQ(area_mm2_to_px2(area_px2_to_mm2(123.4, 0.63), 0.63), 123.4);
}

TEST(MeasurementCsv, RoundTrip) {
  testsupport::TempDir d;
  const std::vector<AirwayMeasurement> ms{m("a", 1.0 / 3, 2.5), m("b", 12.125, 1e3)};
  write_measurements_csv(ms, d / "m.csv");
  const auto back = load_measurements_csv(d / "m.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].lumen_area, 1.0 / 3);
  const auto aggs = aggregate_all({m("a", 1, 2), m("a", 2, 3), m("a", 3, 4)}, AggregateConfig{});
  write_aggregates_csv(aggs, d / "a.csv");
  EXPECT_EQ(load_aggregates_csv(d / "a.csv")[0].wall_area_median, 3);
}

TEST(Pearson, WorkedExamples) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(pearson_r(x, std::vector<double>{2, 4, 6, 8, 10}), 1.0);
  EXPECT_DOUBLE_EQ(pearson_r(x, std::vector<double>{5, 4, 3, 2, 1}), -1.0);
  EXPECT_NEAR(pearson_r(x, std::vector<double>{2, 1, 4, 3, 5}), 0.8, 1e-15);
  EXPECT_THROW(pearson_r(x, std::vector<double>{1, 1, 1, 1, 1}), ValidationError);
  EXPECT_THROW(pearson_r(std::vector<double>{1}, std::vector<double>{1}), ValidationError);
  EXPECT_THROW(pearson_r(x, std::vector<double>{1, 2}), ValidationError);
  EXPECT_FALSE(try_pearson_r(x, std::vector<double>{3, 3, 3, 3, 3}));
  EXPECT_EQ(format_r(std::nullopt), "NA");
}

TEST(Pearson, MatchesOracleOnRandomVectors) {
  std::mt19937_64 rng(2016);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> len(3, 200);
  for (int t = 0; t < 100; ++t) {
    const int n = len(rng);
    const double rho = std::uniform_real_distribution<double>(-1, 1)(rng);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = 20 * g(rng) + 5;
      y[i] = rho * x[i] + 7 * g(rng);
    }
    EXPECT_NEAR(pearson_r(x, y), pearson_oracle(x, y), 1e-12);
  }
}

TEST(Pearson, AffineInvariance) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(50), y(50);
    for (int i = 0; i < 50; ++i) {
      x[i] = g(rng);
      y[i] = 0.6 * x[i] + g(rng);
    }
    const double r = pearson_r(x, y);
    const double a = std::uniform_real_distribution<double>(0.1, 10)(rng);
    const double b = std::uniform_real_distribution<double>(-100, 100)(rng);
    std::vector<double> xa(50), yn(50);
    for (int i = 0; i < 50; ++i) {
      xa[i] = a * x[i] + b;
      yn[i] = -a * y[i] + b;
    }
    EXPECT_NEAR(pearson_r(xa, y), r, 1e-12);
    EXPECT_NEAR(pearson_r(x, yn), -r, 1e-12);
  }
}

TEST(Evaluation, GroupsAndUnits) {
  const std::vector<AirwaySite> sites{{"s1", {}, {0, 0, 1}, 10, 30}, {"s2", {}, {0, 0, 1}, 20, 50},
                                      {"s3", {}, {0, 0, 1}, 15, 45}};
  std::vector<ManifestEntry> manifest;
  for (const auto& s : sites) {
    for (const auto v : kAllViews) {
      manifest.push_back({make_image_id(s.site_id, v), s.site_id, v, {}, {}, {}, 0.5});
    }
  }
  // per-annotation in px^2 with 0.5 mm pixels: 4 px^2 = 1 mm^2
  std::vector<AirwayMeasurement> ms{m("s1_original", 40, 120), m("s2_original", 80, 200),
                                    m("s3_original", 60, 180), m("s1_axial", 44, 100)};
  const std::vector<AggregatedMeasurement> aggs{{"s1_original", 3, 40, 120},
                                                {"s2_original", 3, 80, 200}};
  const auto reports = build_report(ms, aggs, sites, manifest);
  ASSERT_EQ(reports.size(), 8u);
  EXPECT_EQ(reports[0].group.name(), "original_lumen_per_annotation");
  EXPECT_EQ(reports[0].n, 3u);
  EXPECT_DOUBLE_EQ(reports[0].scatter[0].worker, 10);
  EXPECT_NEAR(*reports[0].r, 1.0, 1e-12);
  EXPECT_EQ(reports[2].group.name(), "axes_parallel_lumen_per_annotation");
  EXPECT_EQ(reports[2].n, 1u);
  EXPECT_FALSE(reports[2].r);
  EXPECT_EQ(reports[4].group.name(), "original_lumen_aggregate");
  EXPECT_EQ(reports[4].n, 2u);
  EXPECT_EQ(reports[6].n, 0u);
  testsupport::TempDir d;
  write_report(reports, d.path());
  EXPECT_TRUE(std::filesystem::exists(d / "report.csv"));
  EXPECT_TRUE(std::filesystem::exists(d / "scatter_original_wall_aggregate.csv"));
}

TEST(Evaluation, MedianAggregationBeatsSingleAnnotations) {
  // Monte Carlo: 60 images, 10 noisy annotators each, lognormal area noise plus
  // 20% gross outliers. Aggregated r should exceed per-annotation r on every seed.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<AirwaySite> sites;
    std::vector<ManifestEntry> manifest;
    std::vector<AirwayMeasurement> ms;
    for (int i = 0; i < 60; ++i) {
      const double lumen = 5 + 40 * u(rng);
      const std::string sid = "s" + std::to_string(i);
      sites.push_back({sid, {}, {0, 0, 1}, lumen, lumen * 2.5});
      manifest.push_back({sid + "_original", sid, ViewKind::Original, {}, {}, {}, 1.0});
      for (int k = 0; k < 10; ++k) {
        const double f = u(rng) < 0.2 ? 0.2 + 3 * u(rng) : std::exp(0.25 * g(rng));
        ms.push_back(m(sid + "_original", lumen * f, lumen * 2.5 * f * std::exp(0.1 * g(rng))));
      }
    }
    const auto reports = build_report(ms, aggregate_all(ms, AggregateConfig{}), sites, manifest);
    EXPECT_GT(*reports[4].r, *reports[0].r);  // lumen
    EXPECT_GT(*reports[5].r, *reports[1].r);  // wall
  }
}
