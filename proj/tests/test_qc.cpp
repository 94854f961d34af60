#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "airway_crowd/qc.hpp"
#include "qc_fixture.hpp"
#include "support.hpp"

using namespace airway_crowd;
using testsupport::circle;
using testsupport::record;

namespace {

QcCategory cat(std::vector<Ellipse> es) { return classify(record("a", "i", std::move(es)), QcConfig{}); }

}  // namespace

TEST(Qc, WorkedExamples) {
  EXPECT_EQ(cat({}).kind, QcKind::NoEllipse);
  EXPECT_EQ(cat({circle(2, 2, 2)}).kind, QcKind::NoAirwayFlag);
  EXPECT_EQ(cat({circle(47, 48, 3)}).kind, QcKind::NoAirwayFlag);
  EXPECT_EQ(cat({circle(2, 2, 3.5)}).kind, QcKind::SingleAdjusted);  // too big for the flag
  EXPECT_EQ(cat({circle(6, 2, 2)}).kind, QcKind::SingleAdjusted);    // 6 px from the corner
  EXPECT_EQ(cat({circle(25, 25, 5, false)}).kind, QcKind::SingleUnadjusted);
  EXPECT_EQ(cat({circle(25, 25, 5), circle(26, 25, 8), circle(30, 30, 3)}).kind, QcKind::OddCount);
  EXPECT_EQ(cat({circle(25, 25, 4), circle(27, 26, 7)}), (QcCategory{QcKind::SinglePair, 1}));
  EXPECT_EQ(cat({circle(25, 25, 4), circle(36, 25, 7)}).kind, QcKind::PairTooFar);
  EXPECT_EQ(cat({circle(25, 25, 4), circle(35, 25, 7)}).kind, QcKind::SinglePair);  // exactly 10
  EXPECT_EQ(cat({circle(25, 25, 4), circle(26, 25, 4)}).kind, QcKind::DegeneratePair);
  EXPECT_EQ(cat({circle(10, 10, 2), circle(10, 10, 5), circle(40, 40, 2), circle(40, 40, 5)}),
            (QcCategory{QcKind::MultiPair, 2}));
  // two corner circles are not the no-airway convention
  EXPECT_EQ(cat({circle(2, 2, 2), circle(48, 48, 2)}).kind, QcKind::PairTooFar);
}

TEST(Qc, PairsInnerIsSmallerArea) {
  const auto r = qc_annotation(record("a", "i", {circle(25, 25, 9), circle(25, 26, 3)}), QcConfig{});
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0].inner.rx, 3);
  EXPECT_EQ(r.pairs[0].outer.rx, 9);
}

TEST(Qc, GreedyPairsNearestFirst) {
  // x=10,11 pair at 1 px first, leaving x=13,15 at 2 px
  const auto out = pair_ellipses({circle(10, 10, 2), circle(11, 10, 4), circle(13, 10, 3),
                                  circle(15, 10, 6)},
                                 QcConfig{});
  ASSERT_EQ(out.pairs.size(), 2u);
  EXPECT_DOUBLE_EQ(out.max_distance, 2.0);
  EXPECT_FALSE(out.too_far);
}

TEST(Qc, PermutationInvariant) {
  std::mt19937_64 rng(17);
  for (const auto& la : testsupport::qc_fixture(3)) {
    auto rec = la.record;
    const auto base = qc_annotation(rec, QcConfig{});
    for (int k = 0; k < 3; ++k) {
      std::shuffle(rec.ellipses.begin(), rec.ellipses.end(), rng);
      const auto again = qc_annotation(rec, QcConfig{});
      ASSERT_EQ(again.category, base.category);
      ASSERT_EQ(again.pairs.size(), base.pairs.size());
      for (std::size_t p = 0; p < base.pairs.size(); ++p) {
        EXPECT_EQ(again.pairs[p].inner, base.pairs[p].inner);
        EXPECT_EQ(again.pairs[p].outer, base.pairs[p].outer);
      }
    }
  }
}

TEST(Qc, ScalingGeometryAndThresholdsTogetherKeepsCategory) {
  for (const double s : {0.5, 2.0, 3.0}) {
    QcConfig scaled;
    scaled.pair_distance_max *= s;
    scaled.corner_margin *= s;
    scaled.corner_radius_max *= s;
    scaled.image_side = static_cast<int>(scaled.image_side * s);
    for (const auto& la : testsupport::qc_fixture(4)) {
      auto rec = la.record;
      for (auto& e : rec.ellipses) {
        e.cx *= s;
        e.cy *= s;
        e.rx *= s;
        e.ry *= s;
      }
      EXPECT_EQ(classify(rec, scaled), la.label) << la.record.annotation_id << " s=" << s;
    }
  }
}

TEST(Qc, FixtureAgreesWithConstruction) {
  const auto fixture = testsupport::qc_fixture();
  ASSERT_EQ(fixture.size(), 900u);
  std::vector<AnnotationRecord> log;
  for (const auto& la : fixture) {
    EXPECT_EQ(classify(la.record, QcConfig{}), la.label)
        << la.record.annotation_id << " expected " << la.label.label();
    log.push_back(la.record);
  }
  const auto result = filter_usable(log, QcConfig{});
  EXPECT_EQ(result.usable.size(), 290u);
  EXPECT_EQ(result.tally.usable(), 290u);
  EXPECT_EQ(result.tally.count(QcKind::NoEllipse), 133u);
  EXPECT_EQ(result.tally.count(QcKind::SinglePair), 256u);
  EXPECT_EQ(result.tally.multi_pair_by_k.at(2), 25u);
  EXPECT_EQ(result.tally.multi_pair_by_k.at(3), 6u);
  std::size_t singles = 0;
  std::size_t adjusted = 0;
  for (const auto& la : fixture) {
    if (la.record.ellipses.size() == 1) {
      ++singles;
      adjusted += la.record.ellipses[0].adjusted;
    }
  }
  EXPECT_EQ(singles, 445u);
  EXPECT_EQ(adjusted, 244u);
  EXPECT_EQ(result.rows.size(), 900u);
}

TEST(Qc, ReportFiles) {
  testsupport::TempDir d;
  std::vector<AnnotationRecord> log;
  for (const auto& la : testsupport::qc_fixture()) log.push_back(la.record);
  const auto result = filter_usable(log, QcConfig{});
  write_qc_report(result, QcConfig{}, d / "qc.csv", d / "qc.json");
  std::ifstream in(d / "qc.json");
  const auto j = json::parse(in);
  EXPECT_EQ(j["usable"], 290);
  EXPECT_EQ(j["total"], 900);
  std::ifstream csv(d / "qc.csv");
  std::size_t lines = 0;
  for (std::string l; std::getline(csv, l);) ++lines;
  EXPECT_EQ(lines, 901u);
}
