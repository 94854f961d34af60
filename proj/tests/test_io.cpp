#include <fstream>

#include <gtest/gtest.h>

#include "airway_crowd/annotation.hpp"
#include "airway_crowd/task_store.hpp"
#include "airway_crowd/volume.hpp"
#include "support.hpp"

using namespace airway_crowd;
using testsupport::TempDir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

std::string header_4x4x4(const std::string& extra = "") {
  return "ObjectType = Image\nNDims = 3\nDimSize = 4 4 4\nElementSpacing = 0.7 0.7 1.25\n"
         "ElementType = MET_SHORT\n" + extra + "ElementDataFile = vol.raw\n";
}

}  // namespace

TEST(VolumeIo, Loads4x4x4) {
  TempDir d;
  write_text(d / "vol.mhd", header_4x4x4("BinaryDataByteOrderMSB = False\n"));
  std::string raw;
  for (int i = 0; i < 64; ++i) {
    const auto v = static_cast<std::uint16_t>(static_cast<std::int16_t>(i * 10 - 300));
    raw.push_back(char(v & 0xff));
    raw.push_back(char(v >> 8));
  }
  write_text(d / "vol.raw", raw);
  const auto vol = load_volume(d / "vol.mhd");
  EXPECT_EQ(vol.dims(), (Dims{4, 4, 4}));
  EXPECT_DOUBLE_EQ(vol.spacing().x, 0.7);
  EXPECT_DOUBLE_EQ(vol.spacing().z, 1.25);
  EXPECT_DOUBLE_EQ(vol.min_spacing(), 0.7);
  EXPECT_EQ(vol.at(0, 0, 0), -300);
  EXPECT_EQ(vol.at(1, 0, 0), -290);  // x fastest
  EXPECT_EQ(vol.at(0, 1, 0), -260);
  EXPECT_EQ(vol.at(0, 0, 1), -140);
}

TEST(VolumeIo, SizeMismatch) {
  TempDir d;
  write_text(d / "vol.mhd", header_4x4x4());
  write_text(d / "vol.raw", std::string(100, '\0'));
  try {
    load_volume(d / "vol.mhd");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("128"), std::string::npos) << e.what();
  }
}

TEST(VolumeIo, RejectsUnsupportedHeaders) {
  TempDir d;
  write_text(d / "vol.raw", std::string(128, '\0'));
  write_text(d / "a.mhd", header_4x4x4("BinaryDataByteOrderMSB = True\n"));
  EXPECT_THROW(load_volume(d / "a.mhd"), FormatError);
  write_text(d / "b.mhd",
             "NDims = 3\nDimSize = 4 4 4\nElementSpacing = 1 1 1\nElementType = MET_FLOAT\n"
             "ElementDataFile = vol.raw\n");
  EXPECT_THROW(load_volume(d / "b.mhd"), FormatError);
  write_text(d / "c.mhd", "NDims = 3\nDimSize = 4 4 4\nElementType = MET_SHORT\nElementDataFile = vol.raw\n");
  EXPECT_THROW(load_volume(d / "c.mhd"), FormatError);
  EXPECT_THROW(load_volume(d / "missing.mhd"), NotFoundError);
}

TEST(VolumeIo, WriteThenLoad) {
  TempDir d;
  std::vector<std::int16_t> data(3 * 5 * 2);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<std::int16_t>(i * 997 - 15000);
  const CtVolume vol({3, 5, 2}, {0.5, 0.75, 2.5}, data);
  write_volume(vol, d / "out.mhd");
  EXPECT_EQ(load_volume(d / "out.mhd"), vol);
}

TEST(Sites, NormalizesOrientation) {
  TempDir d;
  write_text(d / "s.csv", std::string(kSitesHeader) + "\nA,1,1,1,0,0,2,10.5,30\n");
  const CtVolume vol({4, 4, 4}, {1, 1, 1}, std::vector<std::int16_t>(64));
  const auto sites = load_sites(d / "s.csv", vol);
  ASSERT_EQ(sites.size(), 1u);
  EXPECT_EQ(sites[0].orientation, (Vec3{0, 0, 1}));
  EXPECT_DOUBLE_EQ(sites[0].expert_lumen_area, 10.5);
}

TEST(Sites, RejectsBadRows) {
  TempDir d;
  const CtVolume vol({4, 4, 4}, {1, 1, 1}, std::vector<std::int16_t>(64));
  const std::string h = std::string(kSitesHeader) + "\n";
  write_text(d / "inv.csv", h + "A,1,1,1,0,0,1,30,10\n");
  EXPECT_THROW(load_sites(d / "inv.csv", vol), ValidationError);
  write_text(d / "dup.csv", h + "A,1,1,1,0,0,1,10,30\nA,2,2,2,0,0,1,10,30\n");
  EXPECT_THROW(load_sites(d / "dup.csv", vol), ValidationError);
  write_text(d / "oob.csv", h + "A,1,1,3.5,0,0,1,10,30\n");
  EXPECT_THROW(load_sites(d / "oob.csv", vol), ValidationError);
  EXPECT_NO_THROW(load_sites(d / "oob.csv"));
  write_text(d / "zero.csv", h + "A,1,1,1,0,0,0,10,30\n");
  EXPECT_THROW(load_sites(d / "zero.csv", vol), ValidationError);
  write_text(d / "hdr.csv", "id,x,y,z\nA,1,1,1\n");
  EXPECT_THROW(load_sites(d / "hdr.csv", vol), FormatError);
  write_text(d / "num.csv", h + "A,1,one,1,0,0,1,10,30\n");
  EXPECT_THROW(load_sites(d / "num.csv", vol), FormatError);
}

TEST(Sites, WriteThenLoad) {
  TempDir d;
  const std::vector<AirwaySite> sites{{"a", {1.5, 2, 3}, {0, 0, 1}, 12.25, 40},
                                      {"b", {0, 0, 0}, normalize({1, 1, 0}), 3, 9}};
  write_sites(sites, d / "s.csv");
  const auto back = load_sites(d / "s.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_LT(norm(back[1].orientation - sites[1].orientation), 1e-15);
  EXPECT_EQ(back[0].location, sites[0].location);
}

TEST(AnnotationJson, RoundTrip) {
  AnnotationRecord r = testsupport::record("a1", "s_axial", {testsupport::circle(10, 11, 3)});
  r.ellipses[0].theta = 1.25;
  r.ellipses[0].kind_hint = KindHint::Wall;
  const auto line = to_log_line(r);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  const auto j = json::parse(line);
  EXPECT_EQ(j.size(), 6u);
  EXPECT_EQ(annotation_from_json(j), r);
}

TEST(AnnotationJson, StrictFields) {
  const json ok{{"cx", 1}, {"cy", 2}, {"rx", 3}, {"ry", 4}, {"adjusted", true}};
  EXPECT_NO_THROW(ellipse_from_json(ok));
  auto bad = ok;
  bad["rx"] = 0;
  EXPECT_THROW(ellipse_from_json(bad), ValidationError);
  bad = ok;
  bad["adjusted"] = 1;
  EXPECT_THROW(ellipse_from_json(bad), ValidationError);
  bad = ok;
  bad.erase("cy");
  EXPECT_THROW(ellipse_from_json(bad), ValidationError);
  bad = ok;
  bad["theta"] = 3 * std::numbers::pi / 2;
  EXPECT_NEAR(ellipse_from_json(bad).theta, std::numbers::pi / 2, 1e-12);
}

TEST(AnnotationJson, Timestamps) {
  EXPECT_TRUE(is_rfc3339_utc("2016-06-01T12:00:00Z"));
  EXPECT_TRUE(is_rfc3339_utc("2016-06-01T12:00:00.123Z"));
  EXPECT_FALSE(is_rfc3339_utc("2016-06-01 12:00:00Z"));
  EXPECT_FALSE(is_rfc3339_utc("2016-06-01T12:00:00+02:00"));
  EXPECT_TRUE(is_rfc3339_utc(now_rfc3339()));
}

TEST(Hits, ChunksOf10WithShortTail) {
  std::vector<std::string> ids;
  for (int i = 0; i < 304; ++i) ids.push_back("img" + std::to_string(i));
  const auto hits = make_hits(ids, HitConfig{});
  ASSERT_EQ(hits.size(), 31u);
  EXPECT_EQ(hits.front().hit_id, "hit-0001");
  EXPECT_EQ(hits.back().hit_id, "hit-0031");
  EXPECT_EQ(hits.back().image_ids.size(), 4u);
  std::set<std::string> seen;
  for (const auto& h : hits)
    for (const auto& id : h.image_ids) EXPECT_TRUE(seen.insert(id).second);
  EXPECT_EQ(seen.size(), 304u);
  EXPECT_EQ(make_hits(ids, HitConfig{}), hits);
  HitConfig other;
  other.shuffle_seed = 99;
  EXPECT_NE(make_hits(ids, other), hits);
}

TEST(Hits, ManifestRoundTrip) {
  TempDir d;
  const auto hits = make_hits({"a", "b", "c"}, HitConfig{2});
  write_hit_manifest(hits, d / "hits.json");
  EXPECT_EQ(load_hit_manifest(d / "hits.json"), hits);
  EXPECT_THROW(make_hits({"a", "a"}, HitConfig{}), ValidationError);
}

TEST(AnnotationLog, TornTail) {
  TempDir d;
  const auto r = testsupport::record("a1", "img", {testsupport::circle(5, 5, 2)});
  write_text(d / "log.jsonl", to_log_line(r) + "\n" + to_log_line(r).substr(0, 20));
  EXPECT_THROW(read_annotation_log(d / "log.jsonl"), FormatError);
  const auto recs = read_annotation_log(d / "log.jsonl", true);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0], r);
}
