#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "airway_crowd/phantom.hpp"
#include "airway_crowd/pipeline.hpp"
#include "airway_crowd/server.hpp"
#include "support.hpp"

using namespace airway_crowd;

namespace {

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto spec = tube_grid_phantom(3, 1, 30, 20);
    const auto vol = generate_phantom(spec);
    std::vector<AirwaySite> sites;
    for (const auto& t : spec.tubes) sites.push_back(tube_site(t));
    SliceConfig sc;
    sc.side = 20;
    PipelineConfig cfg;
    cfg.out = dir.path();
    cfg.hits.images_per_hit = 5;
    pipeline::reslice(vol, sites, sc, cfg.out);
    pipeline::make_hits(cfg);  // 12 images -> 5, 5, 2
    start(cfg.hits);
  }

  void start(HitConfig hc) {
    ServerConfig c;
    c.port = 0;
    c.data_dir = dir.path();
    c.hit_config = hc;
    server = std::make_unique<AnnotationServer>(c);
    port = server->bind();
    thread = std::thread([this] { server->serve(); });
    server->wait_until_ready();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }

  void stop() {
    server->stop();
    thread.join();
    server.reset();
  }

  void TearDown() override {
    if (server) stop();
  }

  json submit_body(const json& hit, const std::string& worker, const std::string& key = "") {
    json annotations = json::array();
    for (const auto& id : hit["image_ids"]) {
      annotations.push_back({{"image_id", id},
                             {"ellipses", json::array({{{"cx", 10}, {"cy", 10}, {"rx", 2}, {"ry", 2}, {"adjusted", true}},
                                                       {{"cx", 10}, {"cy", 10}, {"rx", 4}, {"ry", 4}, {"adjusted", true}}})}});
    }
    json body{{"worker_id", worker}, {"annotations", annotations}};
    if (!key.empty()) body["idempotency_key"] = key;
    return body;
  }

  testsupport::TempDir dir{"server"};
  std::unique_ptr<AnnotationServer> server;
  std::thread thread;
  std::unique_ptr<httplib::Client> client;
  int port{0};
};

}  // namespace

TEST_F(ServerTest, HitImageSubmitStats) {
  auto res = client->Get("/api/hit?worker=w1");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const auto hit = json::parse(res->body);
  EXPECT_EQ(hit["hit_id"], "hit-0001");
  EXPECT_EQ(hit["image_ids"].size(), 5u);
  EXPECT_EQ(hit["instructions_version"], instructions_version(kDefaultInstructions));

  const std::string img = hit["image_ids"][0];
  res = client->Get("/api/image/" + img + ".png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
  const std::vector<std::uint8_t> bytes(res->body.begin(), res->body.end());
  EXPECT_EQ(decode_png(bytes).width, 20);

  res = client->Post("/api/hit/hit-0001/submit", submit_body(hit, "w1", "k1").dump(),
                     "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200) << res->body;
  EXPECT_EQ(json::parse(res->body)["recorded"], 5);

  res = client->Post("/api/hit/hit-0001/submit", submit_body(hit, "w1", "k1").dump(),
                     "application/json");
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["replayed"], true);
  res = client->Post("/api/hit/hit-0001/submit", submit_body(hit, "w1").dump(), "application/json");
  EXPECT_EQ(res->status, 409);

  res = client->Get("/api/stats");
  ASSERT_TRUE(res);
  const auto stats = json::parse(res->body);
  EXPECT_EQ(stats["images_total"], 12);
  EXPECT_EQ(stats["annotations_total"], 5);
  EXPECT_EQ(stats["per_image_counts"][img], 1);
  EXPECT_EQ(stats["qc_tally"]["usable"], 5);

  res = client->Get("/api/hit?worker=w1");
  EXPECT_EQ(json::parse(res->body)["hit_id"], "hit-0002");
}

TEST_F(ServerTest, ErrorStatuses) {
  EXPECT_EQ(client->Get("/api/hit")->status, 400);
  EXPECT_EQ(client->Get("/api/image/nope_original.png")->status, 404);
  EXPECT_EQ(client->Post("/api/hit/hit-0099/submit", "{}", "application/json")->status, 404);
  EXPECT_EQ(client->Post("/api/hit/hit-0001/submit", "not json", "application/json")->status, 422);
  EXPECT_EQ(client->Post("/api/hit/hit-0001/submit", R"({"worker_id":"w"})", "application/json")->status,
            422);
  const auto hit = json::parse(client->Get("/api/hit?worker=w1")->body);
  auto body = submit_body(hit, "w1");
  body["annotations"].erase(0);
  EXPECT_EQ(client->Post("/api/hit/hit-0001/submit", body.dump(), "application/json")->status, 422);
  body = submit_body(hit, "w1");
  body["annotations"][0]["ellipses"][0]["rx"] = -3;
  EXPECT_EQ(client->Post("/api/hit/hit-0001/submit", body.dump(), "application/json")->status, 422);
  body = submit_body(hit, "w1");
  body["annotations"][0]["ellipses"][0].erase("adjusted");
  EXPECT_EQ(client->Post("/api/hit/hit-0001/submit", body.dump(), "application/json")->status, 422);
  EXPECT_EQ(json::parse(client->Get("/api/stats")->body)["annotations_total"], 0);
}

TEST_F(ServerTest, NoWorkLeftGives204) {
  stop();
  HitConfig one;
  one.images_per_hit = 5;
  one.annotations_per_image_target = 1;
  start(one);
  for (int i = 0; i < 3; ++i) {
    const auto hit = json::parse(client->Get("/api/hit?worker=w" + std::to_string(i))->body);
    const std::string id = hit["hit_id"];
    ASSERT_EQ(client->Post("/api/hit/" + id + "/submit", submit_body(hit, "w" + std::to_string(i)).dump(),
                           "application/json")->status,
              200);
  }
  EXPECT_EQ(client->Get("/api/hit?worker=w9")->status, 204);
}

TEST_F(ServerTest, RestartKeepsSubmissions) {
  const auto hit = json::parse(client->Get("/api/hit?worker=w1")->body);
  ASSERT_EQ(client->Post("/api/hit/hit-0001/submit", submit_body(hit, "w1").dump(), "application/json")->status,
            200);
  stop();
  HitConfig hc;
  hc.images_per_hit = 5;
  start(hc);
  EXPECT_EQ(json::parse(client->Get("/api/stats")->body)["annotations_total"], 5);
  EXPECT_EQ(client->Post("/api/hit/hit-0001/submit", submit_body(hit, "w1").dump(), "application/json")->status,
            409);
}

TEST_F(ServerTest, Instructions) {
  const auto j = json::parse(client->Get("/api/instructions")->body);
  EXPECT_EQ(j["text"], std::string(kDefaultInstructions));
  EXPECT_EQ(j["version"], instructions_version(kDefaultInstructions));
}
