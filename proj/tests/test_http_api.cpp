#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "semprobe/http_api.hpp"
#include "semprobe/trial_log.hpp"
#include "temp_dir.hpp"

using namespace semprobe;
using namespace semprobe::service;
using json = nlohmann::json;

namespace {

class HttpApiTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::filesystem::create_directories(stimuli.path() / "img");
    std::ofstream(stimuli.path() / "img" / "duck-rabbit_7.5_0.5_0.png", std::ios::binary) << "PNGDATA";
    std::ofstream(data.path() / "secret.txt") << "nope";

    store = std::make_unique<SessionStore>(data.path());
    store->add_manifest(factorial_manifest("dr", {"duck", "rabbit"}, {7.5, 10}, {0.3, 0.5, 0.7}, 2));
    service = std::make_unique<HttpService>(*store, HttpOptions{stimuli.path() / "img"});
    port = service->bind_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    server = std::thread([this] { service->listen_after_bind(); });
    service->wait_until_ready();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }

  void TearDown() override {
    service->stop();
    server.join();
  }

  json post(const std::string& path, const json& body, int expected_status) {
    auto res = client->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expected_status) << res->body;
    return json::parse(res->body);
  }

  json get(const std::string& path, int expected_status) {
    auto res = client->Get(path);
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expected_status) << res->body;
    return json::parse(res->body);
  }

  TempDir data{"semprobe-http"};
  TempDir stimuli{"semprobe-stim"};
  std::unique_ptr<SessionStore> store;
  std::unique_ptr<HttpService> service;
  std::thread server;
  std::unique_ptr<httplib::Client> client;
  int port = -1;
};

}  // namespace

TEST_F(HttpApiTest, FullSessionLifecycle) {
  auto created = post("/v1/sessions", {{"observer_id", "p01"}, {"manifest_id", "dr"}, {"rng_seed", 3}}, 201);
  std::string id = created["session_id"];
  EXPECT_EQ(created["total_trials"], 12);

  for (int i = 0; i < 12; ++i) {
    auto next = get("/v1/sessions/" + id + "/next", 200);
    ASSERT_FALSE(next["complete"].get<bool>());
    EXPECT_EQ(next["trial_index"], i);
    EXPECT_EQ(next["presentation"]["stimulus_duration_ms"], 500);
    EXPECT_EQ(next["presentation"]["response_keys"], json::array({"duck", "rabbit"}));
    auto ack = post("/v1/sessions/" + id + "/responses",
                    {{"trial_index", i},
                     {"response", i % 2 ? "duck" : "rabbit"},
                     {"reaction_time_ms", 420.5},
                     {"client_presented_at", "2025-03-01T10:00:00.000Z"}},
                    200);
    EXPECT_EQ(ack["cursor"], i + 1);
  }
  EXPECT_TRUE(get("/v1/sessions/" + id + "/next", 200)["complete"].get<bool>());
  EXPECT_EQ(get("/v1/sessions/" + id, 200)["state"], "complete");

  auto res = client->Get("/v1/export?manifest=dr&state=complete");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  std::istringstream in(res->body);
  auto log = ingest::read_trial_log(in, "http");
  EXPECT_EQ(log.trials.size(), 12u);
  EXPECT_EQ(log.trials[0].presented_at, "2025-03-01T10:00:00.000Z");
}

TEST_F(HttpApiTest, ResubmitReturnsSameAck) {
  auto created = post("/v1/sessions", {{"observer_id", "p01"}, {"manifest_id", "dr"}, {"rng_seed", 3}}, 201);
  std::string path = "/v1/sessions/" + created["session_id"].get<std::string>() + "/responses";
  json body{{"trial_index", 0}, {"response", "duck"}, {"reaction_time_ms", 300}};
  auto first = post(path, body, 200);
  EXPECT_EQ(post(path, body, 200), first);
}

TEST_F(HttpApiTest, ErrorStatuses) {
  auto created = post("/v1/sessions", {{"observer_id", "p01"}, {"manifest_id", "dr"}, {"rng_seed", 3}}, 201);
  std::string id = created["session_id"];
  auto seq = post("/v1/sessions/" + id + "/responses",
                  {{"trial_index", 5}, {"response", "duck"}, {"reaction_time_ms", 300}}, 409);
  EXPECT_EQ(seq["error"], "sequencing");
  EXPECT_EQ(seq["cursor"], 0);
  EXPECT_EQ(post("/v1/sessions/" + id + "/responses",
                 {{"trial_index", 0}, {"response", "duk"}, {"reaction_time_ms", 300}}, 422)["error"],
            "validation");
  EXPECT_EQ(post("/v1/sessions/" + id + "/responses", {{"trial_index", 0}}, 400)["error"], "schema");
  EXPECT_EQ(post("/v1/sessions", {{"observer_id", "p01"}, {"manifest_id", "dr"}, {"rng_seed", 4}}, 409)["error"],
            "conflict");
  EXPECT_EQ(post("/v1/sessions", {{"observer_id", "p02"}, {"manifest_id", "zz"}, {"rng_seed", 4}}, 404)["error"],
            "not_found");
  get("/v1/sessions/s999999/next", 404);
  get("/v1/manifest/zz", 404);
  get("/v1/export", 400);

  auto res = client->Post("/v1/sessions", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST_F(HttpApiTest, ManifestAndStimuli) {
  auto manifest = get("/v1/manifest/dr", 200);
  EXPECT_EQ(manifest["manifest_id"], "dr");
  EXPECT_EQ(manifest["conditions"].size(), 12u);

  auto res = client->Get("/v1/stimuli/duck-rabbit_7.5_0.5_0.png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, "PNGDATA");
  EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");

  get("/v1/stimuli/missing.png", 404);
  auto escape = client->Get("/v1/stimuli/..%2F..%2Fsecret.txt");
  ASSERT_TRUE(escape);
  EXPECT_NE(escape->status, 200);
}
