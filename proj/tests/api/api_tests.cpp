#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <future>
#include <thread>

#include <unistd.h>

#include "compbench/http.hpp"
#include "support/http_harness.hpp"

namespace fs = std::filesystem;
using compbench::Json;
using namespace testing_support;

namespace {

const fs::path& fixture_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("compbench_api_" + std::to_string(::getpid()));
    fs::remove_all(d);
    ensure_user_study_fixture(d);
    return d;
  }();
  return dir;
}

compbench::SessionConfig static_config() { return compbench::load_config(fixture_dir() / "session.json"); }

compbench::SessionConfig provider_config(const MockProvider& provider) {
  compbench::SessionConfig c = static_config();
  c.outputs_dir.reset();
  c.layers_dir.reset();
  c.provider_url = provider.url();
  return c;
}

struct ProviderSession {
  MockProvider provider{fixture_dir()};
  LiveService live{provider_config(provider),
                   compbench::http_provider_transport(provider.url(), 4, 10000)};
};

const Json kBehaviorBody{{"ids", {"base", "prune90"}}, {"relative_mode", "pct_error_change"}};

struct Cleanup {
  ~Cleanup() { fs::remove_all(fs::temp_directory_path() / ("compbench_api_" + std::to_string(::getpid()))); }
} cleanup;

}  // namespace

TEST_SUITE("api") {
  TEST_CASE("responses match the golden files") {
    LiveService live(static_config());
    const bool update = std::getenv("UPDATE_GOLDEN") != nullptr;
    const GoldenReport report = run_golden(live.port(), COMPBENCH_GOLDEN_DIR, update);
    CHECK(report.checked == static_cast<int>(golden_cases().size()));
    for (const auto& f : report.failures) FAIL_CHECK(f);
  }

  TEST_CASE("unknown routes and methods") {
    LiveService live(static_config());
    CHECK(http_get(live.port(), "/v1/nowhere").status == 404);
    CHECK(http_post(live.port(), "/v1/models", Json::object()).status >= 400);
    const auto bad = http_post(live.port(), "/v1/filters", Json("not an object"));
    CHECK(bad.status == 400);
    CHECK(bad.body.contains("code"));
    CHECK(bad.body.contains("message"));
    CHECK(bad.body.contains("detail"));
  }

  TEST_CASE("error bodies name the code") {
    LiveService live(static_config());
    const auto r = http_get(live.port(), "/v1/models/ghost");
    REQUIRE(r.status == 404);
    CHECK(r.body["code"] == "UnknownModel");
    const auto b = http_post(live.port(), "/v1/behaviors", Json{{"ids", {"base", "ghost"}}});
    REQUIRE(b.status == 404);
    CHECK(b.body["code"] == "UnknownModel");
  }

  TEST_CASE("compare of a calibrate pair yields a presence chart") {
    LiveService live(static_config());
    const auto r = http_post(live.port(), "/v1/selection/compare", Json{{"ids", {"prune50", "prune50_calibrate"}}});
    REQUIRE(r.status == 200);
    CHECK(r.body["result"] == "chart");
    CHECK(r.body["chart"]["x_variable"]["kind"] == "presence");
  }

  TEST_CASE("parallel identical requests agree") {
    LiveService live(static_config());
    std::vector<std::future<HttpResult>> futures;
    for (int i = 0; i < 8; ++i) {
      futures.push_back(std::async(std::launch::async, [&] { return http_post(live.port(), "/v1/behaviors", kBehaviorBody); }));
    }
    std::vector<HttpResult> results;
    for (auto& f : futures) results.push_back(f.get());
    for (const auto& r : results) {
      CHECK(r.status == 200);
      CHECK(r.body == results.front().body);
    }
  }
}

TEST_SUITE("api_provider") {
  TEST_CASE("provider session answers like the static session") {
    LiveService plain(static_config());
    ProviderSession s;
    for (const Json& body : {kBehaviorBody, Json{{"ids", {"base", "quant8"}}, {"metric", "kl_divergence"}, {"group_by", "instance"}}}) {
      const auto want = http_post(plain.port(), "/v1/behaviors", body);
      const auto have = http_post(s.live.port(), "/v1/behaviors", body);
      REQUIRE(want.status == 200);
      REQUIRE(have.status == 200);
      CHECK(json_difference(want.body, have.body) == "");
    }
    const Json layers{{"ids", {"base", "prune90"}}, {"sort", true}};
    const auto want = http_post(plain.port(), "/v1/layers", layers);
    const auto have = http_post(s.live.port(), "/v1/layers", layers);
    REQUIRE(have.status == 200);
    CHECK(json_difference(want.body, have.body) == "");
  }

  TEST_CASE("repeated requests are served from the cache") {
    ProviderSession s;
    for (int i = 0; i < 3; ++i) REQUIRE(http_post(s.live.port(), "/v1/behaviors", kBehaviorBody).status == 200);
    CHECK(s.provider.hits("outputs", "base") == 1);
    CHECK(s.provider.hits("outputs", "prune90") == 1);
    for (int i = 0; i < 3; ++i) REQUIRE(http_post(s.live.port(), "/v1/layers", Json{{"ids", {"base"}}}).status == 200);
    CHECK(s.provider.hits("layers", "base") == 1);
  }

  TEST_CASE("a reply for the wrong model is a protocol violation") {
    ProviderSession s;
    s.provider.set_wrong_model(true);
    const auto r = http_post(s.live.port(), "/v1/behaviors", kBehaviorBody);
    CHECK(r.status == 502);
    CHECK(r.body["code"] == "ProviderProtocolViolation");
    const auto l = http_post(s.live.port(), "/v1/layers", Json{{"ids", {"base"}}});
    CHECK(l.status == 502);
  }

  TEST_CASE("ids the provider does not know are missing outputs") {
    ProviderSession s;
    s.provider.set_forgetful_model("prune90");
    const auto r = http_post(s.live.port(), "/v1/behaviors", kBehaviorBody);
    CHECK(r.status == 404);
    CHECK(r.body["code"] == "MissingOutput");
  }

  TEST_CASE("an unreachable provider is a bad gateway") {
    compbench::SessionConfig c = static_config();
    c.outputs_dir.reset();
    c.layers_dir.reset();
    c.provider_url = "http://127.0.0.1:1";
    LiveService live(c, compbench::http_provider_transport(*c.provider_url, 2, 2000));
    const auto r = http_post(live.port(), "/v1/behaviors", kBehaviorBody);
    CHECK(r.status == 502);
    CHECK(r.body["code"] == "ProviderUnavailable");
    CHECK(http_get(live.port(), "/v1/models").status == 200);
  }

  TEST_CASE("parallel requests through the provider agree and share one fetch per model") {
    ProviderSession s;
    std::vector<std::future<HttpResult>> futures;
    for (int i = 0; i < 6; ++i) {
      futures.push_back(std::async(std::launch::async, [&] { return http_post(s.live.port(), "/v1/behaviors", kBehaviorBody); }));
    }
    std::vector<HttpResult> results;
    for (auto& f : futures) results.push_back(f.get());
    for (const auto& r : results) {
      CHECK(r.status == 200);
      CHECK(r.body == results.front().body);
    }
    // Concurrent misses may each fetch; afterwards the entry is cached.
    const int before = s.provider.total_hits();
    REQUIRE(http_post(s.live.port(), "/v1/behaviors", kBehaviorBody).status == 200);
    CHECK(s.provider.total_hits() == before);
  }
}
