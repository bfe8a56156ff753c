#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>

#include "compbench/errors.hpp"
#include "compbench/provider.hpp"
#include "compbench/service.hpp"
#include "support/builders.hpp"

using namespace compbench;
using testing_support::DocBuilder;
using testing_support::Json;
namespace fs = std::filesystem;

namespace {

Json outputs_reply(const std::string& model, const std::vector<std::string>& ids) {
  Json j{{"model", model}, {"instances", Json::array()}};
  for (const auto& id : ids) j["instances"].push_back(Json{{"id", id}, {"probs", {0.75, 0.25}}});
  return j;
}

Json layers_reply(const std::string& model) {
  return Json{{"model", model},
              {"layers",
               {{{"path", "fc1.weight"}, {"param_count", 4}, {"zero_count", 0},
                 {"weight_hist", {{"edges", {0, 1}}, {"counts", {4}}}}}}}};
}

void write(const fs::path& p, const Json& j) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << j.dump();
}

// Two-model session on disk: base and a pruned child, two instances.
fs::path tiny_session(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  DocBuilder b;
  b.metric("accuracy", "maximize", "color").metric("size", "minimize", "size");
  b.root("base", {{"accuracy", 1.0}, {"size", 8}}).child("p50", "base", "prune", {{"sparsity", 0.5}},
                                                       {{"accuracy", 0.5}, {"size", 4}});
  write(dir / "experiments.json", b.doc());
  write(dir / "dataset.json", Json{{"classes", {"cat", "dog"}},
                                   {"instances", {{{"id", "x"}, {"truth", "cat"}, {"group", "common"}},
                                                  {{"id", "y"}, {"truth", "dog"}, {"group", "rare"}}}}});
  write(dir / "outputs" / "base.json",
        Json{{"model", "base"}, {"instances", {{{"id", "x"}, {"label", "cat"}}, {{"id", "y"}, {"label", "dog"}}}}});
  write(dir / "outputs" / "p50.json",
        Json{{"model", "p50"}, {"instances", {{{"id", "x"}, {"label", "cat"}}, {{"id", "y"}, {"label", "cat"}}}}});
  write(dir / "layers" / "base.json", layers_reply("base"));
  write(dir / "layers" / "p50.json", layers_reply("p50"));
  write(dir / "session.json",
        Json{{"experiments", "experiments.json"}, {"dataset", "dataset.json"}, {"outputs_dir", "outputs"},
             {"layers_dir", "layers"}, {"cache_size", 4}});
  return dir;
}

ApiResponse post(const Service& s, const std::string& path, const Json& body) {
  return s.handle(ApiRequest{"POST", path, {}, body.dump()});
}

ApiResponse get(const Service& s, const std::string& path, std::map<std::string, std::string> query = {}) {
  return s.handle(ApiRequest{"GET", path, std::move(query), ""});
}

}  // namespace

TEST_SUITE("provider") {
  TEST_CASE("request bodies") {
    CHECK(outputs_request("m", {"a"}) == Json{{"model", "m"}, {"kind", "outputs"}, {"ids", {"a"}}});
    CHECK(layers_request("m", {})["paths"].empty());
  }

  TEST_CASE("echo contract") {
    const std::vector<std::string> ids{"a", "b"};
    CHECK(decode_outputs_reply(outputs_reply("m", ids), "m", ids, {"cat", "dog"}).records.size() == 2);
    CHECK_THROWS_WITH_AS(decode_outputs_reply(outputs_reply("other", ids), "m", ids, {}),
                         doctest::Contains("ProviderProtocolViolation"), Error);
    CHECK_THROWS_WITH_AS(decode_outputs_reply(outputs_reply("m", {"a"}), "m", ids, {}),
                         doctest::Contains("ProviderProtocolViolation"), Error);
    CHECK_THROWS_WITH_AS(decode_outputs_reply(outputs_reply("m", {"a", "b", "c"}), "m", ids, {}),
                         doctest::Contains("ProviderProtocolViolation"), Error);
    Json unknown = outputs_reply("m", {"a"});
    unknown["unknown"] = {"b"};
    CHECK_THROWS_WITH_AS(decode_outputs_reply(unknown, "m", ids, {}), doctest::Contains("MissingOutput(b)"), Error);
    CHECK_THROWS_AS(decode_outputs_reply(Json::array(), "m", ids, {}), Error);
  }

  TEST_CASE("layers replies") {
    CHECK(decode_layers_reply(layers_reply("m"), "m", {}).layers.size() == 1);
    CHECK(decode_layers_reply(layers_reply("m"), "m", {"fc1.weight"}).layers.size() == 1);
    CHECK_THROWS_WITH_AS(decode_layers_reply(layers_reply("m"), "m", {"fc2.weight"}),
                         doctest::Contains("ProviderProtocolViolation"), Error);
    Json unknown = layers_reply("m");
    unknown["unknown"] = {"fc9"};
    CHECK_THROWS_WITH_AS(decode_layers_reply(unknown, "m", {"fc1.weight", "fc9"}), doctest::Contains("UnknownPath"),
                         Error);
  }

  TEST_CASE("fetch through a transport") {
    std::string seen_endpoint;
    ProviderTransport t = [&](const std::string& endpoint, const Json& body) {
      seen_endpoint = endpoint;
      return outputs_reply(body["model"], body["ids"].get<std::vector<std::string>>());
    };
    CHECK(fetch_provider_outputs(t, "m", {"a"}, {"cat", "dog"}).records[0].label == "cat");
    CHECK(seen_endpoint == "outputs");
  }
}

TEST_SUITE("service") {
  TEST_CASE("status mapping") {
    CHECK(http_status(ErrorCode::UnknownModel) == 404);
    CHECK(http_status(ErrorCode::MissingOutput) == 404);
    CHECK(http_status(ErrorCode::ProviderProtocolViolation) == 502);
    CHECK(http_status(ErrorCode::ProviderUnavailable) == 502);
    CHECK(http_status(ErrorCode::BadRequest) == 400);
    CHECK(http_status(ErrorCode::LoadFailure) == 500);
    const auto body = error_body(Error(ErrorCode::UnknownModel, "ghost", "no such model"));
    CHECK(body == Json{{"code", "UnknownModel"}, {"message", "no such model"}, {"detail", "ghost"}});
  }

  TEST_CASE("lru cache evicts the least recently used entry") {
    LruCache<int> c(2);
    c.put("a", std::make_shared<const int>(1));
    c.put("b", std::make_shared<const int>(2));
    CHECK(*c.get("a") == 1);
    c.put("c", std::make_shared<const int>(3));
    CHECK(c.get("b") == nullptr);
    CHECK(c.get("a") != nullptr);
    CHECK(c.size() == 2);
    LruCache<int> off(0);
    off.put("a", std::make_shared<const int>(1));
    CHECK(off.get("a") == nullptr);
  }

  TEST_CASE("config loading") {
    const auto dir = tiny_session("compbench_cfg_test");
    const auto cfg = load_config(dir / "session.json");
    CHECK(cfg.experiments == dir / "experiments.json");
    CHECK(cfg.cache_size == 4);
    CHECK(cfg.port == 8080);
    CHECK_THROWS_WITH_AS(config_from_json(Json{{"experiments", "e.json"}}, dir), doctest::Contains("BadConfig"), Error);
    CHECK_THROWS_WITH_AS(config_from_json(Json{{"experiments", "e"}, {"dataset", "d"}}, dir),
                         doctest::Contains("BadConfig"), Error);
    CHECK_THROWS_AS(load_config(dir / "missing.json"), Error);
    auto broken = cfg;
    broken.experiments = dir / "nothing.json";
    CHECK_THROWS_WITH_AS(Service{broken}, doctest::Contains("LoadFailure"), Error);
    fs::remove_all(dir);
  }

  TEST_CASE("static session endpoints") {
    const auto dir = tiny_session("compbench_static_test");
    const Service s(load_config(dir / "session.json"));
    CHECK(get(s, "/v1/models").body["models"].size() == 2);
    CHECK(get(s, "/v1/models/p50").body["op_path"] == Json::array({"prune(sparsity=0.5)"}));
    const auto missing = get(s, "/v1/models/ghost");
    CHECK(missing.status == 404);
    CHECK(missing.body["code"] == "UnknownModel");
    CHECK(get(s, "/v1/nowhere").status == 404);
    CHECK(post(s, "/v1/models", Json::object()).status == 400);
    CHECK(get(s, "/v1/layout", {{"mode", "sideways"}}).status == 400);
    CHECK(get(s, "/v1/metrics/accuracy/histogram", {{"bins", "x"}}).status == 400);
    CHECK(s.handle(ApiRequest{"POST", "/v1/filters", {}, "{not json"}).status == 400);

    const auto rows = post(s, "/v1/behaviors", Json{{"ids", {"base", "p50"}}, {"relative_mode", "difference"}});
    REQUIRE(rows.status == 200);
    CHECK(rows.body["base"] == "base");
    CHECK(rows.body["total"] == 2);
    CHECK(rows.body["rows"][1]["key"] == "rare");
    CHECK(rows.body["rows"][1]["per_model"]["p50"]["relative"] == -1.0);
    const auto inst = post(s, "/v1/behaviors", Json{{"ids", {"base", "p50"}}, {"group_by", "instance"}, {"limit", 1}});
    CHECK(inst.body["rows"].size() == 1);
    CHECK(inst.body["rows"][0]["truth"] == "cat");
    CHECK(post(s, "/v1/behaviors", Json{{"ids", {"base", "ghost"}}}).status == 404);
    CHECK(post(s, "/v1/behaviors", Json{{"ids", {"p50"}}, {"base", "base"}}).status == 400);

    const auto layers = post(s, "/v1/layers", Json{{"ids", {"base", "p50"}}, {"sort", true}});
    REQUIRE(layers.status == 200);
    CHECK(layers.body["ranking"]["p50"][0]["path"] == "fc1.weight");
    CHECK(s.fetch_layers("p50") == s.fetch_layers("p50"));
    fs::remove_all(dir);
  }

  TEST_CASE("provider session caches and enforces the echo contract") {
    const auto dir = tiny_session("compbench_provider_test");
    auto cfg = load_config(dir / "session.json");
    cfg.provider_url = "http://unused";
    std::atomic<int> hits{0};
    bool lie = false;
    ProviderTransport t = [&](const std::string& endpoint, const Json& body) -> Json {
      ++hits;
      const std::string model = lie ? "someone-else" : body["model"].get<std::string>();
      if (endpoint == "layers") return layers_reply(model);
      return outputs_reply(model, body["ids"].get<std::vector<std::string>>());
    };
    const Service s(cfg, t);
    CHECK_THROWS_WITH_AS(Service{cfg}, doctest::Contains("BadConfig"), Error);
    s.fetch_outputs("p50", {"x", "y"});
    s.fetch_outputs("p50", {"y", "x"});
    CHECK(hits == 1);
    s.fetch_outputs("p50", {"x"});
    CHECK(hits == 2);
    lie = true;
    const auto r = post(s, "/v1/layers", Json{{"ids", {"base"}}});
    CHECK(r.status == 502);
    CHECK(r.body["code"] == "ProviderProtocolViolation");
    fs::remove_all(dir);
  }
}
