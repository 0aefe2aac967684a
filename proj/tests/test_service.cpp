#include <filesystem>
#include <thread>

#include "doctest.h"
#include "dssddi/service.hpp"
#include "dssddi/synth.hpp"
#include "httplib.h"

using namespace dssddi;
using namespace dssddi::service;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// One tiny trained bundle shared by every case.
const fs::path& bundle_dir() {
  static const fs::path dir = [] {
    auto root = fs::temp_directory_path() / "dssddi_test_service";
    fs::remove_all(root);
    synth::SynthConfig s;
    s.groups = 3;
    s.patients_per_group = 12;
    s.drugs_per_group = 4;
    s.num_drugs = 12;
    s.patient_dim = 4;
    s.drug_dim = 4;
    s.subtypes = 1;
    synth::write_synthetic(synth::generate_synthetic_cohort(s), root / "data");
    pipeline::PipelineConfig c;
    c.embedding_dim = 8;
    c.ddigcn_epochs = 5;
    c.mdgcn_epochs = 5;
    c.clusters = 3;
    pipeline::run_training_pipeline(pipeline::DataPaths::from_dir(root / "data"), c, root / "run");
    return root / "run" / "bundle";
  }();
  return dir;
}

json features(std::size_t n) { return json(std::vector<double>(n, 0.1)); }

}  // namespace

TEST_CASE("handlers: suggest returns k ranked drugs") {
  auto snap = load_snapshot(bundle_dir());
  auto out = handle_suggest(*snap, {{"features", features(4)}, {"k", 3}});
  REQUIRE(out["drugs"].size() == 3);
  CHECK(out["drugs"][0]["score"].get<double>() >= out["drugs"][1]["score"].get<double>());
  CHECK(out["drugs"][0].contains("name"));
  // null cells are imputed
  json f = features(4);
  f[1] = nullptr;
  CHECK(handle_suggest(*snap, {{"features", f}})["drugs"].size() == 6);
}

TEST_CASE("handlers: malformed suggest names the field") {
  auto snap = load_snapshot(bundle_dir());
  auto status_field = [&](const json& body) {
    try {
      handle_suggest(*snap, body);
    } catch (const HttpError& e) {
      return std::make_pair(e.status(), e.field());
    }
    return std::make_pair(200, std::string());
  };
  CHECK(status_field({{"k", 2}}) == std::make_pair(400, std::string("features")));
  CHECK(status_field({{"features", features(3)}}) == std::make_pair(400, std::string("features")));
  CHECK(status_field({{"features", {1, "x", 2, 3}}}) == std::make_pair(400, std::string("features")));
  CHECK(status_field({{"features", features(4)}, {"k", 0}}) == std::make_pair(400, std::string("k")));
  CHECK(status_field({{"features", features(4)}, {"k", 13}}) == std::make_pair(400, std::string("k")));
}

TEST_CASE("dispatch: routes, errors and reload") {
  Service svc(bundle_dir());
  CHECK(svc.dispatch("GET", "/health", "").body["status"] == "ok");
  CHECK(svc.dispatch("GET", "/drugs", "").body["drugs"].size() == 12);
  CHECK(svc.dispatch("GET", "/schema", "").body["features"].size() == 4);

  auto r = svc.dispatch("POST", "/explain", R"({"drug_ids": [0, 1]})");
  CHECK(r.status == 200);
  CHECK(r.body.contains("nodes"));
  CHECK(r.body.contains("ss"));

  r = svc.dispatch("POST", "/ss", R"({"drug_ids": [0, 1], "alpha": 0.5})");
  CHECK(r.status == 200);
  CHECK(r.body["ss"].is_number());

  CHECK(svc.dispatch("POST", "/ss", R"({"drug_ids": [0]})").status == 400);
  CHECK(svc.dispatch("POST", "/ss", R"({"drug_ids": [0, 1], "alpha": 1.5})").body["field"] == "alpha");
  CHECK(svc.dispatch("POST", "/explain", R"({"drug_ids": [0, 99]})").status == 404);
  CHECK(svc.dispatch("POST", "/explain", R"({"drug_ids": [0, 0]})").status == 400);
  CHECK(svc.dispatch("POST", "/explain", "{not json").status == 400);
  CHECK(svc.dispatch("POST", "/explain", "[1, 2]").status == 400);
  CHECK(svc.dispatch("GET", "/nope", "").status == 404);

  auto before = svc.snapshot();
  CHECK(svc.dispatch("POST", "/admin/reload", "").status == 200);
  CHECK(svc.snapshot() != before);
  CHECK(before->bundle.num_drugs() == 12);  // old snapshot still usable
  auto bad = svc.dispatch("POST", "/admin/reload", R"({"bundle": "/does/not/exist"})");
  CHECK(bad.status == 500);
  CHECK(svc.snapshot()->source == bundle_dir());
}

TEST_CASE("live server on a free port") {
  Service svc(bundle_dir());
  const int port = svc.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread t([&] { svc.listen(); });
  httplib::Client cli("127.0.0.1", port);
  httplib::Result res;
  for (int i = 0; i < 50 && !(res = cli.Get("/health")); ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  REQUIRE(res);
  CHECK(res->status == 200);
  auto post = cli.Post("/suggest", json{{"features", features(4)}, {"k", 2}}.dump(), "application/json");
  REQUIRE(post);
  CHECK(post->status == 200);
  CHECK(json::parse(post->body)["drugs"].size() == 2);
  auto bad = cli.Post("/suggest", "{}", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body)["field"] == "features");
  svc.stop();
  t.join();
}
