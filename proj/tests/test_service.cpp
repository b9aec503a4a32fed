#include "doctest.h"

#include "previs/service.hpp"

#include <httplib.h>

#include <future>

#include <unistd.h>

using namespace previs;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int n = 0;
    path = fs::temp_directory_path() /
           ("previs-service-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Pipeline {
  TempDir dir;
  Service service{dir.path};
  std::string mesh, train, test, basis;

  Pipeline() {
    mesh = service.create_mesh({{"nx", 9}, {"ny", 6}})["id"];
    train = service.create_ensemble({{"mesh_id", mesh}})["id"];
    test = service.create_ensemble(
        {{"mesh_id", mesh}, {"design", {{"kind", "lhs"}, {"samples", 30}, {"seed", 5}}}})["id"];
    basis = service.create_basis({{"ensemble_id", train}, {"k", 10}})["id"];
  }

  std::string train_model(const std::string &kind, int epochs) {
    Json request = {{"ensemble_id", train},
                    {"kind", kind},
                    {"seed", 1},
                    {"optimizer", {{"epochs", epochs}}}};
    if (kind == "olff")
      request["config"] = {{"hidden", 8}};
    else
      request["config"] = {{"mu", 12}, {"filters", 3}, {"cheb_order", 4}, {"fc", 10}};
    const std::string id = service.submit_training(request)["id"];
    service.wait_for_training();
    return id;
  }
};

Json parse(const httplib::Result &r) {
  REQUIRE(r);
  return Json::parse(r->body);
}

} // namespace

TEST_CASE("pipeline calls create linked artifacts") {
  Pipeline p;
  CHECK(p.service.store().find(p.mesh)->kind == "mesh");
  CHECK(p.service.store().find(p.train)->kind == "ensemble");
  CHECK(p.service.store().find(p.basis)->kind == "basis");
  const auto basis = load_artifact<PcaBasis>(p.service.store(), p.basis);
  CHECK(basis.k() == 6); // a linear generator spans six directions
  CHECK(p.service.session().basis_id == p.basis);
  CHECK(p.service.artifacts("ensemble")["artifacts"].size() == 2);
  CHECK_THROWS_AS(p.service.artifacts("spreadsheet"), InvalidArgument);
  CHECK_THROWS_AS(p.service.create_basis({{"ensemble_id", p.mesh}}), InvalidArgument);
  CHECK_THROWS_AS(p.service.create_basis({{"ensemble_id", "ensemble-0"}}), NotFound);
  CHECK_THROWS_AS(p.service.create_ensemble(
                      {{"mesh_id", p.mesh}, {"design", {{"kind", "sobol"}}}}),
                  InvalidArgument);
}

TEST_CASE("interpolating the mean parameters returns the mean field") {
  Pipeline p;
  const auto basis = load_artifact<PcaBasis>(p.service.store(), p.basis);
  const Json out = p.service.interpolate(
      {{"basis_id", p.basis}, {"params", to_json_array(basis.mean_params)}});
  const VectorXd values = vector_from_json(out["values"]);
  CHECK((values - basis.mean_field).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(out["out_of_bounds"] == false);
  CHECK(out["warnings"].empty());
  CHECK(out["elapsed_ms"].get<double>() >= 0.0);
  CHECK(p.service.session().last_params.size() == 6);

  const Json outside = p.service.interpolate(
      {{"basis_id", p.basis}, {"params", {3, 0, 0, 0, 0, 0}}});
  CHECK(outside["out_of_bounds"] == true);
  CHECK(outside["warnings"].size() == 1);

  CHECK_THROWS_AS(p.service.interpolate({{"basis_id", p.basis}, {"params", {0, 0}}}),
                  InvalidArgument);
  CHECK_THROWS_AS(p.service.interpolate({{"basis_id", p.basis}}), InvalidArgument);
}

TEST_CASE("training jobs queue under distinct ids and report progress") {
  Pipeline p;
  const Json request = {{"ensemble_id", p.train},
                        {"kind", "olff"},
                        {"config", {{"hidden", 8}}},
                        {"optimizer", {{"epochs", 4}}}};
  const Json a = p.service.submit_training(request);
  const Json b = p.service.submit_training(request);
  CHECK(a["id"] != b["id"]);
  CHECK(a["status"] == "queued");
  p.service.wait_for_training();

  for (const auto &id : {a["id"].get<std::string>(), b["id"].get<std::string>()}) {
    const Json info = p.service.model_info(id);
    CHECK(info["status"] == "done");
    CHECK(info["training_log"].size() == 4);
    CHECK(info["ensemble_id"] == p.train);
    const Json progress = p.service.training_progress(id);
    CHECK(progress["epoch"] == 4);
    CHECK(progress["epochs"] == 4);
  }
  CHECK(p.service.session().model_id == b["id"]);

  CHECK_THROWS_AS(p.service.submit_training({{"ensemble_id", p.train}, {"kind", "rnn"}}),
                  InvalidArgument);
  CHECK_THROWS_AS(p.service.submit_training(
                      {{"ensemble_id", p.train}, {"optimizer", {{"lr", -1.0}}}}),
                  InvalidArgument);
  CHECK_THROWS_AS(p.service.model_info("model-0000000000000000"), NotFound);

  const Json diverging = p.service.submit_training(
      {{"ensemble_id", p.train},
       {"config", {{"hidden", 8}}},
       {"optimizer", {{"epochs", 5}, {"lr", 1e12}}}});
  p.service.wait_for_training();
  const Json failed = p.service.model_info(diverging["id"]);
  CHECK(failed["status"] == "failed");
  CHECK(failed.contains("diverged_epoch"));
  CHECK_FALSE(p.service.store().contains(diverging["id"]));
}

TEST_CASE("compare stores a report with one field per model and parameter") {
  Pipeline p;
  const std::string olff = p.train_model("olff", 20);
  const std::string gcn = p.train_model("gcn", 5);

  const Json one = p.service.compare({{"model_ids", {olff}}, {"test_ensemble_id", p.test}});
  CHECK(one["whisker_field_ids"].size() == 6);
  CHECK(one["report"]["deltas"].empty());
  CHECK(one["basis_id"] == p.basis);

  const Json two = p.service.compare(
      {{"model_ids", {olff, gcn}}, {"test_ensemble_id", p.test}, {"basis_id", p.basis}});
  CHECK(two["whisker_field_ids"].size() == 12);
  CHECK(two["outlier_field_ids"].size() == 12);
  CHECK(two["report"]["deltas"].size() == 1);
  const auto report =
      load_artifact<ComparisonReport>(p.service.store(), two["report_id"]);
  CHECK(report.models.size() == 2);
  CHECK(report.relative);
  CHECK(report.whisker_field_ids.at(gcn + "/5") == two["whisker_field_ids"][11]);

  const Json field = p.service.field(two["whisker_field_ids"][0]);
  CHECK(field["meta"]["kind"] == "whisker");
  CHECK(field["meta"]["model_id"] == olff);
  const std::string bytes = p.service.field_binary(two["whisker_field_ids"][0]);
  CHECK(bytes.size() == 8 * field["values"].size());

  CHECK_THROWS_AS(p.service.compare({{"model_ids", Json::array()},
                                     {"test_ensemble_id", p.test}}),
                  InvalidArgument);
  CHECK_THROWS_AS(p.service.compare({{"model_ids", {p.basis}}, {"test_ensemble_id", p.test}}),
                  InvalidArgument);
}

TEST_CASE("http endpoints") {
  Pipeline p;
  HttpServer server(p.service);
  const int port = server.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);

  auto post = [&](const std::string &path, const Json &body) {
    return client.Post(path, body.dump(), "application/json");
  };

  auto mesh = post("/meshes", {{"nx", 9}, {"ny", 6}});
  REQUIRE(mesh);
  CHECK(mesh->status == 201);
  CHECK(parse(mesh)["vertex_count"] == 54);

  SUBCASE("interpolate matches the direct call") {
    const Json body = {{"basis_id", p.basis}, {"params", {0.1, -0.2, 0.3, 0, 0.5, -1}}};
    auto r = post("/interpolate", body);
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(parse(r)["values"] == p.service.interpolate(body)["values"]);
  }

  SUBCASE("concurrent interpolations agree with serial ones") {
    std::vector<Json> bodies;
    std::vector<Json> serial;
    for (int i = 0; i < 12; ++i) {
      const double t = -1.0 + 2.0 * i / 11.0;
      bodies.push_back({{"basis_id", p.basis}, {"params", {t, -t, t / 2, 0.3, -0.7, t * t}}});
      serial.push_back(p.service.interpolate(bodies.back())["values"]);
    }
    std::vector<std::future<Json>> parallel;
    for (const auto &body : bodies)
      parallel.push_back(std::async(std::launch::async, [&, body] {
        httplib::Client c("127.0.0.1", port);
        auto r = c.Post("/interpolate", body.dump(), "application/json");
        return r && r->status == 200 ? Json::parse(r->body)["values"] : Json();
      }));
    for (std::size_t i = 0; i < parallel.size(); ++i)
      CHECK(parallel[i].get() == serial[i]);
  }

  SUBCASE("errors map to status codes") {
    auto bad_kind = post("/models/train", {{"ensemble_id", p.train}, {"kind", "rnn"}});
    REQUIRE(bad_kind);
    CHECK(bad_kind->status == 400);
    CHECK(parse(bad_kind).contains("error"));

    auto malformed = client.Post("/interpolate", "{not json", "application/json");
    REQUIRE(malformed);
    CHECK(malformed->status == 400);

    auto missing = client.Get("/models/model-0000000000000000");
    REQUIRE(missing);
    CHECK(missing->status == 404);

    auto missing_field = client.Get("/fields/field-0000000000000000");
    REQUIRE(missing_field);
    CHECK(missing_field->status == 404);

    auto bad_kind_list = client.Get("/artifacts?kind=spreadsheet");
    REQUIRE(bad_kind_list);
    CHECK(bad_kind_list->status == 400);
  }

  SUBCASE("training, progress, compare and fields") {
    auto queued = post("/models/train", {{"ensemble_id", p.train},
                                         {"config", {{"hidden", 8}}},
                                         {"optimizer", {{"epochs", 3}}}});
    REQUIRE(queued);
    CHECK(queued->status == 202);
    const std::string id = parse(queued)["id"];
    p.service.wait_for_training();

    auto info = client.Get("/models/" + id);
    REQUIRE(info);
    CHECK(parse(info)["status"] == "done");
    auto progress = client.Get("/models/" + id + "/progress");
    CHECK(parse(progress)["epoch"] == 3);

    auto cmp = post("/compare", {{"model_ids", {id}}, {"test_ensemble_id", p.test}});
    REQUIRE(cmp);
    CHECK(cmp->status == 201);
    const Json report = parse(cmp);
    CHECK(report["whisker_field_ids"].size() == 6);

    const std::string fid = report["outlier_field_ids"][2];
    auto as_json = client.Get("/fields/" + fid);
    REQUIRE(as_json);
    const VectorXd values = vector_from_json(parse(as_json)["values"]);
    auto as_bin = client.Get("/fields/" + fid + "?format=bin");
    REQUIRE(as_bin);
    CHECK(as_bin->get_header_value("Content-Type") == "application/octet-stream");
    const auto decoded = decode_le<double>(as_bin->body);
    REQUIRE(Index(decoded.size()) == values.size());
    CHECK(Eigen::Map<const VectorXd>(decoded.data(), values.size()) == values);

    auto listing = client.Get("/artifacts?kind=field");
    CHECK(parse(listing)["artifacts"].size() == 12);
  }

  server.stop();
}
