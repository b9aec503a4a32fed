#include "previs/service.hpp"

#include <httplib.h>

#include <chrono>
#include <future>

namespace previs {

namespace {

std::string require_string(const Json &request, const char *key) {
  if (!request.is_object() || !request.contains(key) || !request[key].is_string())
    throw InvalidArgument(std::string("missing string field '") + key + "'");
  return request[key].get<std::string>();
}

template <typename T> const char *kind_name();
template <> const char *kind_name<SurfaceMesh>() { return "mesh"; }
template <> const char *kind_name<Ensemble>() { return "ensemble"; }
template <> const char *kind_name<PcaBasis>() { return "basis"; }
template <> const char *kind_name<Regressor>() { return "model"; }
template <> const char *kind_name<ImpactField>() { return "field"; }

GeneratorOptions generator_options(const Json &j) {
  GeneratorOptions o;
  if (j.is_null())
    return o;
  o.amplitudes = j.value("amplitudes", o.amplitudes);
  o.baseline_magnitude = j.value("baseline_magnitude", o.baseline_magnitude);
  o.bump_radius_fraction = j.value("bump_radius_fraction", o.bump_radius_fraction);
  o.tangential_fraction = j.value("tangential_fraction", o.tangential_fraction);
  o.gamma = j.value("gamma", o.gamma);
  o.sigma = j.value("sigma", o.sigma);
  o.seed = j.value("seed", o.seed);
  return o;
}

Json generator_json(const GeneratorOptions &o) {
  return {{"amplitudes", o.amplitudes},
          {"baseline_magnitude", o.baseline_magnitude},
          {"bump_radius_fraction", o.bump_radius_fraction},
          {"tangential_fraction", o.tangential_fraction},
          {"gamma", o.gamma},
          {"sigma", o.sigma},
          {"seed", o.seed}};
}

Json job_json(const TrainingJob &job) {
  Json j = {{"id", job.model_id}, {"status", job.status}, {"epoch", job.epoch},
            {"epochs", job.epochs}, {"loss", job.loss}};
  if (!job.error.empty())
    j["error"] = job.error;
  if (job.diverged_epoch)
    j["diverged_epoch"] = *job.diverged_epoch;
  return j;
}

std::string mesh_artifact_of(const ArtifactStore &store, const Artifact &ensemble) {
  const std::string id = ensemble.meta.value("mesh_artifact", std::string());
  if (!id.empty())
    return id;
  const std::string content = ensemble.meta.at("mesh_id").get<std::string>();
  for (const auto &info : store.list("mesh"))
    if (store.load(info.id).meta.value("id", "") == content)
      return info.id;
  throw NotFound("no stored mesh with content id " + content);
}

std::string field_key(const std::string &model_id, Index j) {
  return model_id + "/" + std::to_string(j);
}

} // namespace

Service::Service(std::filesystem::path store_root)
    : store_(std::move(store_root)), worker_([this] { worker_loop(); }) {}

Service::~Service() {
  {
    std::lock_guard lock(jobs_mutex_);
    stopping_ = true;
  }
  jobs_cv_.notify_all();
  if (worker_.joinable())
    worker_.join();
}

template <typename T>
std::shared_ptr<const T> Service::cached(const std::string &id) const {
  const std::string key = std::string(kind_name<T>()) + "/" + id;
  {
    std::lock_guard lock(cache_mutex_);
    const auto it = cache_.find(key);
    if (it != cache_.end())
      return std::static_pointer_cast<const T>(it->second);
  }
  const auto info = store_.find(id);
  if (!info)
    throw NotFound("no artifact with id '" + id + "'");
  if (info->kind != kind_name<T>())
    throw InvalidArgument("'" + id + "' is a " + info->kind + ", expected a " +
                          kind_name<T>());
  auto value = std::make_shared<const T>(load_artifact<T>(store_, id));
  std::lock_guard lock(cache_mutex_);
  cache_.emplace(key, value);
  return value;
}

std::shared_ptr<const SpectralOperator>
Service::spectral_for(const std::string &mesh_id, Index mu) const {
  const std::string key = "spectral/" + mesh_id + "/" + std::to_string(mu);
  {
    std::lock_guard lock(cache_mutex_);
    const auto it = cache_.find(key);
    if (it != cache_.end())
      return std::static_pointer_cast<const SpectralOperator>(it->second);
  }
  const auto mesh = cached<SurfaceMesh>(mesh_id);
  auto op = std::make_shared<const SpectralOperator>(
      spectral_basis(normalized_laplacian(*mesh), mu));
  std::lock_guard lock(cache_mutex_);
  cache_.emplace(key, op);
  return op;
}

Json Service::create_mesh(const Json &request) {
  const Json r = request.is_null() ? Json::object() : request;
  const auto mesh = build_plate_mesh(r.value("nx", 40), r.value("ny", 25),
                                     r.value("width", 1200.0),
                                     r.value("height", 700.0));
  const std::string id = save_artifact(store_, mesh);
  {
    std::lock_guard lock(session_mutex_);
    session_.mesh_id = id;
  }
  return {{"id", id},
          {"content_id", mesh.id},
          {"vertex_count", mesh.vertex_count()},
          {"triangle_count", mesh.triangle_count()}};
}

Json Service::create_ensemble(const Json &request) {
  const std::string mesh_id = require_string(request, "mesh_id");
  const auto mesh = cached<SurfaceMesh>(mesh_id);
  const Json design_req = request.value("design", Json{{"kind", "factorial3"}});
  const ParameterSpace space = design_req.contains("space")
                                   ? design_req["space"].get<ParameterSpace>()
                                   : ParameterSpace::hood_default();
  const std::string kind = design_req.value("kind", "factorial3");
  EnsembleDesign design;
  if (kind == "factorial3") {
    design = three_level_factorial(space);
  } else if (kind == "lhs") {
    design = latin_hypercube(design_req.value("samples", Index(100)), space,
                             design_req.value("seed", std::uint64_t(0)));
  } else if (kind == "custom") {
    design.space = space;
    design.kind = DesignKind::Custom;
    design.rows = matrix_from_json(design_req.at("rows"), space.size());
  } else {
    throw InvalidArgument("unknown design kind '" + kind + "'");
  }

  const GeneratorOptions opts = generator_options(request.value("generator", Json()));
  if (Index(opts.amplitudes.size()) != space.size())
    throw InvalidArgument("generator needs one amplitude per parameter");
  const auto ensemble =
      generate_ensemble(*mesh, design, default_generator_config(*mesh, opts));
  Artifact a = encode(ensemble);
  a.meta["mesh_artifact"] = mesh_id;
  a.meta["generator"] = generator_json(opts);
  const std::string id = store_.save(a);
  return {{"id", id},
          {"samples", ensemble.size()},
          {"mesh_id", ensemble.mesh_id},
          {"mesh_artifact", mesh_id}};
}

Json Service::create_basis(const Json &request) {
  const std::string ensemble_id = require_string(request, "ensemble_id");
  const auto ensemble = cached<Ensemble>(ensemble_id);
  const auto mesh_id = mesh_artifact_of(store_, store_.load(ensemble_id));
  const auto mesh = cached<SurfaceMesh>(mesh_id);
  const Index k = request.value("k", Index(10));
  PcaBasis basis = build_pca_basis(*ensemble, *mesh, k);
  Artifact a = encode(basis);
  a.meta["mesh_artifact"] = mesh_id;
  a.meta["ensemble_id"] = ensemble_id;
  const std::string id = store_.save(a);
  {
    std::lock_guard lock(session_mutex_);
    session_.basis_id = id;
  }
  return {{"id", id},
          {"k", basis.k()},
          {"requested_k", k},
          {"mesh_id", basis.mesh_id},
          {"mesh_artifact", mesh_id},
          {"cumulative_explained_variance",
           to_json_array(cumulative_explained_variance(basis))}};
}

Json Service::submit_training(const Json &request) {
  const std::string ensemble_id = require_string(request, "ensemble_id");
  const auto kind = regressor_kind_from_string(request.value("kind", "olff"));
  OptimizerConfig opt = kind == RegressorKind::Olff
                            ? OptimizerConfig::olff_default()
                            : OptimizerConfig::gcn_default();
  if (request.contains("optimizer"))
    from_json(request["optimizer"], opt);
  opt.validate();
  if (!store_.contains(ensemble_id))
    throw NotFound("no artifact with id '" + ensemble_id + "'");
  if (store_.find(ensemble_id)->kind != "ensemble")
    throw InvalidArgument("'" + ensemble_id + "' is not an ensemble");

  Json job_request = request;
  job_request["optimizer"] = opt;
  const std::string id = store_.reserve_id("model");
  {
    std::lock_guard lock(jobs_mutex_);
    TrainingJob job;
    job.model_id = id;
    job.epochs = opt.epochs;
    jobs_[id] = job;
    queue_.emplace_back(id, std::move(job_request));
  }
  jobs_cv_.notify_all();
  return {{"id", id}, {"status", "queued"}};
}

void Service::worker_loop() {
  for (;;) {
    std::pair<std::string, Json> next;
    {
      std::unique_lock lock(jobs_mutex_);
      jobs_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_)
        return;
      next = std::move(queue_.front());
      queue_.pop_front();
      busy_ = true;
      jobs_[next.first].status = "running";
    }
    run_job(next.first, next.second);
    {
      std::lock_guard lock(jobs_mutex_);
      busy_ = false;
    }
    idle_cv_.notify_all();
  }
}

void Service::run_job(const std::string &model_id, const Json &request) {
  auto fail = [&](const std::string &what, std::optional<int> epoch) {
    std::lock_guard lock(jobs_mutex_);
    auto &job = jobs_[model_id];
    job.status = "failed";
    job.error = what;
    job.diverged_epoch = epoch;
  };
  try {
    const std::string ensemble_id = request.at("ensemble_id").get<std::string>();
    const auto ensemble = cached<Ensemble>(ensemble_id);
    const auto mesh_id = mesh_artifact_of(store_, store_.load(ensemble_id));
    const auto kind = regressor_kind_from_string(request.value("kind", "olff"));
    const std::uint64_t seed = request.value("seed", std::uint64_t(0));
    const Json config = request.value("config", Json::object());
    const OptimizerConfig opt = request.at("optimizer").get<OptimizerConfig>();
    const Index outputs = ensemble->design.rows.cols();
    const Index vertices = ensemble->fields.empty() ? 0 : ensemble->fields[0].size();

    Regressor model;
    if (kind == RegressorKind::Olff) {
      model = init_olff(3 * vertices, config.value("hidden", Index(75)), outputs, seed);
    } else {
      GcnConfig cfg = config.get<GcnConfig>();
      cfg.output = outputs;
      model = init_gcn(spectral_for(mesh_id, cfg.mu), cfg, seed);
    }
    model.mesh_id = ensemble->mesh_id;
    model = train(std::move(model), *ensemble, opt,
                  [&](const TrainingProgress &p) {
                    std::lock_guard lock(jobs_mutex_);
                    auto &job = jobs_[model_id];
                    job.epoch = p.epoch;
                    job.epochs = p.epochs;
                    job.loss = p.loss;
                  });
    Artifact a = encode(model);
    a.meta["ensemble_id"] = ensemble_id;
    a.meta["mesh_artifact"] = mesh_id;
    store_.save_as(model_id, a);
    {
      std::lock_guard lock(jobs_mutex_);
      jobs_[model_id].status = "done";
    }
    std::lock_guard lock(session_mutex_);
    session_.model_id = model_id;
  } catch (const DivergenceError &e) {
    fail(e.what(), e.epoch);
  } catch (const std::exception &e) {
    fail(e.what(), std::nullopt);
  }
}

void Service::wait_for_training() {
  std::unique_lock lock(jobs_mutex_);
  idle_cv_.wait(lock, [this] { return queue_.empty() && !busy_; });
}

Json Service::training_progress(const std::string &id) const {
  {
    std::lock_guard lock(jobs_mutex_);
    const auto it = jobs_.find(id);
    if (it != jobs_.end())
      return job_json(it->second);
  }
  const auto info = store_.find(id);
  if (!info || info->kind != "model")
    throw NotFound("no model with id '" + id + "'");
  const auto log = store_.load(id).meta.at("training_log");
  return {{"id", id},
          {"status", "done"},
          {"epoch", log.size()},
          {"epochs", log.size()},
          {"loss", log.empty() ? 0.0 : log.back().get<double>()}};
}

Json Service::model_info(const std::string &id) const {
  const auto info = store_.find(id);
  if (!info) {
    std::lock_guard lock(jobs_mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end())
      throw NotFound("no model with id '" + id + "'");
    return job_json(it->second);
  }
  if (info->kind != "model")
    throw InvalidArgument("'" + id + "' is not a model");
  const Json meta = store_.load(id).meta;
  Json out = {{"id", id},
              {"status", "done"},
              {"created_at", info->created_at},
              {"kind", meta.at("kind")},
              {"config", meta.at("config")},
              {"seed", meta.at("seed")},
              {"mesh_id", meta.at("mesh_id")},
              {"weight_count", meta.at("weight_count")},
              {"optimizer", meta.at("optimizer")},
              {"training_log", meta.at("training_log")}};
  out["ensemble_id"] = meta.value("ensemble_id", "");
  return out;
}

Json Service::interpolate(const Json &request) {
  const std::string basis_id = require_string(request, "basis_id");
  if (!request.contains("params"))
    throw InvalidArgument("missing field 'params'");
  const ParameterVector params = vector_from_json(request["params"]);
  if (!params.allFinite())
    throw InvalidArgument("params must be finite");
  const auto basis = cached<PcaBasis>(basis_id);
  if (params.size() != basis->parameter_count())
    throw InvalidArgument("expected " + std::to_string(basis->parameter_count()) +
                          " params, got " + std::to_string(params.size()));

  const auto start = std::chrono::steady_clock::now();
  const ScalarField field = previs::interpolate(*basis, params);
  const double elapsed_ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - start)
                                .count();

  Json warnings = Json::array();
  const bool outside = basis->space.size() == params.size() &&
                       !basis->space.contains(params);
  if (outside)
    warnings.push_back("params outside the parameter bounds; extrapolating");
  {
    std::lock_guard lock(session_mutex_);
    session_.basis_id = basis_id;
    session_.last_params.assign(params.data(), params.data() + params.size());
    session_.last_elapsed_ms = elapsed_ms;
  }
  return {{"basis_id", basis_id},
          {"mesh_id", field.mesh_id},
          {"values", to_json_array(field.values)},
          {"elapsed_ms", elapsed_ms},
          {"out_of_bounds", outside},
          {"warnings", warnings}};
}

std::string Service::pick_basis(const std::string &mesh_id) const {
  std::string chosen;
  for (const auto &info : store_.list("basis"))
    if (store_.load(info.id).meta.value("mesh_id", "") == mesh_id)
      chosen = info.id;
  if (chosen.empty())
    throw InvalidArgument("no basis on mesh " + mesh_id +
                          "; pass basis_id or create one");
  return chosen;
}

Json Service::compare(const Json &request) {
  if (!request.is_object() || !request.contains("model_ids") ||
      !request["model_ids"].is_array())
    throw InvalidArgument("missing array field 'model_ids'");
  const auto model_ids = request["model_ids"].get<std::vector<std::string>>();
  if (model_ids.empty())
    throw InvalidArgument("model_ids must not be empty");
  const auto test = cached<Ensemble>(require_string(request, "test_ensemble_id"));
  const bool relative = request.value("relative", true);

  std::vector<std::shared_ptr<const Regressor>> models;
  for (const auto &id : model_ids) {
    models.push_back(cached<Regressor>(id));
    if (models.back()->mesh_id != test->mesh_id)
      throw InvalidArgument("model " + id + " is on a different mesh than the test set");
  }
  const std::string basis_id = request.contains("basis_id")
                                   ? require_string(request, "basis_id")
                                   : pick_basis(test->mesh_id);
  const auto basis = cached<PcaBasis>(basis_id);
  if (basis->mesh_id != test->mesh_id)
    throw InvalidArgument("basis is on a different mesh than the test set");

  std::vector<std::future<ErrorSummary>> pending;
  for (std::size_t m = 0; m < models.size(); ++m)
    pending.push_back(std::async(std::launch::async, [&, m] {
      MatrixXd e = prediction_errors(*models[m], *test);
      if (relative)
        e = relative_errors(e, test->design.space);
      return summarize_errors(e, test->design.space, model_ids[m], relative);
    }));
  std::vector<ErrorSummary> summaries;
  for (auto &p : pending)
    summaries.push_back(p.get());

  ComparisonReport report = compare_models(summaries);
  Json whisker_ids = Json::array(), outlier_ids = Json::array();
  for (const auto &s : report.models) {
    for (Index j = 0; j < s.parameter_count(); ++j) {
      const auto w = save_artifact(store_, whisker_impact_field(*basis, s, j));
      const auto o = save_artifact(store_, outlier_impact_field(*basis, s, j));
      report.whisker_field_ids[field_key(s.model_id, j)] = w;
      report.outlier_field_ids[field_key(s.model_id, j)] = o;
      whisker_ids.push_back(w);
      outlier_ids.push_back(o);
    }
  }
  Artifact a = encode(report);
  a.meta["basis_id"] = basis_id;
  a.meta["test_ensemble_id"] = request["test_ensemble_id"];
  const std::string report_id = store_.save(a);
  return {{"report_id", report_id},
          {"basis_id", basis_id},
          {"report", report},
          {"whisker_field_ids", whisker_ids},
          {"outlier_field_ids", outlier_ids},
          {"table", format_report(report)}};
}

Json Service::field(const std::string &id) const {
  const auto f = cached<ImpactField>(id);
  return {{"id", id},
          {"mesh_id", f->field.mesh_id},
          {"values", to_json_array(f->field.values)},
          {"meta", f->meta}};
}

std::string Service::field_binary(const std::string &id) const {
  const auto f = cached<ImpactField>(id);
  return f64_blob(f->field.values).bytes;
}

Json Service::artifacts(const std::string &kind) const {
  if (!kind.empty() && !is_artifact_kind(kind))
    throw InvalidArgument("unknown artifact kind '" + kind + "'");
  Json list = Json::array();
  for (const auto &info : store_.list(kind))
    list.push_back({{"id", info.id}, {"kind", info.kind}, {"created_at", info.created_at}});
  const SessionState s = session();
  return {{"artifacts", list},
          {"session",
           {{"mesh_id", s.mesh_id},
            {"basis_id", s.basis_id},
            {"model_id", s.model_id},
            {"last_params", s.last_params},
            {"last_elapsed_ms", s.last_elapsed_ms}}}};
}

SessionState Service::session() const {
  std::lock_guard lock(session_mutex_);
  return session_;
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

void send_json(httplib::Response &res, const Json &body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename Handler>
void guarded(httplib::Response &res, Handler &&handler) {
  try {
    handler();
  } catch (const NotFound &e) {
    send_json(res, {{"error", e.what()}}, 404);
  } catch (const InvalidArgument &e) {
    send_json(res, {{"error", e.what()}}, 400);
  } catch (const Json::exception &e) {
    send_json(res, {{"error", std::string("malformed request: ") + e.what()}}, 400);
  } catch (const IntegrityError &e) {
    send_json(res, {{"error", e.what()}}, 500);
  } catch (const std::exception &e) {
    send_json(res, {{"error", e.what()}}, 500);
  }
}

Json parse_body(const httplib::Request &req) {
  if (req.body.empty())
    return Json::object();
  return Json::parse(req.body);
}

} // namespace

HttpServer::HttpServer(Service &service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto &s = *server_;
  auto post = [&](const char *path, Json (Service::*op)(const Json &),
                  int status) {
    s.Post(path, [this, op, status](const httplib::Request &req,
                                    httplib::Response &res) {
      guarded(res, [&] { send_json(res, (service_.*op)(parse_body(req)), status); });
    });
  };
  post("/meshes", &Service::create_mesh, 201);
  post("/ensembles", &Service::create_ensemble, 201);
  post("/bases", &Service::create_basis, 201);
  post("/models/train", &Service::submit_training, 202);
  post("/interpolate", &Service::interpolate, 200);
  post("/compare", &Service::compare, 201);

  s.Get(R"(/models/([A-Za-z0-9_-]+)/progress)",
        [this](const httplib::Request &req, httplib::Response &res) {
          guarded(res, [&] {
            send_json(res, service_.training_progress(req.matches[1]));
          });
        });
  s.Get(R"(/models/([A-Za-z0-9_-]+))",
        [this](const httplib::Request &req, httplib::Response &res) {
          guarded(res, [&] { send_json(res, service_.model_info(req.matches[1])); });
        });
  s.Get(R"(/fields/([A-Za-z0-9_-]+))",
        [this](const httplib::Request &req, httplib::Response &res) {
          guarded(res, [&] {
            if (req.get_param_value("format") == "bin")
              res.set_content(service_.field_binary(req.matches[1]),
                              "application/octet-stream");
            else
              send_json(res, service_.field(req.matches[1]));
          });
        });
  s.Get("/artifacts", [this](const httplib::Request &req, httplib::Response &res) {
    guarded(res, [&] { send_json(res, service_.artifacts(req.get_param_value("kind"))); });
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string &host, int port) {
  port_ = port == 0 ? server_->bind_to_any_port(host)
                    : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ < 0)
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port_;
}

void HttpServer::listen() { server_->listen_after_bind(); }

int HttpServer::start(const std::string &host, int port) {
  const int bound = bind(host, port);
  thread_ = std::thread([this] { listen(); });
  server_->wait_until_ready();
  return bound;
}

void HttpServer::stop() {
  if (server_)
    server_->stop();
  if (thread_.joinable())
    thread_.join();
}

} // namespace previs
