#include "previs/service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <regex>

using namespace previs;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

/// Reads a flat JSON object whose keys are the long flag names of one
/// subcommand. Nested objects keyed by subcommand name are also accepted.
class JsonConfig : public CLI::Config {
public:
  explicit JsonConfig(const CLI::App *sub) : sub_(sub) {}

  std::string to_config(const CLI::App *app, bool, bool, std::string) const override {
    Json out = Json::object();
    for (const auto *opt : app->get_options())
      if (!opt->get_lnames().empty() && opt->count() > 0)
        out[opt->get_lnames().front()] = opt->as<std::string>();
    return out.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream &input) const override {
    Json j;
    try {
      j = Json::parse(input);
    } catch (const Json::exception &e) {
      throw CLI::ConversionError(std::string("config file is not JSON: ") + e.what());
    }
    if (!j.is_object())
      throw CLI::ConversionError("config file must hold a JSON object");
    if (sub_ && j.contains(sub_->get_name()) && j[sub_->get_name()].is_object())
      j = j[sub_->get_name()];

    std::vector<CLI::ConfigItem> items;
    for (const auto &[key, value] : j.items()) {
      if (key == "command")
        continue;
      if (!sub_ || !sub_->get_option_no_throw("--" + key))
        throw CLI::ConversionError("unknown config key '" + key + "'");
      CLI::ConfigItem item;
      item.parents = {sub_->get_name()};
      item.name = key;
      if (value.is_array())
        for (const auto &v : value)
          item.inputs.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      else
        item.inputs = {value.is_string() ? value.get<std::string>() : value.dump()};
      items.push_back(std::move(item));
    }
    return items;
  }

private:
  const CLI::App *sub_;
};

void echo_config(const std::string &command, Json config) {
  config["command"] = command;
  std::cout << "config " << config.dump() << std::endl;
}

struct MeshSpec {
  int nx = 40;
  int ny = 25;
};

MeshSpec parse_mesh_spec(const std::string &text) {
  static const std::regex pattern(R"(plate:(\d+)x(\d+))");
  std::smatch m;
  if (!std::regex_match(text, m, pattern))
    throw InvalidArgument("mesh must look like plate:NXxNY");
  return {std::stoi(m[1]), std::stoi(m[2])};
}

Json design_request(const std::string &text, std::uint64_t seed) {
  if (text == "factorial3")
    return {{"kind", "factorial3"}};
  static const std::regex pattern(R"(lhs:(\d+))");
  std::smatch m;
  if (!std::regex_match(text, m, pattern) || std::stol(m[1]) < 1)
    throw InvalidArgument("design must be factorial3 or lhs:N");
  return {{"kind", "lhs"}, {"samples", std::stol(m[1])}, {"seed", seed}};
}

const CLI::Validator MeshFormat(
    [](std::string &s) {
      try {
        parse_mesh_spec(s);
        return std::string();
      } catch (const InvalidArgument &e) {
        return std::string(e.what());
      }
    },
    "plate:NXxNY");

const CLI::Validator DesignFormat(
    [](std::string &s) {
      try {
        design_request(s, 0);
        return std::string();
      } catch (const InvalidArgument &e) {
        return std::string(e.what());
      }
    },
    "factorial3|lhs:N");

std::string find_or_create_mesh(Service &service, const MeshSpec &spec) {
  const auto mesh = build_plate_mesh(spec.nx, spec.ny, 1200.0, 700.0);
  for (const auto &info : service.store().list("mesh"))
    if (service.store().load(info.id).meta.value("id", "") == mesh.id)
      return info.id;
  return service.create_mesh({{"nx", spec.nx}, {"ny", spec.ny}})["id"];
}

struct GenerateArgs {
  std::string out;
  std::string mesh = "plate:40x25";
  std::string design = "factorial3";
  std::uint64_t seed = 0;
  double gamma = 0.0;
  double sigma = 0.0;
  std::uint64_t noise_seed = 0;
  std::vector<double> amplitudes = GeneratorOptions{}.amplitudes;
};

int cmd_generate(const GenerateArgs &a) {
  echo_config("generate", {{"out", a.out},
                           {"mesh", a.mesh},
                           {"design", a.design},
                           {"seed", a.seed},
                           {"gamma", a.gamma},
                           {"sigma", a.sigma},
                           {"noise-seed", a.noise_seed},
                           {"amplitudes", a.amplitudes}});
  Service service(a.out);
  const std::string mesh_id = find_or_create_mesh(service, parse_mesh_spec(a.mesh));
  const Json ensemble = service.create_ensemble(
      {{"mesh_id", mesh_id},
       {"design", design_request(a.design, a.seed)},
       {"generator",
        {{"gamma", a.gamma}, {"sigma", a.sigma}, {"seed", a.noise_seed},
         {"amplitudes", a.amplitudes}}}});
  std::cout << Json{{"mesh_id", mesh_id},
                    {"ensemble_id", ensemble["id"]},
                    {"samples", ensemble["samples"]}}
                   .dump()
            << std::endl;
  return 0;
}

struct BasisArgs {
  std::string store;
  std::string ensemble;
  Index k = 10;
};

int cmd_basis(const BasisArgs &a) {
  echo_config("basis", {{"store", a.store}, {"ensemble", a.ensemble}, {"k", a.k}});
  Service service(a.store);
  std::cout << service.create_basis({{"ensemble_id", a.ensemble}, {"k", a.k}}).dump()
            << std::endl;
  return 0;
}

struct TrainArgs {
  std::string store;
  std::string ensemble;
  std::string kind = "olff";
  std::uint64_t seed = 0;
  std::optional<std::string> optimizer;
  std::optional<double> lr;
  std::optional<double> momentum;
  std::optional<int> epochs;
  std::optional<Index> batch_size;
  std::optional<std::uint64_t> shuffle_seed;
  Index hidden = 75;
  GcnConfig gcn;
};

int cmd_train(const TrainArgs &a) {
  const auto kind = regressor_kind_from_string(a.kind);
  OptimizerConfig opt = kind == RegressorKind::Olff ? OptimizerConfig::olff_default()
                                                    : OptimizerConfig::gcn_default();
  if (a.optimizer)
    opt.kind = optimizer_kind_from_string(*a.optimizer);
  opt.lr = a.lr.value_or(opt.lr);
  opt.momentum = a.momentum.value_or(opt.momentum);
  opt.epochs = a.epochs.value_or(opt.epochs);
  opt.batch_size = a.batch_size.value_or(opt.batch_size);
  opt.shuffle_seed = a.shuffle_seed.value_or(opt.shuffle_seed);
  opt.validate();

  const Json config = kind == RegressorKind::Olff ? Json{{"hidden", a.hidden}} : Json(a.gcn);
  Json echo = {{"store", a.store},
               {"ensemble", a.ensemble},
               {"kind", a.kind},
               {"seed", a.seed},
               {"optimizer", to_string(opt.kind)},
               {"lr", opt.lr},
               {"momentum", opt.momentum},
               {"epochs", opt.epochs},
               {"batch-size", opt.batch_size},
               {"shuffle-seed", opt.shuffle_seed}};
  if (kind == RegressorKind::Olff) {
    echo["hidden"] = a.hidden;
  } else {
    echo["mu"] = a.gcn.mu;
    echo["filters"] = a.gcn.filters;
    echo["cheb-order"] = a.gcn.cheb_order;
    echo["fc"] = a.gcn.fc;
  }
  echo_config("train", echo);

  Service service(a.store);
  const std::string id = service.submit_training({{"ensemble_id", a.ensemble},
                                                  {"kind", a.kind},
                                                  {"seed", a.seed},
                                                  {"optimizer", opt},
                                                  {"config", config}})["id"];
  int reported = 0;
  for (;;) {
    const Json p = service.training_progress(id);
    const std::string status = p["status"];
    const int epoch = p["epoch"];
    if (epoch != reported && (epoch % std::max(1, opt.epochs / 20) == 0 || status != "running")) {
      std::cerr << "epoch " << epoch << "/" << opt.epochs << " loss " << p["loss"].get<double>()
                << std::endl;
      reported = epoch;
    }
    if (status == "failed") {
      std::cerr << "training failed: " << p.value("error", "") << std::endl;
      return kExitRuntime;
    }
    if (status == "done")
      break;
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  const Json info = service.model_info(id);
  std::cout << Json{{"model_id", id},
                    {"epochs", info["training_log"].size()},
                    {"first_loss", info["training_log"].front()},
                    {"final_loss", info["training_log"].back()}}
                   .dump()
            << std::endl;
  return 0;
}

struct EvaluateArgs {
  std::string store;
  std::vector<std::string> models;
  std::string test;
  std::string basis;
  bool absolute = false;
};

int cmd_evaluate(const EvaluateArgs &a) {
  echo_config("evaluate", {{"store", a.store},
                           {"models", a.models},
                           {"test", a.test},
                           {"basis", a.basis},
                           {"absolute", a.absolute}});
  Service service(a.store);
  Json request = {{"model_ids", a.models}, {"test_ensemble_id", a.test},
                  {"relative", !a.absolute}};
  if (!a.basis.empty())
    request["basis_id"] = a.basis;
  const Json out = service.compare(request);
  std::cout << out["table"].get<std::string>();
  std::cout << Json{{"report_id", out["report_id"]}, {"basis_id", out["basis_id"]}}.dump()
            << std::endl;
  return 0;
}

struct ServeArgs {
  std::string store;
  std::string host = "127.0.0.1";
  int port = 8080;
};

int cmd_serve(const ServeArgs &a) {
  echo_config("serve", {{"store", a.store}, {"host", a.host}, {"port", a.port}});
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(a.store);
  HttpServer server(service);
  const int port = server.bind(a.host, a.port);
  std::cout << "listening " << a.host << " " << port << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  waiter.join();
  return 0;
}

struct ExportArgs {
  std::string store;
  std::string report;
  std::string out;
};

std::string field_file_name(const std::string &key, const std::vector<std::string> &names) {
  const auto slash = key.rfind('/');
  const std::string model = key.substr(0, slash);
  const auto j = std::stoul(key.substr(slash + 1));
  return model + "_" + (j < names.size() ? names[j] : std::to_string(j)) + ".bin";
}

int cmd_export(const ExportArgs &a) {
  echo_config("export", {{"store", a.store}, {"report", a.report}, {"out", a.out}});
  ArtifactStore store(a.store);
  const auto report = load_artifact<ComparisonReport>(store, a.report);
  if (report.whisker_field_ids.empty())
    throw InvalidArgument("report " + a.report + " has no stored impact fields");

  const fs::path root(a.out);
  Json index = {{"report_id", a.report}, {"whisker", Json::array()}, {"outlier", Json::array()}};
  for (const auto &[kind, ids] : {std::pair{"whisker", &report.whisker_field_ids},
                                  std::pair{"outlier", &report.outlier_field_ids}}) {
    fs::create_directories(root / kind);
    for (const auto &[key, id] : *ids) {
      const auto field = load_artifact<ImpactField>(store, id);
      const std::string file = field_file_name(key, report.parameter_names);
      write_file(root / kind / file, f64_blob(field.field.values).bytes);
      index[kind].push_back({{"file", std::string(kind) + "/" + file},
                             {"field_id", id},
                             {"mesh_id", field.field.mesh_id},
                             {"vertex_count", field.field.size()},
                             {"dtype", "f64le"},
                             {"meta", field.meta}});
    }
  }
  write_file(root / "report.json", Json(report).dump(2));
  write_file(root / "index.json", index.dump(2));
  std::cout << Json{{"whisker_blobs", index["whisker"].size()},
                    {"outlier_blobs", index["outlier"].size()},
                    {"out", a.out}}
                   .dump()
            << std::endl;
  return 0;
}

std::string active_subcommand(int argc, char **argv, const CLI::App &app) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    for (const auto *sub : app.get_subcommands({}))
      if (sub->get_name() == arg)
        return arg;
  }
  return {};
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Reduced-order previews and regression error analysis on a plate mesh"};
  app.require_subcommand(1);
  app.fallthrough();

  GenerateArgs gen;
  auto *generate = app.add_subcommand("generate", "Create a mesh and an ensemble");
  generate->add_option("--out", gen.out, "Artifact store directory")->required();
  generate->add_option("--mesh", gen.mesh, "plate:NXxNY")->check(MeshFormat)->capture_default_str();
  generate->add_option("--design", gen.design, "factorial3 or lhs:N")
      ->check(DesignFormat)
      ->capture_default_str();
  generate->add_option("--seed", gen.seed, "Design seed")->capture_default_str();
  generate->add_option("--gamma", gen.gamma, "Quadratic coupling strength")
      ->check(CLI::NonNegativeNumber);
  generate->add_option("--sigma", gen.sigma, "Noise standard deviation (mm)")
      ->check(CLI::NonNegativeNumber);
  generate->add_option("--noise-seed", gen.noise_seed, "Noise seed");
  generate->add_option("--amplitudes", gen.amplitudes, "Per-parameter mode amplitudes")
      ->expected(6);

  BasisArgs bas;
  auto *basis = app.add_subcommand("basis", "Build a PCA basis from an ensemble");
  basis->add_option("--store", bas.store)->required();
  basis->add_option("--ensemble", bas.ensemble)->required();
  basis->add_option("--k", bas.k, "Requested component count")->check(CLI::PositiveNumber);

  TrainArgs tr;
  auto *train = app.add_subcommand("train", "Train a regressor on an ensemble");
  train->add_option("--store", tr.store)->required();
  train->add_option("--ensemble", tr.ensemble)->required();
  train->add_option("--kind", tr.kind)->check(CLI::IsMember({"olff", "gcn"}));
  train->add_option("--seed", tr.seed, "Weight initialisation seed");
  train->add_option("--optimizer", tr.optimizer)->check(CLI::IsMember({"sgd_nesterov", "adagrad"}));
  train->add_option("--lr", tr.lr)->check(CLI::PositiveNumber);
  train->add_option("--momentum", tr.momentum)->check(CLI::Range(0.0, 1.0));
  train->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  train->add_option("--batch-size", tr.batch_size)->check(CLI::PositiveNumber);
  train->add_option("--shuffle-seed", tr.shuffle_seed);
  train->add_option("--hidden", tr.hidden, "OLFF hidden units")->check(CLI::PositiveNumber);
  train->add_option("--mu", tr.gcn.mu, "GCN spectral modes")->check(CLI::PositiveNumber);
  train->add_option("--filters", tr.gcn.filters)->check(CLI::PositiveNumber);
  train->add_option("--cheb-order", tr.gcn.cheb_order)->check(CLI::PositiveNumber);
  train->add_option("--fc", tr.gcn.fc, "GCN dense width")->check(CLI::PositiveNumber);

  EvaluateArgs ev;
  auto *evaluate = app.add_subcommand("evaluate", "Compare models on a test ensemble");
  evaluate->add_option("--store", ev.store)->required();
  evaluate->add_option("--models", ev.models)->required();
  evaluate->add_option("--test", ev.test)->required();
  evaluate->add_option("--basis", ev.basis, "Defaults to the newest basis on the mesh");
  evaluate->add_flag("--absolute", ev.absolute, "Errors in mm instead of range fractions");

  ServeArgs sv;
  auto *serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--store", sv.store)->required();
  serve->add_option("--host", sv.host);
  serve->add_option("--port", sv.port, "0 picks a free port")->check(CLI::Range(0, 65535));

  ExportArgs ex;
  auto *exp = app.add_subcommand("export", "Write a report's impact fields as blobs");
  exp->add_option("--store", ex.store)->required();
  exp->add_option("--report", ex.report)->required();
  exp->add_option("--out", ex.out)->required();

  const std::string active = active_subcommand(argc, argv, app);
  app.set_config("--config", "", "JSON file of flag values; flags override it");
  app.config_formatter(std::make_shared<JsonConfig>(
      active.empty() ? nullptr : app.get_subcommand(active)));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*generate)
      return cmd_generate(gen);
    if (*basis)
      return cmd_basis(bas);
    if (*train)
      return cmd_train(tr);
    if (*evaluate)
      return cmd_evaluate(ev);
    if (*serve)
      return cmd_serve(sv);
    if (*exp)
      return cmd_export(ex);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitRuntime;
  }
  return kExitUsage;
}
