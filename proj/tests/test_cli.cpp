#include "doctest.h"

#include "previs/serialization.hpp"

#include <httplib.h>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

using namespace previs;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int n = 0;
    path = fs::temp_directory_path() /
           ("previs-cli-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct RunResult {
  int code = -1;
  std::vector<std::string> lines;

  Json last_json() const {
    REQUIRE_FALSE(lines.empty());
    return Json::parse(lines.back());
  }
  Json config() const {
    for (const auto &l : lines)
      if (l.rfind("config ", 0) == 0)
        return Json::parse(l.substr(7));
    return Json();
  }
};

RunResult run(const std::string &args) {
  const std::string cmd = std::string(PREVIS_CLI) + " " + args + " 2>/dev/null";
  FILE *pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  std::string line;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) {
    line += buf;
    if (!line.empty() && line.back() == '\n') {
      line.pop_back();
      r.lines.push_back(line);
      line.clear();
    }
  }
  if (!line.empty())
    r.lines.push_back(line);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

} // namespace

TEST_CASE("generate sizes and usage errors") {
  TempDir dir;
  const std::string out = dir.path.string();

  const auto factorial = run("generate --mesh plate:9x6 --design factorial3 --out " + out);
  CHECK(factorial.code == 0);
  CHECK(factorial.last_json()["samples"] == 729);
  CHECK(factorial.config()["seed"] == 0);

  const auto lhs =
      run("generate --mesh plate:9x6 --design lhs:1400 --seed 7 --out " + out);
  CHECK(lhs.code == 0);
  CHECK(lhs.last_json()["samples"] == 1400);
  CHECK(lhs.config()["seed"] == 7);
  CHECK(lhs.last_json()["mesh_id"] == factorial.last_json()["mesh_id"]);
  const auto ens = load_artifact<Ensemble>(ArtifactStore(dir.path),
                                           lhs.last_json()["ensemble_id"]);
  CHECK(ens.design.kind == DesignKind::Lhs);
  CHECK(ens.design.seed == 7);

  CHECK(run("generate --design factorial3").code == 2);
  CHECK(run("generate --design lhs:abc --out " + out).code == 2);
  CHECK(run("generate --mesh sphere:3 --out " + out).code == 2);
  CHECK(run("generate --gamma -1 --out " + out).code == 2);
  CHECK(run("").code == 2);
  CHECK(run("--help").code == 0);
}

TEST_CASE("config files feed flags and the echoed line reproduces a run") {
  TempDir dir;
  fs::create_directories(dir.path);
  const std::string out = (dir.path / "store").string();
  const fs::path cfg = dir.path / "gen.json";
  std::ofstream(cfg) << R"({"mesh": "plate:9x6", "design": "lhs:12", "seed": 3})";

  const auto a = run("generate --config " + cfg.string() + " --seed 4 --out " + out);
  REQUIRE(a.code == 0);
  CHECK(a.config()["design"] == "lhs:12");
  CHECK(a.config()["seed"] == 4);

  const fs::path echoed = dir.path / "echo.json";
  std::ofstream(echoed) << a.config().dump();
  const auto b = run("generate --config " + echoed.string());
  REQUIRE(b.code == 0);
  CHECK(b.config() == a.config());
  ArtifactStore store(out);
  CHECK(load_artifact<Ensemble>(store, a.last_json()["ensemble_id"]).design.rows ==
        load_artifact<Ensemble>(store, b.last_json()["ensemble_id"]).design.rows);

  const fs::path bad = dir.path / "bad.json";
  std::ofstream(bad) << R"({"epochs": 3})";
  CHECK(run("generate --config " + bad.string() + " --out " + out).code == 2);
}

TEST_CASE("train, evaluate and export round trip") {
  TempDir dir;
  const std::string out = dir.path.string();
  const std::string train_set =
      run("generate --mesh plate:9x6 --out " + out).last_json()["ensemble_id"];
  const std::string test_set =
      run("generate --mesh plate:9x6 --design lhs:40 --seed 2 --out " + out)
          .last_json()["ensemble_id"];
  CHECK(run("basis --store " + out + " --ensemble " + train_set).code == 0);

  const auto olff = run("train --store " + out + " --ensemble " + train_set +
                        " --hidden 8 --epochs 6 --seed 3");
  REQUIRE(olff.code == 0);
  CHECK(olff.last_json()["epochs"] == 6);
  CHECK(olff.config()["seed"] == 3);
  CHECK(olff.config()["shuffle-seed"] == 0);
  const auto gcn = run("train --store " + out + " --ensemble " + train_set +
                       " --kind gcn --mu 12 --filters 3 --cheb-order 4 --fc 10 --epochs 3");
  REQUIRE(gcn.code == 0);
  CHECK(gcn.config()["optimizer"] == "adagrad");
  const std::string m1 = olff.last_json()["model_id"];
  const std::string m2 = gcn.last_json()["model_id"];

  CHECK(run("train --store " + out + " --ensemble " + train_set + " --kind rnn").code == 2);
  CHECK(run("train --store " + out + " --ensemble missing --epochs 1").code == 3);
  CHECK(run("train --store " + out + " --ensemble " + train_set +
            " --hidden 4 --epochs 3 --lr 1e12")
            .code == 3);

  const auto eval =
      run("evaluate --store " + out + " --models " + m1 + " " + m2 + " --test " + test_set);
  REQUIRE(eval.code == 0);
  std::string table;
  for (const auto &l : eval.lines)
    table += l + "\n";
  CHECK(table.find(m1) != std::string::npos);
  CHECK(table.find(m2) != std::string::npos);
  const std::string report_id = eval.last_json()["report_id"];
  const auto report = load_artifact<ComparisonReport>(ArtifactStore(dir.path), report_id);
  REQUIRE(report.models.size() == 2);
  CHECK(report.models[0].model_id == m1);
  CHECK(report.models[1].model_id == m2);

  const fs::path exported = dir.path / "export";
  const auto ex = run("export --store " + out + " --report " + report_id + " --out " +
                      exported.string());
  REQUIRE(ex.code == 0);
  CHECK(ex.last_json()["whisker_blobs"] == 12);
  std::size_t blobs = 0;
  for (const auto &entry : fs::directory_iterator(exported / "whisker")) {
    CHECK(entry.path().extension() == ".bin");
    CHECK(fs::file_size(entry.path()) == 8u * 54u);
    ++blobs;
  }
  CHECK(blobs == 12);
  const Json index = Json::parse(read_file(exported / "index.json"));
  CHECK(index["whisker"].size() == 12);
  CHECK(index["outlier"].size() == 12);
  CHECK(Json::parse(read_file(exported / "report.json"))["models"].size() == 2);

  CHECK(run("export --store " + out + " --report nope --out " + exported.string()).code == 3);
  CHECK(run("evaluate --store " + out + " --test " + test_set).code == 2);
}

TEST_CASE("serve binds an ephemeral port and stops on SIGTERM") {
  TempDir dir;
  int fds[2];
  REQUIRE(::pipe(fds) == 0);
  const pid_t pid = ::fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    ::dup2(fds[1], STDOUT_FILENO);
    ::close(fds[0]);
    ::close(fds[1]);
    const std::string store = dir.path.string();
    ::execl(PREVIS_CLI, PREVIS_CLI, "serve", "--store", store.c_str(), "--port", "0",
            static_cast<char *>(nullptr));
    ::_exit(127);
  }
  ::close(fds[1]);

  std::string text;
  char c = 0;
  int port = 0;
  while (port == 0 && ::read(fds[0], &c, 1) == 1) {
    text += c;
    const auto pos = text.find("listening ");
    if (c == '\n' && pos != std::string::npos) {
      std::istringstream in(text.substr(pos + 10));
      std::string host;
      in >> host >> port;
    }
  }
  ::close(fds[0]);
  CHECK(port > 0);

  if (port > 0) {
    httplib::Client client("127.0.0.1", port);
    const auto r = client.Get("/artifacts");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(Json::parse(r->body)["artifacts"].empty());
  }

  ::kill(pid, SIGTERM);
  int status = 0;
  ::waitpid(pid, &status, 0);
  CHECK(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
}
