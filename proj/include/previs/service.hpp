#ifndef PREVIS_SERVICE_HPP
#define PREVIS_SERVICE_HPP

#include "previs/serialization.hpp"

#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

namespace httplib {
class Server;
}

namespace previs {

struct SessionState {
  std::string mesh_id;
  std::string basis_id;
  std::string model_id;
  std::vector<double> last_params;
  double last_elapsed_ms = 0.0;
};

struct TrainingJob {
  std::string model_id;
  std::string status = "queued"; // queued | running | done | failed
  int epoch = 0;
  int epochs = 0;
  double loss = 0.0;
  std::string error;
  std::optional<int> diverged_epoch;
};

/// The pipeline behind the HTTP API. Every operation takes and returns
/// JSON so the same calls serve the HTTP layer, the CLI and tests.
/// Training runs on one background worker, one job at a time.
class Service {
public:
  explicit Service(std::filesystem::path store_root);
  ~Service();
  Service(const Service &) = delete;
  Service &operator=(const Service &) = delete;

  Json create_mesh(const Json &request);
  Json create_ensemble(const Json &request);
  Json create_basis(const Json &request);
  /// Validates, queues, and returns the id the model will be stored under.
  Json submit_training(const Json &request);
  Json model_info(const std::string &id) const;
  Json training_progress(const std::string &id) const;
  Json interpolate(const Json &request);
  Json compare(const Json &request);
  Json field(const std::string &id) const;
  /// Little-endian float64 values of a stored field.
  std::string field_binary(const std::string &id) const;
  Json artifacts(const std::string &kind = {}) const;

  /// Blocks until every queued training job has finished.
  void wait_for_training();
  SessionState session() const;
  ArtifactStore &store() { return store_; }

private:
  template <typename T>
  std::shared_ptr<const T> cached(const std::string &id) const;
  std::shared_ptr<const SpectralOperator> spectral_for(const std::string &mesh_id,
                                                       Index mu) const;
  void worker_loop();
  void run_job(const std::string &model_id, const Json &request);
  std::string pick_basis(const std::string &mesh_id) const;

  ArtifactStore store_;

  mutable std::mutex cache_mutex_;
  mutable std::map<std::string, std::shared_ptr<const void>> cache_;

  mutable std::mutex session_mutex_;
  SessionState session_;

  mutable std::mutex jobs_mutex_;
  std::condition_variable jobs_cv_;
  std::condition_variable idle_cv_;
  std::map<std::string, TrainingJob> jobs_;
  std::deque<std::pair<std::string, Json>> queue_;
  bool busy_ = false;
  bool stopping_ = false;
  std::thread worker_;
};

/// HTTP front end over a Service.
class HttpServer {
public:
  explicit HttpServer(Service &service);
  ~HttpServer();

  /// Binds host:port (port 0 picks an ephemeral one) and returns the port.
  int bind(const std::string &host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  /// bind() then serve on a background thread.
  int start(const std::string &host, int port);
  void stop();
  int port() const { return port_; }

private:
  Service &service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

} // namespace previs

#endif
