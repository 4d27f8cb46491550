#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cycinpaint/core/errors.hpp"
#include "cycinpaint/engine/engine.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace cycinpaint::service {

namespace fs = std::filesystem;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 8080;
  fs::path runs_dir = "runs";
  fs::path bundles_dir = "bundles";
  int workers = 1;
  /// Bundle to load at startup, by name; empty leaves the registry unloaded.
  std::string initial_bundle;
};

/// Fills unset fields from CYCINPAINT_HOST, CYCINPAINT_PORT, CYCINPAINT_RUNS,
/// CYCINPAINT_BUNDLES and CYCINPAINT_WORKERS.
ServiceConfig config_from_env(ServiceConfig base = {});

enum class JobState { queued, running, done, failed };
std::string_view job_state_name(JobState s);

/// A client-side problem with a submission; maps to HTTP 400.
struct RequestError : Error {
  RequestError(std::string field, const std::string& msg) : Error(msg), field(std::move(field)) {}
  std::string field;
};

struct BundleInfo {
  std::string name;
  fs::path path;
  int resolution = 0;
  bool loaded = false;
};

/// Checkpoints under one directory, addressed by file stem; at most one active.
class BundleRegistry {
 public:
  explicit BundleRegistry(fs::path dir) : dir_(std::move(dir)) {}

  std::vector<BundleInfo> list() const;
  /// Throws NotFound for unknown names and CheckpointError for corrupt files;
  /// the previous bundle stays active on failure.
  BundleInfo load(const std::string& name);
  /// Snapshot of the active bundle (null when none is loaded).
  std::shared_ptr<const models::ModelBundle> active(std::string* name = nullptr) const;

  struct NotFound : Error {
    using Error::Error;
  };

 private:
  fs::path dir_;
  mutable std::mutex mu_;
  std::shared_ptr<const models::ModelBundle> active_;
  std::string active_name_;
};

/// Multipart form contents after upload, before decoding.
struct Submission {
  std::string image;
  std::string mask;
  std::optional<std::string> sketch;
  /// Merged params: the JSON "params" part plus any individual form fields.
  nlohmann::json params = nlohmann::json::object();
};

/// Decodes and validates a submission into an engine request (RequestError on failure).
engine::InpaintRequest parse_submission(const Submission& s);

struct JobSnapshot {
  std::string id;
  JobState state = JobState::queued;
  int progress = 0;
  int cycles = 0;
  bool use_discriminator = true;
  bool refine = true;
  std::string bundle;
  std::string error;
  std::vector<std::optional<double>> scores;
  std::optional<int> selected_cycle;
  bool refined = false;
  std::optional<std::string> replay_of;
};

nlohmann::ordered_json job_json(const JobSnapshot& j);

/// Job queue, workers and run-directory persistence. Each job writes the
/// engine's run layout under runs_dir/<id>/ plus job.json with its state.
class JobService {
 public:
  explicit JobService(ServiceConfig cfg);
  ~JobService();
  JobService(const JobService&) = delete;
  JobService& operator=(const JobService&) = delete;

  BundleRegistry& registry() { return registry_; }

  /// Queues a job; ConfigError-derived RequestError for bad requests,
  /// NoBundle when nothing is loaded.
  std::string submit(engine::InpaintRequest req, std::optional<std::string> replay_of = std::nullopt);
  /// Re-runs the persisted request of a finished job under the active bundle.
  std::string replay(const std::string& id);

  std::optional<JobSnapshot> snapshot(const std::string& id) const;
  std::vector<JobSnapshot> jobs() const;

  enum class ArtifactStatus { ok, missing, pending };
  /// PNG bytes for "input", "mask", "coarse", "refined", "sketch" or "cycles/<i>".
  ArtifactStatus artifact(const std::string& id, const std::string& name, std::string& bytes) const;

  fs::path run_dir(const std::string& id) const { return cfg_.runs_dir / id; }
  /// Blocks until the job leaves queued/running or the timeout passes.
  bool wait(const std::string& id, std::chrono::milliseconds timeout) const;

  struct NoBundle : Error {
    using Error::Error;
  };

 private:
  struct Job {
    JobSnapshot info;
    engine::InpaintRequest request;
    std::map<int, std::string> cycle_png;
  };

  void reindex();
  void worker_loop();
  void run_job(const std::string& id);
  void persist_state(const Job& job) const;
  std::string next_id();

  ServiceConfig cfg_;
  BundleRegistry registry_;
  mutable std::mutex mu_;
  mutable std::condition_variable changed_;
  std::condition_variable work_;
  std::map<std::string, std::unique_ptr<Job>> jobs_;
  std::deque<std::string> queue_;
  std::uint64_t counter_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

/// HTTP front end over a JobService.
class HttpService {
 public:
  explicit HttpService(ServiceConfig cfg);
  ~HttpService();

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();

  JobService& jobs() { return *jobs_; }
  int port() const { return port_; }

 private:
  void routes();

  ServiceConfig cfg_;
  std::unique_ptr<JobService> jobs_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace cycinpaint::service
