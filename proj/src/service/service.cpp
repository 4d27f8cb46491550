#include "cycinpaint/service/service.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cycinpaint/imaging/io.hpp"
#include "httplib.h"

namespace cycinpaint::service {
namespace {

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  fs::rename(tmp, p);
}

JobState parse_state(const std::string& s) {
  if (s == "queued") return JobState::queued;
  if (s == "running") return JobState::running;
  if (s == "done") return JobState::done;
  if (s == "failed") return JobState::failed;
  throw FormatError("unknown job state '" + s + "'");
}

template <typename T>
T param(const nlohmann::json& p, const char* key, T fallback) {
  if (!p.contains(key)) return fallback;
  const auto& v = p[key];
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "true" || s == "1" || s == "on") return true;
        if (s == "false" || s == "0" || s == "off") return false;
        throw RequestError(key, std::string(key) + ": expected true or false");
      }
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (v.is_string()) {
        const auto s = v.get<std::string>();
        std::size_t used = 0;
        const long long n = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        if constexpr (std::is_unsigned_v<T>) {
          if (n < 0) throw std::invalid_argument(s);
        }
        return static_cast<T>(n);
      }
      return v.get<T>();
    } else {
      if (v.is_string()) {
        const auto s = v.get<std::string>();
        std::size_t used = 0;
        const double d = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return static_cast<T>(d);
      }
      return v.get<T>();
    }
  } catch (const RequestError&) {
    throw;
  } catch (const std::exception&) {
    throw RequestError(key, std::string(key) + ": invalid value " + v.dump());
  }
}

std::array<float, 3> parse_color(const nlohmann::json& v) {
  nlohmann::json arr = v;
  if (v.is_string()) {
    try {
      arr = nlohmann::json::parse(v.get<std::string>());
    } catch (const nlohmann::json::exception&) {
      throw RequestError("constant_color", "constant_color: expected [r, g, b] in [-1, 1]");
    }
  }
  if (!arr.is_array() || arr.size() != 3) {
    throw RequestError("constant_color", "constant_color: expected [r, g, b] in [-1, 1]");
  }
  std::array<float, 3> c{};
  for (int i = 0; i < 3; ++i) {
    if (!arr[i].is_number()) throw RequestError("constant_color", "constant_color: components must be numbers");
    c[i] = arr[i].get<float>();
    if (!(c[i] >= -1.0f && c[i] <= 1.0f)) {
      throw RequestError("constant_color", "constant_color: components must lie in [-1, 1]");
    }
  }
  return c;
}

nlohmann::ordered_json error_body(const std::string& msg, const std::string& field = {}) {
  nlohmann::ordered_json j;
  j["error"] = msg;
  if (!field.empty()) j["field"] = field;
  return j;
}

}  // namespace

ServiceConfig config_from_env(ServiceConfig base) {
  if (const char* v = std::getenv("CYCINPAINT_HOST")) base.host = v;
  if (const char* v = std::getenv("CYCINPAINT_PORT")) base.port = std::atoi(v);
  if (const char* v = std::getenv("CYCINPAINT_RUNS")) base.runs_dir = v;
  if (const char* v = std::getenv("CYCINPAINT_BUNDLES")) base.bundles_dir = v;
  if (const char* v = std::getenv("CYCINPAINT_WORKERS")) base.workers = std::max(1, std::atoi(v));
  return base;
}

std::string_view job_state_name(JobState s) {
  switch (s) {
    case JobState::queued:
      return "queued";
    case JobState::running:
      return "running";
    case JobState::done:
      return "done";
    case JobState::failed:
      return "failed";
  }
  return "queued";
}

// ---- bundle registry -------------------------------------------------------

std::vector<BundleInfo> BundleRegistry::list() const {
  std::vector<BundleInfo> out;
  std::error_code ec;
  if (!fs::is_directory(dir_, ec)) return out;
  std::string active;
  {
    std::lock_guard lock(mu_);
    active = active_ ? active_name_ : "";
  }
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".cyc") continue;
    BundleInfo info;
    info.name = entry.path().stem().string();
    info.path = entry.path();
    try {
      info.resolution = models::read_bundle_header(entry.path()).at("arch").at("resolution").get<int>();
    } catch (const std::exception&) {
      info.resolution = 0;
    }
    info.loaded = info.name == active;
    out.push_back(std::move(info));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

BundleInfo BundleRegistry::load(const std::string& name) {
  const fs::path path = dir_ / (name + ".cyc");
  if (name.empty() || name.find('/') != std::string::npos || !fs::is_regular_file(path)) {
    throw NotFound("unknown bundle '" + name + "'");
  }
  auto bundle = std::make_shared<models::ModelBundle>(models::load_bundle(path));
  if (!bundle->generator || !bundle->encoder) {
    throw CheckpointError("bundle '" + name + "' lacks a generator or encoder");
  }
  bundle->set_inference();
  BundleInfo info{name, path, bundle->arch.resolution, true};
  std::lock_guard lock(mu_);
  active_ = std::move(bundle);
  active_name_ = name;
  return info;
}

std::shared_ptr<const models::ModelBundle> BundleRegistry::active(std::string* name) const {
  std::lock_guard lock(mu_);
  if (name) *name = active_name_;
  return active_;
}

// ---- submissions -------------------------------------------------------------

engine::InpaintRequest parse_submission(const Submission& s) {
  if (s.image.empty()) throw RequestError("image", "image: file is required");
  if (s.mask.empty()) throw RequestError("mask", "mask: file is required");
  engine::InpaintRequest req;
  imaging::Bitmap bmp;
  try {
    bmp = imaging::decode_bitmap(as_bytes(s.image));
    req.image = imaging::image_from_bitmap(bmp);
  } catch (const Error& e) {
    throw RequestError("image", std::string("image: ") + e.what());
  }
  if (req.image.height() != req.image.width()) {
    throw RequestError("image", "image: must be square, got " + std::to_string(req.image.width()) + "x" +
                                    std::to_string(req.image.height()));
  }
  try {
    req.mask = imaging::decode_mask(imaging::decode_bitmap(as_bytes(s.mask)), bmp.width, bmp.height);
  } catch (const Error& e) {
    throw RequestError("mask", std::string("mask: ") + e.what());
  }

  const auto& p = s.params;
  req.cycles = param<int>(p, "cycles", 10);
  if (req.cycles < 1 || req.cycles > 1000) throw RequestError("cycles", "cycles: must lie in [1, 1000]");
  req.use_discriminator = param<bool>(p, "use_discriminator", true);
  req.refine = param<bool>(p, "refine", true);
  req.seed = param<std::uint64_t>(p, "seed", 0);
  req.early_stop = param<bool>(p, "early_stop", false);

  const std::string fill = p.contains("fill") && p["fill"].is_string() ? p["fill"].get<std::string>() : "mean";
  if (fill == "white") {
    req.fill = imaging::FillPolicy::white();
  } else if (fill == "black") {
    req.fill = imaging::FillPolicy::black();
  } else {
    imaging::FillPolicy policy;
    try {
      policy.kind = imaging::parse_fill_kind(fill);
    } catch (const Error& e) {
      throw RequestError("fill", std::string("fill: ") + e.what());
    }
    if (p.contains("constant_color")) policy.constant_color = parse_color(p["constant_color"]);
    if (p.contains("noise_sigma")) policy.noise_sigma = param<double>(p, "noise_sigma", 0.0);
    if (policy.kind == imaging::FillKind::zero_mean_noise && !policy.noise_sigma) {
      policy.noise_sigma = imaging::kDefaultNoiseSigma;
    }
    policy.rng_seed = param<std::uint64_t>(p, "fill_seed", 0);
    if (s.sketch) {
      try {
        policy.sketch = imaging::sketch_from_bitmap(imaging::decode_bitmap(as_bytes(*s.sketch)));
      } catch (const Error& e) {
        throw RequestError("sketch", std::string("sketch: ") + e.what());
      }
      if (policy.sketch->height() != bmp.height || policy.sketch->width() != bmp.width) {
        throw RequestError("sketch", "sketch: size must match the image");
      }
    }
    req.fill = std::move(policy);
  }
  try {
    req.fill.validate();
  } catch (const ConfigError& e) {
    const std::string field = req.fill.kind == imaging::FillKind::constant ? "constant_color"
                              : req.fill.kind == imaging::FillKind::sketch ? "sketch"
                                                                           : "fill";
    throw RequestError(field, e.what());
  }
  try {
    engine::validate_request(req);
  } catch (const Error& e) {
    throw RequestError("params", e.what());
  }
  return req;
}

nlohmann::ordered_json job_json(const JobSnapshot& j) {
  nlohmann::ordered_json out;
  out["id"] = j.id;
  out["state"] = job_state_name(j.state);
  out["progress"] = j.progress;
  out["cycles"] = j.cycles;
  out["use_discriminator"] = j.use_discriminator;
  out["refine"] = j.refine;
  out["bundle"] = j.bundle;
  if (j.replay_of) out["replay_of"] = *j.replay_of;
  if (!j.error.empty()) out["error"] = j.error;
  if (j.use_discriminator) {
    nlohmann::ordered_json scores = nlohmann::ordered_json::array();
    for (const auto& s : j.scores) scores.push_back(s ? nlohmann::ordered_json(*s) : nlohmann::ordered_json());
    out["scores"] = scores;
  }
  out["selected_cycle"] = j.selected_cycle ? nlohmann::ordered_json(*j.selected_cycle) : nlohmann::ordered_json();
  const std::string base = "/api/jobs/" + j.id;
  nlohmann::ordered_json urls;
  nlohmann::ordered_json cycles = nlohmann::ordered_json::array();
  for (int i = 0; i < j.progress; ++i) cycles.push_back(base + "/cycles/" + std::to_string(i) + ".png");
  urls["cycles"] = cycles;
  if (j.state == JobState::done) {
    urls["input"] = base + "/input.png";
    urls["mask"] = base + "/mask.png";
    urls["coarse"] = base + "/coarse.png";
    if (j.refined) urls["refined"] = base + "/refined.png";
  }
  out["urls"] = urls;
  return out;
}

// ---- job service -------------------------------------------------------------

JobService::JobService(ServiceConfig cfg) : cfg_(std::move(cfg)), registry_(cfg_.bundles_dir) {
  fs::create_directories(cfg_.runs_dir);
  reindex();
  if (!cfg_.initial_bundle.empty()) registry_.load(cfg_.initial_bundle);
  for (int i = 0; i < std::max(1, cfg_.workers); ++i) workers_.emplace_back([this] { worker_loop(); });
}

JobService::~JobService() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  work_.notify_all();
  for (auto& t : workers_) t.join();
}

std::string JobService::next_id() {
  char buf[32];
  std::snprintf(buf, sizeof buf, "job-%06llu", static_cast<unsigned long long>(++counter_));
  return buf;
}

void JobService::persist_state(const Job& job) const {
  nlohmann::ordered_json j;
  j["id"] = job.info.id;
  j["state"] = job_state_name(job.info.state);
  j["bundle"] = job.info.bundle;
  j["cycles"] = job.info.cycles;
  j["use_discriminator"] = job.info.use_discriminator;
  j["refine"] = job.info.refine;
  if (job.info.replay_of) j["replay_of"] = *job.info.replay_of;
  if (!job.info.error.empty()) j["error"] = job.info.error;
  const fs::path dir = run_dir(job.info.id);
  fs::create_directories(dir);
  write_text(dir / "job.json", j.dump(2) + "\n");
}

void JobService::reindex() {
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(cfg_.runs_dir, ec)) {
    const fs::path job_file = entry.path() / "job.json";
    if (!entry.is_directory() || !fs::is_regular_file(job_file)) continue;
    try {
      const auto j = nlohmann::json::parse(read_text(job_file));
      auto job = std::make_unique<Job>();
      auto& info = job->info;
      info.id = j.at("id").get<std::string>();
      info.state = parse_state(j.at("state").get<std::string>());
      info.bundle = j.value("bundle", "");
      info.cycles = j.value("cycles", 0);
      info.use_discriminator = j.value("use_discriminator", true);
      info.refine = j.value("refine", true);
      info.error = j.value("error", "");
      if (j.contains("replay_of")) info.replay_of = j["replay_of"].get<std::string>();
      if (info.state == JobState::done) {
        const auto m = nlohmann::json::parse(read_text(entry.path() / "manifest.json"));
        info.progress = m.at("cycles_run").get<int>();
        for (const auto& s : m.at("scores")) {
          info.scores.push_back(s.is_null() ? std::nullopt : std::optional<double>(s.get<double>()));
        }
        if (!m.at("selected_cycle").is_null()) info.selected_cycle = m["selected_cycle"].get<int>();
        info.refined = m.at("refined").get<bool>();
      } else if (info.state != JobState::failed) {
        info.state = JobState::failed;
        info.error = "interrupted by a service restart";
        persist_state(*job);
      }
      unsigned long long n = 0;
      if (std::sscanf(info.id.c_str(), "job-%llu", &n) == 1) counter_ = std::max<std::uint64_t>(counter_, n);
      jobs_[info.id] = std::move(job);
    } catch (const std::exception&) {
      continue;
    }
  }
}

std::string JobService::submit(engine::InpaintRequest req, std::optional<std::string> replay_of) {
  try {
    engine::validate_request(req);
  } catch (const Error& e) {
    throw RequestError("params", e.what());
  }
  std::string bundle_name;
  const auto bundle = registry_.active(&bundle_name);
  if (!bundle) throw NoBundle("no bundle is loaded");
  if (req.use_discriminator && !bundle->discriminator) {
    throw RequestError("use_discriminator", "the active bundle has no artifact discriminator");
  }
  if (req.refine && !bundle->refiner) throw RequestError("refine", "the active bundle has no refiner");

  auto job = std::make_unique<Job>();
  std::string id;
  {
    std::lock_guard lock(mu_);
    id = next_id();
    job->info.id = id;
    job->info.cycles = req.cycles;
    job->info.use_discriminator = req.use_discriminator;
    job->info.refine = req.refine;
    job->info.bundle = bundle_name;
    job->info.replay_of = std::move(replay_of);
    job->request = std::move(req);
    persist_state(*job);
    jobs_[id] = std::move(job);
    queue_.push_back(id);
  }
  work_.notify_one();
  return id;
}

std::string JobService::replay(const std::string& id) {
  {
    std::lock_guard lock(mu_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) throw RequestError("id", "unknown job " + id);
    if (it->second->info.state != JobState::done) throw RequestError("id", "job " + id + " has not finished");
  }
  return submit(engine::load_run_request(run_dir(id)), id);
}

std::optional<JobSnapshot> JobService::snapshot(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second->info;
}

std::vector<JobSnapshot> JobService::jobs() const {
  std::lock_guard lock(mu_);
  std::vector<JobSnapshot> out;
  for (const auto& [id, job] : jobs_) out.push_back(job->info);
  return out;
}

bool JobService::wait(const std::string& id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  return changed_.wait_for(lock, timeout, [&] {
    const auto it = jobs_.find(id);
    return it == jobs_.end() || it->second->info.state == JobState::done ||
           it->second->info.state == JobState::failed;
  });
}

JobService::ArtifactStatus JobService::artifact(const std::string& id, const std::string& name,
                                                std::string& bytes) const {
  std::string file;
  int cycle = -1;
  if (name.rfind("cycles/", 0) == 0) {
    try {
      std::size_t used = 0;
      cycle = std::stoi(name.substr(7), &used);
      if (used != name.size() - 7 || cycle < 0) return ArtifactStatus::missing;
    } catch (const std::exception&) {
      return ArtifactStatus::missing;
    }
    file = "cycle_" + std::to_string(cycle) + ".png";
  } else if (name == "input" || name == "mask" || name == "coarse" || name == "refined" || name == "sketch") {
    file = name + ".png";
  } else {
    return ArtifactStatus::missing;
  }
  {
    std::lock_guard lock(mu_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) return ArtifactStatus::missing;
    const Job& job = *it->second;
    if (job.info.state == JobState::queued || job.info.state == JobState::running) {
      if (cycle < 0) return ArtifactStatus::pending;
      if (cycle >= job.info.cycles) return ArtifactStatus::missing;
      const auto c = job.cycle_png.find(cycle);
      if (c == job.cycle_png.end()) return ArtifactStatus::pending;
      bytes = c->second;
      return ArtifactStatus::ok;
    }
  }
  const fs::path path = run_dir(id) / file;
  if (!fs::is_regular_file(path)) return ArtifactStatus::missing;
  bytes = read_text(path);
  return ArtifactStatus::ok;
}

void JobService::worker_loop() {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(mu_);
      work_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
    }
    run_job(id);
  }
}

void JobService::run_job(const std::string& id) {
  Job* job = nullptr;
  engine::InpaintRequest req;
  {
    std::lock_guard lock(mu_);
    job = jobs_.at(id).get();
    job->info.state = JobState::running;
    req = job->request;
    persist_state(*job);
  }
  changed_.notify_all();

  std::string bundle_name;
  const auto bundle = registry_.active(&bundle_name);
  try {
    if (!bundle) throw Error("no bundle is loaded");
    {
      std::lock_guard lock(mu_);
      job->info.bundle = bundle_name;
    }
    const engine::BundleModels view(*bundle);
    const auto result = engine::inpaint(view, req, [&](int i, const engine::CycleRecord& rec) {
      std::string png;
      {
        const auto bytes = imaging::encode_image_png(rec.composite);
        png.assign(bytes.begin(), bytes.end());
      }
      std::lock_guard lock(mu_);
      job->cycle_png[i] = std::move(png);
      job->info.scores.push_back(rec.score);
      job->info.progress = std::max(job->info.progress, i + 1);
      changed_.notify_all();
    });
    engine::write_run_dir(req, result, run_dir(id));
    std::lock_guard lock(mu_);
    job->info.state = JobState::done;
    job->info.progress = static_cast<int>(result.trace.size());
    job->info.selected_cycle = result.selected_cycle;
    job->info.refined = result.refined.has_value();
    job->cycle_png.clear();
    job->request = {};
    persist_state(*job);
  } catch (const std::exception& e) {
    std::lock_guard lock(mu_);
    job->info.state = JobState::failed;
    job->info.error = e.what();
    job->cycle_png.clear();
    try {
      persist_state(*job);
    } catch (const std::exception&) {
    }
  }
  changed_.notify_all();
}

// ---- HTTP --------------------------------------------------------------------

HttpService::HttpService(ServiceConfig cfg)
    : cfg_(std::move(cfg)), jobs_(std::make_unique<JobService>(cfg_)), server_(std::make_unique<httplib::Server>()) {
  routes();
}

HttpService::~HttpService() { stop(); }

void HttpService::routes() {
  auto send_json = [](httplib::Response& res, int status, const nlohmann::ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
  };

  server_->Post("/api/jobs", [this, send_json](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data()) {
      send_json(res, 400, error_body("expected a multipart/form-data upload"));
      return;
    }
    Submission sub;
    if (req.has_file("image")) sub.image = req.get_file_value("image").content;
    if (req.has_file("mask")) sub.mask = req.get_file_value("mask").content;
    if (req.has_file("sketch") && !req.get_file_value("sketch").content.empty()) {
      sub.sketch = req.get_file_value("sketch").content;
    }
    if (req.has_file("params")) {
      try {
        sub.params = nlohmann::json::parse(req.get_file_value("params").content);
      } catch (const nlohmann::json::exception& e) {
        send_json(res, 400, error_body(std::string("params: ") + e.what(), "params"));
        return;
      }
      if (!sub.params.is_object()) {
        send_json(res, 400, error_body("params: expected a JSON object", "params"));
        return;
      }
    }
    for (const char* key : {"fill", "cycles", "use_discriminator", "refine", "seed", "constant_color", "noise_sigma",
                            "fill_seed", "early_stop"}) {
      if (req.has_file(key)) sub.params[key] = req.get_file_value(key).content;
    }
    try {
      const std::string id = jobs_->submit(parse_submission(sub));
      nlohmann::ordered_json body;
      body["job_id"] = id;
      send_json(res, 202, body);
    } catch (const RequestError& e) {
      send_json(res, 400, error_body(e.what(), e.field));
    } catch (const JobService::NoBundle& e) {
      send_json(res, 409, error_body(e.what()));
    }
  });

  server_->Get("/api/jobs", [this, send_json](const httplib::Request&, httplib::Response& res) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& j : jobs_->jobs()) list.push_back(job_json(j));
    send_json(res, 200, list);
  });

  server_->Get(R"(/api/jobs/([A-Za-z0-9_-]+))", [this, send_json](const httplib::Request& req, httplib::Response& res) {
    const auto snap = jobs_->snapshot(req.matches[1]);
    if (!snap) {
      send_json(res, 404, error_body("unknown job " + std::string(req.matches[1])));
      return;
    }
    send_json(res, 200, job_json(*snap));
  });

  server_->Post(R"(/api/jobs/([A-Za-z0-9_-]+)/replay)",
                [this, send_json](const httplib::Request& req, httplib::Response& res) {
                  const std::string id = req.matches[1];
                  const auto snap = jobs_->snapshot(id);
                  if (!snap) {
                    send_json(res, 404, error_body("unknown job " + id));
                    return;
                  }
                  try {
                    nlohmann::ordered_json body;
                    body["job_id"] = jobs_->replay(id);
                    body["replay_of"] = id;
                    send_json(res, 202, body);
                  } catch (const RequestError& e) {
                    send_json(res, 409, error_body(e.what(), e.field));
                  } catch (const JobService::NoBundle& e) {
                    send_json(res, 409, error_body(e.what()));
                  } catch (const Error& e) {
                    send_json(res, 422, error_body(e.what()));
                  }
                });

  auto artifact = [this, send_json](const httplib::Request& req, httplib::Response& res, const std::string& name) {
    const std::string id = req.matches[1];
    std::string bytes;
    switch (jobs_->artifact(id, name, bytes)) {
      case JobService::ArtifactStatus::ok:
        res.status = 200;
        res.set_content(std::move(bytes), "image/png");
        return;
      case JobService::ArtifactStatus::pending:
        send_json(res, 409, error_body(name + " is not available yet"));
        return;
      case JobService::ArtifactStatus::missing:
        send_json(res, 404, error_body("no artifact " + name + " for job " + id));
        return;
    }
  };
  server_->Get(R"(/api/jobs/([A-Za-z0-9_-]+)/cycles/(\d+)\.png)",
               [artifact](const httplib::Request& req, httplib::Response& res) {
                 artifact(req, res, "cycles/" + std::string(req.matches[2]));
               });
  server_->Get(R"(/api/jobs/([A-Za-z0-9_-]+)/(input|mask|coarse|refined|sketch)\.png)",
               [artifact](const httplib::Request& req, httplib::Response& res) {
                 artifact(req, res, std::string(req.matches[2]));
               });

  auto bundle_json = [](const BundleInfo& b) {
    nlohmann::ordered_json j;
    j["name"] = b.name;
    j["path"] = b.path.string();
    j["resolution"] = b.resolution;
    j["loaded"] = b.loaded;
    return j;
  };
  server_->Get("/api/bundles", [this, send_json, bundle_json](const httplib::Request&, httplib::Response& res) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& b : jobs_->registry().list()) list.push_back(bundle_json(b));
    send_json(res, 200, list);
  });
  server_->Post(R"(/api/bundles/([A-Za-z0-9_.-]+)/load)",
                [this, send_json, bundle_json](const httplib::Request& req, httplib::Response& res) {
                  try {
                    send_json(res, 200, bundle_json(jobs_->registry().load(req.matches[1])));
                  } catch (const BundleRegistry::NotFound& e) {
                    send_json(res, 404, error_body(e.what()));
                  } catch (const CheckpointError& e) {
                    send_json(res, 422, error_body(e.what()));
                  }
                });

  server_->set_exception_handler([send_json](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_json(res, 500, error_body(e.what()));
    } catch (...) {
      send_json(res, 500, error_body("internal error"));
    }
  });
}

int HttpService::start() {
  port_ = cfg_.port == 0 ? server_->bind_to_any_port(cfg_.host) : (server_->bind_to_port(cfg_.host, cfg_.port)
                                                                        ? cfg_.port
                                                                        : -1);
  if (port_ < 0) throw IoError("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void HttpService::run() {
  port_ = cfg_.port == 0 ? server_->bind_to_any_port(cfg_.host) : (server_->bind_to_port(cfg_.host, cfg_.port)
                                                                        ? cfg_.port
                                                                        : -1);
  if (port_ < 0) throw IoError("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
  server_->listen_after_bind();
}

void HttpService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace cycinpaint::service
