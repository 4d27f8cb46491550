#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include "cycinpaint/imaging/io.hpp"
#include "cycinpaint/imaging/masks.hpp"
#include "cycinpaint/imaging/synthetic.hpp"
#include "cycinpaint/service/service.hpp"
#include "doctest.h"
#include "httplib.h"
#include "run_compare.hpp"

using namespace cycinpaint;
using namespace cycinpaint::service;
using nlohmann::json;

namespace {

models::ArchConfig tiny_arch() {
  models::ArchConfig a;
  a.resolution = 32;
  a.latent_dim = 16;
  a.base_channels = 8;
  a.max_channels = 32;
  a.disc_channels = {8, 16, 16};
  a.refiner_channels = {8, 8, 16, 16, 16, 16};
  return a;
}

struct Fixture {
  fs::path root;
  ServiceConfig cfg;

  explicit Fixture(const std::string& name) {
    root = fs::temp_directory_path() / "cycinpaint_test_service" / name;
    fs::remove_all(root);
    fs::create_directories(root / "bundles");
    auto b = models::ModelBundle::create(tiny_arch(), 5, true);
    models::save_bundle(b, root / "bundles" / "tiny.cyc");
    auto no_refiner = models::ModelBundle::create(tiny_arch(), 6, false);
    models::save_bundle(no_refiner, root / "bundles" / "coarse_only.cyc");
    std::ofstream(root / "bundles" / "broken.cyc") << "CYCINPAINT-BUNDLE\n12\n{not json}";
    cfg.port = 0;
    cfg.runs_dir = root / "runs";
    cfg.bundles_dir = root / "bundles";
  }
};

std::string png_of(const imaging::Image& img) {
  const auto bytes = imaging::encode_image_png(img);
  return {bytes.begin(), bytes.end()};
}

std::string png_of(const imaging::Mask& m) {
  const auto bytes = imaging::encode_png(imaging::mask_to_bitmap(m));
  return {bytes.begin(), bytes.end()};
}

struct Upload {
  std::string image;
  std::string mask;
  json params = json::object();
};

Upload default_upload(int size = 32) {
  Upload u;
  u.image = png_of(imaging::synthetic_face(size, 40, 1));
  imaging::MaskSpec spec;
  spec.size = size;
  spec.rect = imaging::RectSpec{size / 4, size / 4, size / 2, size / 2};
  u.mask = png_of(imaging::gen_mask(spec, 0));
  u.params = {{"fill", "mean"}, {"cycles", 4}, {"seed", 11}};
  return u;
}

httplib::Result post_job(httplib::Client& cli, const Upload& u) {
  httplib::MultipartFormDataItems items = {
      {"image", u.image, "image.png", "image/png"},
      {"mask", u.mask, "mask.png", "image/png"},
      {"params", u.params.dump(), "", "application/json"},
  };
  return cli.Post("/api/jobs", items);
}

json wait_done(httplib::Client& cli, const std::string& id) {
  for (int i = 0; i < 2000; ++i) {
    auto r = cli.Get("/api/jobs/" + id);
    REQUIRE(r);
    REQUIRE(r->status == 200);
    const auto j = json::parse(r->body);
    if (j["state"] == "done" || j["state"] == "failed") return j;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  FAIL("job did not finish");
  return {};
}

std::string load_bundle(httplib::Client& cli, const std::string& name, int expect = 200) {
  auto r = cli.Post("/api/bundles/" + name + "/load");
  REQUIRE(r);
  CHECK(r->status == expect);
  return r->body;
}

}  // namespace

TEST_CASE("bundle registry over HTTP") {
  Fixture fx("registry");
  HttpService svc(fx.cfg);
  httplib::Client cli("127.0.0.1", svc.start());

  auto r = cli.Get("/api/bundles");
  REQUIRE(r);
  CHECK(r->status == 200);
  auto list = json::parse(r->body);
  REQUIRE(list.size() == 3);
  for (const auto& b : list) CHECK(b["loaded"] == false);
  CHECK(list[2]["name"] == "tiny");
  CHECK(list[2]["resolution"] == 32);

  auto job = post_job(cli, default_upload());
  REQUIRE(job);
  CHECK(job->status == 409);

  load_bundle(cli, "nope", 404);
  load_bundle(cli, "tiny", 200);
  list = json::parse(cli.Get("/api/bundles")->body);
  CHECK(list[2]["loaded"] == true);

  const auto body = json::parse(load_bundle(cli, "broken", 422));
  CHECK(body.contains("error"));
  list = json::parse(cli.Get("/api/bundles")->body);
  CHECK(list[0]["loaded"] == false);
  CHECK(list[2]["loaded"] == true);

  job = post_job(cli, default_upload());
  REQUIRE(job);
  CHECK(job->status == 202);
  svc.stop();
}

TEST_CASE("job submission validates payloads field by field") {
  Fixture fx("validation");
  fx.cfg.initial_bundle = "tiny";
  HttpService svc(fx.cfg);
  httplib::Client cli("127.0.0.1", svc.start());

  Upload wrong_mask = default_upload();
  wrong_mask.mask = default_upload(16).mask;
  auto r = post_job(cli, wrong_mask);
  REQUIRE(r);
  CHECK(r->status == 400);
  CHECK(json::parse(r->body)["field"] == "mask");

  Upload no_color = default_upload();
  no_color.params["fill"] = "constant";
  r = post_job(cli, no_color);
  REQUIRE(r);
  CHECK(r->status == 400);
  CHECK(json::parse(r->body)["field"] == "constant_color");

  Upload bad_image = default_upload();
  bad_image.image = "not a png";
  r = post_job(cli, bad_image);
  CHECK(r->status == 400);
  CHECK(json::parse(r->body)["field"] == "image");

  Upload bad_cycles = default_upload();
  bad_cycles.params["cycles"] = 0;
  r = post_job(cli, bad_cycles);
  CHECK(r->status == 400);
  CHECK(json::parse(r->body)["field"] == "cycles");

  Upload bad_fill = default_upload();
  bad_fill.params["fill"] = "plaid";
  r = post_job(cli, bad_fill);
  CHECK(r->status == 400);
  CHECK(json::parse(r->body)["field"] == "fill");

  r = cli.Post("/api/jobs", "{}", "application/json");
  CHECK(r->status == 400);

  // Individual form fields work as well as the JSON params part.
  const Upload u = default_upload();
  httplib::MultipartFormDataItems items = {
      {"image", u.image, "image.png", "image/png"},
      {"mask", u.mask, "mask.png", "image/png"},
      {"fill", "constant", "", ""},
      {"constant_color", "[0.5, -0.5, 0.0]", "", ""},
      {"cycles", "2", "", ""},
      {"refine", "false", "", ""},
  };
  r = cli.Post("/api/jobs", items);
  REQUIRE(r);
  CHECK(r->status == 202);
  const auto done = wait_done(cli, json::parse(r->body)["job_id"]);
  CHECK(done["state"] == "done");
  CHECK(done["cycles"] == 2);
  CHECK(done["refine"] == false);

  CHECK(cli.Get("/api/jobs/job-999999")->status == 404);
  CHECK(cli.Get("/api/jobs/job-999999/coarse.png")->status == 404);
  svc.stop();
}

TEST_CASE("job lifecycle, artifacts and progress") {
  Fixture fx("lifecycle");
  fx.cfg.initial_bundle = "tiny";
  HttpService svc(fx.cfg);
  httplib::Client cli("127.0.0.1", svc.start());

  Upload u = default_upload();
  u.params["cycles"] = 120;
  auto r = post_job(cli, u);
  REQUIRE(r);
  REQUIRE(r->status == 202);
  const std::string id = json::parse(r->body)["job_id"];

  int last_progress = 0;
  bool saw_running_cycle = false;
  json status;
  for (int i = 0; i < 5000; ++i) {
    status = json::parse(cli.Get("/api/jobs/" + id)->body);
    const int progress = status["progress"];
    CHECK(progress >= last_progress);
    last_progress = progress;
    if (status["state"] == "running" && progress > 0 && progress < 120) {
      CHECK(cli.Get("/api/jobs/" + id + "/cycles/" + std::to_string(progress - 1) + ".png")->status == 200);
      CHECK(cli.Get("/api/jobs/" + id + "/cycles/119.png")->status == 409);
      CHECK(cli.Get("/api/jobs/" + id + "/coarse.png")->status == 409);
      saw_running_cycle = true;
    }
    if (status["state"] == "done" || status["state"] == "failed") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  CHECK(saw_running_cycle);
  REQUIRE(status["state"] == "done");
  CHECK(status["progress"] == 120);
  CHECK(status["scores"].size() == 120);
  CHECK(status["selected_cycle"].is_number_integer());
  CHECK(status["urls"]["cycles"].size() == 120);
  CHECK(status["urls"]["refined"] == "/api/jobs/" + id + "/refined.png");

  const fs::path dir = fx.cfg.runs_dir / id;
  for (const std::string name : {"cycles/7", "coarse", "refined", "input", "mask"}) {
    const std::string url = "/api/jobs/" + id + "/" + name + ".png";
    auto a = cli.Get(url);
    REQUIRE(a);
    CHECK_MESSAGE(a->status == 200, url);
    const std::string file = name.rfind("cycles/", 0) == 0 ? "cycle_7.png" : name + ".png";
    CHECK(a->body == run_compare::read_all(dir / file));
    CHECK(a->get_header_value("Content-Type") == "image/png");
  }
  CHECK(cli.Get("/api/jobs/" + id + "/cycles/120.png")->status == 404);

  Upload multi = default_upload();
  multi.params["use_discriminator"] = false;
  multi.params["refine"] = false;
  r = post_job(cli, multi);
  REQUIRE(r->status == 202);
  const std::string id2 = json::parse(r->body)["job_id"];
  const auto s2 = wait_done(cli, id2);
  CHECK(s2["state"] == "done");
  CHECK_FALSE(s2.contains("scores"));
  CHECK(s2["selected_cycle"].is_null());
  CHECK(s2["urls"]["cycles"].size() == 4);
  CHECK_FALSE(s2["urls"].contains("refined"));
  CHECK(cli.Get("/api/jobs/" + id2 + "/refined.png")->status == 404);
  for (int i = 0; i < 4; ++i) {
    CHECK(cli.Get("/api/jobs/" + id2 + "/cycles/" + std::to_string(i) + ".png")->status == 200);
  }
  svc.stop();
}

TEST_CASE("restart re-indexes finished jobs and replay reproduces them") {
  Fixture fx("restart");
  fx.cfg.initial_bundle = "tiny";
  std::string id;
  json before;
  {
    HttpService svc(fx.cfg);
    httplib::Client cli("127.0.0.1", svc.start());
    auto r = post_job(cli, default_upload());
    REQUIRE(r->status == 202);
    id = json::parse(r->body)["job_id"];
    before = wait_done(cli, id);
    REQUIRE(before["state"] == "done");
    svc.stop();
  }
  // A job that was mid-flight when the process died.
  fs::create_directories(fx.cfg.runs_dir / "job-000050");
  std::ofstream(fx.cfg.runs_dir / "job-000050" / "job.json")
      << R"({"id": "job-000050", "state": "running", "bundle": "tiny", "cycles": 3})";

  HttpService svc(fx.cfg);
  httplib::Client cli("127.0.0.1", svc.start());
  const auto after = json::parse(cli.Get("/api/jobs/" + id)->body);
  CHECK(after == before);
  const auto interrupted = json::parse(cli.Get("/api/jobs/job-000050")->body);
  CHECK(interrupted["state"] == "failed");
  CHECK(cli.Get("/api/jobs/" + id + "/coarse.png")->body ==
        run_compare::read_all(fx.cfg.runs_dir / id / "coarse.png"));

  auto r = cli.Post("/api/jobs/" + id + "/replay");
  REQUIRE(r);
  REQUIRE(r->status == 202);
  const std::string replay_id = json::parse(r->body)["job_id"];
  CHECK(replay_id == "job-000051");
  const auto replayed = wait_done(cli, replay_id);
  CHECK(replayed["state"] == "done");
  CHECK(replayed["scores"] == before["scores"]);
  CHECK(replayed["selected_cycle"] == before["selected_cycle"]);
  CHECK(run_compare::diff(fx.cfg.runs_dir / id, fx.cfg.runs_dir / replay_id).empty());

  CHECK(cli.Post("/api/jobs/job-000050/replay")->status == 409);
  CHECK(cli.Post("/api/jobs/job-424242/replay")->status == 404);
  svc.stop();
}
