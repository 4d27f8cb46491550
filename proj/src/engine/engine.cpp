#include "cycinpaint/engine/engine.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cycinpaint/core/errors.hpp"
#include "cycinpaint/core/rng.hpp"
#include "cycinpaint/imaging/compose.hpp"
#include "cycinpaint/imaging/fill.hpp"
#include "cycinpaint/imaging/io.hpp"

namespace cycinpaint::engine {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string format_score(double s) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", s);
  return buf;
}

imaging::Sketch prepare_sketch(const imaging::Sketch& s, const Mask& mask) {
  imaging::Sketch out = s;
  if (s.height() != mask.height() || s.width() != mask.width()) {
    out.color = imaging::resize_image(s.color, mask.height());
    out.alpha = imaging::resize_bilinear(s.alpha, mask.height(), mask.width());
  }
  out.color = imaging::quantize(out.color);
  for (auto& a : out.alpha.span()) a = std::round(std::clamp(a, 0.0f, 1.0f) * 255.0f) / 255.0f;
  return out.clipped_to(mask);
}

imaging::Bitmap sketch_to_bitmap(const imaging::Sketch& s) {
  const imaging::Bitmap rgb = imaging::image_to_bitmap(s.color);
  imaging::Bitmap out{rgb.width, rgb.height, 4, std::vector<std::uint8_t>(rgb.bytes.size() / 3 * 4)};
  for (std::size_t i = 0; i < rgb.bytes.size() / 3; ++i) {
    for (int c = 0; c < 3; ++c) out.bytes[i * 4 + c] = rgb.bytes[i * 3 + c];
    out.bytes[i * 4 + 3] = static_cast<std::uint8_t>(std::lround(s.alpha[i] * 255.0f));
  }
  return out;
}

}  // namespace

BundleModels::BundleModels(const models::ModelBundle& b) : bundle_(b) {
  if (!b.generator || !b.encoder) throw ConfigError("bundle lacks a generator or encoder");
}

LatentCode BundleModels::encode(const Image& img) const { return models::encode(*bundle_.encoder, img); }

Image BundleModels::generate(const LatentCode& z) const { return models::generate(*bundle_.generator, z); }

double BundleModels::score(const Image& img) const {
  if (!bundle_.discriminator) throw ConfigError("bundle has no artifact discriminator");
  return models::discriminate(*bundle_.discriminator, img);
}

Image BundleModels::refine(const Image& img) const {
  if (!bundle_.refiner) throw ConfigError("bundle has no refiner");
  return models::refine(*bundle_.refiner, img);
}

void validate_request(const InpaintRequest& req) {
  if (req.cycles < 1) throw ConfigError("cycles must be at least 1, got " + std::to_string(req.cycles));
  if (req.image.empty()) throw ConfigError("request has no image");
  imaging::require_same_size(req.image, req.mask, "inpaint request");
  req.fill.validate();
  if (req.early_stop && (req.early_stop_patience < 1 || req.early_stop_min_cycles < 1)) {
    throw ConfigError("early stop needs positive patience and minimum cycles");
  }
  if (req.early_stop && !req.use_discriminator) throw ConfigError("early stop needs the discriminator");
}

CycleTrace run_cycles(const Models& m, const InpaintRequest& req, const CycleObserver& observer) {
  validate_request(req);
  if (req.image.height() != m.resolution() || req.image.width() != m.resolution()) {
    throw ShapeError("image is " + std::to_string(req.image.width()) + "x" + std::to_string(req.image.height()) +
                     " but the models run at " + std::to_string(m.resolution()));
  }
  if (req.use_discriminator && !m.has_discriminator()) throw ConfigError("discriminator requested but not loaded");

  FillPolicy policy = req.fill;
  policy.rng_seed = Rng::derive(req.seed, policy.rng_seed);
  Image current = imaging::apply_fill(req.image, req.mask, policy);

  CycleTrace trace;
  int decreases = 0;
  for (int i = 0; i < req.cycles; ++i) {
    CycleRecord rec;
    rec.generator_output = m.generate(m.encode(current));
    rec.composite = imaging::compose_cycle_input(req.image, req.mask, rec.generator_output);
    if (req.use_discriminator) rec.score = m.score(rec.composite);
    current = rec.composite;
    if (req.early_stop && !trace.empty()) decreases = *rec.score < *trace.back().score ? decreases + 1 : 0;
    trace.push_back(std::move(rec));
    if (observer) observer(i, trace.back());
    if (req.early_stop && i + 1 >= req.early_stop_min_cycles && decreases >= req.early_stop_patience) break;
  }
  return trace;
}

int select_best(const std::vector<double>& scores) {
  if (scores.empty()) throw SelectionError("no scores to select from; enable the discriminator");
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

int select_best(const CycleTrace& trace) {
  std::vector<double> scores;
  for (const auto& r : trace) {
    if (!r.score) throw SelectionError("cycle trace has no scores; enable the discriminator");
    scores.push_back(*r.score);
  }
  return select_best(scores);
}

Image refine_coarse(const Models& m, const Image& coarse, const Mask& mask, bool* resampled) {
  const int R = m.refiner_resolution();
  const bool resample = coarse.height() != R;
  if (resampled) *resampled = resample;
  if (!resample) return imaging::compose_refined(coarse, mask, m.refine(coarse));
  const Image up = imaging::resize_image(coarse, R);
  const Mask mask_up = imaging::resize_mask(mask, R);
  const Image refined_up = imaging::compose_refined(up, mask_up, m.refine(up));
  return imaging::compose_refined(coarse, mask, imaging::resize_image(refined_up, coarse.height()));
}

InpaintResult inpaint(const Models& m, InpaintRequest req, const CycleObserver& observer) {
  const auto t0 = Clock::now();
  validate_request(req);
  if (req.refine && !m.has_refiner()) throw ConfigError("refinement requested but no refiner is loaded");
  InpaintResult res;
  const int R = m.resolution();
  if (req.image.height() != R || req.image.width() != R) {
    req.image = imaging::resize_image(req.image, R);
    req.mask = imaging::resize_mask(req.mask, R);
    res.resized_input = true;
  }
  req.image = imaging::quantize(req.image);
  if (req.fill.sketch) req.fill.sketch = prepare_sketch(*req.fill.sketch, req.mask);
  res.input = req.image;
  res.mask = req.mask;

  const auto t_fill = Clock::now();
  {
    FillPolicy policy = req.fill;
    policy.rng_seed = Rng::derive(req.seed, policy.rng_seed);
    res.initial = imaging::apply_fill(req.image, req.mask, policy);
  }
  res.timings.fill_ms = ms_since(t_fill);

  const auto t_cycles = Clock::now();
  res.trace = run_cycles(m, req, observer);
  res.timings.cycles_ms = ms_since(t_cycles);

  if (req.use_discriminator) {
    res.selected_cycle = select_best(res.trace);
    res.coarse = res.trace[static_cast<std::size_t>(*res.selected_cycle)].composite;
  } else {
    res.coarse = res.trace.back().composite;
  }

  if (req.refine) {
    const auto t_refine = Clock::now();
    if (req.use_discriminator) {
      res.refined = refine_coarse(m, res.coarse, req.mask, &res.refiner_resampled);
    } else {
      for (const auto& rec : res.trace)
        res.refined_all.push_back(refine_coarse(m, rec.composite, req.mask, &res.refiner_resampled));
      res.refined = res.refined_all.back();
    }
    res.timings.refine_ms = ms_since(t_refine);
  }
  res.timings.total_ms = ms_since(t0);
  return res;
}

nlohmann::ordered_json result_manifest(const InpaintRequest& req, const InpaintResult& res) {
  nlohmann::ordered_json fill;
  fill["kind"] = imaging::fill_kind_name(req.fill.kind);
  if (req.fill.constant_color) fill["constant_color"] = *req.fill.constant_color;
  if (req.fill.noise_sigma) fill["noise_sigma"] = *req.fill.noise_sigma;
  fill["rng_seed"] = req.fill.rng_seed;
  fill["sketch"] = req.fill.sketch.has_value();

  nlohmann::ordered_json request;
  request["resolution"] = res.input.height();
  request["cycles"] = req.cycles;
  request["use_discriminator"] = req.use_discriminator;
  request["refine"] = req.refine;
  request["seed"] = req.seed;
  request["early_stop"] = req.early_stop;
  request["early_stop_patience"] = req.early_stop_patience;
  request["early_stop_min_cycles"] = req.early_stop_min_cycles;
  request["fill"] = fill;

  nlohmann::ordered_json j;
  j["request"] = request;
  j["resized_input"] = res.resized_input;
  j["refiner_resampled"] = res.refiner_resampled;
  j["cycles_run"] = res.trace.size();
  j["selected_cycle"] = res.selected_cycle ? nlohmann::ordered_json(*res.selected_cycle) : nlohmann::ordered_json();
  nlohmann::ordered_json scores = nlohmann::ordered_json::array();
  for (const auto& r : res.trace) scores.push_back(r.score ? nlohmann::ordered_json(*r.score) : nlohmann::ordered_json());
  j["scores"] = scores;
  j["refined"] = res.refined.has_value();
  return j;
}

void write_run_dir(const InpaintRequest& req, const InpaintResult& res, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
  imaging::save_image(res.input, dir / "input.png");
  imaging::save_mask(res.mask, dir / "mask.png");
  if (req.fill.sketch) {
    imaging::write_file(dir / "sketch.png",
                        imaging::encode_png(sketch_to_bitmap(prepare_sketch(*req.fill.sketch, res.mask))));
  }
  std::string scores;
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    imaging::save_image(res.trace[i].composite, dir / ("cycle_" + std::to_string(i) + ".png"));
    if (res.trace[i].score) scores += std::to_string(i) + " " + format_score(*res.trace[i].score) + "\n";
  }
  {
    std::ofstream out(dir / "scores.txt", std::ios::trunc);
    out << scores;
    if (!out) throw IoError("cannot write scores file in " + dir.string());
  }
  imaging::save_image(res.coarse, dir / "coarse.png");
  if (res.refined) imaging::save_image(*res.refined, dir / "refined.png");
  for (std::size_t i = 0; i < res.refined_all.size(); ++i) {
    imaging::save_image(res.refined_all[i], dir / ("refined_" + std::to_string(i) + ".png"));
  }
  {
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    out << result_manifest(req, res).dump(2) << '\n';
    if (!out) throw IoError("cannot write manifest in " + dir.string());
  }
  {
    nlohmann::ordered_json t;
    t["fill_ms"] = res.timings.fill_ms;
    t["cycles_ms"] = res.timings.cycles_ms;
    t["refine_ms"] = res.timings.refine_ms;
    t["total_ms"] = res.timings.total_ms;
    std::ofstream out(dir / "timings.json", std::ios::trunc);
    out << t.dump(2) << '\n';
  }
}

InpaintRequest load_run_request(const std::filesystem::path& dir) {
  nlohmann::json j;
  {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("no manifest in " + dir.string());
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("corrupt manifest: ") + e.what());
    }
  }
  try {
    const auto& r = j.at("request");
    const int res = r.at("resolution").get<int>();
    InpaintRequest req;
    req.image = imaging::load_image(dir / "input.png", res);
    req.mask = imaging::load_mask(dir / "mask.png", res, res);
    req.cycles = r.at("cycles").get<int>();
    req.use_discriminator = r.at("use_discriminator").get<bool>();
    req.refine = r.at("refine").get<bool>();
    req.seed = r.at("seed").get<std::uint64_t>();
    req.early_stop = r.at("early_stop").get<bool>();
    req.early_stop_patience = r.at("early_stop_patience").get<int>();
    req.early_stop_min_cycles = r.at("early_stop_min_cycles").get<int>();
    const auto& f = r.at("fill");
    FillPolicy p;
    p.kind = imaging::parse_fill_kind(f.at("kind").get<std::string>());
    if (f.contains("constant_color")) p.constant_color = f["constant_color"].get<std::array<float, 3>>();
    if (f.contains("noise_sigma")) p.noise_sigma = f["noise_sigma"].get<double>();
    p.rng_seed = f.at("rng_seed").get<std::uint64_t>();
    if (f.at("sketch").get<bool>()) p.sketch = imaging::load_sketch(dir / "sketch.png");
    req.fill = std::move(p);
    return req;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("incomplete manifest: ") + e.what());
  }
}

}  // namespace cycinpaint::engine
