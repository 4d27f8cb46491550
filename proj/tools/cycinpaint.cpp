#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cycinpaint/distortion/distortion.hpp"
#include "cycinpaint/engine/engine.hpp"
#include "cycinpaint/imaging/io.hpp"
#include "cycinpaint/imaging/synthetic.hpp"
#include "cycinpaint/service/service.hpp"
#include "cycinpaint/training/training.hpp"

using namespace cycinpaint;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Usage problems detected after flag parsing (bad config files, bad values).
struct UsageError : Error {
  using Error::Error;
};

// ---- shared helpers -----------------------------------------------------------

struct Corpus {
  std::vector<imaging::Image> images;
  std::vector<std::string> keys;
};

/// Colour PNG/JPEG files under `dir` (sorted, recursive), or synthetic faces when `dir` is empty.
Corpus load_corpus(const std::string& dir, int count, int size, std::uint64_t seed) {
  Corpus c;
  if (dir.empty()) {
    c.images = imaging::synthetic_faces(count, size, seed);
    char key[32];
    for (int i = 0; i < count; ++i) {
      std::snprintf(key, sizeof key, "synthetic/%05d", i);
      c.keys.emplace_back(key);
    }
    return c;
  }
  if (!fs::is_directory(dir)) throw UsageError("data_dir: not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    c.images.push_back(imaging::load_image(f, size));
    c.keys.push_back(fs::relative(f, dir).generic_string());
  }
  std::cout << "loaded " << c.images.size() << " images from " << dir << "\n";
  return c;
}

training::TrainConfig training_config(training::Pipeline p, const std::string& config_path,
                                      const std::optional<std::uint64_t>& seed) {
  auto cfg = training::TrainConfig::defaults(p);
  try {
    if (!config_path.empty()) cfg = training::load_config(config_path, cfg);
    if (seed) cfg.seed = *seed;
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

void print_epoch(const training::EpochRecord& r) {
  std::printf("%-8s epoch %3d  train %.5f  val %.5f  lr %.3g", r.phase.c_str(), r.epoch, r.train_loss, r.val_loss,
              r.lr);
  for (const auto& [k, v] : r.metrics) std::printf("  %s %.4f", k.c_str(), v);
  std::printf("\n");
  std::fflush(stdout);
}

void print_report(const training::TrainReport& rep) {
  std::printf("best epoch %d (val %.5f), %.1f s\n", rep.best_epoch, rep.best_val_loss, rep.wall_seconds);
  if (!rep.best_checkpoint.empty()) std::printf("best checkpoint: %s\n", rep.best_checkpoint.string().c_str());
}

nlohmann::json inpaint_params(const std::string& fill, const std::vector<float>& color, std::optional<double> sigma,
                              int cycles, bool no_disc, bool no_refine, std::uint64_t seed) {
  nlohmann::json p;
  p["fill"] = fill;
  p["cycles"] = cycles;
  p["use_discriminator"] = !no_disc;
  p["refine"] = !no_refine;
  p["seed"] = seed;
  if (!color.empty()) p["constant_color"] = color;
  if (sigma) p["noise_sigma"] = *sigma;
  return p;
}

engine::InpaintRequest build_request(const std::string& image, const std::string& mask,
                                     const std::optional<std::string>& sketch, const nlohmann::json& params) {
  service::Submission sub;
  auto slurp = [](const std::string& path) {
    const auto bytes = imaging::read_file(path);
    return std::string(bytes.begin(), bytes.end());
  };
  sub.image = slurp(image);
  sub.mask = slurp(mask);
  if (sketch) sub.sketch = slurp(*sketch);
  sub.params = params;
  try {
    return service::parse_submission(sub);
  } catch (const service::RequestError& e) {
    throw UsageError(e.what());
  }
}

void print_result(const engine::InpaintResult& res) {
  std::printf("cycle  score\n");
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    const auto& s = res.trace[i].score;
    if (s) {
      std::printf("%5zu  %.4f%s\n", i, *s, res.selected_cycle && *res.selected_cycle == static_cast<int>(i) ? "  *" : "");
    } else {
      std::printf("%5zu  -\n", i);
    }
  }
  if (res.selected_cycle) {
    std::printf("selected cycle: %d (score %.4f)\n", *res.selected_cycle, *res.trace[*res.selected_cycle].score);
  }
}

// ---- montage ------------------------------------------------------------------

imaging::Bitmap rgb_panel(const imaging::Image& img, int size) {
  return imaging::image_to_bitmap(img.height() == size ? img : imaging::resize_image(img, size));
}

imaging::Bitmap mask_panel(const imaging::Mask& m, int size) {
  const imaging::Bitmap gray = imaging::mask_to_bitmap(m.height() == size ? m : imaging::resize_mask(m, size));
  imaging::Bitmap out{gray.width, gray.height, 3, {}};
  out.bytes.reserve(gray.bytes.size() * 3);
  for (auto v : gray.bytes) out.bytes.insert(out.bytes.end(), 3, v);
  return out;
}

/// Tiles equally sized RGB panels into `rows` x `cols` with a white gutter.
imaging::Bitmap tile(const std::vector<imaging::Bitmap>& panels, int cols, int gutter = 2) {
  const int w = panels.front().width;
  const int h = panels.front().height;
  const int rows = static_cast<int>((panels.size() + cols - 1) / cols);
  imaging::Bitmap out{cols * w + (cols + 1) * gutter, rows * h + (rows + 1) * gutter, 3, {}};
  out.bytes.assign(static_cast<std::size_t>(out.width) * out.height * 3, 255);
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const int ox = gutter + static_cast<int>(i % cols) * (w + gutter);
    const int oy = gutter + static_cast<int>(i / cols) * (h + gutter);
    for (int y = 0; y < h; ++y) {
      std::copy_n(panels[i].bytes.begin() + static_cast<std::ptrdiff_t>(y) * w * 3, w * 3,
                  out.bytes.begin() + (static_cast<std::ptrdiff_t>(oy + y) * out.width + ox) * 3);
    }
  }
  return out;
}

/// For commands whose --config names flags: appends "--key value" for every
/// config line whose flag is not already on the command line.
std::vector<std::string> expand_flag_config(std::vector<std::string> args) {
  static const std::set<std::string> commands = {"synth-faces", "inpaint", "grid", "serve"};
  if (args.size() < 2 || !commands.count(args[1])) return args;
  std::string path;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  std::ifstream in(path);
  if (path.empty() || !in) return args;
  auto given = [&](const std::string& flag) {
    return std::any_of(args.begin() + 2, args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  auto trim = [](std::string v) {
    v.erase(0, v.find_first_not_of(" \t"));
    v.erase(v.find_last_not_of(" \t\r") + 1);
    return v;
  };
  std::vector<std::string> extra;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    const std::string key = trim(line.substr(0, eq));
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (eq == std::string::npos) {
      extra.push_back(flag);
      continue;
    }
    const std::string value = trim(line.substr(eq + 1));
    if (value == "true") {
      extra.push_back(flag);
    } else if (value != "false") {
      extra.push_back(flag);
      extra.push_back(value);
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto item = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cyclic reverse-generator inpainting: training, dataset synthesis, inference and serving."};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  auto add_common = [](CLI::App* cmd, std::optional<std::uint64_t>& seed, std::string& config,
                       const std::string& config_help) {
    cmd->add_option("--seed", seed, "Seed overriding the config value (default: from config, else 0)");
    cmd->add_option("--config", config,
                    config_help.empty() ? "File of key=value lines naming any long flag of this command" : config_help)
        ->check(CLI::ExistingFile);
  };
  const std::string train_cfg_help = "Training config file of key=value lines";
  const std::string flag_cfg_help;

  // ---- train-* ----
  struct TrainFlags {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::optional<std::string> out;
    std::optional<std::string> data_dir;
    std::optional<int> epochs;
    std::string bundle;
    bool print_config = false;
  };
  TrainFlags crg_f, disc_f, ref_f;
  auto add_train = [&](CLI::App* cmd, TrainFlags& f) {
    add_common(cmd, f.seed, f.config, train_cfg_help);
    cmd->add_option("--out", f.out, "Output directory for checkpoints/ and reports/ (default: from config)");
    cmd->add_option("--data-dir", f.data_dir, "Image directory; synthetic faces when unset");
    cmd->add_option("--epochs", f.epochs, "Epoch count override");
    cmd->add_flag("--print-config", f.print_config, "Print the effective config and exit");
  };
  auto* train_crg = app.add_subcommand("train-crg", "Train the generator and encoder");
  add_train(train_crg, crg_f);
  std::optional<int> encoder_epochs;
  train_crg->add_option("--encoder-epochs", encoder_epochs, "Encoder phase epoch count override");

  auto* train_disc = app.add_subcommand("train-disc", "Train the artifact discriminator");
  add_train(train_disc, disc_f);
  train_disc->add_option("--bundle", disc_f.bundle, "Existing bundle to add the discriminator to")
      ->check(CLI::ExistingFile);

  auto* train_ref = app.add_subcommand("train-refiner", "Train the refiner on engine outputs");
  add_train(train_ref, ref_f);
  train_ref->add_option("--bundle", ref_f.bundle, "Bundle with a trained generator and encoder")
      ->required()
      ->check(CLI::ExistingFile);

  // ---- synth-faces ----
  auto* synth_faces = app.add_subcommand("synth-faces", "Write the procedural face corpus as PNG files");
  std::optional<std::uint64_t> faces_seed;
  std::string faces_config, faces_out;
  int faces_count = 1000, faces_size = 64;
  add_common(synth_faces, faces_seed, faces_config, flag_cfg_help);
  synth_faces->add_option("--count", faces_count, "Number of images")->capture_default_str()->check(CLI::PositiveNumber);
  synth_faces->add_option("--size", faces_size, "Image side in pixels")->capture_default_str()->check(CLI::PositiveNumber);
  synth_faces->add_option("--out", faces_out, "Output directory")->required();

  // ---- synth-distort ----
  auto* synth_distort = app.add_subcommand("synth-distort", "Write a labelled discriminator dataset");
  TrainFlags sd_f;
  std::optional<int> sd_total, sd_images, sd_size;
  add_common(synth_distort, sd_f.seed, sd_f.config, train_cfg_help);
  synth_distort->add_option("--out", sd_f.out, "Output directory")->required();
  synth_distort->add_option("--data-dir", sd_f.data_dir, "Source image directory; synthetic faces when unset");
  synth_distort->add_option("--total", sd_total, "Number of samples (default: dataset_total, 6000)");
  synth_distort->add_option("--num-images", sd_images, "Synthetic source images (default: num_images, 2000)");
  synth_distort->add_option("--size", sd_size, "Sample side in pixels (default: arch.resolution, 64)");

  // ---- inpaint / grid ----
  struct InferFlags {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string bundle, image, mask, out;
    std::optional<std::string> sketch;
    std::string fill = "mean";
    std::vector<float> color;
    std::optional<double> sigma;
    int cycles = 10;
    bool no_disc = false;
    bool no_refine = false;
  };
  InferFlags inf, grid_f;
  std::string grid_fills = "mean,noise,white,black";
  auto add_infer = [&](CLI::App* cmd, InferFlags& f) {
    add_common(cmd, f.seed, f.config, flag_cfg_help);
    cmd->add_option("--bundle", f.bundle, "Model bundle (.cyc)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--image", f.image, "Square input image (PNG or JPEG)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--mask", f.mask, "Mask PNG, same size as the image; white = known, black = hole")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", f.out, "Output directory")->required();
    cmd->add_option("--cycles", f.cycles, "Cycle count")->capture_default_str()->check(CLI::Range(1, 1000));
    cmd->add_option("--color", f.color, "Constant fill colour r,g,b in [-1, 1]")->delimiter(',')->expected(3);
    cmd->add_option("--noise-sigma", f.sigma, "Noise fill standard deviation (default 0.5)");
    cmd->add_flag("--no-refine", f.no_refine, "Skip the refiner");
  };
  auto* inpaint = app.add_subcommand("inpaint", "Inpaint one image and write the run directory");
  add_infer(inpaint, inf);
  inpaint->add_option("--fill", inf.fill, "Hole fill: mean, noise, white, black or constant")
      ->capture_default_str()
      ->check(CLI::IsMember({"mean", "noise", "white", "black", "constant"}));
  inpaint->add_option("--sketch", inf.sketch, "RGBA sketch overlay, same size as the image")->check(CLI::ExistingFile);
  inpaint->add_flag("--no-discriminator", inf.no_disc, "Keep every cycle instead of selecting one");

  auto* grid = app.add_subcommand("grid", "Run several fills and write montages plus a contact sheet");
  add_infer(grid, grid_f);
  grid->add_option("--fills", grid_fills, "Comma-separated fills")->capture_default_str();

  // ---- serve ----
  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  std::optional<std::uint64_t> serve_seed;
  std::string serve_config;
  auto scfg = service::config_from_env();
  add_common(serve, serve_seed, serve_config, flag_cfg_help);
  serve->add_option("--host", scfg.host, "Bind address")->capture_default_str();
  serve->add_option("--port", scfg.port, "Port; 0 picks a free one")->capture_default_str();
  serve->add_option("--runs", scfg.runs_dir, "Run directory root")->capture_default_str();
  serve->add_option("--bundles", scfg.bundles_dir, "Directory of .cyc bundles")->capture_default_str();
  serve->add_option("--bundle", scfg.initial_bundle, "Bundle name to load at startup");
  serve->add_option("--workers", scfg.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  for (auto* cmd : app.get_subcommands({})) {
    cmd->fallthrough(false);
  }

  std::vector<std::string> args(argv, argv + argc);
  args = expand_flag_config(std::move(args));
  args.erase(args.begin());
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_crg->parsed() || train_disc->parsed() || train_ref->parsed()) {
      const bool is_crg = train_crg->parsed();
      const bool is_disc = train_disc->parsed();
      TrainFlags& f = is_crg ? crg_f : (is_disc ? disc_f : ref_f);
      const auto pipeline = is_crg ? training::Pipeline::crg
                                   : (is_disc ? training::Pipeline::discriminator : training::Pipeline::refiner);
      auto cfg = training_config(pipeline, f.config, f.seed);
      if (f.out) cfg.out_dir = *f.out;
      if (f.data_dir) cfg.data_dir = *f.data_dir;
      if (f.epochs) cfg.epochs = *f.epochs;
      if (is_crg && encoder_epochs) cfg.encoder_epochs = *encoder_epochs;
      try {
        cfg.validate();
      } catch (const ConfigError& e) {
        throw UsageError(e.what());
      }
      if (f.print_config) {
        std::cout << training::describe(cfg);
        return kExitOk;
      }
      if (cfg.out_dir.empty()) throw UsageError("--out (or out_dir in the config) is required");

      models::ModelBundle bundle;
      if (!f.bundle.empty()) {
        bundle = models::load_bundle(f.bundle);
        std::cout << "loaded bundle " << f.bundle << " at " << bundle.arch.resolution << " px\n";
      } else {
        bundle.arch = cfg.arch;
      }
      training::TrainReport rep;
      if (is_crg) {
        const auto corpus = load_corpus(cfg.data_dir, cfg.num_images, cfg.arch.resolution, cfg.seed);
        rep = training::train_crg(cfg, corpus.images, corpus.keys, bundle, print_epoch);
      } else if (is_disc) {
        if (!bundle.discriminator) {
          bundle.arch.disc_channels = cfg.arch.disc_channels;
          bundle.arch.disc_dropout = cfg.arch.disc_dropout;
        }
        const int res = bundle.arch.resolution;
        const auto corpus = load_corpus(cfg.data_dir, cfg.num_images, res, cfg.seed);
        const auto plan = distortion::plan_disc_dataset(static_cast<int>(corpus.images.size()), cfg.dataset_total,
                                                        cfg.seed);
        std::vector<distortion::LabeledSample> data;
        std::vector<std::string> keys;
        for (const auto& r : plan) {
          data.push_back(distortion::realize(r, corpus.images[r.source]));
          keys.push_back(corpus.keys[r.source] + "#" + std::to_string(r.index));
        }
        rep = training::train_discriminator(cfg, data, keys, bundle, print_epoch);
        const auto val = training::split_validation(keys, cfg.val_fraction, cfg.seed);
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < val.size(); ++i) {
          if (val[i]) idx.push_back(i);
        }
        const auto s = training::separation(*bundle.discriminator, data, idx);
        std::printf("held-out clean vs heavy: accuracy %.3f, mean score clean %.3f heavy %.3f (%d/%d)\n", s.accuracy,
                    s.mean_clean, s.mean_heavy, s.clean, s.heavy);
      } else {
        if (!bundle.generator || !bundle.encoder) throw UsageError("--bundle needs a generator and an encoder");
        bundle.arch.refiner_channels = cfg.arch.refiner_channels;
        bundle.arch.refiner_resolution = cfg.arch.refiner_resolution;
        const auto corpus = load_corpus(cfg.data_dir, cfg.num_images, bundle.arch.resolution, cfg.seed);
        bundle.set_inference();
        const auto data = training::build_refiner_dataset(engine::BundleModels(bundle), corpus.images,
                                                          cfg.arch.refiner_resolution, cfg.refiner_cycles, cfg.seed);
        const losses::FeatureExtractor fx(training::extractor_config(cfg.extractor));
        rep = training::train_refiner(cfg, data, corpus.keys, bundle, fx, print_epoch);
      }
      print_report(rep);
      return kExitOk;
    }

    if (synth_faces->parsed()) {
      const std::uint64_t seed = faces_seed.value_or(0);
      fs::create_directories(faces_out);
      char name[32];
      for (int i = 0; i < faces_count; ++i) {
        std::snprintf(name, sizeof name, "face_%05d.png", i);
        imaging::save_image(imaging::synthetic_face(faces_size, seed, static_cast<std::uint64_t>(i)),
                            fs::path(faces_out) / name);
      }
      std::printf("wrote %d images to %s\n", faces_count, faces_out.c_str());
      return kExitOk;
    }

    if (synth_distort->parsed()) {
      auto cfg = training_config(training::Pipeline::discriminator, sd_f.config, sd_f.seed);
      if (sd_total) cfg.dataset_total = *sd_total;
      if (sd_images) cfg.num_images = *sd_images;
      if (sd_size) cfg.arch.resolution = *sd_size;
      if (sd_f.data_dir) cfg.data_dir = *sd_f.data_dir;
      const fs::path out = *sd_f.out;
      const auto corpus = load_corpus(cfg.data_dir, cfg.num_images, cfg.arch.resolution, cfg.seed);
      auto plan = distortion::plan_disc_dataset(static_cast<int>(corpus.images.size()), cfg.dataset_total, cfg.seed);
      fs::create_directories(out / "images");
      int counts[3] = {0, 0, 0};
      char name[32];
      for (auto& r : plan) {
        r.source_path = corpus.keys[r.source];
        const auto sample = distortion::realize(r, corpus.images[r.source]);
        std::snprintf(name, sizeof name, "%05d.png", r.index);
        imaging::save_image(sample.image, out / "images" / name);
        ++counts[static_cast<int>(r.params.severity)];
      }
      distortion::write_manifest(plan, out / "manifest.jsonl");
      std::printf("clean %d\nmild %d\nheavy %d\nwrote %zu samples to %s\n", counts[0], counts[1], counts[2],
                  plan.size(), out.string().c_str());
      return kExitOk;
    }

    if (inpaint->parsed()) {
      const auto req = build_request(inf.image, inf.mask, inf.sketch,
                                     inpaint_params(inf.fill, inf.color, inf.sigma, inf.cycles, inf.no_disc,
                                                    inf.no_refine, inf.seed.value_or(0)));
      auto bundle = models::load_bundle(inf.bundle);
      bundle.set_inference();
      const engine::BundleModels models(bundle);
      const auto res = engine::inpaint(models, req);
      engine::write_run_dir(req, res, inf.out);
      print_result(res);
      std::printf("wrote %s\n", inf.out.c_str());
      return kExitOk;
    }

    if (grid->parsed()) {
      const auto fills = split_list(grid_fills);
      if (fills.empty()) throw UsageError("--fills: at least one fill is required");
      auto bundle = models::load_bundle(grid_f.bundle);
      bundle.set_inference();
      const engine::BundleModels models(bundle);
      const bool refine = !grid_f.no_refine && models.has_refiner();
      const int size = refine ? std::max(bundle.arch.resolution, bundle.arch.refiner_resolution) : bundle.arch.resolution;
      std::vector<imaging::Bitmap> sheet;
      for (const auto& fill : fills) {
        if (fill != "mean" && fill != "noise" && fill != "white" && fill != "black" && fill != "constant") {
          throw UsageError("--fills: unknown fill '" + fill + "'");
        }
        const auto req = build_request(
            grid_f.image, grid_f.mask, std::nullopt,
            inpaint_params(fill, grid_f.color, grid_f.sigma, grid_f.cycles, false, !refine, grid_f.seed.value_or(0)));
        const auto res = engine::inpaint(models, req);
        engine::write_run_dir(req, res, fs::path(grid_f.out) / ("run_" + fill));
        std::vector<imaging::Bitmap> row = {rgb_panel(res.input, size), mask_panel(res.mask, size),
                                            rgb_panel(res.initial, size), rgb_panel(res.coarse, size),
                                            rgb_panel(res.refined ? *res.refined : res.coarse, size)};
        imaging::write_file(fs::path(grid_f.out) / ("montage_" + fill + ".png"), imaging::encode_png(tile(row, 5)));
        sheet.insert(sheet.end(), row.begin(), row.end());
        std::printf("%-8s selected cycle %d\n", fill.c_str(), res.selected_cycle.value_or(-1));
      }
      imaging::write_file(fs::path(grid_f.out) / "contact_sheet.png", imaging::encode_png(tile(sheet, 5)));
      std::printf("wrote %zu montages and contact_sheet.png to %s\n", fills.size(), grid_f.out.c_str());
      return kExitOk;
    }

    if (serve->parsed()) {
      service::HttpService svc(scfg);
      std::printf("serving on %s:%d (runs %s, bundles %s)\n", scfg.host.c_str(), scfg.port,
                  scfg.runs_dir.string().c_str(), scfg.bundles_dir.string().c_str());
      std::fflush(stdout);
      svc.run();
      return kExitOk;
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
