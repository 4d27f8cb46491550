#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "cycinpaint/imaging/image.hpp"
#include "cycinpaint/models/bundle.hpp"
#include "json.hpp"

namespace cycinpaint::engine {

using imaging::FillPolicy;
using imaging::Image;
using imaging::Mask;
using models::LatentCode;

/// What the cycle loop needs from the networks.
class Models {
 public:
  virtual ~Models() = default;
  virtual int resolution() const = 0;
  virtual LatentCode encode(const Image& img) const = 0;
  virtual Image generate(const LatentCode& z) const = 0;
  virtual bool has_discriminator() const = 0;
  virtual double score(const Image& img) const = 0;
  virtual bool has_refiner() const = 0;
  virtual int refiner_resolution() const = 0;
  virtual Image refine(const Image& img) const = 0;
};

/// Read-only view of a loaded bundle.
class BundleModels : public Models {
 public:
  explicit BundleModels(const models::ModelBundle& b);
  int resolution() const override { return bundle_.arch.resolution; }
  LatentCode encode(const Image& img) const override;
  Image generate(const LatentCode& z) const override;
  bool has_discriminator() const override { return bundle_.discriminator != nullptr; }
  double score(const Image& img) const override;
  bool has_refiner() const override { return bundle_.refiner != nullptr; }
  int refiner_resolution() const override { return bundle_.arch.refiner_resolution; }
  Image refine(const Image& img) const override;

 private:
  const models::ModelBundle& bundle_;
};

struct InpaintRequest {
  Image image;
  Mask mask;
  FillPolicy fill = FillPolicy::mean();
  int cycles = 10;
  bool use_discriminator = true;
  bool refine = true;
  std::uint64_t seed = 0;
  /// Stop after `early_stop_patience` consecutive score decreases once
  /// `early_stop_min_cycles` cycles have run. Needs the discriminator.
  bool early_stop = false;
  int early_stop_patience = 3;
  int early_stop_min_cycles = 10;
};

struct CycleRecord {
  Image generator_output;
  Image composite;
  std::optional<double> score;
};

using CycleTrace = std::vector<CycleRecord>;

struct Timings {
  double fill_ms = 0.0;
  double cycles_ms = 0.0;
  double refine_ms = 0.0;
  double total_ms = 0.0;
};

struct InpaintResult {
  /// Engine input after any resize and 8-bit quantization.
  Image input;
  Mask mask;
  Image initial;
  CycleTrace trace;
  /// Absent in multi-result mode (discriminator disabled).
  std::optional<int> selected_cycle;
  /// Selected composite, or the last one in multi-result mode.
  Image coarse;
  std::optional<Image> refined;
  /// Multi-result mode with refinement: one refined image per cycle.
  std::vector<Image> refined_all;
  bool resized_input = false;
  bool refiner_resampled = false;
  Timings timings;
};

/// Called after each completed cycle with its index.
using CycleObserver = std::function<void(int, const CycleRecord&)>;

/// Throws ConfigError for invalid requests and ShapeError for size mismatches.
void validate_request(const InpaintRequest& req);

/// The fill, encode, generate, composite, score loop. Inputs must already be at
/// the models' resolution.
CycleTrace run_cycles(const Models& m, const InpaintRequest& req, const CycleObserver& observer = {});

/// Index of the highest score, earliest on ties. SelectionError without scores.
int select_best(const CycleTrace& trace);
int select_best(const std::vector<double>& scores);

/// Refines `coarse`, resampling to the refiner resolution when needed, and keeps
/// the known region from `coarse`.
Image refine_coarse(const Models& m, const Image& coarse, const Mask& mask, bool* resampled = nullptr);

InpaintResult inpaint(const Models& m, InpaintRequest req, const CycleObserver& observer = {});

/// Request echo, selection and scores; everything needed for replay except pixels.
nlohmann::ordered_json result_manifest(const InpaintRequest& req, const InpaintResult& res);

/// input.png, mask.png, [sketch.png], cycle_{i}.png, scores.txt, coarse.png,
/// [refined.png, refined_{i}.png], manifest.json and timings.json.
void write_run_dir(const InpaintRequest& req, const InpaintResult& res, const std::filesystem::path& dir);

/// Rebuilds the request recorded in a run directory.
InpaintRequest load_run_request(const std::filesystem::path& dir);

}  // namespace cycinpaint::engine
