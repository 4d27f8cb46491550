#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cycinpaint/imaging/image.hpp"
#include "cycinpaint/imaging/masks.hpp"

namespace cycinpaint::distortion {

using imaging::Image;
using imaging::Mask;

enum class Severity { none, mild, heavy };

std::string_view severity_name(Severity s);
Severity parse_severity(std::string_view name);

struct DistortionParams {
  double blur_sigma = 0.0;
  double brightness = 1.0;
  double contrast = 1.0;
  Severity severity = Severity::none;

  friend bool operator==(const DistortionParams&, const DistortionParams&) = default;
};

inline constexpr float kRealLabel = 0.9f;
inline constexpr float kFakeLabel = 0.1f;

/// Draws each field uniformly from the severity's range. Throws ConfigError for `none`.
DistortionParams sample_params(Severity severity, std::uint64_t seed);

/// Gaussian blur, brightness, then contrast about the undistorted per-channel
/// mean, all in [0, 1] space, kept only where the mask marks the hole.
Image apply_distortion(const Image& img, const Mask& mask, const DistortionParams& p);

/// Separable Gaussian blur in place on a [1,C,H,W] tensor, kernel cut at 3 sigma,
/// clamped borders.
void gaussian_blur(Tensor& t, double sigma);

struct SplitCounts {
  int clean = 0;
  int mild = 0;
  int heavy = 0;
};

/// 22:8:30 proportional split of `total`; throws DegenerateInputError below 30.
SplitCounts split_counts(int total);

/// Everything needed to regenerate one sample from its source image.
struct SampleRecord {
  int index = 0;
  int source = 0;
  std::string source_path;
  imaging::MaskKind mask_kind = imaging::MaskKind::rectangular;
  std::uint64_t mask_seed = 0;
  double rect_coverage = 0.0;
  DistortionParams params;
  float label = kRealLabel;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct LabeledSample {
  Image image;
  float label = kRealLabel;
  Severity severity = Severity::none;
};

/// Sample plan: clean, mild and heavy blocks in that order; sample i derives
/// its draws from seed + i.
std::vector<SampleRecord> plan_disc_dataset(int num_sources, int total, std::uint64_t seed);

/// Mask used by a record (all ones for clean samples).
Mask record_mask(const SampleRecord& r, int size);
LabeledSample realize(const SampleRecord& r, const Image& source);

std::vector<LabeledSample> build_disc_dataset(const std::vector<Image>& images, int total, std::uint64_t seed);

/// One JSON object per line.
void write_manifest(const std::vector<SampleRecord>& records, const std::filesystem::path& path);
std::vector<SampleRecord> read_manifest(const std::filesystem::path& path);
std::string record_to_json(const SampleRecord& r);
SampleRecord record_from_json(std::string_view line);

}  // namespace cycinpaint::distortion
