#include "cycinpaint/distortion/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "cycinpaint/core/errors.hpp"
#include "cycinpaint/core/rng.hpp"

namespace cycinpaint::distortion {
namespace {

struct Range {
  double lo, hi;
};

struct SeverityRanges {
  Range blur, brightness, contrast;
};

constexpr SeverityRanges kHeavy{{1.0, 2.5}, {0.4, 0.8}, {0.4, 0.8}};
constexpr SeverityRanges kMild{{0.3, 0.8}, {0.85, 0.95}, {0.85, 0.95}};

double draw(Rng& rng, Range r) { return std::min(r.hi, rng.uniform(r.lo, r.hi)); }

}  // namespace

std::string_view severity_name(Severity s) {
  switch (s) {
    case Severity::none:
      return "none";
    case Severity::mild:
      return "mild";
    case Severity::heavy:
      return "heavy";
  }
  return "none";
}

Severity parse_severity(std::string_view name) {
  if (name == "none") return Severity::none;
  if (name == "mild") return Severity::mild;
  if (name == "heavy") return Severity::heavy;
  throw ConfigError("unknown severity '" + std::string(name) + "'");
}

DistortionParams sample_params(Severity severity, std::uint64_t seed) {
  if (severity == Severity::none) throw ConfigError("sample_params needs severity mild or heavy");
  const SeverityRanges& r = severity == Severity::heavy ? kHeavy : kMild;
  Rng rng(seed);
  DistortionParams p;
  p.severity = severity;
  p.blur_sigma = draw(rng, r.blur);
  p.brightness = draw(rng, r.brightness);
  p.contrast = draw(rng, r.contrast);
  return p;
}

void gaussian_blur(Tensor& t, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[i + radius];
  }
  for (auto& v : k) v /= total;

  const int H = t.h(), W = t.w();
  std::vector<double> tmp(static_cast<std::size_t>(H) * W);
  for (int n = 0; n < t.n(); ++n) {
    for (int c = 0; c < t.c(); ++c) {
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          double acc = 0.0;
          for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * t.at(n, c, y, std::clamp(x + i, 0, W - 1));
          tmp[static_cast<std::size_t>(y) * W + x] = acc;
        }
      }
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          double acc = 0.0;
          for (int i = -radius; i <= radius; ++i)
            acc += k[i + radius] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, H - 1)) * W + x];
          t.at(n, c, y, x) = static_cast<float>(acc);
        }
      }
    }
  }
}

Image apply_distortion(const Image& img, const Mask& mask, const DistortionParams& p) {
  imaging::require_same_size(img, mask, "apply_distortion");
  if (p.blur_sigma < 0.0 || !(p.brightness > 0.0) || !(p.contrast > 0.0)) {
    throw ConfigError("distortion needs blur_sigma >= 0 and positive brightness and contrast");
  }
  if (p.blur_sigma == 0.0 && p.brightness == 1.0 && p.contrast == 1.0) return img;

  const int H = img.height(), W = img.width();
  Tensor unit = img.tensor();
  for (auto& v : unit.span()) v = (v + 1.0f) * 0.5f;

  double mu[3] = {0, 0, 0};
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) mu[c] += unit.at(0, c, y, x);
    mu[c] /= static_cast<double>(H) * W;
  }

  gaussian_blur(unit, p.blur_sigma);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double v = unit.at(0, c, y, x);
        if (p.brightness != 1.0) v = std::clamp(p.brightness * v, 0.0, 1.0);
        if (p.contrast != 1.0) v = std::clamp(mu[c] + p.contrast * (v - mu[c]), 0.0, 1.0);
        unit.at(0, c, y, x) = static_cast<float>(v);
      }
    }
  }

  Tensor out = img.tensor();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        if (!mask.known(y, x)) out.at(0, c, y, x) = std::clamp(2.0f * unit.at(0, c, y, x) - 1.0f, -1.0f, 1.0f);
  return Image(std::move(out));
}

SplitCounts split_counts(int total) {
  if (total < 30) throw DegenerateInputError("dataset total must be at least 30, got " + std::to_string(total));
  SplitCounts s;
  s.clean = static_cast<int>(std::lround(total * 22.0 / 60.0));
  s.mild = static_cast<int>(std::lround(total * 8.0 / 60.0));
  s.heavy = total - s.clean - s.mild;
  return s;
}

std::vector<SampleRecord> plan_disc_dataset(int num_sources, int total, std::uint64_t seed) {
  const SplitCounts counts = split_counts(total);
  if (num_sources < 1) throw DegenerateInputError("dataset needs at least one source image");
  std::vector<SampleRecord> out;
  out.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    SampleRecord r;
    r.index = i;
    const std::uint64_t sample_seed = seed + static_cast<std::uint64_t>(i);
    Rng rng(sample_seed);
    r.source = rng.uniform_int(0, num_sources - 1);
    const Severity sev = i < counts.clean ? Severity::none
                         : i < counts.clean + counts.mild ? Severity::mild
                                                          : Severity::heavy;
    r.label = sev == Severity::heavy ? kFakeLabel : kRealLabel;
    if (sev != Severity::none) {
      r.mask_kind = rng.bernoulli(0.5) ? imaging::MaskKind::rectangular : imaging::MaskKind::irregular_brush;
      r.mask_seed = Rng::derive(sample_seed, 1);
      r.rect_coverage = r.mask_kind == imaging::MaskKind::rectangular ? rng.uniform(0.1, 0.3) : 0.0;
      r.params = sample_params(sev, Rng::derive(sample_seed, 2));
    }
    out.push_back(r);
  }
  return out;
}

Mask record_mask(const SampleRecord& r, int size) {
  if (r.params.severity == Severity::none) return Mask::ones(size, size);
  imaging::MaskSpec spec;
  spec.kind = r.mask_kind;
  spec.size = size;
  if (r.mask_kind == imaging::MaskKind::rectangular) spec.rect_coverage = r.rect_coverage;
  return imaging::gen_mask(spec, r.mask_seed);
}

LabeledSample realize(const SampleRecord& r, const Image& source) {
  if (r.params.severity == Severity::none) return {source, r.label, Severity::none};
  return {apply_distortion(source, record_mask(r, source.height()), r.params), r.label, r.params.severity};
}

std::vector<LabeledSample> build_disc_dataset(const std::vector<Image>& images, int total, std::uint64_t seed) {
  if (images.empty()) throw DegenerateInputError("dataset needs at least one source image");
  const auto plan = plan_disc_dataset(static_cast<int>(images.size()), total, seed);
  std::vector<LabeledSample> out;
  out.reserve(plan.size());
  for (const auto& r : plan) out.push_back(realize(r, images[static_cast<std::size_t>(r.source)]));
  return out;
}

std::string record_to_json(const SampleRecord& r) {
  nlohmann::ordered_json j;
  j["index"] = r.index;
  j["source"] = r.source;
  j["source_path"] = r.source_path;
  j["mask_kind"] = r.mask_kind == imaging::MaskKind::rectangular ? "rectangular" : "irregular_brush";
  j["mask_seed"] = r.mask_seed;
  j["rect_coverage"] = r.rect_coverage;
  j["severity"] = severity_name(r.params.severity);
  j["blur_sigma"] = r.params.blur_sigma;
  j["brightness"] = r.params.brightness;
  j["contrast"] = r.params.contrast;
  j["label"] = r.label;
  return j.dump();
}

SampleRecord record_from_json(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    SampleRecord r;
    r.index = j.at("index").get<int>();
    r.source = j.at("source").get<int>();
    r.source_path = j.at("source_path").get<std::string>();
    const auto kind = j.at("mask_kind").get<std::string>();
    if (kind == "rectangular") r.mask_kind = imaging::MaskKind::rectangular;
    else if (kind == "irregular_brush") r.mask_kind = imaging::MaskKind::irregular_brush;
    else throw FormatError("unknown mask_kind '" + kind + "'");
    r.mask_seed = j.at("mask_seed").get<std::uint64_t>();
    r.rect_coverage = j.at("rect_coverage").get<double>();
    r.params.severity = parse_severity(j.at("severity").get<std::string>());
    r.params.blur_sigma = j.at("blur_sigma").get<double>();
    r.params.brightness = j.at("brightness").get<double>();
    r.params.contrast = j.at("contrast").get<double>();
    r.label = j.at("label").get<float>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad manifest record: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad manifest record: ") + e.what());
  }
}

void write_manifest(const std::vector<SampleRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) out << record_to_json(r) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<SampleRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<SampleRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(line));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cycinpaint::distortion
