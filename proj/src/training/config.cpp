#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "cycinpaint/core/errors.hpp"
#include "cycinpaint/training/training.hpp"

namespace cycinpaint::training {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

int to_int(const std::string& v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw ConfigError("");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(trim(item)));
  if (out.empty()) throw ConfigError("expected a comma-separated list, got '" + v + "'");
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

Pipeline parse_pipeline(const std::string& v) {
  if (v == "crg") return Pipeline::crg;
  if (v == "discriminator") return Pipeline::discriminator;
  if (v == "refiner") return Pipeline::refiner;
  throw ConfigError("unknown pipeline '" + v + "'");
}

OptimizerKind parse_optimizer(const std::string& v) {
  if (v == "adam") return OptimizerKind::adam;
  if (v == "rmsprop") return OptimizerKind::rmsprop;
  throw ConfigError("unknown optimizer '" + v + "'");
}

using Setter = std::function<void(TrainConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"pipeline", [](TrainConfig& c, const std::string& v) { c.pipeline = parse_pipeline(v); }},
      {"epochs", [](TrainConfig& c, const std::string& v) { c.epochs = to_int(v); }},
      {"batch_size", [](TrainConfig& c, const std::string& v) { c.batch_size = to_int(v); }},
      {"optimizer", [](TrainConfig& c, const std::string& v) { c.optimizer = parse_optimizer(v); }},
      {"lr", [](TrainConfig& c, const std::string& v) { c.lr = to_double(v); }},
      {"beta1", [](TrainConfig& c, const std::string& v) { c.beta1 = to_double(v); }},
      {"beta2", [](TrainConfig& c, const std::string& v) { c.beta2 = to_double(v); }},
      {"rho", [](TrainConfig& c, const std::string& v) { c.rho = to_double(v); }},
      {"eps", [](TrainConfig& c, const std::string& v) { c.eps = to_double(v); }},
      {"plateau_patience", [](TrainConfig& c, const std::string& v) { c.plateau_patience = to_int(v); }},
      {"plateau_factor", [](TrainConfig& c, const std::string& v) { c.plateau_factor = to_double(v); }},
      {"augment_shift", [](TrainConfig& c, const std::string& v) { c.augment_shift = to_bool(v); }},
      {"augment_flip", [](TrainConfig& c, const std::string& v) { c.augment_flip = to_bool(v); }},
      {"shift_fraction", [](TrainConfig& c, const std::string& v) { c.shift_fraction = to_double(v); }},
      {"val_fraction", [](TrainConfig& c, const std::string& v) { c.val_fraction = to_double(v); }},
      {"data_dir", [](TrainConfig& c, const std::string& v) { c.data_dir = v; }},
      {"out_dir", [](TrainConfig& c, const std::string& v) { c.out_dir = v; }},
      {"seed", [](TrainConfig& c, const std::string& v) { c.seed = to_u64(v); }},
      {"encoder_epochs", [](TrainConfig& c, const std::string& v) { c.encoder_epochs = to_int(v); }},
      {"num_images", [](TrainConfig& c, const std::string& v) { c.num_images = to_int(v); }},
      {"dataset_total", [](TrainConfig& c, const std::string& v) { c.dataset_total = to_int(v); }},
      {"refiner_cycles", [](TrainConfig& c, const std::string& v) { c.refiner_cycles = to_int(v); }},
      {"extractor", [](TrainConfig& c, const std::string& v) { c.extractor = v; }},
      {"arch.resolution", [](TrainConfig& c, const std::string& v) { c.arch.resolution = to_int(v); }},
      {"arch.latent_dim", [](TrainConfig& c, const std::string& v) { c.arch.latent_dim = to_int(v); }},
      {"arch.base_channels", [](TrainConfig& c, const std::string& v) { c.arch.base_channels = to_int(v); }},
      {"arch.max_channels", [](TrainConfig& c, const std::string& v) { c.arch.max_channels = to_int(v); }},
      {"arch.disc_channels", [](TrainConfig& c, const std::string& v) { c.arch.disc_channels = to_int_list(v); }},
      {"arch.disc_dropout",
       [](TrainConfig& c, const std::string& v) { c.arch.disc_dropout = static_cast<float>(to_double(v)); }},
      {"arch.refiner_resolution",
       [](TrainConfig& c, const std::string& v) { c.arch.refiner_resolution = to_int(v); }},
      {"arch.refiner_channels",
       [](TrainConfig& c, const std::string& v) { c.arch.refiner_channels = to_int_list(v); }},
  };
  return table;
}

}  // namespace

std::string_view pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::crg:
      return "crg";
    case Pipeline::discriminator:
      return "discriminator";
    case Pipeline::refiner:
      return "refiner";
  }
  return "crg";
}

std::string_view optimizer_name(OptimizerKind o) { return o == OptimizerKind::adam ? "adam" : "rmsprop"; }

TrainConfig TrainConfig::defaults(Pipeline p) {
  TrainConfig c;
  c.pipeline = p;
  switch (p) {
    case Pipeline::discriminator:
      c.epochs = 300;
      c.batch_size = 128;
      c.optimizer = OptimizerKind::rmsprop;
      c.lr = 1e-4;
      c.rho = 0.9;
      c.eps = 1e-8;
      c.plateau_patience = 15;
      c.plateau_factor = 2.0;
      c.dataset_total = 6000;
      c.num_images = 2000;
      break;
    case Pipeline::refiner:
      c.epochs = 100;
      c.batch_size = 16;
      c.optimizer = OptimizerKind::adam;
      c.lr = 2e-4;
      c.augment_shift = true;
      c.augment_flip = true;
      c.num_images = 1000;
      break;
    case Pipeline::crg:
      c.epochs = 40;
      c.encoder_epochs = 40;
      c.batch_size = 64;
      c.optimizer = OptimizerKind::adam;
      c.lr = 2e-4;
      c.beta1 = 0.5;
      c.augment_flip = true;
      c.num_images = 3000;
      break;
  }
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (plateau_patience < 0) throw ConfigError("plateau_patience must be non-negative");
  if (!(plateau_factor > 1.0)) throw ConfigError("plateau_factor must exceed 1");
  if (!(shift_fraction >= 0.0 && shift_fraction < 0.5)) throw ConfigError("shift_fraction must lie in [0, 0.5)");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
  if (pipeline == Pipeline::crg && encoder_epochs < 1) throw ConfigError("encoder_epochs must be at least 1");
  arch.validate();
}

TrainConfig parse_config(std::istream& in, TrainConfig base, const std::string& source) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value, got '" + body + "'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + ": unknown key '" + key + "'");
    try {
      it->second(base, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + key + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in, std::move(base), path.string());
}

std::string describe(const TrainConfig& c) {
  std::ostringstream o;
  o << "pipeline=" << pipeline_name(c.pipeline) << '\n'
    << "epochs=" << c.epochs << '\n'
    << "batch_size=" << c.batch_size << '\n'
    << "optimizer=" << optimizer_name(c.optimizer) << '\n'
    << "lr=" << c.lr << '\n'
    << "beta1=" << c.beta1 << '\n'
    << "beta2=" << c.beta2 << '\n'
    << "rho=" << c.rho << '\n'
    << "eps=" << c.eps << '\n'
    << "plateau_patience=" << c.plateau_patience << '\n'
    << "plateau_factor=" << c.plateau_factor << '\n'
    << "augment_shift=" << (c.augment_shift ? "true" : "false") << '\n'
    << "augment_flip=" << (c.augment_flip ? "true" : "false") << '\n'
    << "shift_fraction=" << c.shift_fraction << '\n'
    << "val_fraction=" << c.val_fraction << '\n'
    << "data_dir=" << c.data_dir << '\n'
    << "out_dir=" << c.out_dir << '\n'
    << "seed=" << c.seed << '\n'
    << "encoder_epochs=" << c.encoder_epochs << '\n'
    << "num_images=" << c.num_images << '\n'
    << "dataset_total=" << c.dataset_total << '\n'
    << "refiner_cycles=" << c.refiner_cycles << '\n'
    << "extractor=" << c.extractor << '\n'
    << "arch.resolution=" << c.arch.resolution << '\n'
    << "arch.latent_dim=" << c.arch.latent_dim << '\n'
    << "arch.base_channels=" << c.arch.base_channels << '\n'
    << "arch.max_channels=" << c.arch.max_channels << '\n'
    << "arch.disc_channels=" << join(c.arch.disc_channels) << '\n'
    << "arch.disc_dropout=" << c.arch.disc_dropout << '\n'
    << "arch.refiner_resolution=" << c.arch.refiner_resolution << '\n'
    << "arch.refiner_channels=" << join(c.arch.refiner_channels) << '\n';
  return o.str();
}

}  // namespace cycinpaint::training
