#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace run_compare {

namespace fs = std::filesystem;

inline std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Files that differ (or exist on one side only) between two run directories,
/// ignoring wall-clock timings and service bookkeeping.
inline std::vector<std::string> diff(const fs::path& a, const fs::path& b,
                                     const std::set<std::string>& ignore = {"timings.json", "job.json"}) {
  std::set<std::string> names;
  for (const auto& dir : {a, b}) {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file()) names.insert(e.path().filename().string());
    }
  }
  std::vector<std::string> out;
  for (const auto& n : names) {
    if (ignore.count(n)) continue;
    if (!fs::exists(a / n) || !fs::exists(b / n) || read_all(a / n) != read_all(b / n)) out.push_back(n);
  }
  return out;
}

}  // namespace run_compare
