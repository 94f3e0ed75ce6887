// Copyright 2026 The tokenecon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TOKENECON_IO_HPP_
#define TOKENECON_IO_HPP_

// Artifact writing helpers. Every CSV starts with '#' metadata lines
// carrying schema_version, seed and the resolved config.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tokenecon/core.hpp"

namespace tokenecon {

inline constexpr int kArtifactSchemaVersion = 1;

// Shortest round-trip decimal; "inf", "-inf" and "nan" for non-finite values.
inline std::string fmt_num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return nlohmann::json(x).dump();
}

inline nlohmann::json json_num(double x) {
  if (std::isfinite(x)) return x;
  return fmt_num(x);
}

inline std::string csv_metadata(std::uint64_t seed, const nlohmann::json& config) {
  std::ostringstream os;
  os << "# schema_version: " << kArtifactSchemaVersion << '\n';
  os << "# seed: " << seed << '\n';
  os << "# config: " << config.dump() << '\n';
  return os.str();
}

class CsvWriter {
 public:
  CsvWriter(std::uint64_t seed, const nlohmann::json& config, const std::vector<std::string>& columns) {
    os_ << csv_metadata(seed, config);
    row(columns);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }

  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << content;
  if (!f) throw Error("write failed for " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct MeanCi {
  double mean = 0.0;
  double ci95 = 0.0;  // normal-approximation half-width
  double sd = 0.0;
  std::size_t n = 0;
};

inline MeanCi mean_ci(const std::vector<double>& xs) {
  MeanCi m;
  m.n = xs.size();
  if (xs.empty()) return m;
  double s = 0.0;
  for (double x : xs) s += x;
  m.mean = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    m.ci95 = 1.96 * m.sd / std::sqrt(static_cast<double>(xs.size()));
  }
  return m;
}

}  // namespace tokenecon

#endif  // TOKENECON_IO_HPP_
