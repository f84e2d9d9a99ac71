#pragma once

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kl/common.hpp"
#include "kl/slit.hpp"

namespace kl {

inline constexpr const char* kToolVersion = "kl 0.1.0";

/// Formats a double with 17 significant digits (lossless round trip).
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// CSV emitter; numeric cells are written with 17 significant digits so that
/// re-parsing reproduces the doubles exactly. Empty optionals become empty cells.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns)
      : out_(path) {
    if (!out_) throw Error(ErrorCode::ConfigInvalid, "cannot open " + path);
    for (std::size_t i = 0; i < columns.size(); ++i)
      out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
  }

  void row(const std::vector<std::optional<double>>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ",";
      if (cells[i]) out_ << fmt_g17(*cells[i]);
    }
    out_ << "\n";
  }

  void row(const std::vector<double>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ",";
      out_ << fmt_g17(cells[i]);
    }
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> rows;
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open " + path);
  CsvTable t;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (header) {
      t.columns = cells;
      header = false;
      continue;
    }
    std::vector<std::optional<double>> row;
    for (const auto& c : cells)
      row.push_back(c.empty() ? std::nullopt : std::optional<double>(std::stod(c)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Slit configurations serialize as JSON arrays of {y, x, xr}; reading runs the
/// full validation.
inline nlohmann::json slits_to_json(const SlitVector& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (int j = 0; j < s.count(); ++j)
    arr.push_back({{"y", s.y(j)}, {"x", s.x(j)}, {"xr", s.xr(j)}});
  return arr;
}

inline SlitVector slits_from_json(const nlohmann::json& arr) {
  if (!arr.is_array())
    throw Error(ErrorCode::ConfigInvalid, "slits: expected a JSON array");
  const int n = static_cast<int>(arr.size());
  std::vector<double> v(3 * n);
  for (int j = 0; j < n; ++j) {
    const auto& e = arr[j];
    if (!e.contains("y") || !e.contains("x") || !e.contains("xr"))
      throw Error(ErrorCode::ConfigInvalid,
                  "slits[" + std::to_string(j) + "]: need fields y, x, xr");
    v[j] = e["y"].get<double>();
    v[n + j] = e["x"].get<double>();
    v[2 * n + j] = e["xr"].get<double>();
  }
  return SlitVector::validate(std::move(v));
}

inline SlitVector slits_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (j.is_object() && j.contains("slits")) j = j["slits"];
  return slits_from_json(j);
}

inline std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

inline std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct ArtifactEntry {
  std::string path;  // relative to the manifest directory
  std::uint64_t bytes;
  std::string checksum;  // fnv1a-64 hex of file contents
};

/// Run manifest, written atomically at run end. Timestamps live only in the
/// manifest itself and never enter any checksum, so reruns with the same seed
/// produce byte-identical data files.
struct RunManifest {
  std::string scenario_hash;
  std::string tool_version = kToolVersion;
  std::string started_at, finished_at;
  std::string status;  // "success" | "invariant-failure" | "error"
  std::vector<ArtifactEntry> artifacts;

  void add_artifact(const std::filesystem::path& dir, const std::string& rel) {
    const auto full = dir / rel;
    artifacts.push_back(
        {rel, std::filesystem::file_size(full), hex64(file_checksum(full.string()))});
  }

  nlohmann::json to_json() const {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& e : artifacts)
      a.push_back({{"path", e.path}, {"bytes", e.bytes}, {"checksum", e.checksum}});
    return {{"scenario_hash", scenario_hash}, {"tool_version", tool_version},
            {"started_at", started_at},       {"finished_at", finished_at},
            {"status", status},               {"artifacts", a}};
  }

  void write(const std::filesystem::path& dir) const {
    const auto path = dir / "manifest.json";
    const auto tmp = dir / "manifest.json.tmp";
    {
      std::ofstream out(tmp);
      out << to_json().dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
  }
};

/// Re-checks every artifact checksum recorded in a manifest file.
inline bool verify_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open manifest");
  nlohmann::json j;
  in >> j;
  const auto dir = manifest_path.parent_path();
  for (const auto& e : j["artifacts"]) {
    const auto full = dir / e["path"].get<std::string>();
    if (!std::filesystem::exists(full)) return false;
    if (hex64(file_checksum(full.string())) != e["checksum"].get<std::string>())
      return false;
  }
  return true;
}

/// Canonical hash of a scenario document (key-sorted dump, no timestamps).
inline std::string scenario_hash(const nlohmann::json& scenario) {
  return hex64(fnv1a(scenario.dump()));
}

}  // namespace kl
