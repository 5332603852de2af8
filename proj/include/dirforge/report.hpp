#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dirforge/config.hpp"
#include "json.hpp"

namespace dirforge {

// Fixed-precision number text, identical on every run.
std::string fmt_num(double v, int digits = 6);

// Heatmap of a rows x cols matrix with labels and the values printed in
// each cell. Colour is a diverging scale symmetric around zero.
std::string heatmap_svg(const std::string& title, const std::vector<std::string>& rows,
                        const std::vector<std::string>& cols, const std::vector<std::vector<double>>& values,
                        const Provenance& prov);
// Grouped bars: values[s][g] is series s at group g.
std::string bar_svg(const std::string& title, const std::vector<std::string>& groups,
                    const std::vector<std::string>& series, const std::vector<std::vector<double>>& values,
                    const Provenance& prov);
// Polylines: ys[s][i] at x[i].
std::string line_svg(const std::string& title, const std::vector<double>& x, const std::vector<std::string>& series,
                     const std::vector<std::vector<double>>& ys, const Provenance& prov);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string render(const Provenance& prov) const;
};

// 16x16 images as a tiled 16-bit binary PGM, pixel values mapped from
// [0, pixel_max] to [0, 65535]; values outside are clipped.
std::string pgm_tiles(const std::vector<std::vector<double>>& images, std::size_t side, std::size_t per_row,
                      double pixel_max, const Provenance& prov);

// Writes files under a root and keeps an index of everything written.
class ArtifactTree {
 public:
  ArtifactTree(std::filesystem::path root, Provenance prov);

  const std::filesystem::path& root() const { return root_; }
  const Provenance& provenance() const { return prov_; }

  // Paths are relative to the root. Throws Error when the file cannot be
  // written.
  std::filesystem::path write(const std::string& rel, const std::string& content, const std::string& kind);
  std::filesystem::path write_json(const std::string& rel, nlohmann::json j, const std::string& kind);
  // Records a file written by someone else (checkpoints).
  void record(const std::string& rel, const std::string& kind);

  // index.json: provenance plus {path, kind, bytes, fnv1a64} per file,
  // sorted by path.
  std::filesystem::path finish();
  std::vector<std::string> files() const;

 private:
  std::filesystem::path root_;
  Provenance prov_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

struct ReportBundle {
  std::string name;
  nlohmann::json data;
  CsvTable csv;
  // (file suffix, svg text); the suffix may be empty.
  std::vector<std::pair<std::string, std::string>> svgs;
};

// <name>.json, <name>.csv, <name>[_suffix].svg per bundle, then index.json.
void emit_report(const std::vector<ReportBundle>& reports, ArtifactTree& tree);
void emit_report(const std::vector<ReportBundle>& reports, const std::filesystem::path& outdir, const Provenance& prov);

struct VerifyResult {
  bool ok = true;
  std::size_t checked = 0;
  std::vector<std::string> problems;
};

// Checks every file listed in index.json: present, same size and FNV hash,
// and carrying the same config hash and seed as index.json itself.
VerifyResult verify_tree(const std::filesystem::path& root);

}  // namespace dirforge
