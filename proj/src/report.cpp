#include "dirforge/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dirforge/checkpoint.hpp"
#include "dirforge/errors.hpp"

namespace dirforge {

using nlohmann::json;
namespace fs = std::filesystem;

std::string fmt_num(double v, int digits) {
  if (v == 0.0) v = 0.0;  // folds -0 into 0
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string px(double v) { return fmt_num(std::round(v * 100.0) / 100.0, 8); }

std::string svg_open(double w, double h, const std::string& title, const Provenance& prov) {
  std::ostringstream o;
  o << "<!-- " << prov.line() << " -->\n";
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(w) << "\" height=\"" << px(h) << "\" viewBox=\"0 0 "
    << px(w) << ' ' << px(h) << "\" font-family=\"monospace\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << px(w / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << esc(title) << "</text>\n";
  return o.str();
}

struct Axis {
  double lo, hi;
  double map(double v, double a, double b) const { return hi == lo ? (a + b) / 2 : a + (v - lo) / (hi - lo) * (b - a); }
};

Axis value_axis(const std::vector<std::vector<double>>& values, bool include_zero) {
  double lo = include_zero ? 0.0 : 1e300, hi = include_zero ? 0.0 : -1e300;
  for (const auto& s : values)
    for (double v : s)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  if (lo > hi) lo = hi = 0.0;
  if (lo == hi) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - (lo < 0 || !include_zero ? pad : 0.0), hi + pad};
}

void y_ticks(std::ostringstream& o, const Axis& ax, double x0, double x1, double top, double bottom) {
  for (int i = 0; i <= 4; ++i) {
    const double v = ax.lo + (ax.hi - ax.lo) * i / 4.0;
    const double y = ax.map(v, bottom, top);
    o << "<line x1=\"" << px(x0) << "\" y1=\"" << px(y) << "\" x2=\"" << px(x1) << "\" y2=\"" << px(y)
      << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << px(x0 - 4) << "\" y=\"" << px(y + 4) << "\" text-anchor=\"end\">" << fmt_num(v, 3) << "</text>\n";
  }
}

void legend(std::ostringstream& o, const std::vector<std::string>& series, double x, double y) {
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double yy = y + 16.0 * static_cast<double>(s);
    o << "<rect x=\"" << px(x) << "\" y=\"" << px(yy - 9) << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[s % 6]
      << "\"/>\n";
    o << "<text x=\"" << px(x + 14) << "\" y=\"" << px(yy) << "\">" << esc(series[s]) << "</text>\n";
  }
}

}  // namespace

std::string heatmap_svg(const std::string& title, const std::vector<std::string>& rows,
                        const std::vector<std::string>& cols, const std::vector<std::vector<double>>& values,
                        const Provenance& prov) {
  const double cw = 90, ch = 36, left = 120, top = 56;
  const double w = left + cw * static_cast<double>(cols.size()) + 20;
  const double h = top + ch * static_cast<double>(rows.size()) + 20;
  double vmax = 0.0;
  for (const auto& r : values)
    for (double v : r)
      if (std::isfinite(v)) vmax = std::max(vmax, std::abs(v));
  if (vmax == 0.0) vmax = 1.0;
  std::ostringstream o;
  o << svg_open(w, h, title, prov);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    o << "<text x=\"" << px(left + cw * (static_cast<double>(c) + 0.5)) << "\" y=\"" << px(top - 8)
      << "\" text-anchor=\"middle\">" << esc(cols[c]) << "</text>\n";
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double y = top + ch * static_cast<double>(r);
    o << "<text x=\"" << px(left - 8) << "\" y=\"" << px(y + ch / 2 + 4) << "\" text-anchor=\"end\">" << esc(rows[r])
      << "</text>\n";
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double v = r < values.size() && c < values[r].size() ? values[r][c] : 0.0;
      const double a = std::clamp(std::abs(v) / vmax, 0.0, 1.0);
      const int fade = static_cast<int>(std::lround(255.0 * (1.0 - a)));
      char fill[16];
      if (v >= 0)
        std::snprintf(fill, sizeof(fill), "#ff%02x%02x", fade, fade);
      else
        std::snprintf(fill, sizeof(fill), "#%02x%02xff", fade, fade);
      const double x = left + cw * static_cast<double>(c);
      o << "<rect x=\"" << px(x) << "\" y=\"" << px(y) << "\" width=\"" << px(cw) << "\" height=\"" << px(ch)
        << "\" fill=\"" << fill << "\" stroke=\"#888\"/>\n";
      o << "<text x=\"" << px(x + cw / 2) << "\" y=\"" << px(y + ch / 2 + 4) << "\" text-anchor=\"middle\">"
        << fmt_num(v, 3) << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

std::string bar_svg(const std::string& title, const std::vector<std::string>& groups,
                    const std::vector<std::string>& series, const std::vector<std::vector<double>>& values,
                    const Provenance& prov) {
  const double left = 70, right = 150, top = 36, bottom = 50, plot_h = 240;
  const double gw = std::max(60.0, 24.0 * static_cast<double>(series.size()) + 20.0);
  const double w = left + gw * static_cast<double>(groups.size()) + right;
  const double h = top + plot_h + bottom;
  const Axis ax = value_axis(values, true);
  std::ostringstream o;
  o << svg_open(w, h, title, prov);
  const double y0 = top + plot_h;
  y_ticks(o, ax, left, left + gw * static_cast<double>(groups.size()), top, y0);
  const double zero = ax.map(0.0, y0, top);
  const double bw = (gw - 20.0) / static_cast<double>(std::max<std::size_t>(series.size(), 1));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = left + gw * static_cast<double>(g) + 10.0;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = s < values.size() && g < values[s].size() ? values[s][g] : 0.0;
      const double y = ax.map(v, y0, top);
      o << "<rect x=\"" << px(gx + bw * static_cast<double>(s)) << "\" y=\"" << px(std::min(y, zero)) << "\" width=\""
        << px(bw - 2) << "\" height=\"" << px(std::abs(zero - y)) << "\" fill=\"" << kPalette[s % 6] << "\"/>\n";
    }
    o << "<text x=\"" << px(gx + (gw - 20.0) / 2) << "\" y=\"" << px(y0 + 16) << "\" text-anchor=\"middle\">"
      << esc(groups[g]) << "</text>\n";
  }
  o << "<line x1=\"" << px(left) << "\" y1=\"" << px(zero) << "\" x2=\"" << px(left + gw * static_cast<double>(groups.size()))
    << "\" y2=\"" << px(zero) << "\" stroke=\"black\"/>\n";
  legend(o, series, w - right + 10, top + 10);
  o << "</svg>\n";
  return o.str();
}

std::string line_svg(const std::string& title, const std::vector<double>& x, const std::vector<std::string>& series,
                     const std::vector<std::vector<double>>& ys, const Provenance& prov) {
  const double left = 70, right = 150, top = 36, bottom = 40, plot_w = 420, plot_h = 240;
  const double w = left + plot_w + right, h = top + plot_h + bottom;
  const Axis ay = value_axis(ys, false);
  const Axis axx = value_axis({x}, false);
  std::ostringstream o;
  o << svg_open(w, h, title, prov);
  const double y0 = top + plot_h;
  y_ticks(o, ay, left, left + plot_w, top, y0);
  for (double xv : x) {
    const double xx = axx.map(xv, left, left + plot_w);
    o << "<text x=\"" << px(xx) << "\" y=\"" << px(y0 + 16) << "\" text-anchor=\"middle\">" << fmt_num(xv, 4)
      << "</text>\n";
  }
  for (std::size_t s = 0; s < ys.size(); ++s) {
    o << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 6] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < x.size() && i < ys[s].size(); ++i) {
      if (i) o << ' ';
      o << px(axx.map(x[i], left, left + plot_w)) << ',' << px(ay.map(ys[s][i], y0, top));
    }
    o << "\"/>\n";
    if (x.size() <= 32) {
      for (std::size_t i = 0; i < x.size() && i < ys[s].size(); ++i) {
        o << "<circle cx=\"" << px(axx.map(x[i], left, left + plot_w)) << "\" cy=\"" << px(ay.map(ys[s][i], y0, top))
          << "\" r=\"2.5\" fill=\"" << kPalette[s % 6] << "\"/>\n";
      }
    }
  }
  legend(o, series, left + plot_w + 10, top + 10);
  o << "</svg>\n";
  return o.str();
}

std::string CsvTable::render(const Provenance& prov) const {
  std::string out = "# " + prov.line() + "\n";
  auto cell = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + cell(r[i]);
    out += "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::string pgm_tiles(const std::vector<std::vector<double>>& images, std::size_t side, std::size_t per_row,
                      double pixel_max, const Provenance& prov) {
  if (per_row == 0) throw InvalidArgument("pgm_tiles: per_row must be positive");
  const std::size_t n = images.size();
  const std::size_t cols = std::min(per_row, std::max<std::size_t>(n, 1));
  const std::size_t rows = n == 0 ? 1 : (n + per_row - 1) / per_row;
  const std::size_t W = cols * (side + 1) - 1, H = rows * (side + 1) - 1;
  std::vector<std::uint16_t> pix(W * H, 0);
  for (std::size_t k = 0; k < n; ++k) {
    if (images[k].size() != side * side) throw ShapeError("pgm_tiles", {images[k].size()}, {side * side});
    const std::size_t oy = (k / per_row) * (side + 1), ox = (k % per_row) * (side + 1);
    for (std::size_t i = 0; i < side; ++i)
      for (std::size_t j = 0; j < side; ++j) {
        const double v = std::clamp(images[k][i * side + j] / pixel_max, 0.0, 1.0);
        pix[(oy + i) * W + ox + j] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      }
  }
  std::string out = "P5\n# " + prov.line() + "\n" + std::to_string(W) + " " + std::to_string(H) + "\n65535\n";
  for (std::uint16_t v : pix) {
    out += static_cast<char>(v >> 8);
    out += static_cast<char>(v & 0xff);
  }
  return out;
}

ArtifactTree::ArtifactTree(fs::path root, Provenance prov) : root_(std::move(root)), prov_(std::move(prov)) {}

fs::path ArtifactTree::write(const std::string& rel, const std::string& content, const std::string& kind) {
  const fs::path p = root_ / rel;
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw Error("write failed for " + p.string());
  record(rel, kind);
  return p;
}

fs::path ArtifactTree::write_json(const std::string& rel, json j, const std::string& kind) {
  j["provenance"] = prov_.to_json();
  return write(rel, j.dump(2) + "\n", kind);
}

void ArtifactTree::record(const std::string& rel, const std::string& kind) {
  for (auto& e : entries_)
    if (e.first == rel) {
      e.second = kind;
      return;
    }
  entries_.emplace_back(rel, kind);
}

std::vector<std::string> ArtifactTree::files() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.first);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error("cannot read " + p.string());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

fs::path ArtifactTree::finish() {
  auto sorted = entries_;
  std::sort(sorted.begin(), sorted.end());
  json files = json::array();
  for (const auto& [rel, kind] : sorted) {
    const std::string bytes = slurp(root_ / rel);
    files.push_back({{"path", rel}, {"kind", kind}, {"bytes", bytes.size()}, {"fnv1a64", hash_hex(fnv1a64(bytes))}});
  }
  json idx{{"files", files}, {"provenance", prov_.to_json()}};
  const fs::path p = root_ / "index.json";
  std::error_code ec;
  fs::create_directories(root_, ec);
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  const std::string text = idx.dump(2) + "\n";
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error("write failed for " + p.string());
  return p;
}

void emit_report(const std::vector<ReportBundle>& reports, ArtifactTree& tree) {
  for (const auto& r : reports) {
    tree.write_json(r.name + ".json", r.data, "report");
    if (!r.csv.header.empty()) tree.write(r.name + ".csv", r.csv.render(tree.provenance()), "table");
    for (const auto& [suffix, svg] : r.svgs)
      tree.write(r.name + (suffix.empty() ? "" : "_" + suffix) + ".svg", svg, "chart");
  }
}

void emit_report(const std::vector<ReportBundle>& reports, const fs::path& outdir, const Provenance& prov) {
  ArtifactTree tree(outdir, prov);
  emit_report(reports, tree);
  tree.finish();
}

namespace {

// Reads "config_hash=<hex> seed=<n>" out of a text stamp line.
bool parse_stamp_line(const std::string& text, std::string& hash, std::uint64_t& seed) {
  const auto h = text.find("config_hash=");
  const auto s = text.find(" seed=", h == std::string::npos ? 0 : h);
  if (h == std::string::npos || s == std::string::npos) return false;
  hash = text.substr(h + 12, 16);
  try {
    seed = std::stoull(text.substr(s + 6));
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

}  // namespace

VerifyResult verify_tree(const fs::path& root) {
  VerifyResult res;
  auto fail = [&](std::string msg) {
    res.ok = false;
    res.problems.push_back(std::move(msg));
  };
  json idx;
  try {
    idx = json::parse(slurp(root / "index.json"));
  } catch (const std::exception& e) {
    fail(std::string("index.json: ") + e.what());
    return res;
  }
  const std::string want_hash = idx["provenance"].value("config_hash", "");
  const std::uint64_t want_seed = idx["provenance"].value("seed", std::uint64_t{0});

  if (fs::exists(root / "config.json")) {
    try {
      const json cj = json::parse(slurp(root / "config.json"));
      const RunConfig rc = config_from_json(cj.at("config"));
      if (hash_hex(config_hash(rc)) != want_hash)
        fail("config.json: recomputed hash " + hash_hex(config_hash(rc)) + " differs from index " + want_hash);
    } catch (const std::exception& e) {
      fail(std::string("config.json: ") + e.what());
    }
  }

  for (const auto& f : idx.value("files", json::array())) {
    const std::string rel = f.value("path", "");
    ++res.checked;
    const fs::path p = root / rel;
    if (!fs::exists(p)) {
      fail(rel + ": missing");
      continue;
    }
    const std::string bytes = slurp(p);
    if (bytes.size() != f.value("bytes", std::size_t{0})) fail(rel + ": size differs from index");
    if (hash_hex(fnv1a64(bytes)) != f.value("fnv1a64", "")) fail(rel + ": content hash differs from index");
    std::string hash;
    std::uint64_t seed = 0;
    bool found = false;
    const std::string ext = p.extension().string();
    try {
      if (ext == ".json") {
        const json j = json::parse(bytes);
        if (j.contains("provenance")) {
          hash = j["provenance"].value("config_hash", "");
          seed = j["provenance"].value("seed", std::uint64_t{0});
          found = true;
        }
      } else if (ext == ".gtfw" || ext == ".gtd") {
        const Checkpoint ck = decode_checkpoint(std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
        if (ck.meta.contains("provenance")) {
          hash = ck.meta["provenance"].value("config_hash", "");
          seed = ck.meta["provenance"].value("seed", std::uint64_t{0});
          found = true;
        }
      } else {
        found = parse_stamp_line(bytes.substr(0, 512), hash, seed);
      }
    } catch (const std::exception& e) {
      fail(rel + ": unreadable (" + e.what() + ")");
      continue;
    }
    if (!found && f.value("kind", "") == "payload") {
      // Raw payloads are bound to the stamp through the index's content hash.
    } else if (!found) {
      fail(rel + ": no provenance stamp");
    } else if (hash != want_hash || seed != want_seed) {
      fail(rel + ": stamp " + hash + "/" + std::to_string(seed) + " differs from index " + want_hash + "/" +
           std::to_string(want_seed));
    }
  }
  return res;
}

}  // namespace dirforge
