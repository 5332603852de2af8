#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dirforge/config.hpp"
#include "dirforge/report.hpp"

using namespace dirforge;
namespace fs = std::filesystem;

namespace {

Provenance prov() {
  Provenance p;
  p.config_hash = 0xabcdef;
  p.seed = 3;
  return p;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dirforge_rep_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Format, NumbersAreShortAndSignless) {
  EXPECT_EQ(fmt_num(-0.0), "0");
  EXPECT_EQ(fmt_num(0.125), "0.125");
  EXPECT_EQ(fmt_num(1.0 / 3.0, 3), "0.333");
}

TEST(Charts, HeatmapIsDeterministicAndLabelled) {
  const std::vector<std::vector<double>> v{{0.2, -0.01}, {0.03, 0.15}};
  const auto a = heatmap_svg("effects", {"radius", "intensity"}, {"radius", "intensity"}, v, prov());
  EXPECT_EQ(a, heatmap_svg("effects", {"radius", "intensity"}, {"radius", "intensity"}, v, prov()));
  EXPECT_EQ(a.rfind("<!-- " + prov().line() + " -->", 0), 0u);
  for (const char* s : {"radius", "intensity", "0.2", "-0.01", "0.15", "</svg>"}) EXPECT_NE(a.find(s), std::string::npos) << s;
}

TEST(Charts, BarsAndLinesCarryStamp) {
  const auto b = bar_svg("t", {"a", "b"}, {"s"}, {{1.0, -2.0}}, prov());
  const auto l = line_svg("t", {-1, 0, 1}, {"radius"}, {{0.1, 0.2, 0.3}}, prov());
  EXPECT_NE(b.find(prov().line()), std::string::npos);
  EXPECT_NE(l.find("<polyline"), std::string::npos);
}

TEST(Csv, StampLineThenHeaderThenRowsInOrder) {
  CsvTable t{{"row", "radius"}, {{"b", "1"}, {"a", "2"}}};
  EXPECT_EQ(t.render(prov()), "# " + prov().line() + "\nrow,radius\nb,1\na,2\n");
}

TEST(Pgm, HeaderAndClippedPixels) {
  const std::vector<std::vector<double>> imgs{std::vector<double>(256, 2.0), std::vector<double>(256, -1.0)};
  const auto s = pgm_tiles(imgs, 16, 2, 1.2, prov());
  EXPECT_EQ(s.rfind("P5\n", 0), 0u);
  EXPECT_NE(s.find(prov().line()), std::string::npos);
  // Two tiles side by side with a one-pixel gutter.
  EXPECT_NE(s.find("33 16\n65535\n"), std::string::npos);
  const std::size_t body = s.size() - 33 * 16 * 2;
  EXPECT_EQ(static_cast<unsigned char>(s[body]), 0xff);
  EXPECT_EQ(static_cast<unsigned char>(s[body + 2 * 17]), 0x00);
}

TEST(Tree, EmptyReportStillWritesIndex) {
  const fs::path root = temp_dir("empty");
  emit_report({}, root, prov());
  ASSERT_TRUE(fs::exists(root / "index.json"));
  const auto idx = nlohmann::json::parse(slurp(root / "index.json"));
  EXPECT_TRUE(idx["files"].empty());
  EXPECT_EQ(idx["provenance"]["seed"], 3);
  EXPECT_TRUE(verify_tree(root).ok);
}

TEST(Tree, VerifyCatchesTampering) {
  const fs::path root = temp_dir("tamper");
  ReportBundle b{"rescoring", {{"x", 1}}, CsvTable{{"a"}, {{"1"}}}, {{"", bar_svg("t", {"a"}, {"s"}, {{1.0}}, prov())}}};
  emit_report({b}, root, prov());
  const auto ok = verify_tree(root);
  EXPECT_TRUE(ok.ok);
  EXPECT_EQ(ok.checked, 3u);
  {
    std::ofstream out(root / "rescoring.csv", std::ios::app);
    out << "2\n";
  }
  const auto bad = verify_tree(root);
  EXPECT_FALSE(bad.ok);
  ASSERT_FALSE(bad.problems.empty());
  EXPECT_NE(bad.problems[0].find("rescoring.csv"), std::string::npos);
}

TEST(Tree, VerifyCatchesForeignStamp) {
  const fs::path root = temp_dir("foreign");
  ArtifactTree tree(root, prov());
  Provenance other = prov();
  other.seed = 4;
  tree.write("a.csv", CsvTable{{"a"}, {}}.render(other), "table");
  tree.finish();
  EXPECT_FALSE(verify_tree(root).ok);
}

TEST(Config, HashIsStableAndIgnoresOutputRoot) {
  RunConfig a, b;
  b.out_root = "/elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 1;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(parse_hash_hex(hash_hex(config_hash(a))), config_hash(a));
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  RunConfig c;
  c.seed = 9;
  c.window_hi = 0.5;
  const RunConfig back = config_from_json(to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  try {
    config_from_json(nlohmann::json{{"edit", {{"windw", {0, 1}}}}});
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("edit.windw"), std::string::npos) << e.what();
  }
  EXPECT_EQ(config_from_json(nlohmann::json{{"seed", 5}}).seed, 5u);
}
