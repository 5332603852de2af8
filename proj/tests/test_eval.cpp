#include <gtest/gtest.h>

#include "dirforge/eval.hpp"
#include "dirforge/world.hpp"
#include "support.hpp"

using namespace dirforge;
using namespace dirforge::world;

namespace {

struct Fixture {
  DiffusionModel m = dirforge::testing::tiny_model(1);
  Encoder enc = dirforge::testing::tiny_encoder(1, 4);
};

DirectionEmbedding dir_of(const std::string& name, std::uint64_t seed) {
  Rng rng(seed);
  DirectionEmbedding d;
  d.name = name;
  d.d = dirforge::testing::random_tensor(rng, {4}).values();
  return d;
}

}  // namespace

TEST(Distance, IdenticalBatchesAreZero) {
  Fixture f;
  Rng rng(2);
  const Tensor x = dirforge::testing::random_tensor(rng, {5, 256}, 0, 1);
  const auto r = distance_report(f.enc, x, x, "same");
  EXPECT_EQ(r.pixel_l2, 0.0);
  EXPECT_EQ(r.embedding_l2, 0.0);
  EXPECT_EQ(r.count, 5u);
  EXPECT_THROW(distance_report(f.enc, x, dirforge::testing::random_tensor(rng, {4, 256})), ShapeError);
}

TEST(Distance, PixelL2IsMeanPerPairNorm) {
  Fixture f;
  const Tensor a = Tensor::zeros({2, 256});
  std::vector<double> v(512, 0.0);
  v[0] = 3;
  v[1] = 4;
  const auto r = distance_report(f.enc, a, Tensor::from({2, 256}, v));
  EXPECT_DOUBLE_EQ(r.pixel_l2, 2.5);
}

TEST(Cells, OffTargetAndDominance) {
  std::array<double, kAttrs> s{};
  s[kRadius] = 0.2;
  s[kIntensity] = -0.05;
  s[kAspect] = 0.01;
  s[kCenterX] = 0.03;
  s[kCenterY] = 0.9;  // unmeasured columns do not count
  EXPECT_NEAR(off_target_mean(s, kRadius), (0.05 + 0.01 + 0.03) / 3, 1e-15);
  EXPECT_TRUE(dominant(s, kRadius));
  s[kRadius] = 0.05;
  EXPECT_FALSE(dominant(s, kRadius));
  s[kRadius] = -0.3;
  EXPECT_FALSE(dominant(s, kRadius));
  const auto cols = measured_attributes();
  EXPECT_EQ(cols, (std::vector<std::size_t>{kRadius, kIntensity, kAspect, kCenterX}));
}

TEST(Cells, ZeroScaleEditsShiftNothing) {
  Fixture f;
  const EvalContext ctx = make_eval_context(f.m, f.enc, 12, 3);
  ASSERT_EQ(ctx.base_images.dim(0), 12u);
  const auto d = dir_of("radius", 4);
  const CellResult cell = evaluate_edits(ctx, {make_edit(d, 0.0)});
  for (double v : cell.shift) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(cell.distance.pixel_l2, 0.0);
  EXPECT_EQ(cell.images.values(), ctx.base_images.values());
}

TEST(Rescoring, ShapeAndOrder) {
  Fixture f;
  const EvalContext ctx = make_eval_context(f.m, f.enc, 6, 5);
  std::vector<DirectionEmbedding> dirs;
  for (const auto& g : registry()) dirs.push_back(dir_of(g.name, dirs.size() + 10));
  const auto r = rescoring(ctx, dirs, {0.0, 0.0, 0.0, 0.0});
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(r.rows, (std::vector<std::string>{"radius", "intensity", "aspect", "center_x"}));
  EXPECT_EQ(r.entries.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(off_target_mean(r, i), 0.0);
    EXPECT_FALSE(row_dominant(r, i));
  }
  EXPECT_THROW(rescoring(ctx, dirs, {1.0}), InvalidArgument);
}

TEST(Ablation, UnknownAxisIsRejected) {
  Fixture f;
  const EvalContext ctx = make_eval_context(f.m, f.enc, 2, 1);
  const auto d = dir_of("radius", 1);
  EXPECT_THROW(ablate("steps", ctx, "radius", d, 1.0, [&](std::size_t, double, double) { return d; }), InvalidArgument);
}

TEST(Ablation, TimestepCellsUseTheirWindows) {
  Fixture f;
  const EvalContext ctx = make_eval_context(f.m, f.enc, 4, 2);
  const auto d = dir_of("radius", 1);
  const auto rep = ablate("timesteps", ctx, "radius", d, 1.0, [&](std::size_t, double, double) { return d; });
  ASSERT_EQ(rep.cells.size(), 3u);
  EXPECT_EQ(rep.cells[0].window_hi, 1.0);
  EXPECT_EQ(rep.cells[1].window_hi, 0.4);
  EXPECT_EQ(rep.cells[2].window_lo, 0.6);
}

TEST(Calibration, PicksFromGrid) {
  Fixture f;
  const EvalContext ctx = make_eval_context(f.m, f.enc, 4, 7);
  const auto d = dir_of("radius", 3);
  const std::vector<double> grid{0.5, 1, 2};
  const double l = calibrate_lambda_e(ctx, d, grid, 1e9);
  EXPECT_NE(std::find(grid.begin(), grid.end(), l), grid.end());
  EXPECT_EQ(calibrate_lambda_e(ctx, d, grid, -1e9), 0.5);
}
