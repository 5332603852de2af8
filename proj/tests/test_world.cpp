#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "dirforge/errors.hpp"
#include "dirforge/world.hpp"

using namespace dirforge;
using namespace dirforge::world;

namespace {

StyleVector centered() {
  StyleVector s;
  s[kCenterX] = 0.5;
  s[kCenterY] = 0.5;
  s[kRadius] = 0.12;
  s[kIntensity] = 0.6;
  s[kAspect] = 1.0;
  s[kBackground] = 0.1;
  return s;
}

bool interior(const StyleVector& s) {
  const double rx = 2.5 * s[kRadius], ry = 2.5 * s[kRadius] * s[kAspect];
  return s[kCenterX] - rx >= 0 && s[kCenterX] + rx <= 1 && s[kCenterY] - ry >= 0 && s[kCenterY] + ry <= 1;
}

}  // namespace

TEST(Render, MatchesClosedFormAtPixelCentres) {
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const StyleVector s = sample_style(rng);
    const Image x = render(s);
    ASSERT_EQ(x.size(), kPixels);
    for (std::size_t row = 0; row < kSide; ++row)
      for (std::size_t col = 0; col < kSide; ++col) {
        const double u = (col + 0.5) / kSide, v = (row + 0.5) / kSide;
        const double du = (u - s[kCenterX]) / s[kRadius], dv = (v - s[kCenterY]) / (s[kRadius] * s[kAspect]);
        const double want = std::min(kPixelMax, s[kBackground] + s[kIntensity] * std::exp(-(du * du + dv * dv) / 2));
        EXPECT_NEAR(x[row * kSide + col], want, 1e-15);
      }
  }
}

TEST(Render, CenteredRoundBlobIsSymmetric) {
  const Image x = render(centered());
  for (std::size_t r = 0; r < kSide; ++r)
    for (std::size_t c = 0; c < kSide; ++c) {
      EXPECT_NEAR(x[r * kSide + c], x[r * kSide + (kSide - 1 - c)], 1e-15);
      EXPECT_NEAR(x[r * kSide + c], x[(kSide - 1 - r) * kSide + c], 1e-15);
      EXPECT_NEAR(x[r * kSide + c], x[c * kSide + r], 1e-15);
    }
}

TEST(Render, ClampReportsMovedFields) {
  StyleVector s = centered();
  s[kRadius] = 0.5;
  s[kBackground] = -1.0;
  ClampReport rep;
  const Image x = render(s, &rep);
  EXPECT_TRUE(rep.any());
  EXPECT_TRUE(rep.clamped[kRadius]);
  EXPECT_TRUE(rep.clamped[kBackground]);
  EXPECT_FALSE(rep.clamped[kCenterX]);
  for (double p : x) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, kPixelMax);
  }
}

TEST(Pairs, EditedImagesRenderShiftedStyles) {
  for (const auto& dir : registry()) {
    const PairSet p = make_pairs(5, 30, dir);
    ASSERT_EQ(p.input.size(), 30u);
    for (std::size_t i = 0; i < 30; ++i) {
      for (std::size_t a = 0; a < kAttrs; ++a) EXPECT_DOUBLE_EQ(p.edited_styles[i][a], p.styles[i][a] + dir.delta[a]);
      ClampReport rep;
      EXPECT_EQ(p.edited[i], render(p.edited_styles[i], &rep));
      EXPECT_FALSE(rep.any()) << dir.name;
      EXPECT_EQ(p.input[i], render(p.styles[i]));
    }
  }
}

TEST(Pairs, SameSeedSameSet) {
  const auto& dir = find_direction("aspect");
  EXPECT_EQ(make_pairs(3, 10, dir).input, make_pairs(3, 10, dir).input);
  EXPECT_NE(make_pairs(3, 10, dir).input, make_pairs(4, 10, dir).input);
}

TEST(Registry, FourDirectionsWithDistinctTargets) {
  ASSERT_EQ(registry().size(), 4u);
  EXPECT_EQ(find_direction("radius").target, kRadius);
  EXPECT_DOUBLE_EQ(find_direction("intensity").delta[kIntensity], 0.3);
  EXPECT_EQ(find_direction("center_x").target, kCenterX);
  EXPECT_THROW(find_direction("hue"), InvalidArgument);
  EXPECT_THROW(attr_index("hue"), InvalidArgument);
}

TEST(Oracle, ReadBackWithinFrozenTolerances) {
  std::ifstream in(DIRFORGE_FIXTURES "/oracle_tolerances.json");
  ASSERT_TRUE(in.good());
  const auto fx = nlohmann::json::parse(in);
  Rng rng(fx["seed"].get<std::uint64_t>());
  std::size_t seen = 0;
  while (seen < fx["count"].get<std::size_t>()) {
    const StyleVector s = sample_style(rng);
    if (!interior(s)) continue;
    ++seen;
    const auto est = read_attributes(render(s));
    ASSERT_EQ(est.confidence, 1.0);
    const auto err = normalized_shift(s, est.s);
    for (std::size_t a = 0; a < kAttrs; ++a) {
      const std::string name(attr_names()[a]);
      EXPECT_LE(std::abs(err[a]), fx["max_abs_normalized_error"][name].get<double>()) << name;
    }
  }
}

TEST(Oracle, DetectsEveryRenderedBlob) {
  Rng rng(17);
  int detected = 0;
  for (int i = 0; i < 1000; ++i) detected += read_attributes(render(sample_style(rng))).confidence > 0.5;
  EXPECT_GE(detected, 950);
}

TEST(Oracle, MonotoneAlongEachSweep) {
  // Aspect wobbles by under 1% of its range where the minor axis spans about
  // a pixel and where the blob reaches the frame edge; allow that much.
  const double slack = 0.01;
  for (std::size_t a : {kCenterX, kCenterY, kRadius, kIntensity, kAspect}) {
    StyleVector s = centered();
    double prev = -1e9;
    for (int j = 0; j <= 40; ++j) {
      s[a] = ranges()[a].lo + ranges()[a].span() * j / 40.0;
      const double v = read_attributes(render(s)).s[a] / ranges()[a].span();
      EXPECT_GE(v, prev - (a == kAspect ? slack : 0.0)) << attr_names()[a] << " step " << j;
      prev = v;
    }
  }
}

TEST(Oracle, ConstantImageHasNoBlob) {
  const auto est = read_attributes(Image(kPixels, 0.5));
  EXPECT_EQ(est.confidence, 0.0);
  EXPECT_DOUBLE_EQ(est.s[kBackground], 0.5);
  EXPECT_EQ(est.s[kRadius], 0.0);
}

TEST(Oracle, RejectsWrongSize) { EXPECT_THROW(read_attributes(Image(10, 0.0)), ShapeError); }

TEST(Oracle, NoiseFloorCoversReadNoise) {
  // Mean target read shift between a clean and a lightly perturbed copy of
  // 100 images; its standard error is what a null edit would show.
  const double floor = 0.01;
  Rng rng(21);
  for (std::size_t a : {kCenterX, kRadius, kIntensity, kAspect}) {
    std::vector<double> d;
    while (d.size() < 100) {
      const StyleVector s = sample_style(rng);
      Image x = render(s), y = x;
      for (double& p : y) p = std::clamp(p + 0.01 * rng.normal(), 0.0, kPixelMax);
      const auto ex = read_attributes(x), ey = read_attributes(y);
      if (ex.confidence < 1 || ey.confidence < 1) continue;
      d.push_back(normalized_shift(ex.s, ey.s)[a]);
    }
    double m = 0, v = 0;
    for (double x : d) m += x;
    m /= d.size();
    for (double x : d) v += (x - m) * (x - m);
    const double sem = std::sqrt(v / (d.size() - 1) / d.size());
    EXPECT_LE(sem, floor) << attr_names()[a];
  }
}
