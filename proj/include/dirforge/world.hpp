#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dirforge/rng.hpp"

namespace dirforge::world {

constexpr std::size_t kSide = 16;
constexpr std::size_t kPixels = kSide * kSide;
constexpr std::size_t kAttrs = 6;
constexpr double kPixelMax = 1.2;

enum Attr : std::size_t { kCenterX = 0, kCenterY, kRadius, kIntensity, kAspect, kBackground };

struct Range {
  double lo;
  double hi;
  double span() const { return hi - lo; }
};

const std::array<Range, kAttrs>& ranges();
// Column names used in every CSV and report: cx, cy, radius, intensity, aspect, bg.
const std::array<std::string_view, kAttrs>& attr_names();
std::size_t attr_index(std::string_view name);

using Image = std::vector<double>;

struct StyleVector {
  std::array<double, kAttrs> v{};
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
};

struct ClampReport {
  std::array<bool, kAttrs> clamped{};
  bool any() const;
};

StyleVector clamp(const StyleVector& s, ClampReport* report = nullptr);

// Closed-form blob with no range checks:
//   pixel(u, v) = bg + intensity * exp(-q / 2),
//   q = ((u - cx) / r)^2 + ((v - cy) / (r * aspect))^2,
// at pixel centres u = (col + 0.5) / 16, v = (row + 0.5) / 16, clipped to [0, 1.2].
Image render_unclamped(const StyleVector& s);
// Clamps s into the declared ranges first; `report` says which fields moved.
Image render(const StyleVector& s, ClampReport* report = nullptr);

StyleVector sample_style(Rng& rng);

struct GroundTruthDirection {
  std::string name;
  std::array<double, kAttrs> delta{};
  double nominal_scale = 0.0;
  std::size_t target = 0;
};

// radius +0.1, intensity +0.3, aspect +0.5, center_x +0.2.
const std::vector<GroundTruthDirection>& registry();
const GroundTruthDirection& find_direction(std::string_view name);

struct PairSet {
  std::vector<StyleVector> styles;
  std::vector<StyleVector> edited_styles;
  std::vector<Image> input;
  std::vector<Image> edited;
};

// Styles are uniform over the declared ranges, except that the edited
// component is drawn from [lo, hi - delta] so the edited style needs no
// clamping. edited[i] == render(styles[i] + delta).
PairSet make_pairs(std::uint64_t seed, std::size_t n, const GroundTruthDirection& dir);

struct AttributeEstimate {
  StyleVector s;
  // 1 for a detected blob, 0 when the blob is below the detection threshold
  // (blob fields are then 0 and only the background is meaningful).
  double confidence = 0.0;
};

// Background: mean of the 16 darkest pixels. Blob: pixels at or above a
// quarter of the background-subtracted peak give centroid and second
// moments; the truncated-Gaussian variance factor is divided out to get the
// radius; intensity is the peak divided by the fitted profile at the argmax.
AttributeEstimate read_attributes(const Image& x);

// Peak above background under which a blob counts as undetectable.
constexpr double kDetectThreshold = 0.1;

// (b - a) / range per attribute.
std::array<double, kAttrs> normalized_shift(const StyleVector& a, const StyleVector& b);

}  // namespace dirforge::world
