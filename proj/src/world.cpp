#include "dirforge/world.hpp"

#include <algorithm>
#include <cmath>

#include "dirforge/errors.hpp"

namespace dirforge::world {

const std::array<Range, kAttrs>& ranges() {
  static const std::array<Range, kAttrs> r{{{0.2, 0.8}, {0.2, 0.8}, {0.08, 0.3}, {0.3, 1.0}, {0.5, 2.0}, {0.0, 0.25}}};
  return r;
}

const std::array<std::string_view, kAttrs>& attr_names() {
  static const std::array<std::string_view, kAttrs> n{"cx", "cy", "radius", "intensity", "aspect", "bg"};
  return n;
}

std::size_t attr_index(std::string_view name) {
  const auto& n = attr_names();
  for (std::size_t i = 0; i < kAttrs; ++i)
    if (n[i] == name) return i;
  throw InvalidArgument("unknown attribute '" + std::string(name) + "'");
}

bool ClampReport::any() const {
  return std::any_of(clamped.begin(), clamped.end(), [](bool b) { return b; });
}

StyleVector clamp(const StyleVector& s, ClampReport* report) {
  StyleVector out = s;
  const auto& r = ranges();
  for (std::size_t i = 0; i < kAttrs; ++i) {
    out[i] = std::clamp(s[i], r[i].lo, r[i].hi);
    if (report) report->clamped[i] = out[i] != s[i];
  }
  return out;
}

Image render_unclamped(const StyleVector& s) {
  Image img(kPixels);
  const double cx = s[kCenterX], cy = s[kCenterY], r = s[kRadius];
  const double ry = r * s[kAspect];
  for (std::size_t i = 0; i < kSide; ++i) {
    const double v = (static_cast<double>(i) + 0.5) / kSide;
    const double dy = (v - cy) / ry;
    for (std::size_t j = 0; j < kSide; ++j) {
      const double u = (static_cast<double>(j) + 0.5) / kSide;
      const double dx = (u - cx) / r;
      const double q = dx * dx + dy * dy;
      img[i * kSide + j] = std::clamp(s[kBackground] + s[kIntensity] * std::exp(-q / 2.0), 0.0, kPixelMax);
    }
  }
  return img;
}

Image render(const StyleVector& s, ClampReport* report) { return render_unclamped(clamp(s, report)); }

StyleVector sample_style(Rng& rng) {
  StyleVector s;
  const auto& r = ranges();
  for (std::size_t i = 0; i < kAttrs; ++i) s[i] = rng.uniform(r[i].lo, r[i].hi);
  return s;
}

const std::vector<GroundTruthDirection>& registry() {
  static const std::vector<GroundTruthDirection> dirs = [] {
    auto make = [](std::string name, std::size_t target, double delta) {
      GroundTruthDirection d;
      d.name = std::move(name);
      d.target = target;
      d.delta[target] = delta;
      d.nominal_scale = delta;
      return d;
    };
    return std::vector<GroundTruthDirection>{make("radius", kRadius, 0.1), make("intensity", kIntensity, 0.3),
                                             make("aspect", kAspect, 0.5), make("center_x", kCenterX, 0.2)};
  }();
  return dirs;
}

const GroundTruthDirection& find_direction(std::string_view name) {
  for (const auto& d : registry())
    if (d.name == name) return d;
  throw InvalidArgument("unknown direction '" + std::string(name) + "' (known: radius, intensity, aspect, center_x)");
}

PairSet make_pairs(std::uint64_t seed, std::size_t n, const GroundTruthDirection& dir) {
  if (n == 0) throw InvalidArgument("make_pairs: N must be >= 1");
  Rng rng(seed, 0x70616972);  // "pair"
  PairSet out;
  const auto& r = ranges();
  for (std::size_t k = 0; k < n; ++k) {
    StyleVector s = sample_style(rng);
    for (std::size_t i = 0; i < kAttrs; ++i) {
      if (dir.delta[i] > 0) s[i] = rng.uniform(r[i].lo, r[i].hi - dir.delta[i]);
      if (dir.delta[i] < 0) s[i] = rng.uniform(r[i].lo - dir.delta[i], r[i].hi);
    }
    StyleVector e = s;
    for (std::size_t i = 0; i < kAttrs; ++i) e[i] += dir.delta[i];
    out.styles.push_back(s);
    out.edited_styles.push_back(e);
    out.input.push_back(render(s));
    out.edited.push_back(render(e));
  }
  return out;
}

namespace {

constexpr double kKappa = 0.25;
constexpr std::size_t kDarkest = 16;

// Pairwise sum over 16 values: exact when all of them are equal.
double tree_mean16(const double* v) {
  double a[kDarkest];
  std::copy_n(v, kDarkest, a);
  for (std::size_t w = kDarkest / 2; w >= 1; w /= 2)
    for (std::size_t i = 0; i < w; ++i) a[i] = a[2 * i] + a[2 * i + 1];
  return a[0] / static_cast<double>(kDarkest);
}

}  // namespace

AttributeEstimate read_attributes(const Image& x) {
  if (x.size() != kPixels) throw ShapeError("read_attributes", {x.size()}, {kPixels});
  for (double p : x)
    if (!std::isfinite(p)) throw InvalidArgument("read_attributes: non-finite pixel");

  AttributeEstimate est;
  Image sorted = x;
  std::partial_sort(sorted.begin(), sorted.begin() + kDarkest, sorted.end());
  const double bg = tree_mean16(sorted.data());
  est.s[kBackground] = bg;

  std::size_t argmax = 0;
  for (std::size_t p = 1; p < kPixels; ++p)
    if (x[p] > x[argmax]) argmax = p;
  const double peak = x[argmax] - bg;
  if (peak < kDetectThreshold) return est;

  double m = 0, sx = 0, sy = 0;
  std::array<double, kPixels> w{};
  for (std::size_t p = 0; p < kPixels; ++p) {
    const double wp = x[p] - bg;
    if (wp < kKappa * peak) continue;
    w[p] = wp;
    const double u = (static_cast<double>(p % kSide) + 0.5) / kSide;
    const double v = (static_cast<double>(p / kSide) + 0.5) / kSide;
    m += wp;
    sx += wp * u;
    sy += wp * v;
  }
  const double cx = sx / m, cy = sy / m;
  double vx = 0, vy = 0;
  for (std::size_t p = 0; p < kPixels; ++p) {
    if (w[p] == 0.0) continue;
    const double du = (static_cast<double>(p % kSide) + 0.5) / kSide - cx;
    const double dv = (static_cast<double>(p / kSide) + 0.5) / kSide - cy;
    vx += w[p] * du * du;
    vy += w[p] * dv * dv;
  }
  vx /= m;
  vy /= m;
  if (!(vx > 0.0) || !(vy > 0.0)) return est;

  // Variance of a Gaussian profile kept only where it exceeds kappa * peak
  // shrinks by this factor in each axis.
  const double trunc = 1.0 - std::log(1.0 / kKappa) * kKappa / (1.0 - kKappa);
  const double r = std::sqrt(vx / trunc);
  const double aspect = std::sqrt(vy / vx);
  const double du = ((static_cast<double>(argmax % kSide) + 0.5) / kSide - cx) / r;
  const double dv = ((static_cast<double>(argmax / kSide) + 0.5) / kSide - cy) / (r * aspect);
  est.s[kCenterX] = cx;
  est.s[kCenterY] = cy;
  est.s[kRadius] = r;
  est.s[kIntensity] = peak / std::exp(-(du * du + dv * dv) / 2.0);
  est.s[kAspect] = aspect;
  est.confidence = 1.0;
  return est;
}

std::array<double, kAttrs> normalized_shift(const StyleVector& a, const StyleVector& b) {
  std::array<double, kAttrs> out{};
  for (std::size_t i = 0; i < kAttrs; ++i) out[i] = (b[i] - a[i]) / ranges()[i].span();
  return out;
}

}  // namespace dirforge::world
