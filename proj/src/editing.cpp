#include "dirforge/editing.hpp"

#include <algorithm>
#include <set>

namespace dirforge {

Edit make_edit(const DirectionEmbedding& dir, double lambda_e) {
  return make_edit(dir, lambda_e, dir.window_lo, dir.window_hi);
}

Edit make_edit(const DirectionEmbedding& dir, double lambda_e, double lo, double hi) {
  return Edit{dir.name, dir.d, lambda_e, lo, hi};
}

void validate(const EditSpec& spec, std::size_t k) {
  std::set<std::string> names;
  for (const auto& e : spec.edits) {
    if (!(e.lo >= 0.0 && e.lo < e.hi && e.hi <= 1.0)) {
      throw InvalidArgument("edit '" + e.name + "': window must satisfy 0 <= lo < hi <= 1, got [" +
                            std::to_string(e.lo) + ", " + std::to_string(e.hi) + "]");
    }
    if (e.d.size() != k) throw ShapeError("edit '" + e.name + "' direction width", {e.d.size()}, {k});
    if (!names.insert(e.name).second) throw InvalidArgument("edit spec names direction '" + e.name + "' twice");
  }
  if (spec.lambda_g < 0.0) throw InvalidArgument("lambda_g must be >= 0");
}

bool in_window(const Edit& e, int t, int T) {
  const double td = static_cast<double>(t);
  return td >= e.lo * T && td <= e.hi * T;
}

Tensor edited_noise(const DiffusionModel& m, const Tensor& x_t, int t, const EditSpec& spec) {
  const Tensor base = spec.has_base() ? cfg_predict(m, x_t, t, spec.base_c, spec.lambda_g)
                                      : predict_noise(m, x_t, t, null_condition(m.k()));
  Tensor e_phi;
  Tensor total;
  for (const auto& e : spec.edits) {
    if (e.lambda_e == 0.0 || !in_window(e, t, m.schedule.T)) continue;
    if (!e_phi.defined()) e_phi = predict_noise(m, x_t, t, null_condition(m.k()));
    const Tensor d = Tensor::from({e.d.size()}, e.d);
    const Tensor term = scale(sub(predict_noise(m, x_t, t, d), e_phi), e.lambda_e);
    total = total.defined() ? add(total, term) : term;
  }
  return total.defined() ? add(base, total) : base;
}

Tensor edit_generate(const DiffusionModel& m, std::uint64_t seed, std::size_t first_index, std::size_t rows,
                     const EditSpec& spec) {
  validate(spec, m.k());
  SeededNoise noise(seed, first_index, rows, m.schedule.T);
  return sample(m, noise, [&](const Tensor& x_t, int t) { return edited_noise(m, x_t, t, spec); });
}

Tensor edit_real(const DiffusionModel& m, const Tensor& x0_pixels, const EditSpec& spec, std::uint64_t inversion_seed) {
  if (spec.has_base()) throw InvalidArgument("edit_real: the spec must not carry a base condition");
  validate(spec, m.k());
  const InversionRecord rec = invert(m, x0_pixels, inversion_seed);
  RecordedNoise noise(rec);
  return sample(m, noise, [&](const Tensor& x_t, int t) { return edited_noise(m, x_t, t, spec); });
}

InterpolationResult interpolate_edit(const DiffusionModel& m, std::uint64_t seed, std::size_t rows, const Tensor& base_c,
                                     double lambda_g, const DirectionEmbedding& dir, std::vector<double> grid, double lo,
                                     double hi) {
  if (!std::is_sorted(grid.begin(), grid.end())) throw InvalidArgument("interpolate_edit: grid must be sorted");
  InterpolationResult out;
  out.grid = std::move(grid);
  for (double lam : out.grid) {
    EditSpec spec;
    spec.base_c = base_c;
    spec.lambda_g = lambda_g;
    spec.edits.push_back(make_edit(dir, lam, lo, hi));
    Tensor imgs = edit_generate(m, seed, 0, rows, spec);
    world::StyleVector acc;
    std::size_t ok = 0;
    for (const auto& img : unstack_rows(imgs)) {
      const auto est = world::read_attributes(img);
      if (est.confidence == 0.0) continue;
      for (std::size_t a = 0; a < world::kAttrs; ++a) acc[a] += est.s[a];
      ++ok;
    }
    for (std::size_t a = 0; a < world::kAttrs; ++a) acc[a] = ok ? acc[a] / static_cast<double>(ok) : 0.0;
    out.images.push_back(imgs);
    out.trace.push_back(acc);
    out.detected.push_back(ok);
  }
  return out;
}

}  // namespace dirforge
