#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dirforge/diffusion.hpp"
#include "dirforge/direction.hpp"

namespace dirforge {

struct Edit {
  std::string name;
  std::vector<double> d;
  double lambda_e = 1.0;
  // Active for lo * T <= t <= hi * T.
  double lo = 0.0;
  double hi = 0.4;
};

Edit make_edit(const DirectionEmbedding& dir, double lambda_e);
Edit make_edit(const DirectionEmbedding& dir, double lambda_e, double lo, double hi);

struct EditSpec {
  std::vector<Edit> edits;
  // [B, k] or [k]; undefined means no base condition (unconditional base).
  Tensor base_c;
  double lambda_g = 1.0;

  bool has_base() const { return base_c.defined(); }
};

// Throws on window bounds outside 0 <= lo < hi <= 1, duplicate names, or a
// direction width different from k.
void validate(const EditSpec& spec, std::size_t k);
bool in_window(const Edit& e, int t, int T);

// base + sum_i [t in window_i] lambda_i (eps(d_i) - eps(phi)), with base the
// CFG prediction when a base condition is set and eps(phi) otherwise. The
// edit terms are summed first and added to base once; zero-scale edits are
// skipped, so outside every window the result is base itself.
Tensor edited_noise(const DiffusionModel& m, const Tensor& x_t, int t, const EditSpec& spec);

// Generates rows images from seeded noise streams first_index.. with the
// edited prediction. Pixel space [rows, 256].
Tensor edit_generate(const DiffusionModel& m, std::uint64_t seed, std::size_t first_index, std::size_t rows,
                     const EditSpec& spec);

// Inverts x0 unconditionally, then replays the recorded noise with the edits
// applied on top of eps(phi). Requires a spec without base condition.
Tensor edit_real(const DiffusionModel& m, const Tensor& x0_pixels, const EditSpec& spec, std::uint64_t inversion_seed);

struct InterpolationResult {
  std::vector<double> grid;
  // images[g] is [rows, 256] for grid value g.
  std::vector<Tensor> images;
  // Mean oracle read-back per grid value over detected blobs.
  std::vector<world::StyleVector> trace;
  std::vector<std::size_t> detected;
};

// One generation per grid value, all sharing the seed and base condition.
InterpolationResult interpolate_edit(const DiffusionModel& m, std::uint64_t seed, std::size_t rows, const Tensor& base_c,
                                     double lambda_g, const DirectionEmbedding& dir, std::vector<double> grid, double lo,
                                     double hi);

}  // namespace dirforge
