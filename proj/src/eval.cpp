#include "dirforge/eval.hpp"

#include <cmath>
#include <cstdio>
#include <string>

namespace dirforge {

namespace {
constexpr std::uint64_t kCondStream = std::uint64_t{1} << 40;
}

EvalContext make_eval_context(const DiffusionModel& m, const Encoder& enc, std::size_t M, std::uint64_t seed,
                              double lambda_g) {
  if (M == 0) throw InvalidArgument("evaluation needs M >= 1");
  EvalContext ctx;
  ctx.model = &m;
  ctx.encoder = &enc;
  ctx.M = M;
  ctx.seed = seed;
  ctx.lambda_g = lambda_g;
  std::vector<world::Image> refs(M);
  for (std::size_t i = 0; i < M; ++i) {
    Rng rng(seed, kCondStream + i);
    refs[i] = world::render(world::sample_style(rng));
  }
  ctx.base_c = enc.forward(stack_rows(refs));
  EditSpec spec;
  spec.base_c = ctx.base_c;
  spec.lambda_g = lambda_g;
  ctx.base_images = edit_generate(m, seed, 0, M, spec);
  for (const auto& img : unstack_rows(ctx.base_images)) ctx.base_attrs.push_back(world::read_attributes(img));
  return ctx;
}

DistanceReport distance_report(const Encoder& enc, const Tensor& before, const Tensor& after, std::string label) {
  if (before.shape() != after.shape()) throw ShapeError("distance_report", before.shape(), after.shape());
  DistanceReport r;
  r.label = std::move(label);
  const std::size_t n = before.dim(0), w = before.dim(1);
  r.count = n;
  const Tensor eb = enc.forward_raw(before);
  const Tensor ea = enc.forward_raw(after);
  const std::size_t k = eb.dim(1);
  double px = 0.0, em = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < w; ++j) {
      const double dlt = after.at(i * w + j) - before.at(i * w + j);
      s += dlt * dlt;
    }
    px += std::sqrt(s);
    s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double dlt = ea.at(i * k + j) - eb.at(i * k + j);
      s += dlt * dlt;
    }
    em += std::sqrt(s);
  }
  r.pixel_l2 = n ? px / static_cast<double>(n) : 0.0;
  r.embedding_l2 = n ? em / static_cast<double>(n) : 0.0;
  return r;
}

CellResult evaluate_edits(const EvalContext& ctx, const std::vector<Edit>& edits) {
  CellResult cell;
  cell.edits = edits;
  EditSpec spec;
  spec.base_c = ctx.base_c;
  spec.lambda_g = ctx.lambda_g;
  spec.edits = edits;
  cell.images = edit_generate(*ctx.model, ctx.seed, 0, ctx.M, spec);
  std::array<double, world::kAttrs> sum{}, sum_sq{};
  const auto imgs = unstack_rows(cell.images);
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    const auto est = world::read_attributes(imgs[i]);
    if (est.confidence == 0.0 || ctx.base_attrs[i].confidence == 0.0) {
      ++cell.undetected;
      continue;
    }
    const auto sh = world::normalized_shift(ctx.base_attrs[i].s, est.s);
    for (std::size_t a = 0; a < world::kAttrs; ++a) {
      sum[a] += sh[a];
      sum_sq[a] += sh[a] * sh[a];
    }
    ++cell.valid;
  }
  if (cell.valid > 0) {
    const double n = static_cast<double>(cell.valid);
    for (std::size_t a = 0; a < world::kAttrs; ++a) {
      cell.shift[a] = sum[a] / n;
      const double var = cell.valid > 1 ? std::max(0.0, (sum_sq[a] - n * cell.shift[a] * cell.shift[a]) / (n - 1)) : 0.0;
      cell.shift_sem[a] = std::sqrt(var / n);
    }
  }
  cell.distance = distance_report(*ctx.encoder, ctx.base_images, cell.images);
  return cell;
}

std::vector<std::size_t> measured_attributes() {
  std::vector<std::size_t> cols;
  for (const auto& d : world::registry()) cols.push_back(d.target);
  return cols;
}

RescoringMatrix rescoring(const EvalContext& ctx, const std::vector<DirectionEmbedding>& directions,
                          const std::vector<double>& lambda_e) {
  if (directions.size() != lambda_e.size()) throw InvalidArgument("rescoring: one lambda_e per direction required");
  RescoringMatrix r;
  r.M = ctx.M;
  const auto cols = measured_attributes();
  for (std::size_t c : cols) r.cols.emplace_back(world::attr_names()[c]);
  for (std::size_t i = 0; i < directions.size(); ++i) {
    const auto& dir = directions[i];
    const CellResult cell = evaluate_edits(ctx, {make_edit(dir, lambda_e[i])});
    r.rows.push_back(dir.name);
    std::vector<double> row;
    for (std::size_t c : cols) row.push_back(cell.shift[c]);
    r.entries.push_back(row);
    r.full.push_back(cell.shift);
    r.lambda_e.push_back(lambda_e[i]);
    r.window.push_back({dir.window_lo, dir.window_hi});
    DistanceReport dist = cell.distance;
    dist.label = dir.name;
    r.distances.push_back(dist);
    r.undetected += cell.undetected;
    r.evaluated += ctx.M;
  }
  r.flagged = r.evaluated > 0 && static_cast<double>(r.undetected) > 0.2 * static_cast<double>(r.evaluated);
  return r;
}

namespace {
std::size_t row_target_col(const RescoringMatrix& r, std::size_t row) {
  const std::size_t target = world::find_direction(r.rows.at(row)).target;
  const auto cols = measured_attributes();
  for (std::size_t c = 0; c < cols.size(); ++c)
    if (cols[c] == target) return c;
  throw InvalidArgument("rescoring: no measured column for row " + r.rows[row]);
}
}  // namespace

double off_target_mean(const RescoringMatrix& r, std::size_t row) {
  const std::size_t tc = row_target_col(r, row);
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < r.entries[row].size(); ++c) {
    if (c == tc) continue;
    s += std::abs(r.entries[row][c]);
    ++n;
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

bool row_dominant(const RescoringMatrix& r, std::size_t row) {
  const std::size_t tc = row_target_col(r, row);
  const double diag = r.entries[row][tc];
  if (!(diag > 0.0)) return false;
  for (std::size_t c = 0; c < r.entries[row].size(); ++c)
    if (c != tc && std::abs(r.entries[row][c]) >= diag) return false;
  return true;
}

double off_target_mean(const std::array<double, world::kAttrs>& shift, std::size_t target) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t c : measured_attributes()) {
    if (c == target) continue;
    s += std::abs(shift[c]);
    ++n;
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

bool dominant(const std::array<double, world::kAttrs>& shift, std::size_t target) {
  if (!(shift[target] > 0.0)) return false;
  for (std::size_t c : measured_attributes())
    if (c != target && std::abs(shift[c]) >= shift[target]) return false;
  return true;
}

double calibrate_lambda_e(const EvalContext& calib, const DirectionEmbedding& dir, const std::vector<double>& grid,
                          double target_shift) {
  if (grid.empty()) throw InvalidArgument("calibrate_lambda_e: empty grid");
  const std::size_t target = world::find_direction(dir.provenance.direction.empty() ? dir.name : dir.provenance.direction).target;
  double best = grid.front(), best_shift = -1e300;
  for (double lam : grid) {
    const CellResult cell = evaluate_edits(calib, {make_edit(dir, lam)});
    if (cell.shift[target] >= target_shift) return lam;
    if (cell.shift[target] > best_shift) {
      best_shift = cell.shift[target];
      best = lam;
    }
  }
  return best;
}

namespace {

AblationCell make_cell(const EvalContext& ctx, const std::string& axis, const std::string& label,
                       const DirectionEmbedding& dir, double lambda_e, double lo, double hi, std::size_t target) {
  const CellResult res = evaluate_edits(ctx, {make_edit(dir, lambda_e, lo, hi)});
  AblationCell c;
  c.axis = axis;
  c.label = label;
  c.lambda_e = lambda_e;
  c.window_lo = lo;
  c.window_hi = hi;
  c.n = dir.provenance.n;
  c.w_sem = dir.provenance.w_sem;
  c.w_latent = dir.provenance.w_latent;
  double s = 0.0;
  for (double v : dir.d) s += v * v;
  c.d_norm = std::sqrt(s);
  c.shift = res.shift;
  c.diagonal = res.shift[target];
  c.off_target = off_target_mean(res.shift, target);
  c.dominant = dominant(res.shift, target);
  c.distance = res.distance;
  c.distance.label = label;
  return c;
}

}  // namespace

AblationReport ablate(const std::string& axis, const EvalContext& ctx, const std::string& direction_name,
                      const DirectionEmbedding& baseline, double lambda_e, const DirectionLearner& learner,
                      const std::function<void(const AblationCell&)>& on_cell) {
  const std::size_t target = world::find_direction(direction_name).target;
  AblationReport rep;
  rep.axis = axis;
  rep.direction = direction_name;
  auto push = [&](AblationCell c) {
    if (on_cell) on_cell(c);
    rep.cells.push_back(std::move(c));
  };
  if (axis == "timesteps") {
    const std::array<std::array<double, 2>, 3> windows{{{0.0, 1.0}, {0.0, 0.4}, {0.6, 1.0}}};
    for (const auto& w : windows) {
      char label[32];
      std::snprintf(label, sizeof(label), "[%g,%g]", w[0], w[1]);
      push(make_cell(ctx, axis, label, baseline, lambda_e, w[0], w[1], target));
    }
  } else if (axis == "samples") {
    for (std::size_t n : {std::size_t{10}, std::size_t{100}}) {
      const DirectionEmbedding dir = n == baseline.provenance.n && baseline.provenance.w_sem == 1.0 &&
                                             baseline.provenance.w_latent == 1.0
                                         ? baseline
                                         : learner(n, 1.0, 1.0);
      push(make_cell(ctx, axis, "N=" + std::to_string(n), dir, lambda_e, baseline.window_lo, baseline.window_hi, target));
    }
  } else if (axis == "loss_terms") {
    const std::array<std::pair<const char*, std::array<double, 2>>, 3> cells{
        {{"full", {1.0, 1.0}}, {"w/o latent", {1.0, 0.0}}, {"w/o semantic", {0.0, 1.0}}}};
    for (const auto& [label, w] : cells) {
      const bool is_base = w[0] == 1.0 && w[1] == 1.0 && baseline.provenance.w_sem == 1.0 &&
                           baseline.provenance.w_latent == 1.0;
      const DirectionEmbedding dir = is_base ? baseline : learner(baseline.provenance.n, w[0], w[1]);
      push(make_cell(ctx, axis, label, dir, lambda_e, baseline.window_lo, baseline.window_hi, target));
    }
  } else {
    throw InvalidArgument("unknown ablation axis '" + axis + "' (expected timesteps, samples or loss_terms)");
  }
  return rep;
}

}  // namespace dirforge
