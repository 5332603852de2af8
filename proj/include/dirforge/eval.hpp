#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dirforge/editing.hpp"

namespace dirforge {

// Shared unedited baseline for every evaluation cell: M seeded base
// conditions (encoder embeddings of random world renders), the unedited
// generations and their oracle read-back.
struct EvalContext {
  const DiffusionModel* model = nullptr;
  const Encoder* encoder = nullptr;
  std::size_t M = 100;
  std::uint64_t seed = 0;
  double lambda_g = 1.0;
  Tensor base_c;
  Tensor base_images;
  std::vector<world::AttributeEstimate> base_attrs;
};

EvalContext make_eval_context(const DiffusionModel& m, const Encoder& enc, std::size_t M, std::uint64_t seed,
                              double lambda_g = 1.0);

struct DistanceReport {
  std::string label;
  double pixel_l2 = 0.0;
  // L2 between encoder embeddings before unit normalization.
  double embedding_l2 = 0.0;
  std::size_t count = 0;
  std::uint64_t config_hash = 0;
};

// Mean per-pair distances; throws on length mismatch.
DistanceReport distance_report(const Encoder& enc, const Tensor& before, const Tensor& after, std::string label = "");

struct CellResult {
  std::vector<Edit> edits;
  // Mean normalized oracle shift per attribute over pairs where both
  // images have a detected blob.
  std::array<double, world::kAttrs> shift{};
  // Standard error of each mean.
  std::array<double, world::kAttrs> shift_sem{};
  std::size_t valid = 0;
  std::size_t undetected = 0;
  DistanceReport distance;
  Tensor images;
};

CellResult evaluate_edits(const EvalContext& ctx, const std::vector<Edit>& edits);

// The measured columns of the square matrix: each registered direction's
// target attribute, in registry order.
std::vector<std::size_t> measured_attributes();

struct RescoringMatrix {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  std::vector<std::vector<double>> entries;
  // Every attribute, rows x 6, for reference.
  std::vector<std::array<double, world::kAttrs>> full;
  std::vector<double> lambda_e;
  std::vector<std::array<double, 2>> window;
  std::vector<DistanceReport> distances;
  std::size_t M = 0;
  std::size_t undetected = 0;
  std::size_t evaluated = 0;
  // Set when more than 20% of edited samples had no detectable blob.
  bool flagged = false;
  std::uint64_t config_hash = 0;
};

// Row i edits with directions[i] at lambda_e[i] inside its recommended window.
RescoringMatrix rescoring(const EvalContext& ctx, const std::vector<DirectionEmbedding>& directions,
                          const std::vector<double>& lambda_e);

// Mean |entry| over a row's off-diagonal columns.
double off_target_mean(const RescoringMatrix& r, std::size_t row);
// Positive diagonal that strictly beats every other |entry| in the row.
bool row_dominant(const RescoringMatrix& r, std::size_t row);
// Same tests on one cell, with `target` the attribute index of the edit.
double off_target_mean(const std::array<double, world::kAttrs>& shift, std::size_t target);
bool dominant(const std::array<double, world::kAttrs>& shift, std::size_t target);

// Smallest lambda on `grid` whose mean target shift reaches `target_shift`
// (normalized units) on a small calibration batch; the best lambda on the
// grid otherwise.
double calibrate_lambda_e(const EvalContext& calib, const DirectionEmbedding& dir, const std::vector<double>& grid,
                          double target_shift);

struct AblationCell {
  std::string axis;
  std::string label;
  double lambda_e = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.4;
  std::size_t n = 0;
  double w_sem = 1.0;
  double w_latent = 1.0;
  double d_norm = 0.0;
  std::array<double, world::kAttrs> shift{};
  double diagonal = 0.0;
  double off_target = 0.0;
  bool dominant = false;
  DistanceReport distance;
};

struct AblationReport {
  std::string axis;
  std::string direction;
  std::vector<AblationCell> cells;
  std::uint64_t config_hash = 0;
};

// Learns a direction for a given (N, w_sem, w_latent) cell.
using DirectionLearner = std::function<DirectionEmbedding(std::size_t n, double w_sem, double w_latent)>;

// Runs one predefined grid for `direction_name`:
//   timesteps:  windows [0,1], [0,0.4], [0.6,1] with the baseline direction
//   samples:    N = 10, 100
//   loss_terms: full, w/o latent, w/o semantic
// All cells edit at the same lambda_e. `on_cell` sees each cell as it lands.
AblationReport ablate(const std::string& axis, const EvalContext& ctx, const std::string& direction_name,
                      const DirectionEmbedding& baseline, double lambda_e, const DirectionLearner& learner,
                      const std::function<void(const AblationCell&)>& on_cell = {});

}  // namespace dirforge
