#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dirforge/config.hpp"
#include "dirforge/eval.hpp"
#include "dirforge/report.hpp"

namespace dirforge {

using Logger = std::function<void(const std::string&)>;

// Trains the encoder and the conditional denoiser described by `cfg`.
Encoder train_encoder_for(const RunConfig& cfg, EncoderTrainLog* log = nullptr, const Logger& say = {});
DiffusionModel train_model_for(const RunConfig& cfg, const Encoder& enc, DiffusionTrainLog* log = nullptr,
                               const Logger& say = {});

// World pairs for a registered direction, then learn_direction with the
// run's transfer settings overridden by (n, w_sem, w_latent). Provenance and
// window come from cfg.
DirectionEmbedding learn_registered(const RunConfig& cfg, const DiffusionModel& m, const Encoder& enc,
                                    const std::string& name, std::size_t n, double w_sem, double w_latent,
                                    LearnLog* log = nullptr);

ReportBundle rescoring_bundle(const RescoringMatrix& r, const Provenance& prov);
ReportBundle distance_bundle(const std::string& name, const std::vector<DistanceReport>& d, const Provenance& prov);
ReportBundle ablation_bundle(const AblationReport& a, const Provenance& prov);
ReportBundle interpolation_bundle(const InterpolationResult& ip, const std::string& direction, double lo, double hi,
                                  const Provenance& prov);

struct CompositionResult {
  std::vector<std::string> names;
  std::vector<double> lambda_e;
  std::vector<std::size_t> targets;
  std::vector<std::array<double, world::kAttrs>> single;
  std::array<double, world::kAttrs> combined{};
  // combined[target_i] / single[i][target_i]
  std::vector<double> retained;
  Tensor images;
};

CompositionResult compose(const EvalContext& ctx, const std::vector<DirectionEmbedding>& dirs,
                          const std::vector<double>& lambda_e);
ReportBundle composition_bundle(const CompositionResult& c, const Provenance& prov);

// Target-attribute trace in normalized units and the monotonicity verdict:
// every step may fall by at most `floor`.
struct MonotoneCheck {
  std::vector<double> trace;
  double worst_step = 0.0;
  bool monotone = false;
};
MonotoneCheck monotone_trace(const InterpolationResult& ip, std::size_t target, double floor);

struct ReproduceResult {
  std::filesystem::path root;
  std::vector<std::string> files;
  RescoringMatrix rescoring;
  AblationReport timesteps;
  AblationReport samples;
  AblationReport loss_terms;
  InterpolationResult interpolation;
  MonotoneCheck monotone;
  bool lambda0_identical = false;
  CompositionResult composition;
  std::vector<DirectionEmbedding> directions;
  nlohmann::json summary;
};

// Full experiment: encoder, denoiser, the registered directions, lambda_e
// calibration, rescoring, distances, the three ablations, the interpolation
// sweep and a two-direction composition, all written under `out`.
ReproduceResult reproduce(const RunConfig& cfg, const std::filesystem::path& out, const Logger& say = {});

}  // namespace dirforge
