#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dirforge/diffusion.hpp"
#include "dirforge/direction.hpp"
#include "dirforge/encoder.hpp"
#include "json.hpp"

namespace dirforge {

inline constexpr const char* kModuleVersion = "dirforge/0.1.0";

struct EvalConfig {
  std::size_t M = 100;
  // lambda_e calibration runs on its own small batch and seed stream.
  std::size_t calib_M = 32;
  double calib_target = 0.15;
  std::vector<double> lambda_grid{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0};
  std::vector<double> interp_grid{-2.0, -1.0, 0.0, 1.0, 2.0};
  std::size_t interp_rows = 100;
  std::string ablation_direction = "radius";
  std::vector<std::string> composition{"radius", "intensity"};
  // Absolute tolerance, normalized attribute units, for the sign and tie
  // checks on oracle traces.
  double noise_floor = 0.01;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int T = 100;
  double beta_lo = 1e-3;
  double beta_hi = 0.2;
  EncoderConfig encoder;
  DenoiserConfig denoiser;
  DiffusionTrainConfig diffusion;
  TransferConfig transfer;
  double lambda_g = 1.0;
  double window_lo = 0.0;
  double window_hi = 0.4;
  EvalConfig eval;
  std::string out_root = "reports";

  // Propagates the global seed and the shared embedding width k into every
  // component config.
  void finalize();
  NoiseSchedule schedule() const;
};

nlohmann::json to_json(const RunConfig& c);
// Starts from defaults and overlays `j`; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

// FNV-1a 64 over the canonical (sorted-key, compact) JSON text.
std::uint64_t fnv1a64(const std::string& bytes);
std::uint64_t config_hash(const RunConfig& c);
std::string hash_hex(std::uint64_t h);
std::uint64_t parse_hash_hex(const std::string& s);

// Stamp carried by every artifact: JSON under "provenance", CSV and PGM in a
// leading comment line, SVG in a leading XML comment, checkpoints in
// meta["provenance"].
struct Provenance {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string version = kModuleVersion;

  nlohmann::json to_json() const;
  // "config_hash=<hex> seed=<n> version=<v>"
  std::string line() const;
};

Provenance provenance_of(const RunConfig& c);

}  // namespace dirforge
