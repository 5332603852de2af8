#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "dirforge/encoder.hpp"
#include "dirforge/nn.hpp"
#include "dirforge/schedule.hpp"

namespace dirforge {

struct DenoiserConfig {
  std::size_t hidden = 128;
  std::size_t temb = 32;
  std::size_t k = 16;
};

// Sinusoidal timestep features: temb/2 sines then temb/2 cosines of t * f_i,
// f_i = 1000^(-i / (temb/2)).
std::vector<double> timestep_embedding(int t, std::size_t width);

// MLP noise predictor over flattened images:
//   h1  = softplus(L1[x_t, temb, c])
//   h2  = softplus(L2[h1, temb, c])
//   eps = L3[h2, x_t / sqrt(1 - abar_t)]
// The last input is the eps estimate a pure-noise x_t would imply, which
// makes the high-noise end nearly linear.
class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(const DenoiserConfig& cfg, Rng& rng);

  // x_t [B, 256], one timestep per row, c [B, k] -> eps [B, 256].
  Tensor forward(const NoiseSchedule& s, const Tensor& x_t, const std::vector<int>& t, const Tensor& c) const;

  const DenoiserConfig& config() const { return cfg_; }
  std::vector<NamedTensor> params() const;

 private:
  DenoiserConfig cfg_;
  Linear l1_, l2_, l3_;
};

// Affine map between pixel values and the standardized space the model
// works in: model = (pixel - shift) / scale.
struct DataScale {
  double shift = 0.3;
  double scale = 0.2;
  Tensor to_model(const Tensor& pixels) const;
  Tensor to_pixels(const Tensor& model) const;
};

struct DiffusionModel {
  NoiseSchedule schedule;
  Denoiser net;
  DataScale data;

  std::size_t k() const { return net.config().k; }
  std::vector<NamedTensor> params() const { return net.params(); }
  std::uint64_t checksum() const { return dirforge::checksum(params()); }
};

// eps_theta(x_t, t, c) for one shared timestep. c is [B, k] or [k] (broadcast).
Tensor predict_noise(const DiffusionModel& m, const Tensor& x_t, int t, const Tensor& c);
// The null condition: zeros of width k.
Tensor null_condition(std::size_t k);

// eps(phi) + g (eps(c) - eps(phi)). g == 0 and g == 1 return the matching
// single prediction untouched.
Tensor cfg_predict(const DiffusionModel& m, const Tensor& x_t, int t, const Tensor& c, double lambda_g);

struct DiffusionTrainConfig {
  std::size_t steps = 30000;
  std::size_t batch = 64;
  double lr = 2e-3;
  double p_uncond = 0.1;
  double ema = 0.999;
  std::uint64_t seed = 0;
};

struct DiffusionTrainLog {
  // Mean per-sample loss sum_pixels (eps_hat - eps)^2 over consecutive windows.
  std::vector<double> window_loss;
  std::size_t window = 500;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Conditional denoising objective with condition dropout; every step draws
// fresh world samples and conditions on their encoder embeddings. AdamW with
// cosine-annealed learning rate, weights replaced by their EMA at the end,
// then frozen and rounded to float32.
DiffusionModel train_diffusion(const Encoder& enc, const NoiseSchedule& schedule, const DenoiserConfig& dcfg,
                               const DiffusionTrainConfig& cfg, DiffusionTrainLog* log = nullptr,
                               const std::function<void(std::size_t, double)>& on_window = {});

// Held-out mean per-sample loss at uniformly drawn t, conditioned (or at phi).
double evaluate_loss(const DiffusionModel& m, const Encoder& enc, std::uint64_t seed, std::size_t n, bool unconditional);

// Per-row source of x_T and step noise. Rows are independent streams, so an
// image's bits do not depend on batch size or position.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual Tensor initial() = 0;
  // Noise added when stepping from t to t-1.
  virtual Tensor step_noise(int t) = 0;
  // Coefficient in front of step_noise(t): sigma_t for t >= 2. At t = 1 the
  // posterior sigma is 0; sources supply 1 and an explicit correction there.
  virtual double step_scale(const NoiseSchedule& s, int t) const;
  virtual std::size_t rows() const = 0;
  // Number of per-row Gaussian maps handed out so far.
  std::size_t draws() const { return draws_; }

 protected:
  std::size_t draws_ = 0;
};

// Fresh Gaussian noise: row i uses stream (seed, first_index + i). Yields
// x_T and xi_T..xi_2 (T maps per row); the t = 1 step is noise-free.
class SeededNoise : public NoiseSource {
 public:
  SeededNoise(std::uint64_t seed, std::size_t first_index, std::size_t rows, int T);
  Tensor initial() override;
  Tensor step_noise(int t) override;
  std::size_t rows() const override { return rngs_.size(); }

 private:
  std::vector<Rng> rngs_;
  int T_;
};

struct InversionRecord {
  Tensor x_T;
  // noise[t] for t = 1..T; index 0 unused. noise[1] is the residual
  // x_0 - mu_1 added with unit weight on the final, noise-free step.
  std::vector<Tensor> noise;
};

class RecordedNoise : public NoiseSource {
 public:
  explicit RecordedNoise(const InversionRecord& rec) : rec_(rec) {}
  Tensor initial() override;
  Tensor step_noise(int t) override;
  std::size_t rows() const override { return rec_.x_T.dim(0); }

 private:
  const InversionRecord& rec_;
};

// (x_t, t) -> eps_hat in model space.
using NoisePredictor = std::function<Tensor(const Tensor& x_t, int t)>;
// (x_t, t, guided eps) -> eps actually used.
using NoiseHook = std::function<Tensor(const Tensor& x_t, int t, const Tensor& eps)>;

// Posterior mean (x_t - beta_t / sqrt(1 - abar_t) eps) / sqrt(alpha_t).
Tensor posterior_mean(const NoiseSchedule& s, const Tensor& x_t, int t, const Tensor& eps);

// Ancestral sampling x_{t-1} = mu(x_t, eps_hat) + scale_t xi_t for t = T..1.
// Returns pixel-space images [B, 256] clipped to the image range
// [0, kPixelMax].
Tensor sample(const DiffusionModel& m, NoiseSource& noise, const NoisePredictor& predictor);
// Same with eps_hat = hook(cfg_predict(c, lambda_g)); an empty hook is identity.
Tensor sample(const DiffusionModel& m, NoiseSource& noise, const Tensor& c, double lambda_g,
              const NoiseHook& hook = {});

// Edit-friendly inversion of pixel images x0 [B, 256]: noise each t
// independently, then solve every reverse step for the noise map that lands
// exactly on the next trajectory point. `predictor` defaults to eps(phi).
// Pixels must lie in [0, kPixelMax], the range the sampler decodes into.
InversionRecord invert(const DiffusionModel& m, const Tensor& x0_pixels, std::uint64_t seed,
                       const NoisePredictor& predictor = {});

}  // namespace dirforge
