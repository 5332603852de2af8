#include "dirforge/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dirforge/optim.hpp"

namespace dirforge {

std::vector<double> timestep_embedding(int t, std::size_t width) {
  const std::size_t half = width / 2;
  std::vector<double> out(width, 0.0);
  for (std::size_t i = 0; i < half; ++i) {
    const double f = std::exp(-std::log(1000.0) * static_cast<double>(i) / static_cast<double>(half));
    out[i] = std::sin(t * f);
    out[half + i] = std::cos(t * f);
  }
  return out;
}

Denoiser::Denoiser(const DenoiserConfig& cfg, Rng& rng)
    : cfg_(cfg),
      l1_(world::kPixels + cfg.temb + cfg.k, cfg.hidden, rng),
      l2_(cfg.hidden + cfg.temb + cfg.k, cfg.hidden, rng),
      l3_(cfg.hidden + world::kPixels, world::kPixels, rng) {}

Tensor Denoiser::forward(const NoiseSchedule& s, const Tensor& x_t, const std::vector<int>& t, const Tensor& c) const {
  if (x_t.rank() != 2 || x_t.dim(1) != world::kPixels) throw ShapeError("denoiser x_t", x_t.shape(), {0, world::kPixels});
  const std::size_t b = x_t.dim(0);
  if (c.rank() != 2 || c.dim(0) != b || c.dim(1) != cfg_.k) throw ShapeError("denoiser condition", c.shape(), {b, cfg_.k});
  if (t.size() != b) throw ShapeError("denoiser timesteps", x_t.shape(), {t.size()});

  std::vector<double> te(b * cfg_.temb), inv(b * world::kPixels);
  for (std::size_t i = 0; i < b; ++i) {
    s.check_t(t[i]);
    const auto e = timestep_embedding(t[i], cfg_.temb);
    std::copy(e.begin(), e.end(), te.begin() + static_cast<std::ptrdiff_t>(i * cfg_.temb));
    const double r = 1.0 / s.sqrt_1m_ab(t[i]);
    std::fill_n(inv.begin() + static_cast<std::ptrdiff_t>(i * world::kPixels), world::kPixels, r);
  }
  const Tensor temb = Tensor::from({b, cfg_.temb}, std::move(te));
  const Tensor skip = mul(x_t, Tensor::from({b, world::kPixels}, std::move(inv)));
  const Tensor h1 = softplus(l1_(concat_cols({x_t, temb, c})));
  const Tensor h2 = softplus(l2_(concat_cols({h1, temb, c})));
  return l3_(concat_cols({h2, skip}));
}

std::vector<NamedTensor> Denoiser::params() const {
  return {{"den.l1.w", l1_.w}, {"den.l1.b", l1_.b}, {"den.l2.w", l2_.w},
          {"den.l2.b", l2_.b}, {"den.l3.w", l3_.w}, {"den.l3.b", l3_.b}};
}

Tensor DataScale::to_model(const Tensor& pixels) const {
  std::vector<double> v(pixels.values());
  for (double& x : v) x = (x - shift) / scale;
  return Tensor::from(pixels.shape(), std::move(v));
}

Tensor DataScale::to_pixels(const Tensor& model) const {
  std::vector<double> v(model.values());
  for (double& x : v) x = x * scale + shift;
  return Tensor::from(model.shape(), std::move(v));
}

Tensor null_condition(std::size_t k) { return Tensor::zeros({k}); }

Tensor predict_noise(const DiffusionModel& m, const Tensor& x_t, int t, const Tensor& c) {
  if (x_t.rank() != 2) throw ShapeError("predict_noise", x_t.shape(), {0, world::kPixels});
  const std::size_t b = x_t.dim(0);
  if (c.rank() == 1) {
    if (c.dim(0) != m.k()) throw ShapeError("predict_noise condition", c.shape(), {m.k()});
    return m.net.forward(m.schedule, x_t, std::vector<int>(b, t), broadcast_rows(c, b));
  }
  return m.net.forward(m.schedule, x_t, std::vector<int>(b, t), c);
}

Tensor cfg_predict(const DiffusionModel& m, const Tensor& x_t, int t, const Tensor& c, double lambda_g) {
  if (lambda_g < 0.0) throw InvalidArgument("cfg: lambda_g must be >= 0");
  if (lambda_g == 1.0) return predict_noise(m, x_t, t, c);
  const Tensor e_phi = predict_noise(m, x_t, t, null_condition(m.k()));
  if (lambda_g == 0.0) return e_phi;
  const Tensor e_c = predict_noise(m, x_t, t, c);
  return add(e_phi, scale(sub(e_c, e_phi), lambda_g));
}

DiffusionModel train_diffusion(const Encoder& enc, const NoiseSchedule& schedule, const DenoiserConfig& dcfg,
                               const DiffusionTrainConfig& cfg, DiffusionTrainLog* log,
                               const std::function<void(std::size_t, double)>& on_window) {
  if (enc.k() != dcfg.k) {
    throw InvalidArgument("embedding width mismatch: encoder k=" + std::to_string(enc.k()) + ", denoiser k=" +
                          std::to_string(dcfg.k));
  }
  Rng init(cfg.seed, 0x64656e);  // "den"
  DiffusionModel m{schedule, Denoiser(dcfg, init), DataScale{}};
  auto params = m.params();
  set_trainable(params, true);
  std::vector<Tensor> opt_params;
  std::vector<std::vector<double>> ema;
  for (auto& p : params) {
    opt_params.push_back(p.tensor);
    ema.push_back(p.tensor.values());
  }
  AdamW opt(opt_params, AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, 0.0});

  Rng rng(cfg.seed, 0x747261696e);  // "train"
  const std::size_t b = cfg.batch, k = dcfg.k;
  DiffusionTrainLog local;
  DiffusionTrainLog& lg = log ? *log : local;
  double window_sum = 0.0, first_sum = 0.0;
  const std::size_t first_n = std::min<std::size_t>(20, cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<world::Image> imgs(b);
    for (auto& img : imgs) img = world::render(world::sample_style(rng));
    const Tensor x0 = m.data.to_model(stack_rows(imgs));
    std::vector<double> cv = enc.forward(stack_rows(imgs)).values();
    std::vector<int> ts(b);
    for (std::size_t i = 0; i < b; ++i) {
      if (rng.uniform() < cfg.p_uncond) std::fill_n(cv.begin() + static_cast<std::ptrdiff_t>(i * k), k, 0.0);
      ts[i] = static_cast<int>(rng.between(1, schedule.T));
    }
    const Tensor eps = Tensor::from({b, world::kPixels}, rng.normals(b * world::kPixels));
    const Tensor x_t = forward_noise(schedule, x0, ts, eps);
    const Tensor pred = m.net.forward(schedule, x_t, ts, Tensor::from({b, k}, std::move(cv)));
    const Tensor loss = scale(sq_l2_norm(sub(pred, eps)), 1.0 / static_cast<double>(b));
    const double lv = loss.item();
    if (!std::isfinite(lv)) throw DivergenceError("diffusion training: loss is NaN/Inf at step " + std::to_string(step));

    opt.set_lr(cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(cfg.steps))));
    opt.zero_grad();
    backward(loss);
    opt.step();
    for (std::size_t q = 0; q < params.size(); ++q) {
      const auto& v = params[q].tensor.values();
      for (std::size_t j = 0; j < v.size(); ++j) ema[q][j] = cfg.ema * ema[q][j] + (1.0 - cfg.ema) * v[j];
    }

    if (step < first_n) first_sum += lv;
    window_sum += lv;
    if ((step + 1) % lg.window == 0 || step + 1 == cfg.steps) {
      const std::size_t count = (step % lg.window) + 1;
      lg.window_loss.push_back(window_sum / static_cast<double>(count));
      if (on_window) on_window(step + 1, lg.window_loss.back());
      window_sum = 0.0;
    }
  }
  lg.initial_loss = first_n ? first_sum / static_cast<double>(first_n) : 0.0;
  lg.final_loss = lg.window_loss.empty() ? 0.0 : lg.window_loss.back();
  if (cfg.ema > 0.0)
    for (std::size_t q = 0; q < params.size(); ++q) params[q].tensor.mutable_values() = ema[q];
  set_trainable(params, false);
  round_to_f32(params);
  return m;
}

double evaluate_loss(const DiffusionModel& m, const Encoder& enc, std::uint64_t seed, std::size_t n, bool unconditional) {
  Rng rng(seed, 0x6576616c);  // "eval"
  std::vector<world::Image> imgs(n);
  for (auto& img : imgs) img = world::render(world::sample_style(rng));
  const Tensor x0 = m.data.to_model(stack_rows(imgs));
  Tensor c = unconditional ? broadcast_rows(null_condition(m.k()), n) : enc.forward(stack_rows(imgs));
  std::vector<int> ts(n);
  for (auto& t : ts) t = static_cast<int>(rng.between(1, m.schedule.T));
  const Tensor eps = Tensor::from({n, world::kPixels}, rng.normals(n * world::kPixels));
  const Tensor pred = m.net.forward(m.schedule, forward_noise(m.schedule, x0, ts, eps), ts, c);
  return sq_l2_norm(sub(pred, eps)).item() / static_cast<double>(n);
}

double NoiseSource::step_scale(const NoiseSchedule& s, int t) const { return t >= 2 ? s.sigmas[t] : 1.0; }

SeededNoise::SeededNoise(std::uint64_t seed, std::size_t first_index, std::size_t rows, int T) : T_(T) {
  for (std::size_t i = 0; i < rows; ++i) rngs_.emplace_back(seed, first_index + i);
}

Tensor SeededNoise::initial() {
  std::vector<double> v(rngs_.size() * world::kPixels);
  for (std::size_t i = 0; i < rngs_.size(); ++i) rngs_[i].fill_normal(v.data() + i * world::kPixels, world::kPixels);
  ++draws_;
  return Tensor::from({rngs_.size(), world::kPixels}, std::move(v));
}

Tensor SeededNoise::step_noise(int t) {
  if (t < 2 || t > T_) return Tensor::zeros({rngs_.size(), world::kPixels});
  return initial();
}

Tensor RecordedNoise::initial() {
  ++draws_;
  return rec_.x_T;
}

Tensor RecordedNoise::step_noise(int t) {
  ++draws_;
  return rec_.noise.at(static_cast<std::size_t>(t));
}

Tensor posterior_mean(const NoiseSchedule& s, const Tensor& x_t, int t, const Tensor& eps) {
  if (x_t.shape() != eps.shape()) throw ShapeError("posterior_mean", x_t.shape(), eps.shape());
  const double coef = s.betas[t] / s.sqrt_1m_ab(t);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alphas[t]);
  std::vector<double> out(x_t.numel());
  const double* x = x_t.data();
  const double* e = eps.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x[i] - coef * e[i]) * inv_sqrt_alpha;
  return Tensor::from(x_t.shape(), std::move(out));
}

Tensor sample(const DiffusionModel& m, NoiseSource& noise, const NoisePredictor& predictor) {
  const auto& s = m.schedule;
  Tensor x = noise.initial();
  if (x.rank() != 2 || x.dim(1) != world::kPixels) throw ShapeError("sample x_T", x.shape(), {0, world::kPixels});
  for (int t = s.T; t >= 1; --t) {
    const Tensor eps = predictor(x, t);
    if (eps.shape() != x.shape()) throw ShapeError("sample: noise prediction", eps.shape(), x.shape());
    const Tensor mu = posterior_mean(s, x, t, eps);
    const Tensor xi = noise.step_noise(t);
    if (xi.shape() != x.shape()) throw ShapeError("sample: step noise", xi.shape(), x.shape());
    const double sc = noise.step_scale(s, t);
    std::vector<double> next(mu.values());
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += sc * xi.at(i);
    x = Tensor::from(x.shape(), std::move(next));
  }
  std::vector<double> px = m.data.to_pixels(x).values();
  for (double& v : px) v = std::clamp(v, 0.0, world::kPixelMax);
  return Tensor::from(x.shape(), std::move(px));
}

Tensor sample(const DiffusionModel& m, NoiseSource& noise, const Tensor& c, double lambda_g, const NoiseHook& hook) {
  return sample(m, noise, [&](const Tensor& x_t, int t) {
    Tensor e = cfg_predict(m, x_t, t, c, lambda_g);
    return hook ? hook(x_t, t, e) : e;
  });
}

InversionRecord invert(const DiffusionModel& m, const Tensor& x0_pixels, std::uint64_t seed,
                       const NoisePredictor& predictor) {
  const auto& s = m.schedule;
  if (x0_pixels.rank() != 2 || x0_pixels.dim(1) != world::kPixels)
    throw ShapeError("invert", x0_pixels.shape(), {0, world::kPixels});
  for (double v : x0_pixels.values())
    if (!(v >= 0.0 && v <= world::kPixelMax))
      throw InvalidArgument("invert: pixel " + std::to_string(v) + " outside the image range [0, 1.2]");
  const std::size_t rows = x0_pixels.dim(0);
  NoisePredictor pred = predictor ? predictor : NoisePredictor([&](const Tensor& x_t, int t) {
    return predict_noise(m, x_t, t, null_condition(m.k()));
  });

  const Tensor x0 = m.data.to_model(x0_pixels);
  std::vector<Tensor> traj(static_cast<std::size_t>(s.T) + 1);
  traj[0] = x0;
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < rows; ++i) rngs.emplace_back(seed, i);
  for (int t = 1; t <= s.T; ++t) {
    std::vector<double> e(rows * world::kPixels);
    for (std::size_t i = 0; i < rows; ++i) rngs[i].fill_normal(e.data() + i * world::kPixels, world::kPixels);
    traj[t] = forward_noise(s, x0, t, Tensor::from(x0.shape(), std::move(e)));
  }

  InversionRecord rec;
  rec.x_T = traj[s.T];
  rec.noise.resize(static_cast<std::size_t>(s.T) + 1);
  for (int t = s.T; t >= 1; --t) {
    const Tensor mu = posterior_mean(s, traj[t], t, pred(traj[t], t));
    const double sc = t >= 2 ? s.sigmas[t] : 1.0;
    std::vector<double> z(mu.numel());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (traj[t - 1].at(i) - mu.at(i)) / sc;
    rec.noise[t] = Tensor::from(mu.shape(), std::move(z));
  }
  return rec;
}

}  // namespace dirforge
