#include "dirforge/direction.hpp"

#include <cmath>

#include "dirforge/optim.hpp"

namespace dirforge {

Tensor latent_loss(const DiffusionModel& m, const Tensor& x_t, const Tensor& x2_t, const std::vector<int>& t,
                   const Tensor& d) {
  if (x_t.shape() != x2_t.shape()) throw ShapeError("latent_loss", x_t.shape(), x2_t.shape());
  if (d.rank() != 1 || d.dim(0) != m.k()) throw ShapeError("latent_loss direction", d.shape(), {m.k()});
  const std::size_t b = x_t.dim(0);
  const Tensor c = broadcast_rows(d, b);
  const Tensor diff = sub(m.net.forward(m.schedule, x2_t, t, c), m.net.forward(m.schedule, x_t, t, c));
  return neg(mean(mul(diff, diff)));
}

Tensor semantic_loss(const Encoder& enc, const Tensor& x, const Tensor& x2, const Tensor& d) {
  if (x.shape() != x2.shape()) throw ShapeError("semantic_loss", x.shape(), x2.shape());
  if (d.rank() != 1 || d.dim(0) != enc.k()) throw ShapeError("semantic_loss direction", d.shape(), {enc.k()});
  const std::size_t b = x.dim(0);
  const Tensor e1 = enc.forward(x);
  const Tensor e2 = enc.forward(x2);
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < b; ++i) {
    const Tensor term = add(sub(Tensor::scalar(1.0), cosine_similarity(row(e2, i), d)), cosine_similarity(row(e1, i), d));
    total = add(total, term);
  }
  return scale(total, 1.0 / static_cast<double>(b));
}

DirectionEmbedding learn_direction(const world::PairSet& pairs, const std::string& name, const DiffusionModel& m,
                                   const Encoder& enc, const TransferConfig& cfg, LearnLog* log) {
  if (m.k() != enc.k()) {
    throw InvalidArgument("embedding width mismatch: model k=" + std::to_string(m.k()) +
                          ", encoder k=" + std::to_string(enc.k()));
  }
  if (cfg.batch == 0 || cfg.iterations == 0) throw InvalidArgument("transfer: batch and iterations must be positive");
  if (cfg.w_sem < 0 || cfg.w_latent < 0) throw InvalidArgument("transfer: loss weights must be >= 0");
  for (const auto& p : m.params())
    if (p.tensor.requires_grad()) throw InvalidArgument("transfer: denoiser parameter " + p.name + " is not frozen");
  for (const auto& p : enc.params())
    if (p.tensor.requires_grad()) throw InvalidArgument("transfer: encoder parameter " + p.name + " is not frozen");
  const std::uint64_t model_sum = m.checksum(), enc_sum = enc.checksum();

  const std::size_t n = pairs.input.size();
  const int t_hi = cfg.t_hi > 0 ? cfg.t_hi : m.schedule.T;
  if (cfg.t_lo < 1 || t_hi > m.schedule.T || cfg.t_lo > t_hi) throw InvalidArgument("transfer: bad timestep range");
  const Tensor x_all = stack_rows(pairs.input);
  const Tensor x2_all = stack_rows(pairs.edited);
  const Tensor xm_all = m.data.to_model(x_all);
  const Tensor x2m_all = m.data.to_model(x2_all);

  Rng rng(cfg.seed, 0x6c6561726e);  // "learn"
  std::vector<double> d0 = rng.normals(m.k());
  for (double& v : d0) v *= cfg.init_scale;
  Tensor d = Tensor::from({m.k()}, d0);
  d.set_requires_grad(true);
  std::vector<Tensor> params{d};
  AdamW opt(params, AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});

  auto gather = [](const Tensor& all, const std::vector<std::size_t>& idx) {
    const std::size_t w = all.dim(1);
    std::vector<double> out(idx.size() * w);
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy_n(all.data() + idx[i] * w, w, out.data() + i * w);
    return Tensor::from({idx.size(), w}, std::move(out));
  };

  LearnLog local;
  LearnLog& lg = log ? *log : local;
  bool warned = false;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::vector<std::size_t> idx(cfg.batch);
    std::vector<int> ts(cfg.batch);
    for (auto& i : idx) i = rng.below(n);
    for (auto& t : ts) t = static_cast<int>(rng.between(cfg.t_lo, t_hi));
    const Tensor eps = Tensor::from({cfg.batch, world::kPixels}, rng.normals(cfg.batch * world::kPixels));

    Tensor loss = Tensor::scalar(0.0);
    double sem_v = 0.0, lat_v = 0.0;
    if (cfg.w_sem > 0) {
      const Tensor sem = semantic_loss(enc, gather(x_all, idx), gather(x2_all, idx), d);
      sem_v = sem.item();
      loss = add(loss, scale(sem, cfg.w_sem));
    }
    if (cfg.w_latent > 0) {
      const Tensor x_t = forward_noise(m.schedule, gather(xm_all, idx), ts, eps);
      const Tensor x2_t = forward_noise(m.schedule, gather(x2m_all, idx), ts, eps);
      const Tensor lat = latent_loss(m, x_t, x2_t, ts, d);
      lat_v = lat.item();
      loss = add(loss, scale(lat, cfg.w_latent));
    }
    const double lv = loss.item();
    if (!std::isfinite(lv)) {
      throw DirectionDivergence("direction '" + name + "': non-finite loss at iteration " + std::to_string(it), d.values());
    }
    const std::vector<double> last_good = d.values();
    opt.zero_grad();
    backward(loss);
    if (cfg.clip) clip_grad_norm(params, cfg.clip_norm);
    opt.step();
    for (double v : d.values()) {
      if (!std::isfinite(v))
        throw DirectionDivergence("direction '" + name + "': d became non-finite at iteration " + std::to_string(it), last_good);
    }
    const double dn = std::sqrt(sq_l2_norm(d.detach()).item());
    lg.loss.push_back(lv);
    lg.semantic.push_back(sem_v);
    lg.latent.push_back(lat_v);
    lg.d_norm.push_back(dn);
    if (dn > cfg.norm_ceiling && !warned) {
      lg.warnings.push_back("direction '" + name + "': |d| = " + std::to_string(dn) + " exceeds ceiling " +
                            std::to_string(cfg.norm_ceiling) + " at iteration " + std::to_string(it));
      warned = true;
    }
  }
  if (m.checksum() != model_sum || enc.checksum() != enc_sum)
    throw Error("transfer: frozen model or encoder parameters changed during learning");

  DirectionEmbedding out;
  out.name = name;
  out.d = d.values();
  for (double& v : out.d) v = static_cast<double>(static_cast<float>(v));
  out.provenance.world_seed = cfg.seed;
  out.provenance.direction = name;
  out.provenance.n = n;
  out.provenance.iterations = cfg.iterations;
  out.provenance.w_sem = cfg.w_sem;
  out.provenance.w_latent = cfg.w_latent;
  return out;
}

}  // namespace dirforge
