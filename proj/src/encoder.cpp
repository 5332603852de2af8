#include "dirforge/encoder.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "dirforge/optim.hpp"

namespace dirforge {

Encoder::Encoder(std::size_t hidden, std::size_t k, Rng& rng)
    : l1_(world::kPixels, hidden, rng), l2_(hidden, k, rng) {}

Tensor Encoder::forward_raw(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != world::kPixels) throw ShapeError("encoder input", x.shape(), {0, world::kPixels});
  return l2_(softplus(l1_(x)));
}

Tensor Encoder::forward(const Tensor& x) const {
  Tensor e = forward_raw(x);
  return normalize ? normalize_rows(e) : e;
}

std::vector<double> Encoder::embed(const world::Image& x) const {
  return forward(Tensor::from({1, x.size()}, x)).values();
}

std::vector<double> Encoder::embed_raw(const world::Image& x) const {
  return forward_raw(Tensor::from({1, x.size()}, x)).values();
}

std::vector<NamedTensor> Encoder::params() const {
  return {{"enc.l1.w", l1_.w}, {"enc.l1.b", l1_.b}, {"enc.l2.w", l2_.w}, {"enc.l2.b", l2_.b}};
}

namespace {

std::vector<double> normalized_target(const world::StyleVector& s) {
  std::vector<double> t(world::kAttrs);
  for (std::size_t i = 0; i < world::kAttrs; ++i) {
    const auto& r = world::ranges()[i];
    t[i] = (s[i] - (r.lo + r.hi) / 2) / (r.span() / 2);
  }
  return t;
}

}  // namespace

Encoder train_encoder(const EncoderConfig& cfg, EncoderTrainLog* log,
                      const std::function<void(std::size_t, double)>& on_epoch) {
  Rng init(cfg.seed, 0x656e63);  // "enc"
  Encoder enc(cfg.hidden, cfg.k, init);
  Linear head(cfg.k, world::kAttrs, init);

  Rng data_rng(cfg.seed, 0x656e6364);
  std::vector<world::Image> images;
  std::vector<std::vector<double>> targets;
  for (std::size_t i = 0; i < cfg.train_samples; ++i) {
    const auto s = world::sample_style(data_rng);
    images.push_back(world::render(s));
    targets.push_back(normalized_target(s));
  }

  auto params = enc.params();
  set_trainable(params, true);
  std::vector<Tensor> opt_params;
  for (auto& p : params) opt_params.push_back(p.tensor);
  head.w.set_requires_grad(true);
  head.b.set_requires_grad(true);
  opt_params.push_back(head.w);
  opt_params.push_back(head.b);
  AdamW opt(opt_params, AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, 0.0});

  Rng shuffle(cfg.seed, 0x73687566);
  std::vector<std::size_t> order(cfg.train_samples);
  for (std::size_t ep = 0; ep < cfg.epochs; ++ep) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      std::vector<std::vector<double>> xb, yb;
      for (std::size_t j = start; j < end; ++j) {
        xb.push_back(images[order[j]]);
        yb.push_back(targets[order[j]]);
      }
      Tensor pred = head(enc.forward(stack_rows(xb)));
      Tensor loss = mean(mul(sub(pred, stack_rows(yb)), sub(pred, stack_rows(yb))));
      if (!std::isfinite(loss.item())) {
        throw DivergenceError("encoder training: non-finite loss at epoch " + std::to_string(ep) + ", batch " +
                              std::to_string(batches));
      }
      opt.zero_grad();
      backward(loss);
      opt.step();
      total += loss.item();
      ++batches;
    }
    const double epoch_loss = total / static_cast<double>(batches);
    if (log) log->epoch_loss.push_back(epoch_loss);
    if (on_epoch) on_epoch(ep, epoch_loss);
  }
  set_trainable(params, false);
  round_to_f32(params);
  return enc;
}

std::array<double, world::kAttrs> probe_r2(const Encoder& enc, std::uint64_t seed, std::size_t n_fit,
                                           std::size_t n_test) {
  Rng rng(seed, 0x70726f6265);  // "probe"
  auto features = [&](std::size_t n, Eigen::MatrixXd& a, Eigen::MatrixXd& y) {
    std::vector<world::Image> imgs;
    a.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(enc.k() + 1));
    y.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(world::kAttrs));
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = world::sample_style(rng);
      imgs.push_back(world::render(s));
      for (std::size_t j = 0; j < world::kAttrs; ++j) y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s[j];
    }
    const Tensor e = enc.forward(stack_rows(imgs));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < enc.k(); ++j)
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = e.at(i * enc.k() + j);
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(enc.k())) = 1.0;
    }
  };
  Eigen::MatrixXd a_fit, y_fit, a_test, y_test;
  features(n_fit, a_fit, y_fit);
  features(n_test, a_test, y_test);
  const Eigen::MatrixXd coef = a_fit.colPivHouseholderQr().solve(y_fit);
  const Eigen::MatrixXd resid = a_test * coef - y_test;
  std::array<double, world::kAttrs> r2{};
  for (std::size_t j = 0; j < world::kAttrs; ++j) {
    const auto col = y_test.col(static_cast<Eigen::Index>(j));
    const double ss_tot = (col.array() - col.mean()).square().sum();
    const double ss_res = resid.col(static_cast<Eigen::Index>(j)).squaredNorm();
    r2[j] = 1.0 - ss_res / ss_tot;
  }
  return r2;
}

}  // namespace dirforge
