#include "support.hpp"

#include "dirforge/world.hpp"

namespace dirforge::testing {

std::vector<GradCase> primitive_cases(std::uint64_t seed, int per_op) {
  std::vector<GradCase> out;
  Rng rng(seed, 7);
  auto dim = [&] { return static_cast<std::size_t>(rng.between(1, 4)); };
  for (int r = 0; r < per_op; ++r) {
    const std::uint64_t cs = seed * 1000 + static_cast<std::uint64_t>(r);
    const std::size_t m = dim(), n = dim(), k = dim();
    auto t = [&](Shape s) { return random_tensor(rng, std::move(s)); };
    auto pos = [&](Shape s) { return random_tensor(rng, std::move(s), 0.5, 2.0); };

    out.push_back({"add", [cs](const auto& v) { return contract(add(v[0], v[1]), cs); }, {t({m, n}), t({m, n})}});
    out.push_back({"add_scalar_broadcast", [cs](const auto& v) { return contract(add(v[0], v[1]), cs); },
                   {t({m, n}), t({1})}});
    out.push_back({"sub", [cs](const auto& v) { return contract(sub(v[0], v[1]), cs); }, {t({m, n}), t({m, n})}});
    out.push_back({"sub_scalar_broadcast", [cs](const auto& v) { return contract(sub(v[1], v[0]), cs); },
                   {t({m, n}), t({1})}});
    out.push_back({"mul", [cs](const auto& v) { return contract(mul(v[0], v[1]), cs); }, {t({m, n}), t({m, n})}});
    out.push_back({"mul_scalar_broadcast", [cs](const auto& v) { return contract(mul(v[0], v[1]), cs); },
                   {t({m, n}), t({1})}});
    out.push_back({"div", [cs](const auto& v) { return contract(div(v[0], v[1]), cs); }, {t({m, n}), pos({m, n})}});
    out.push_back({"div_scalar_broadcast", [cs](const auto& v) { return contract(div(v[1], v[0]), cs); },
                   {pos({m, n}), t({1})}});
    const double c = rng.uniform(-2, 2);
    out.push_back({"add_const", [cs, c](const auto& v) { return contract(add(v[0], c), cs); }, {t({m, n})}});
    out.push_back({"mul_const", [cs, c](const auto& v) { return contract(mul(v[0], c), cs); }, {t({m, n})}});
    out.push_back({"scale", [cs, c](const auto& v) { return contract(scale(v[0], c), cs); }, {t({m, n})}});
    out.push_back({"neg", [cs](const auto& v) { return contract(neg(v[0]), cs); }, {t({m, n})}});
    out.push_back({"matmul", [cs](const auto& v) { return contract(matmul(v[0], v[1]), cs); }, {t({m, k}), t({k, n})}});
    out.push_back({"add_bias", [cs](const auto& v) { return contract(add_bias(v[0], v[1]), cs); }, {t({m, n}), t({n})}});
    out.push_back({"concat_cols", [cs](const auto& v) { return contract(concat_cols({v[0], v[1], v[0]}), cs); },
                   {t({m, n}), t({m, k})}});
    out.push_back({"broadcast_rows", [cs, m](const auto& v) { return contract(broadcast_rows(v[0], m + 1), cs); },
                   {t({n})}});
    const std::size_t ri = rng.below(m);
    out.push_back({"row", [cs, ri](const auto& v) { return contract(row(v[0], ri), cs); }, {t({m, n})}});
    out.push_back({"reshape", [cs, m, n](const auto& v) { return contract(reshape(v[0], {n, m}), cs); }, {t({m, n})}});
    out.push_back({"normalize_rows", [cs](const auto& v) { return contract(normalize_rows(v[0]), cs); },
                   {pos({m, n + 1})}});
    out.push_back({"softplus", [cs](const auto& v) { return contract(nonlinearity(Activation::softplus, v[0]), cs); },
                   {random_tensor(rng, {m, n}, -4, 4)}});
    out.push_back({"tanh", [cs](const auto& v) { return contract(nonlinearity(Activation::tanh, v[0]), cs); },
                   {random_tensor(rng, {m, n}, -2, 2)}});
    out.push_back({"sum", [](const auto& v) { return mul(sum(v[0]), sum(v[0])); }, {t({m, n})}});
    out.push_back({"mean", [](const auto& v) { return mul(mean(v[0]), mean(v[0])); }, {t({m, n})}});
    out.push_back({"sq_l2_norm", [](const auto& v) { return sq_l2_norm(v[0]); }, {t({m, n})}});
    out.push_back({"cosine_similarity", [](const auto& v) { return cosine_similarity(v[0], v[1]); },
                   {pos({n + 1}), t({n + 1})}});
  }
  return out;
}

std::vector<GradCase> transfer_loss_cases(std::uint64_t seed, int count) {
  std::vector<GradCase> out;
  const auto& reg = world::registry();
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = seed * 100 + static_cast<std::uint64_t>(i);
    auto model = std::make_shared<DiffusionModel>(tiny_model(s));
    auto enc = std::make_shared<Encoder>(tiny_encoder(s, model->k()));
    const auto pairs = world::make_pairs(s, 3, reg[static_cast<std::size_t>(i) % reg.size()]);
    Rng rng(s, 3);
    const Tensor x = stack_rows(pairs.input), x2 = stack_rows(pairs.edited);
    std::vector<int> ts;
    for (std::size_t r = 0; r < pairs.input.size(); ++r) ts.push_back(static_cast<int>(rng.between(1, model->schedule.T)));
    const Tensor eps = random_tensor(rng, x.shape());
    const Tensor x_t = forward_noise(model->schedule, model->data.to_model(x), ts, eps);
    const Tensor x2_t = forward_noise(model->schedule, model->data.to_model(x2), ts, eps);
    const double w_sem = i % 3 == 2 ? 0.0 : 1.0, w_lat = i % 3 == 1 ? 0.0 : 1.0 + rng.uniform();
    out.push_back({"transfer_loss",
                   [=](const std::vector<Tensor>& v) {
                     Tensor loss = Tensor::scalar(0.0);
                     if (w_sem > 0) loss = add(loss, scale(semantic_loss(*enc, x, x2, v[0]), w_sem));
                     if (w_lat > 0) loss = add(loss, scale(latent_loss(*model, x_t, x2_t, ts, v[0]), w_lat));
                     return loss;
                   },
                   {random_tensor(rng, {model->k()}, -0.5, 0.5)}});
  }
  return out;
}

}  // namespace dirforge::testing
