#include <gtest/gtest.h>

#include <cmath>

#include "dirforge/direction.hpp"
#include "dirforge/world.hpp"
#include "support.hpp"

using namespace dirforge;
using dirforge::testing::random_tensor;

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

TransferConfig quick(std::size_t iters) {
  TransferConfig cfg;
  cfg.iterations = iters;
  cfg.batch = 4;
  cfg.n = 12;
  return cfg;
}

}  // namespace

TEST(TransferLoss, FullObjectiveGradientMatchesFiniteDifferences) {
  const auto cases = dirforge::testing::transfer_loss_cases(1, 24);
  for (const auto& c : cases) EXPECT_LT(dirforge::testing::grad_check(c.f, c.leaves), 1e-5);
}

TEST(TransferLoss, SemanticMatchesDirectCosines) {
  const Encoder enc = dirforge::testing::tiny_encoder(2, 5);
  const auto pairs = world::make_pairs(3, 6, world::find_direction("radius"));
  Rng rng(4);
  const Tensor d = random_tensor(rng, {5});
  double want = 0;
  for (std::size_t i = 0; i < 6; ++i)
    want += 1 - cosine(enc.embed(pairs.edited[i]), d.values()) + cosine(enc.embed(pairs.input[i]), d.values());
  want /= 6;
  EXPECT_NEAR(semantic_loss(enc, stack_rows(pairs.input), stack_rows(pairs.edited), d).item(), want, 1e-12);
}

TEST(TransferLoss, SemanticInputTermVanishesForOrthogonalDirection) {
  // d = E(x') minus its component along E(x), so cos(E(x), d) = 0.
  const Encoder enc = dirforge::testing::tiny_encoder(5, 6);
  const auto pairs = world::make_pairs(6, 1, world::find_direction("intensity"));
  const auto a = enc.embed(pairs.input[0]), b = enc.embed(pairs.edited[0]);
  double ab = 0;
  for (std::size_t i = 0; i < 6; ++i) ab += a[i] * b[i];
  std::vector<double> d(6);
  for (std::size_t i = 0; i < 6; ++i) d[i] = b[i] - ab * a[i];
  const double cb = cosine(b, d);
  const double loss = semantic_loss(enc, stack_rows(pairs.input), stack_rows(pairs.edited), Tensor::from({6}, d)).item();
  EXPECT_NEAR(loss, 1 - cb, 1e-12);
}

TEST(TransferLoss, LatentMatchesDirectMeanSquare) {
  const auto m = dirforge::testing::tiny_model(7);
  Rng rng(8);
  const Tensor x = random_tensor(rng, {3, 256}), x2 = random_tensor(rng, {3, 256});
  const Tensor d = random_tensor(rng, {m.k()});
  const std::vector<int> ts{2, 7, 12};
  double want = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const Tensor e1 = predict_noise(m, reshape(row(x, i), {1, 256}), ts[i], d);
    const Tensor e2 = predict_noise(m, reshape(row(x2, i), {1, 256}), ts[i], d);
    for (std::size_t j = 0; j < 256; ++j) want += std::pow(e2.at(j) - e1.at(j), 2);
  }
  want /= 3 * 256;
  EXPECT_NEAR(latent_loss(m, x, x2, ts, d).item(), -want, 1e-12);
  EXPECT_EQ(latent_loss(m, x, x, ts, d).item(), 0.0);
}

TEST(LearnDirection, DeterministicFloat32AndFrozenModels) {
  const auto m = dirforge::testing::tiny_model(9);
  const Encoder enc = dirforge::testing::tiny_encoder(9, m.k());
  const auto pairs = world::make_pairs(1, 12, world::find_direction("aspect"));
  LearnLog log;
  const auto a = learn_direction(pairs, "aspect", m, enc, quick(30), &log);
  const auto b = learn_direction(pairs, "aspect", m, enc, quick(30));
  EXPECT_EQ(a.d, b.d);
  EXPECT_EQ(a.name, "aspect");
  ASSERT_EQ(log.loss.size(), 30u);
  EXPECT_LT(log.loss.back(), log.loss.front());
  for (double v : a.d) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
}

TEST(LearnDirection, RejectsWidthMismatchAndBadConfig) {
  const auto m = dirforge::testing::tiny_model(1, 12, 24, 4);
  const Encoder enc = dirforge::testing::tiny_encoder(1, 5);
  const auto pairs = world::make_pairs(1, 4, world::find_direction("radius"));
  EXPECT_THROW(learn_direction(pairs, "radius", m, enc, quick(2)), InvalidArgument);
  const Encoder ok = dirforge::testing::tiny_encoder(1, 4);
  TransferConfig bad = quick(2);
  bad.w_sem = -1;
  EXPECT_THROW(learn_direction(pairs, "radius", m, ok, bad), InvalidArgument);
  bad = quick(2);
  bad.t_lo = 0;
  EXPECT_THROW(learn_direction(pairs, "radius", m, ok, bad), InvalidArgument);
}

TEST(LearnDirection, DivergenceCarriesLastFiniteDirection) {
  const auto m = dirforge::testing::tiny_model(2);
  const Encoder enc = dirforge::testing::tiny_encoder(2, m.k());
  const auto pairs = world::make_pairs(2, 4, world::find_direction("radius"));
  TransferConfig cfg = quick(20);
  cfg.lr = 1e300;
  cfg.w_sem = 0;
  try {
    learn_direction(pairs, "radius", m, enc, cfg);
    FAIL() << "expected divergence";
  } catch (const DirectionDivergence& e) {
    ASSERT_EQ(e.last_good_d.size(), m.k());
    for (double v : e.last_good_d) EXPECT_TRUE(std::isfinite(v));
  }
}
