#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "amploco/amp.hpp"
#include "harness.hpp"
#include "oracles.hpp"

using namespace amploco;

namespace {

// Discriminator whose output is the constant `c` (zero weights, output bias c).
Discriminator constant_discriminator(int in, double c) {
  Discriminator d{DenseNet({in, 4, 1}, {Activation::Tanh, Activation::Identity}), RunningNormalizer(in), false};
  d.net.layers()[1].bias[0] = c;
  return d;
}

Discriminator wrap(DenseNet net, bool normalize = false) {
  const int in = net.input_dim();
  return Discriminator{std::move(net), RunningNormalizer(in), normalize};
}

double total_loss(const Discriminator& d, const MatX& demo, const MatX& policy, double gp) {
  return 0.5 * expert_loss(d, demo) + 0.5 * policy_loss(d, policy) + gp * gradient_penalty(d, demo);
}

}  // namespace

TEST(Losses, ConstantScores) {
  const MatX batch = MatX::Random(6, 5);
  EXPECT_DOUBLE_EQ(expert_loss(constant_discriminator(6, 1.0), batch), 0.0);
  EXPECT_DOUBLE_EQ(expert_loss(constant_discriminator(6, 0.0), batch), 1.0);
  EXPECT_DOUBLE_EQ(expert_loss(constant_discriminator(6, -1.0), batch), 4.0);
  EXPECT_DOUBLE_EQ(policy_loss(constant_discriminator(6, -1.0), batch), 0.0);
  EXPECT_DOUBLE_EQ(policy_loss(constant_discriminator(6, 0.0), batch), 1.0);
  EXPECT_DOUBLE_EQ(policy_loss(constant_discriminator(6, 1.0), batch), 4.0);
}

TEST(Losses, EmptyBatchThrows) {
  const auto d = constant_discriminator(4, 0.0);
  EXPECT_THROW(expert_loss(d, MatX(4, 0)), DomainError);
  EXPECT_THROW(policy_loss(d, MatX(4, 0)), DomainError);
  EXPECT_THROW(gradient_penalty(d, MatX(4, 0)), DomainError);
}

TEST(Losses, NonNegativeAndZeroOnlyAtTargets) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const auto d = wrap(oracle::random_net(rng, 1, true));
    const MatX x = oracle::random_matrix(d.net.input_dim(), 8, rng);
    EXPECT_GE(expert_loss(d, x), 0.0);
    EXPECT_GE(policy_loss(d, x), 0.0);
  }
  EXPECT_GT(expert_loss(constant_discriminator(3, 0.999), MatX::Ones(3, 2)), 0.0);
  EXPECT_GT(policy_loss(constant_discriminator(3, -0.999), MatX::Ones(3, 2)), 0.0);
}

TEST(GradientPenalty, ZeroAndLinearCases) {
  const MatX x = MatX::Random(5, 7);
  EXPECT_EQ(gradient_penalty(constant_discriminator(5, 0.4), x), 0.0);
  DenseNet lin({5, 1}, {Activation::Identity});
  lin.layers()[0].weight << 0.3, -1.0, 0.5, 2.0, 0.0;
  lin.layers()[0].bias << 0.7;
  EXPECT_NEAR(gradient_penalty(wrap(lin), x), 0.09 + 1.0 + 0.25 + 4.0, 1e-14);
}

TEST(GradientPenalty, MatchesFiniteDifferencesOverInput) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 10; ++k) {
    const auto d = wrap(oracle::random_net(rng, 1, false));
    const MatX x = oracle::random_matrix(d.net.input_dim(), 4, rng);
    double fd = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      fd += oracle::fd_vector(x.col(c), [&](const VecX& v) { return d.net.forward(v)[0]; }).squaredNorm();
    fd /= static_cast<double>(x.cols());
    EXPECT_LT(oracle::relative_error(gradient_penalty(d, x), fd), 1e-4) << "network " << k;
  }
}

TEST(GradientPenalty, NormalizedDiscriminatorUsesNetworkInput) {
  std::mt19937_64 rng(3);
  auto d = wrap(oracle::random_net(rng, 1, false), true);
  const MatX raw = oracle::random_matrix(d.net.input_dim(), 30, rng, 3.0);
  d.normalizer = normalize_transitions(raw);
  const MatX z = d.normalizer.apply(raw);
  double fd = 0.0;
  for (Eigen::Index c = 0; c < z.cols(); ++c)
    fd += oracle::fd_vector(z.col(c), [&](const VecX& v) { return d.net.forward(v)[0]; }).squaredNorm();
  fd /= static_cast<double>(z.cols());
  EXPECT_LT(oracle::relative_error(gradient_penalty(d, raw), fd), 1e-4);
}

TEST(AmpUpdate, ZeroScoresGiveUnitLoss) {
  auto d = constant_discriminator(4, 0.0);
  AmpConfig cfg;
  cfg.gradient_penalty_weight = 0.0;
  AdamState adam;
  const auto r = amp_update(d, MatX::Random(4, 8), MatX::Random(4, 8), cfg, adam);
  EXPECT_DOUBLE_EQ(r.expert, 1.0);
  EXPECT_DOUBLE_EQ(r.policy, 1.0);
  EXPECT_DOUBLE_EQ(r.total, 1.0);
}

TEST(AmpUpdate, ReportAndStepFollowTheTotalLoss) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 10; ++k) {
    auto d = wrap(oracle::random_net(rng, 1, false));
    const MatX demo = oracle::random_matrix(d.net.input_dim(), 6, rng);
    const MatX policy = oracle::random_matrix(d.net.input_dim(), 5, rng);
    AmpConfig cfg;
    cfg.learning_rate = 1e-3;
    const DenseNet before = d.net;
    AdamState adam;
    const auto r = amp_update(d, demo, policy, cfg, adam);
    EXPECT_NEAR(r.total, 0.5 * r.expert + 0.5 * r.policy + 10.0 * r.penalty, 1e-12);
    const auto probe = wrap(before);
    EXPECT_NEAR(r.total, total_loss(probe, demo, policy, 10.0), 1e-12);

    // Adam's first step is -lr g / (|g| + eps): compare with the FD gradient.
    const auto fd = oracle::fd_gradient(before, [&](const DenseNet& n) { return total_loss(wrap(n), demo, policy, 10.0); });
    for (std::size_t l = 0; l < before.layer_count(); ++l) {
      const MatX dw = d.net.layers()[l].weight - before.layers()[l].weight;
      for (Eigen::Index i = 0; i < dw.size(); ++i) {
        const double g = fd.weight[l].data()[i];
        if (std::abs(g) < 1e-3) continue;
        EXPECT_NEAR(dw.data()[i], -1e-3 * g / std::abs(g), 1e-6) << "network " << k;
      }
    }
  }
}

TEST(AmpUpdate, UnderfilledBuffersThrow) {
  std::mt19937_64 rng(5);
  auto d = constant_discriminator(4, 0.0);
  AmpConfig cfg;
  cfg.batch_size = 8;
  TransitionBuffer demo(4, 16), policy(4, 16);
  demo.push(MatX(MatX::Random(4, 8)));
  policy.push(MatX(MatX::Random(4, 7)));
  AdamState adam;
  EXPECT_THROW(amp_update(d, demo, policy, cfg, adam, rng), DomainError);
  policy.push(VecX(VecX::Zero(4)));
  EXPECT_NO_THROW(amp_update(d, demo, policy, cfg, adam, rng));
}

TEST(AmpUpdate, MeanGapAfterTwoHundredUpdates) {
  const auto r = harness::separation_trial(200, 11);
  EXPECT_GE(r.mean_gap, 1.0);
}

TEST(AmpUpdate, SeparatesClusters) {
  for (std::uint64_t seed : {21u, 22u}) {
    const auto r = harness::separation_trial(500, seed);
    EXPECT_GE(r.held_out_fraction, 0.95);
    EXPECT_LT(r.expert_loss, 0.2);
    EXPECT_LT(r.policy_loss, 0.2);
  }
}

TEST(ImitationReward, ScoreExamplesAndBounds) {
  EXPECT_EQ(imitation_reward_from_score(1.0), 1.0);
  EXPECT_EQ(imitation_reward_from_score(-1.0), 0.0);
  EXPECT_EQ(imitation_reward_from_score(0.0), 0.75);
  EXPECT_EQ(imitation_reward_from_score(3.0), 0.0);
  EXPECT_EQ(imitation_reward_from_score(-5.0), 0.0);
  EXPECT_GT(imitation_reward_from_score(-0.999999), 0.0);
  EXPECT_GT(imitation_reward_from_score(2.999999), 0.0);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int k = 0; k < 10000; ++k) {
    const double s = n(rng);
    const double r = imitation_reward_from_score(s);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
    EXPECT_EQ(r == 0.0, std::abs(s - 1.0) >= 2.0) << s;
  }
}

TEST(ImitationReward, PairAndBatchAgree) {
  std::mt19937_64 rng(7);
  DenseNet net = oracle::random_net(rng, 1, true);
  while (net.input_dim() % 2) net = oracle::random_net(rng, 1, true);
  const auto d = wrap(net);
  const int half = net.input_dim() / 2;
  std::vector<TransitionPair> pairs;
  for (int k = 0; k < 5; ++k)
    pairs.push_back({oracle::random_matrix(half, 1, rng), oracle::random_matrix(half, 1, rng)});
  const VecX batch = imitation_rewards(d, to_matrix(pairs));
  for (int k = 0; k < 5; ++k) {
    const double s = net.forward(pairs[k].concat())[0];
    EXPECT_NEAR(imitation_reward(d, pairs[k]), std::max(0.0, 1.0 - 0.25 * (s - 1.0) * (s - 1.0)), 1e-15);
    EXPECT_EQ(batch[k], imitation_reward(d, pairs[k]));
  }
  EXPECT_THROW((TransitionPair{VecX::Zero(2), VecX::Zero(3)}.concat()), DimensionError);
}

TEST(Normalizer, ConstantBufferHitsVarianceFloor) {
  const MatX c = MatX::Constant(3, 10, 2.5);
  const auto n = normalize_transitions(c);
  EXPECT_EQ(n.var, VecX::Zero(3));
  EXPECT_EQ(n.apply(c), MatX::Zero(3, 10));
  const VecX shifted = VecX::Constant(3, 2.5 + 1e-6);
  EXPECT_NEAR(n.apply(shifted)[0], 1e-6 / 1e-4, 1e-6);
  EXPECT_THROW(normalize_transitions(MatX(3, 0)), DomainError);
}

TEST(Normalizer, MatchesTwoPassStatistics) {
  std::mt19937_64 rng(8);
  MatX x = oracle::random_matrix(4, 200000, rng);
  RunningNormalizer n(4);
  for (int s = 0; s < 200000; s += 30000) n.update(x.middleCols(s, std::min(30000, 200000 - s)));
  const auto whole = normalize_transitions(x);
  for (int i = 0; i < 4; ++i) {
    double mean = 0.0, var = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) mean += x(i, c);
    mean /= static_cast<double>(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) var += (x(i, c) - mean) * (x(i, c) - mean);
    var /= static_cast<double>(x.cols());
    EXPECT_NEAR(n.mean[i], mean, 1e-12);
    EXPECT_NEAR(n.var[i], var, 1e-10);
    EXPECT_NEAR(whole.var[i], var, 1e-10);
  }
  // Standardize exactly, then the statistics are (0, 1).
  const MatX z = whole.apply(x);
  const auto zs = normalize_transitions(z);
  EXPECT_LT(zs.mean.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((zs.var.array() - 1.0).abs().maxCoeff(), 1e-6);
}

TEST(Normalizer, ScoresInvariantUnderPerDimensionAffineMaps) {
  std::mt19937_64 rng(9);
  auto d = wrap(oracle::random_net(rng, 1, true), true);
  const int dim = d.net.input_dim();
  const MatX demo = oracle::random_matrix(dim, 40, rng);
  const MatX policy = oracle::random_matrix(dim, 40, rng, 2.0);
  MatX both(dim, 80);
  both << demo, policy;
  d.normalizer = normalize_transitions(both);
  const VecX before_d = d.scores(demo), before_p = d.scores(policy);

  const VecX a = (oracle::random_matrix(dim, 1, rng).array().abs() + 0.1).matrix();
  const VecX b = oracle::random_matrix(dim, 1, rng, 5.0);
  auto map = [&](const MatX& m) { return MatX((a.asDiagonal() * m).colwise() + b); };
  d.normalizer = normalize_transitions(map(both));
  const VecX after_d = d.scores(map(demo)), after_p = d.scores(map(policy));
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j) EXPECT_EQ(before_d[i] > before_p[j], after_d[i] > after_p[j]);
  EXPECT_LT((before_d - after_d).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Buffer, FifoEvictionAndSampling) {
  TransitionBuffer b(2, 3);
  for (int k = 0; k < 5; ++k) b.push(VecX(VecX::Constant(2, k)));
  EXPECT_EQ(b.size(), 3u);
  const MatX c = b.contents();
  std::set<double> held;
  for (Eigen::Index i = 0; i < c.cols(); ++i) held.insert(c(0, i));
  EXPECT_EQ(held, (std::set<double>{2.0, 3.0, 4.0}));
  std::mt19937_64 rng(10);
  const MatX s = b.sample(100, rng);
  for (Eigen::Index i = 0; i < s.cols(); ++i) EXPECT_TRUE(held.count(s(0, i)));
  EXPECT_THROW(b.push(VecX(VecX::Zero(3))), DimensionError);
  b.clear();
  EXPECT_THROW(b.sample(1, rng), DomainError);
  EXPECT_THROW(TransitionBuffer(2, 0), DomainError);
}

TEST(Config, Validation) {
  AmpConfig c;
  EXPECT_NO_THROW(validate(c));
  c.gradient_penalty_weight = -1.0;
  EXPECT_THROW(validate(c), ConfigError);
  c = AmpConfig{};
  c.batch_size = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = AmpConfig{};
  c.learning_rate = 0.0;
  EXPECT_THROW(validate(c), ConfigError);
  std::mt19937_64 rng(12);
  const auto d = make_discriminator(7, AmpConfig{}, rng);
  EXPECT_EQ(d.net.sizes(), (std::vector<int>{14, 128, 128, 1}));
  EXPECT_TRUE(d.normalize);
}
