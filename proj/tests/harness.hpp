// Run-and-check harnesses shared by the unit tests and the acceptance runner.
#pragma once

#include <random>

#include "amploco/amp.hpp"
#include "oracles.hpp"

namespace harness {

using amploco::MatX;
using amploco::VecX;

struct SeparationResult {
  int updates = 0;
  double held_out_fraction = 0.0;  // demo score above policy score, over paired held-out draws
  double expert_loss = 0.0;
  double policy_loss = 0.0;
  double mean_gap = 0.0;  // mean demo score minus mean policy score
};

// Two Gaussian transition clouds, demo at +offset and policy at -offset along
// every dimension, so the plane through the origin separates them.
inline MatX gaussian_cloud(int dim, int count, double offset, double spread, std::mt19937_64& rng) {
  MatX x = oracle::random_matrix(dim, count, rng, spread);
  x.array() += offset;
  return x;
}

inline SeparationResult separation_trial(int updates, std::uint64_t seed, double offset = 1.0, double spread = 0.3) {
  constexpr int kObs = 6;
  std::mt19937_64 rng(seed);
  amploco::AmpConfig cfg;
  cfg.hidden = {64, 64};
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 128;
  auto d = amploco::make_discriminator(kObs, cfg, rng);

  amploco::TransitionBuffer demo(2 * kObs, 4096), policy(2 * kObs, 4096);
  demo.push(gaussian_cloud(2 * kObs, 4096, offset, spread, rng));
  policy.push(gaussian_cloud(2 * kObs, 4096, -offset, spread, rng));
  MatX both(2 * kObs, 8192);
  both << demo.contents(), policy.contents();
  d.normalizer = amploco::normalize_transitions(both);

  amploco::AdamState adam;
  for (int k = 0; k < updates; ++k) amploco::amp_update(d, demo, policy, cfg, adam, rng);

  const MatX held_demo = gaussian_cloud(2 * kObs, 2000, offset, spread, rng);
  const MatX held_policy = gaussian_cloud(2 * kObs, 2000, -offset, spread, rng);
  const VecX sd = d.scores(held_demo);
  const VecX sp = d.scores(held_policy);
  SeparationResult r;
  r.updates = updates;
  r.held_out_fraction = (sd.array() > sp.array()).cast<double>().mean();
  r.expert_loss = amploco::expert_loss(d, held_demo);
  r.policy_loss = amploco::policy_loss(d, held_policy);
  r.mean_gap = sd.mean() - sp.mean();
  return r;
}

}  // namespace harness
