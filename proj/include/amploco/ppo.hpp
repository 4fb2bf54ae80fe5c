#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "amploco/amp.hpp"
#include "amploco/errors.hpp"
#include "amploco/netcore.hpp"
#include "amploco/observation.hpp"

namespace amploco {

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_ratio = 0.2;
  int epochs = 5;
  int minibatch_size = 512;
  double learning_rate = 3e-4;        // policy
  double value_learning_rate = 3e-4;
  double entropy_coefficient = 1e-3;
  double value_loss_coefficient = 1.0;
  double value_clip = 0.2;            // <= 0 disables value clipping
  double max_grad_norm = 1.0;         // <= 0 disables clipping
  double log_std_min = -4.0;
  double log_std_max = 1.0;
  double initial_log_std = -1.0;
  bool normalize_advantages = true;
  int iterations = 400;
  std::vector<int> hidden{128, 128};
};

inline void validate(const PpoConfig& c) {
  if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) throw ConfigError("ppo.gamma must lie in [0, 1]");
  if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) throw ConfigError("ppo.lambda must lie in [0, 1]");
  if (!(c.clip_ratio > 0.0)) throw ConfigError("ppo.clip_ratio must be positive");
  if (c.epochs < 1 || c.minibatch_size < 1) throw ConfigError("ppo epochs and minibatch size must be >= 1");
  if (!(c.learning_rate > 0.0) || !(c.value_learning_rate > 0.0)) throw ConfigError("ppo learning rates must be positive");
  if (c.entropy_coefficient < 0.0 || c.value_loss_coefficient < 0.0) throw ConfigError("ppo loss coefficients must be >= 0");
  if (!(c.log_std_min < c.log_std_max)) throw ConfigError("ppo log-std bounds are inverted");
  if (c.initial_log_std < c.log_std_min || c.initial_log_std > c.log_std_max)
    throw ConfigError("ppo.initial_log_std lies outside the log-std bounds");
  if (c.iterations < 0) throw ConfigError("ppo.iterations must be >= 0");
  for (int h : c.hidden)
    if (h <= 0) throw ConfigError("ppo hidden sizes must be positive");
}

// Diagonal Gaussian policy with state-independent log-standard-deviations.
// Observations pass through `normalizer` when `normalize` is set.
struct PolicyHead {
  DenseNet mean;
  VecX log_std;
  RunningNormalizer normalizer;
  bool normalize = true;
  double log_std_min = -4.0;
  double log_std_max = 1.0;

  int action_dim() const { return mean.output_dim(); }
  int observation_dim() const { return mean.input_dim(); }

  MatX prepare(const MatX& obs) const { return normalize ? normalizer.apply(obs) : obs; }
  VecX prepare(const VecX& obs) const { return normalize ? normalizer.apply(obs) : obs; }

  VecX mean_action(const VecX& obs) const {
    if (obs.size() != observation_dim()) throw DimensionError("observation length does not match the policy");
    return mean.forward(prepare(obs));
  }

  void clamp_log_std() { log_std = log_std.cwiseMax(log_std_min).cwiseMin(log_std_max); }
};

inline double gaussian_log_prob(const VecX& action, const VecX& mu, const VecX& log_std) {
  const VecX z = (action - mu).cwiseQuotient(log_std.array().exp().matrix());
  return -0.5 * z.squaredNorm() - log_std.sum() - 0.5 * static_cast<double>(action.size()) * std::log(2.0 * std::numbers::pi);
}

inline double gaussian_entropy(const VecX& log_std) {
  return log_std.sum() + 0.5 * static_cast<double>(log_std.size()) * std::log(2.0 * std::numbers::pi * std::numbers::e);
}

inline double log_prob(const PolicyHead& head, const VecX& obs, const Action& action) {
  if (action.size() != head.action_dim()) throw DimensionError("action length does not match the policy");
  return gaussian_log_prob(action, head.mean_action(obs), head.log_std);
}

// Draws action_dim standard normals from `rng`.
inline std::pair<Action, double> sample_action(const PolicyHead& head, const VecX& obs, std::mt19937_64& rng) {
  const VecX mu = head.mean_action(obs);
  std::normal_distribution<double> normal(0.0, 1.0);
  VecX a(mu.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = mu[i] + std::exp(head.log_std[i]) * normal(rng);
  return {a, gaussian_log_prob(a, mu, head.log_std)};
}

struct ActorCritic {
  PolicyHead policy;
  DenseNet value;

  double value_of(const VecX& obs) const { return value.forward(policy.prepare(obs))[0]; }
  VecX values_of(const MatX& obs) const { return value.forward(policy.prepare(obs)).row(0).transpose(); }
};

inline ActorCritic make_actor_critic(int obs_dim, int action_dim, const PpoConfig& cfg, std::mt19937_64& rng,
                                     bool normalize_observations = true) {
  std::vector<int> sizes{obs_dim};
  std::vector<Activation> acts;
  for (int h : cfg.hidden) {
    sizes.push_back(h);
    acts.push_back(Activation::Tanh);
  }
  auto policy_sizes = sizes;
  policy_sizes.push_back(action_dim);
  auto value_sizes = sizes;
  value_sizes.push_back(1);
  acts.push_back(Activation::Identity);
  ActorCritic ac;
  ac.policy.mean = DenseNet::orthogonal(policy_sizes, acts, rng, std::sqrt(2.0), 0.01);
  ac.policy.log_std = VecX::Constant(action_dim, cfg.initial_log_std);
  ac.policy.normalizer = RunningNormalizer(obs_dim);
  ac.policy.normalize = normalize_observations;
  ac.policy.log_std_min = cfg.log_std_min;
  ac.policy.log_std_max = cfg.log_std_max;
  ac.value = DenseNet::orthogonal(value_sizes, acts, rng, std::sqrt(2.0), 1.0);
  return ac;
}

// Flat rollout storage. Column / entry index is env * horizon + t.
struct RolloutBatch {
  int num_envs = 0;
  int horizon = 0;
  MatX observations;
  MatX actions;
  VecX log_probs;
  VecX rewards;
  VecX values;       // V(o_t)
  VecX next_values;  // V(o_{t+1}) before any reset; bootstrap at truncation
  std::vector<std::uint8_t> dones;
  std::vector<std::uint8_t> terminals;

  int size() const { return num_envs * horizon; }

  void check() const {
    const auto n = static_cast<Eigen::Index>(size());
    if (n == 0) throw DomainError("rollout batch is empty");
    if (observations.cols() != n || actions.cols() != n || log_probs.size() != n || rewards.size() != n ||
        values.size() != n || next_values.size() != n || static_cast<Eigen::Index>(dones.size()) != n ||
        static_cast<Eigen::Index>(terminals.size()) != n)
      throw DimensionError("rollout batch arrays differ in length");
    if (!log_probs.allFinite()) throw NumericalError("non-finite log-probability in rollout batch");
  }
};

struct GaeResult {
  VecX advantages;      // normalized when requested
  VecX raw_advantages;
  VecX returns;         // raw advantages + values
};

// Reverse scan per environment. A terminal step has no bootstrap; any done
// step cuts the accumulation; the last stored step bootstraps from next_values.
inline GaeResult compute_gae(const RolloutBatch& b, double gamma, double lambda, bool normalize = true) {
  b.check();
  GaeResult g;
  g.raw_advantages = VecX::Zero(b.size());
  for (int e = 0; e < b.num_envs; ++e) {
    double carry = 0.0;
    for (int t = b.horizon - 1; t >= 0; --t) {
      const int i = e * b.horizon + t;
      const double bootstrap = b.terminals[i] ? 0.0 : b.next_values[i];
      const double delta = b.rewards[i] + gamma * bootstrap - b.values[i];
      if (b.dones[i] || t == b.horizon - 1) carry = 0.0;
      carry = delta + gamma * lambda * carry;
      g.raw_advantages[i] = carry;
    }
  }
  g.returns = g.raw_advantages + b.values;
  g.advantages = g.raw_advantages;
  if (normalize && b.size() > 1) {
    const double mean = g.advantages.mean();
    const double var = (g.advantages.array() - mean).square().mean();
    g.advantages = (g.advantages.array() - mean) / (std::sqrt(var) + 1e-8);
  }
  return g;
}

struct PpoReport {
  double surrogate = 0.0;     // mean of min(r A, clip(r) A), sign as an objective
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double max_ratio_error = 0.0;  // max |r - 1|
  double grad_norm = 0.0;        // pre-clipping, averaged over minibatches
  int minibatches = 0;
};

namespace detail {

struct MinibatchEval {
  PpoReport stats;
  GradientTape policy_tape;
  VecX log_std_grad;
  GradientTape value_tape;
};

inline MinibatchEval evaluate_minibatch(const ActorCritic& ac, const RolloutBatch& b, const VecX& adv,
                                        const VecX& returns, const std::vector<int>& idx, const PpoConfig& cfg,
                                        bool with_gradients) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  const int adim = ac.policy.action_dim();
  MatX obs(b.observations.rows(), n), act(adim, n);
  VecX old_logp(n), a(n), ret(n), old_v(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    obs.col(k) = b.observations.col(idx[k]);
    act.col(k) = b.actions.col(idx[k]);
    old_logp[k] = b.log_probs[idx[k]];
    a[k] = adv[idx[k]];
    ret[k] = returns[idx[k]];
    old_v[k] = b.values[idx[k]];
  }
  const MatX x = ac.policy.prepare(obs);
  const auto rec = ac.policy.mean.record(x);
  const MatX& mu = rec.output();
  const VecX sigma = ac.policy.log_std.array().exp();
  const VecX inv_var = sigma.array().square().inverse();

  MinibatchEval out;
  auto& s = out.stats;
  MatX d_mu = MatX::Zero(adim, n);
  VecX d_log_std = VecX::Zero(adim);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const VecX diff = act.col(k) - mu.col(k);
    const double logp = gaussian_log_prob(act.col(k), mu.col(k), ac.policy.log_std);
    const double log_ratio = logp - old_logp[k];
    const double ratio = std::exp(log_ratio);
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
    const double unclipped_obj = ratio * a[k];
    const double clipped_obj = clipped * a[k];
    s.surrogate += std::min(unclipped_obj, clipped_obj) * inv_n;
    s.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;
    if (std::abs(ratio - 1.0) > cfg.clip_ratio) s.clip_fraction += inv_n;
    s.max_ratio_error = std::max(s.max_ratio_error, std::abs(ratio - 1.0));
    // Loss is -objective; only the unclipped branch carries gradient.
    if (unclipped_obj <= clipped_obj) {
      const double g = -a[k] * ratio * inv_n;  // d loss / d logp
      d_mu.col(k) = g * diff.cwiseProduct(inv_var);
      d_log_std += g * (diff.cwiseProduct(diff).cwiseProduct(inv_var) - VecX::Ones(adim));
    }
  }
  s.entropy = gaussian_entropy(ac.policy.log_std);
  d_log_std -= VecX::Constant(adim, cfg.entropy_coefficient);

  const auto vrec = ac.value.record(x);
  const VecX v = vrec.output().row(0).transpose();
  VecX d_v = VecX::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double e = v[k] - ret[k];
    double loss = e * e;
    double grad = 2.0 * e;
    if (cfg.value_clip > 0.0) {
      const double delta = v[k] - old_v[k];
      const double vc = old_v[k] + std::clamp(delta, -cfg.value_clip, cfg.value_clip);
      const double ec = vc - ret[k];
      if (ec * ec > loss) {
        loss = ec * ec;
        grad = std::abs(delta) < cfg.value_clip ? 2.0 * ec : 0.0;
      }
    }
    s.value_loss += 0.5 * loss * inv_n;
    d_v[k] = cfg.value_loss_coefficient * 0.5 * grad * inv_n;
  }
  if (!std::isfinite(s.surrogate) || !std::isfinite(s.value_loss))
    throw NumericalError("PPO loss is not finite");
  if (with_gradients) {
    out.policy_tape = ac.policy.mean.backward(rec, d_mu);
    out.log_std_grad = d_log_std;
    out.value_tape = ac.value.backward(vrec, d_v.transpose());
  }
  return out;
}

}  // namespace detail

// Objective statistics at the current parameters without updating anything.
inline PpoReport evaluate_ppo(const ActorCritic& ac, const RolloutBatch& b, const GaeResult& gae, const PpoConfig& cfg) {
  b.check();
  std::vector<int> idx(b.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto r = detail::evaluate_minibatch(ac, b, gae.advantages, gae.returns, idx, cfg, false).stats;
  r.minibatches = 1;
  return r;
}

struct PpoOptimizer {
  AdamState policy;
  VectorAdam log_std;
  AdamState value;
};

// Epochs of shuffled minibatch passes. Reported statistics are minibatch
// means, each taken before that minibatch's step.
inline PpoReport ppo_update(ActorCritic& ac, const RolloutBatch& b, const GaeResult& gae, const PpoConfig& cfg,
                            PpoOptimizer& opt, std::mt19937_64& rng) {
  validate(cfg);
  b.check();
  const int n = b.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int mb = std::min(cfg.minibatch_size, n);
  PpoReport total;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n; start += mb) {
      const int end = std::min(n, start + mb);
      std::vector<int> idx(order.begin() + start, order.begin() + end);
      auto ev = detail::evaluate_minibatch(ac, b, gae.advantages, gae.returns, idx, cfg, true);
      const double norm = std::sqrt(ev.policy_tape.squared_norm() + ev.log_std_grad.squaredNorm() +
                                    ev.value_tape.squared_norm());
      if (!std::isfinite(norm)) throw NumericalError("PPO gradient is not finite");
      if (cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm) {
        const double k = cfg.max_grad_norm / norm;
        ev.policy_tape.scale(k);
        ev.log_std_grad *= k;
        ev.value_tape.scale(k);
      }
      adam_update(ac.policy.mean, ev.policy_tape, opt.policy, cfg.learning_rate);
      opt.log_std.update(ac.policy.log_std, ev.log_std_grad, cfg.learning_rate);
      ac.policy.clamp_log_std();
      adam_update(ac.value, ev.value_tape, opt.value, cfg.value_learning_rate);

      auto& s = ev.stats;
      total.surrogate += s.surrogate;
      total.value_loss += s.value_loss;
      total.entropy += s.entropy;
      total.approx_kl += s.approx_kl;
      total.clip_fraction += s.clip_fraction;
      total.max_ratio_error = std::max(total.max_ratio_error, s.max_ratio_error);
      total.grad_norm += norm;
      ++total.minibatches;
    }
  }
  const double k = 1.0 / total.minibatches;
  total.surrogate *= k;
  total.value_loss *= k;
  total.entropy *= k;
  total.approx_kl *= k;
  total.clip_fraction *= k;
  total.grad_norm *= k;
  return total;
}

}  // namespace amploco
