#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "amploco/errors.hpp"
#include "amploco/netcore.hpp"

namespace amploco {

// Consecutive discriminator observations (o_t, o_{t+1}); the discriminator sees
// their concatenation.
struct TransitionPair {
  VecX current;
  VecX next;

  VecX concat() const {
    if (current.size() != next.size()) throw DimensionError("transition halves differ in dimension");
    VecX x(current.size() + next.size());
    x << current, next;
    return x;
  }
};

inline MatX to_matrix(const std::vector<TransitionPair>& pairs) {
  if (pairs.empty()) return {};
  MatX m(pairs.front().current.size() * 2, static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = pairs[i].concat();
  return m;
}

// Per-dimension running mean and variance (parallel-merge form).
struct RunningNormalizer {
  static constexpr double kVarianceFloor = 1e-8;
  VecX mean;
  VecX var;
  double count = 0.0;

  explicit RunningNormalizer(int dim = 0) : mean(VecX::Zero(dim)), var(VecX::Ones(dim)) {}

  int dim() const { return static_cast<int>(mean.size()); }

  void update(const MatX& batch) {
    if (batch.cols() == 0) return;
    if (batch.rows() != mean.size()) throw DimensionError("normalizer dimension mismatch");
    const double n = static_cast<double>(batch.cols());
    const VecX bmean = batch.rowwise().mean();
    const VecX bvar = (batch.colwise() - bmean).array().square().rowwise().mean();
    if (count == 0.0) {
      mean = bmean;
      var = bvar;
      count = n;
      return;
    }
    const double total = count + n;
    const VecX d = bmean - mean;
    mean += d * (n / total);
    var = (var * count + bvar * n + d.cwiseProduct(d) * (count * n / total)) / total;
    count = total;
  }

  MatX apply(const MatX& x) const {
    const VecX inv_std = var.cwiseMax(kVarianceFloor).cwiseSqrt().cwiseInverse();
    return (x.colwise() - mean).array().colwise() * inv_std.array();
  }
  VecX apply(const VecX& x) const {
    return (x - mean).cwiseQuotient(var.cwiseMax(kVarianceFloor).cwiseSqrt());
  }
};

// Statistics of a non-empty buffer of transitions (columns).
inline RunningNormalizer normalize_transitions(const MatX& buffer) {
  if (buffer.cols() == 0) throw DomainError("cannot normalize an empty buffer");
  RunningNormalizer n(static_cast<int>(buffer.rows()));
  n.update(buffer);
  return n;
}

// Least-squares discriminator over concatenated transition pairs. With
// `normalize` set, raw pairs pass through `normalizer` before the network and
// gradients are taken with respect to the network input.
struct Discriminator {
  DenseNet net;
  RunningNormalizer normalizer;
  bool normalize = true;

  MatX prepare(const MatX& raw) const { return normalize ? normalizer.apply(raw) : raw; }
  VecX scores(const MatX& raw) const { return net.forward(prepare(raw)).row(0).transpose(); }
  double score(const TransitionPair& p) const { return net.forward(prepare(MatX(p.concat()))).value(); }
};

// FIFO buffer of concatenated transitions stored as matrix columns.
class TransitionBuffer {
 public:
  TransitionBuffer(int dim, std::size_t capacity) : data_(dim, static_cast<Eigen::Index>(capacity)), capacity_(capacity) {
    if (capacity == 0) throw DomainError("buffer capacity must be positive");
  }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  int dim() const { return static_cast<int>(data_.rows()); }
  void clear() { size_ = head_ = 0; }

  void push(const VecX& x) {
    if (x.size() != data_.rows()) throw DimensionError("transition dimension does not match buffer");
    data_.col(static_cast<Eigen::Index>(head_)) = x;
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
  }
  void push(const MatX& columns) {
    for (Eigen::Index c = 0; c < columns.cols(); ++c) push(VecX(columns.col(c)));
  }

  MatX contents() const { return data_.leftCols(static_cast<Eigen::Index>(size_)); }

  // Uniform draws with replacement.
  MatX sample(std::size_t count, std::mt19937_64& rng) const {
    if (size_ == 0) throw DomainError("cannot sample from an empty buffer");
    std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
    MatX out(data_.rows(), static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) out.col(static_cast<Eigen::Index>(i)) = data_.col(static_cast<Eigen::Index>(pick(rng)));
    return out;
  }

 private:
  MatX data_;
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;
};

struct AmpConfig {
  double gradient_penalty_weight = 10.0;
  double learning_rate = 1e-4;
  std::size_t batch_size = 256;
  std::size_t policy_capacity = 100000;
  std::size_t demo_capacity = 200000;
  int updates_per_iteration = 4;
  bool normalize = true;
  std::vector<int> hidden{128, 128};
};

inline void validate(const AmpConfig& c) {
  if (!(c.gradient_penalty_weight >= 0.0)) throw ConfigError("amp.gradient_penalty_weight must be >= 0");
  if (!(c.learning_rate > 0.0)) throw ConfigError("amp.learning_rate must be positive");
  if (c.batch_size == 0 || c.policy_capacity == 0 || c.demo_capacity == 0)
    throw ConfigError("amp batch size and buffer capacities must be positive");
  if (c.updates_per_iteration < 0) throw ConfigError("amp.updates_per_iteration must be >= 0");
}

inline Discriminator make_discriminator(int observation_dim, const AmpConfig& cfg, std::mt19937_64& rng) {
  std::vector<int> sizes{2 * observation_dim};
  std::vector<Activation> acts;
  for (int h : cfg.hidden) {
    sizes.push_back(h);
    acts.push_back(Activation::Relu);
  }
  sizes.push_back(1);
  acts.push_back(Activation::Identity);
  Discriminator d{DenseNet::orthogonal(sizes, acts, rng, std::sqrt(2.0), 1.0), RunningNormalizer(2 * observation_dim),
                  cfg.normalize};
  return d;
}

namespace detail {
inline void require_batch(const MatX& b) {
  if (b.cols() == 0) throw DomainError("empty transition batch");
}
}  // namespace detail

// mean (D - 1)^2 over demonstration transitions.
inline double expert_loss(const Discriminator& d, const MatX& demo) {
  detail::require_batch(demo);
  return (d.scores(demo).array() - 1.0).square().mean();
}

// mean (D + 1)^2 over policy transitions.
inline double policy_loss(const Discriminator& d, const MatX& policy) {
  detail::require_batch(policy);
  return (d.scores(policy).array() + 1.0).square().mean();
}

// mean |grad_x D(x)|^2 over demonstration transitions.
inline double gradient_penalty(const Discriminator& d, const MatX& demo) {
  detail::require_batch(demo);
  const auto rec = d.net.record(d.prepare(demo));
  return d.net.input_gradient(rec).colwise().squaredNorm().mean();
}

struct AmpLossReport {
  double expert = 0.0;
  double policy = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

// One optimizer step on 1/2 L_expert + 1/2 L_policy + lambda_GP L_GP. Reported
// losses are evaluated at the pre-step parameters.
inline AmpLossReport amp_update(Discriminator& d, const MatX& demo, const MatX& policy, const AmpConfig& cfg,
                                AdamState& adam) {
  detail::require_batch(demo);
  detail::require_batch(policy);
  const auto rec_demo = d.net.record(d.prepare(demo));
  const auto rec_policy = d.net.record(d.prepare(policy));
  const MatX s_demo = rec_demo.output();
  const MatX s_policy = rec_policy.output();
  const double nd = static_cast<double>(demo.cols());
  const double np = static_cast<double>(policy.cols());

  AmpLossReport r;
  r.expert = (s_demo.array() - 1.0).square().mean();
  r.policy = (s_policy.array() + 1.0).square().mean();

  // d/dD of 1/2 mean (D-1)^2 is (D-1)/n, likewise for the policy term.
  GradientTape tape = d.net.backward(rec_demo, (s_demo.array() - 1.0).matrix() / nd);
  tape += d.net.backward(rec_policy, (s_policy.array() + 1.0).matrix() / np);
  VecX per_sample;
  tape += d.net.input_gradient_penalty_backward(rec_demo, cfg.gradient_penalty_weight, &per_sample);
  r.penalty = per_sample.mean();
  r.total = 0.5 * r.expert + 0.5 * r.policy + cfg.gradient_penalty_weight * r.penalty;
  if (!std::isfinite(r.total)) throw NumericalError("discriminator loss is not finite");
  adam_update(d.net, tape, adam, cfg.learning_rate);
  return r;
}

inline AmpLossReport amp_update(Discriminator& d, const TransitionBuffer& demo, const TransitionBuffer& policy,
                                const AmpConfig& cfg, AdamState& adam, std::mt19937_64& rng) {
  if (demo.size() < cfg.batch_size || policy.size() < cfg.batch_size)
    throw DomainError("replay buffers hold fewer transitions than one batch");
  const MatX db = demo.sample(cfg.batch_size, rng);
  const MatX pb = policy.sample(cfg.batch_size, rng);
  return amp_update(d, db, pb, cfg, adam);
}

// max(0, 1 - (D - 1)^2 / 4)
inline double imitation_reward_from_score(double score) {
  const double e = score - 1.0;
  return std::max(0.0, 1.0 - 0.25 * e * e);
}

inline double imitation_reward(const Discriminator& d, const TransitionPair& p) {
  return imitation_reward_from_score(d.score(p));
}

inline VecX imitation_rewards(const Discriminator& d, const MatX& pairs) {
  VecX s = d.scores(pairs);
  for (auto& v : s) v = imitation_reward_from_score(v);
  return s;
}

}  // namespace amploco
