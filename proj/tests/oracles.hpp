// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls the code under test except to read
// parameters or evaluate a scalar loss.
#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "amploco/netcore.hpp"
#include "amploco/ppo.hpp"

namespace oracle {

using amploco::DenseNet;
using amploco::GradientTape;
using amploco::MatX;
using amploco::VecX;

// Von Mises mass of the swing arc [0, 2 pi ratio) for a density centered at
// 2 pi phase, by composite Simpson on n intervals. The density is scaled by
// exp(-kappa) and normalized over the full circle with the same rule.
inline double von_mises_swing(double phase, double ratio, double kappa, int n = 100000) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double mu = two_pi * phase;
  auto f = [&](double th) { return std::exp(kappa * (std::cos(th - mu) - 1.0)); };
  auto simpson = [&](double a, double b) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
  };
  return simpson(0.0, two_pi * ratio) / simpson(0.0, two_pi);
}

// Central differences of `loss` over every weight and bias of `net`.
inline GradientTape fd_gradient(DenseNet net, const std::function<double(const DenseNet&)>& loss, double h = 1e-6) {
  GradientTape t = net.zero_tape();
  auto probe = [&](double& p) {
    const double keep = p;
    p = keep + h;
    const double up = loss(net);
    p = keep - h;
    const double down = loss(net);
    p = keep;
    return (up - down) / (2.0 * h);
  };
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    auto& layer = net.layers()[l];
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) t.weight[l].data()[i] = probe(layer.weight.data()[i]);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) t.bias[l][i] = probe(layer.bias[i]);
  }
  return t;
}

inline VecX fd_vector(VecX x, const std::function<double(const VecX&)>& f, double h = 1e-6) {
  VecX g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Worst elementwise |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-4) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_relative_error(const VecX& a, const VecX& b, double floor = 1e-4) {
  double e = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) e = std::max(e, relative_error(a[i], b[i], floor));
  return e;
}

inline double max_relative_error(const GradientTape& a, const GradientTape& b, double floor = 1e-4) {
  double e = 0.0;
  for (std::size_t l = 0; l < a.weight.size(); ++l) {
    for (Eigen::Index i = 0; i < a.weight[l].size(); ++i)
      e = std::max(e, relative_error(a.weight[l].data()[i], b.weight[l].data()[i], floor));
    e = std::max(e, max_relative_error(a.bias[l], b.bias[l], floor));
  }
  return e;
}

// Small network with random sizes, activations and parameters. Smooth
// activations only unless `allow_relu`.
inline DenseNet random_net(std::mt19937_64& rng, int output_dim, bool allow_relu) {
  std::uniform_int_distribution<int> width(2, 6), depth(1, 3), kind(0, allow_relu ? 2 : 1);
  std::vector<int> sizes{width(rng)};
  std::vector<amploco::Activation> acts;
  const int hidden = depth(rng);
  for (int i = 0; i < hidden; ++i) {
    sizes.push_back(width(rng));
    const int k = kind(rng);
    acts.push_back(k == 0 ? amploco::Activation::Tanh : k == 1 ? amploco::Activation::Identity
                                                               : amploco::Activation::Relu);
  }
  sizes.push_back(output_dim);
  acts.push_back(amploco::Activation::Identity);
  DenseNet net(sizes, acts);
  std::normal_distribution<double> n(0.0, 0.7);
  for (auto& l : net.layers()) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = n(rng);
  }
  return net;
}

inline MatX random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  MatX m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Direct sum A_t = sum_l (gamma lambda)^l delta_{t+l}, truncated after the first
// done step at or after t and at the end of the horizon. O(T^2) per environment.
inline VecX brute_force_gae(const amploco::RolloutBatch& b, double gamma, double lambda) {
  VecX a = VecX::Zero(b.size());
  for (int e = 0; e < b.num_envs; ++e) {
    for (int t = 0; t < b.horizon; ++t) {
      double sum = 0.0, w = 1.0;
      for (int k = t; k < b.horizon; ++k) {
        const int i = e * b.horizon + k;
        const double next = b.terminals[i] ? 0.0 : b.next_values[i];
        sum += w * (b.rewards[i] + gamma * next - b.values[i]);
        if (b.dones[i]) break;
        w *= gamma * lambda;
      }
      a[e * b.horizon + t] = sum;
    }
  }
  return a;
}

// Random batch whose next_values are consistent with values inside each
// episode and arbitrary across resets. About 10% of steps end an episode and
// roughly half of those are terminal.
inline amploco::RolloutBatch random_rollout(std::mt19937_64& rng, int envs, int horizon, int obs_dim = 3,
                                            int act_dim = 2) {
  amploco::RolloutBatch b;
  b.num_envs = envs;
  b.horizon = horizon;
  const int n = envs * horizon;
  b.observations = random_matrix(obs_dim, n, rng);
  b.actions = random_matrix(act_dim, n, rng);
  b.log_probs = random_matrix(n, 1, rng);
  b.rewards = random_matrix(n, 1, rng);
  b.values = random_matrix(n, 1, rng);
  b.next_values = VecX(n);
  b.dones.assign(n, 0);
  b.terminals.assign(n, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int e = 0; e < envs; ++e) {
    for (int t = 0; t < horizon; ++t) {
      const int i = e * horizon + t;
      if (u(rng) < 0.1) {
        b.dones[i] = 1;
        b.terminals[i] = u(rng) < 0.5;
      }
      const bool last = t == horizon - 1;
      b.next_values[i] = (b.dones[i] || last) ? nd(rng) : b.values[i + 1];
    }
  }
  return b;
}

}  // namespace oracle
