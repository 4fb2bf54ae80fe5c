#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "amploco/errors.hpp"

namespace amploco {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

enum class Activation : std::uint8_t { Tanh = 0, Relu = 1, Identity = 2 };

inline Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + s + "'");
}

namespace act {

inline MatX apply(Activation a, const MatX& z) {
  switch (a) {
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Identity: return z;
  }
  return z;
}

inline MatX derivative(Activation a, const MatX& z) {
  switch (a) {
    case Activation::Tanh: return (1.0 - z.array().tanh().square()).matrix();
    case Activation::Relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::Identity: return MatX::Ones(z.rows(), z.cols());
  }
  return z;
}

inline MatX second_derivative(Activation a, const MatX& z) {
  if (a == Activation::Tanh) {
    const auto t = z.array().tanh();
    return (-2.0 * t * (1.0 - t.square())).matrix();
  }
  return MatX::Zero(z.rows(), z.cols());
}

}  // namespace act

struct DenseLayer {
  MatX weight;  // out x in
  VecX bias;
  Activation activation = Activation::Identity;
};

// Pre-activations and activations of one batched forward pass; columns are samples.
struct ForwardRecord {
  MatX input;
  std::vector<MatX> pre;   // z_l
  std::vector<MatX> post;  // h_l

  bool empty() const { return pre.empty(); }
  const MatX& output() const { return post.back(); }
};

// Gradient buffers laid out like the network's parameters.
struct GradientTape {
  std::vector<MatX> weight;
  std::vector<VecX> bias;
  MatX input;  // d(loss)/d(input), one column per sample; may be empty

  GradientTape& operator+=(const GradientTape& o) {
    for (std::size_t l = 0; l < weight.size(); ++l) {
      weight[l] += o.weight[l];
      bias[l] += o.bias[l];
    }
    return *this;
  }
  void scale(double s) {
    for (std::size_t l = 0; l < weight.size(); ++l) {
      weight[l] *= s;
      bias[l] *= s;
    }
  }
  double squared_norm() const {
    double n = 0.0;
    for (std::size_t l = 0; l < weight.size(); ++l) n += weight[l].squaredNorm() + bias[l].squaredNorm();
    return n;
  }
  bool all_finite() const {
    for (std::size_t l = 0; l < weight.size(); ++l)
      if (!weight[l].allFinite() || !bias[l].allFinite()) return false;
    return true;
  }
};

class DenseNet {
 public:
  DenseNet() = default;

  // sizes = {input, hidden..., output}; one activation per layer. Parameters start at zero.
  DenseNet(const std::vector<int>& sizes, const std::vector<Activation>& activations) {
    if (sizes.size() < 2) throw DimensionError("a network needs at least an input and an output size");
    if (activations.size() + 1 != sizes.size()) throw DimensionError("one activation per layer is required");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      if (sizes[l] <= 0 || sizes[l + 1] <= 0) throw DimensionError("layer sizes must be positive");
      layers_.push_back({MatX::Zero(sizes[l + 1], sizes[l]), VecX::Zero(sizes[l + 1]), activations[l]});
    }
  }

  // Orthogonal weights scaled by `gain` (hidden) and `output_gain` (last layer), zero biases.
  static DenseNet orthogonal(const std::vector<int>& sizes, const std::vector<Activation>& activations,
                             std::mt19937_64& rng, double gain, double output_gain) {
    DenseNet net(sizes, activations);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l < net.layers_.size(); ++l) {
      auto& w = net.layers_[l].weight;
      const auto rows = w.rows();
      const auto cols = w.cols();
      const bool tall = rows >= cols;
      MatX g(tall ? rows : cols, tall ? cols : rows);
      for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
      Eigen::HouseholderQR<MatX> qr(g);
      MatX q = qr.householderQ() * MatX::Identity(g.rows(), g.cols());
      const MatX r = qr.matrixQR().topLeftCorner(g.cols(), g.cols());
      for (Eigen::Index c = 0; c < q.cols(); ++c)
        if (r(c, c) < 0.0) q.col(c) *= -1.0;
      const double s = (l + 1 == net.layers_.size()) ? output_gain : gain;
      w = s * (tall ? q : MatX(q.transpose()));
    }
    return net;
  }

  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }
  std::size_t layer_count() const { return layers_.size(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  std::vector<int> sizes() const {
    std::vector<int> s{input_dim()};
    for (const auto& l : layers_) s.push_back(static_cast<int>(l.weight.rows()));
    return s;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  VecX forward(const VecX& x) const {
    if (x.size() != input_dim()) throw DimensionError("network input has the wrong dimension");
    VecX h = x;
    for (const auto& l : layers_) {
      VecX z = l.weight * h + l.bias;
      h = act::apply(l.activation, z);
    }
    return h;
  }

  MatX forward(const MatX& x) const {
    if (x.rows() != input_dim()) throw DimensionError("network input has the wrong dimension");
    MatX h = x;
    for (const auto& l : layers_) {
      MatX z = (l.weight * h).colwise() + l.bias;
      h = act::apply(l.activation, z);
    }
    return h;
  }

  ForwardRecord record(const MatX& x) const {
    if (x.rows() != input_dim()) throw DimensionError("network input has the wrong dimension");
    ForwardRecord r;
    r.input = x;
    const MatX* h = &r.input;
    for (const auto& l : layers_) {
      r.pre.push_back((l.weight * *h).colwise() + l.bias);
      r.post.push_back(act::apply(l.activation, r.pre.back()));
      h = &r.post.back();
    }
    return r;
  }

  GradientTape zero_tape() const {
    GradientTape t;
    for (const auto& l : layers_) {
      t.weight.push_back(MatX::Zero(l.weight.rows(), l.weight.cols()));
      t.bias.push_back(VecX::Zero(l.bias.size()));
    }
    return t;
  }

  // Reverse-mode pass for loss = sum over samples of <output_gradient, output>.
  GradientTape backward(const ForwardRecord& rec, const MatX& output_gradient) const {
    if (rec.empty() || rec.pre.size() != layers_.size() || rec.input.rows() != input_dim())
      throw std::logic_error("backward requires a forward record of this network");
    if (output_gradient.rows() != output_dim() || output_gradient.cols() != rec.input.cols())
      throw DimensionError("output gradient does not match the recorded batch");
    GradientTape t = zero_tape();
    MatX delta = output_gradient.cwiseProduct(act::derivative(layers_.back().activation, rec.pre.back()));
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const MatX& below = i == 0 ? rec.input : rec.post[i - 1];
      t.weight[i] = delta * below.transpose();
      t.bias[i] = delta.rowwise().sum();
      MatX g = layers_[i].weight.transpose() * delta;
      if (i == 0) {
        t.input = std::move(g);
      } else {
        delta = g.cwiseProduct(act::derivative(layers_[i - 1].activation, rec.pre[i - 1]));
      }
    }
    return t;
  }

  // d(output)/d(input) per sample for scalar-output networks; columns are samples.
  MatX input_gradient(const ForwardRecord& rec) const {
    require_scalar_output();
    return backward(rec, MatX::Ones(1, rec.input.cols())).input;
  }

  // Parameter gradient of scale * mean_b |d(output_b)/d(input_b)|^2, via a second
  // reverse sweep through the input-gradient computation. `penalty` receives the
  // per-sample squared norms.
  GradientTape input_gradient_penalty_backward(const ForwardRecord& rec, double scale, VecX* penalty = nullptr) const;

 private:
  void require_scalar_output() const {
    if (output_dim() != 1) throw DimensionError("input gradients are defined for scalar-output networks");
  }

  std::vector<DenseLayer> layers_;
};

inline GradientTape DenseNet::input_gradient_penalty_backward(const ForwardRecord& rec, double scale,
                                                              VecX* penalty) const {
  require_scalar_output();
  if (rec.empty() || rec.pre.size() != layers_.size()) throw std::logic_error("missing forward record");
  const std::size_t L = layers_.size();
  const Eigen::Index B = rec.input.cols();

  // First sweep: delta_l = sigma'_l(z_l) * g_l with g_L = 1, g_{l-1} = W_l^T delta_l.
  std::vector<MatX> g(L + 1);      // g[l] for l = 0..L (g[0] is the input gradient)
  std::vector<MatX> delta(L + 1);  // delta[l] for l = 1..L
  std::vector<MatX> dsig(L + 1);
  g[L] = MatX::Ones(1, B);
  for (std::size_t l = L; l >= 1; --l) {
    dsig[l] = act::derivative(layers_[l - 1].activation, rec.pre[l - 1]);
    delta[l] = dsig[l].cwiseProduct(g[l]);
    g[l - 1] = layers_[l - 1].weight.transpose() * delta[l];
  }
  if (penalty) *penalty = g[0].colwise().squaredNorm().transpose();

  GradientTape t = zero_tape();
  // Second sweep, adjoints of the first: g0_bar = 2 scale / B * g0.
  std::vector<MatX> z_bar(L + 1);
  MatX g_bar = (2.0 * scale / static_cast<double>(B)) * g[0];
  for (std::size_t l = 1; l <= L; ++l) {
    const auto& W = layers_[l - 1].weight;
    t.weight[l - 1] += delta[l] * g_bar.transpose();
    const MatX delta_bar = W * g_bar;
    z_bar[l] = act::second_derivative(layers_[l - 1].activation, rec.pre[l - 1])
                   .cwiseProduct(g[l])
                   .cwiseProduct(delta_bar);
    if (l < L) g_bar = dsig[l].cwiseProduct(delta_bar);
  }
  // Third sweep: push the z adjoints back through the forward graph.
  MatX z_hat = z_bar[L];
  for (std::size_t l = L; l >= 1; --l) {
    const MatX& below = l == 1 ? rec.input : rec.post[l - 2];
    t.weight[l - 1] += z_hat * below.transpose();
    t.bias[l - 1] += z_hat.rowwise().sum();
    if (l > 1) {
      z_hat = z_bar[l - 1] + dsig[l - 1].cwiseProduct(layers_[l - 1].weight.transpose() * z_hat);
    }
  }
  return t;
}

// Adaptive-moment optimizer state for one network.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<MatX> m_weight, v_weight;
  std::vector<VecX> m_bias, v_bias;

  static AdamState for_net(const DenseNet& net) {
    AdamState s;
    const auto z = net.zero_tape();
    s.m_weight = s.v_weight = z.weight;
    s.m_bias = s.v_bias = z.bias;
    return s;
  }
};

namespace detail {
template <class P>
void adam_block(P& param, const P& grad, P& m, P& v, const AdamState& s, double lr) {
  m = s.beta1 * m + (1.0 - s.beta1) * grad;
  v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
}
}  // namespace detail

// Bias-corrected Adam step. Non-finite gradients abort before touching anything.
inline void adam_update(DenseNet& net, const GradientTape& tape, AdamState& state, double learning_rate) {
  if (tape.weight.size() != net.layer_count()) throw DimensionError("gradient tape does not match the network");
  if (state.m_weight.size() != net.layer_count()) state = AdamState::for_net(net);
  if (!tape.all_finite()) throw NumericalError("non-finite gradient in optimizer update");
  ++state.step;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    auto& layer = net.layers()[l];
    detail::adam_block(layer.weight, tape.weight[l], state.m_weight[l], state.v_weight[l], state, learning_rate);
    detail::adam_block(layer.bias, tape.bias[l], state.m_bias[l], state.v_bias[l], state, learning_rate);
  }
  if (!net.all_finite()) throw NumericalError("optimizer produced non-finite parameters");
}

// Adam over a single vector parameter (e.g. Gaussian log-standard-deviations).
struct VectorAdam {
  AdamState hyper;
  VecX m, v;

  void update(VecX& param, const VecX& grad, double lr) {
    if (!grad.allFinite()) throw NumericalError("non-finite gradient in optimizer update");
    if (m.size() != param.size()) {
      m = VecX::Zero(param.size());
      v = VecX::Zero(param.size());
    }
    ++hyper.step;
    detail::adam_block(param, grad, m, v, hyper, lr);
  }
};

// Binary network format (all integers and floats little-endian):
//   magic "ALNN" | u32 version (1) | u32 layer count | u32 input dim
//   per layer: u32 output dim | u8 activation
//   per layer: weights row-major as f64, then biases as f64
namespace io {

inline constexpr std::uint32_t kNetVersion = 1;

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  os.write(reinterpret_cast<const char*>(b), 8);
}
inline void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw ConfigError("truncated binary stream");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw ConfigError("truncated binary stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline void put_vector(std::ostream& os, const VecX& v) {
  put_u32(os, static_cast<std::uint32_t>(v.size()));
  for (double d : v) put_f64(os, d);
}
inline VecX get_vector(std::istream& is) {
  VecX v(get_u32(is));
  for (auto& d : v) d = get_f64(is);
  return v;
}

inline void write_net(std::ostream& os, const DenseNet& net) {
  os.write("ALNN", 4);
  put_u32(os, kNetVersion);
  put_u32(os, static_cast<std::uint32_t>(net.layer_count()));
  put_u32(os, static_cast<std::uint32_t>(net.input_dim()));
  for (const auto& l : net.layers()) {
    put_u32(os, static_cast<std::uint32_t>(l.weight.rows()));
    const char a = static_cast<char>(l.activation);
    os.write(&a, 1);
  }
  for (const auto& l : net.layers()) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put_f64(os, l.weight(r, c));
    for (double b : l.bias) put_f64(os, b);
  }
}

inline DenseNet read_net(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "ALNN") throw ConfigError("not a network checkpoint (bad magic)");
  const auto version = get_u32(is);
  if (version != kNetVersion) throw ConfigError("unsupported network format version " + std::to_string(version));
  const auto count = get_u32(is);
  std::vector<int> sizes{static_cast<int>(get_u32(is))};
  std::vector<Activation> acts;
  for (std::uint32_t i = 0; i < count; ++i) {
    sizes.push_back(static_cast<int>(get_u32(is)));
    char a = 0;
    if (!is.read(&a, 1)) throw ConfigError("truncated binary stream");
    if (static_cast<unsigned char>(a) > 2) throw ConfigError("unknown activation code in checkpoint");
    acts.push_back(static_cast<Activation>(a));
  }
  DenseNet net(sizes, acts);
  for (auto& l : net.layers()) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = get_f64(is);
    for (auto& b : l.bias) b = get_f64(is);
  }
  return net;
}

}  // namespace io

}  // namespace amploco
