#pragma once

// Fully connected generator network with GELU activations and exact
// backpropagation, plus an Adam optimizer over its flat parameter vector.

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "qsnap/rng.hpp"

namespace qsnap {

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

inline double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

/// latent -> 512 -> 1024 -> 1024 -> 512 -> 256 -> output, GELU between
/// layers and none after the last. Weights start uniform in
/// +-sqrt(6/(fan_in+fan_out)), biases at zero.
class GeneratorNetwork {
 public:
  static constexpr std::size_t kLatent = 256;

  GeneratorNetwork(std::size_t output_dim, Rng rng, std::size_t latent = kLatent,
                   std::vector<std::size_t> hidden = {512, 1024, 1024, 512, 256}) {
    if (output_dim == 0 || latent == 0) throw std::invalid_argument("GeneratorNetwork: empty layer");
    dims_.push_back(latent);
    dims_.insert(dims_.end(), hidden.begin(), hidden.end());
    dims_.push_back(output_dim);
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      weight_offset_.push_back(total);
      total += dims_[l] * dims_[l + 1];
      bias_offset_.push_back(total);
      total += dims_[l + 1];
    }
    params_.assign(total, 0.0);
    for (std::size_t l = 0; l < layers(); ++l) {
      const double bound = std::sqrt(6.0 / static_cast<double>(dims_[l] + dims_[l + 1]));
      double* w = params_.data() + weight_offset_[l];
      for (std::size_t i = 0; i < dims_[l] * dims_[l + 1]; ++i) w[i] = (2.0 * rng.uniform() - 1.0) * bound;
    }
  }

  /// Activations retained by forward() for backward().
  struct Tape {
    std::vector<std::vector<double>> inputs;  // input to each layer
    std::vector<std::vector<double>> pre;     // pre-activation output of each layer
  };

  std::size_t layers() const noexcept { return dims_.size() - 1; }
  std::size_t input_dim() const noexcept { return dims_.front(); }
  std::size_t output_dim() const noexcept { return dims_.back(); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  std::vector<double> forward(std::span<const double> z, Tape* tape = nullptr) const {
    if (z.size() != input_dim()) throw std::invalid_argument("GeneratorNetwork: latent size mismatch");
    std::vector<double> x(z.begin(), z.end());
    if (tape) {
      tape->inputs.clear();
      tape->pre.clear();
    }
    for (std::size_t l = 0; l < layers(); ++l) {
      const std::size_t in = dims_[l], out = dims_[l + 1];
      const double* w = params_.data() + weight_offset_[l];
      const double* b = params_.data() + bias_offset_[l];
      std::vector<double> y(out);
      for (std::size_t o = 0; o < out; ++o) {
        const double* row = w + o * in;
        double acc = b[o];
        for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
        y[o] = acc;
      }
      if (tape) {
        tape->inputs.push_back(x);
        tape->pre.push_back(y);
      }
      if (l + 1 < layers()) {
        for (auto& v : y) v = gelu(v);
      }
      x = std::move(y);
    }
    return x;
  }

  /// Gradient of a scalar loss w.r.t. every parameter, given dLoss/dOutput.
  std::vector<double> backward(const Tape& tape, std::span<const double> d_out) const {
    if (d_out.size() != output_dim()) throw std::invalid_argument("GeneratorNetwork: gradient size mismatch");
    if (tape.inputs.size() != layers()) throw std::invalid_argument("GeneratorNetwork: tape does not match network");
    std::vector<double> grad(params_.size(), 0.0);
    std::vector<double> delta(d_out.begin(), d_out.end());
    for (std::size_t l = layers(); l-- > 0;) {
      const std::size_t in = dims_[l], out = dims_[l + 1];
      if (l + 1 < layers()) {
        for (std::size_t o = 0; o < out; ++o) delta[o] *= gelu_derivative(tape.pre[l][o]);
      }
      const double* w = params_.data() + weight_offset_[l];
      double* gw = grad.data() + weight_offset_[l];
      double* gb = grad.data() + bias_offset_[l];
      const auto& x = tape.inputs[l];
      std::vector<double> prev(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        gb[o] = d;
        if (d == 0.0) continue;
        double* grow = gw + o * in;
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) {
          grow[i] = d * x[i];
          prev[i] += row[i] * d;
        }
      }
      delta = std::move(prev);
    }
    return grad;
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> weight_offset_;
  std::vector<std::size_t> bias_offset_;
  std::vector<double> params_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t n_params, AdamConfig cfg = {}) : cfg_(cfg), m_(n_params, 0.0), v_(n_params, 0.0) {}

  std::size_t steps() const noexcept { return t_; }

  void step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw std::invalid_argument("Adam: size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      params[i] -= cfg_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace qsnap
