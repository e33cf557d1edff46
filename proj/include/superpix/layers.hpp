#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "superpix/tensor.hpp"

namespace superpix {

/// A trainable array with its accumulated gradient.
template <typename T>
struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  Parameter() = default;
  Parameter(std::string n, std::vector<int> s, T fill = T{0});

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T{0}); }
};

/// 2-D convolution, stride 1, zero padding of dilation·(kernel/2) so the
/// spatial shape is preserved. Weights are laid out [out][in][ky][kx].
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int dilation, bool bias);

  /// He-style uniform init, U(-sqrt(6/fan_in), sqrt(6/fan_in)); bias zero.
  void init(std::mt19937_64& rng);

  Tensor<T> forward(const Tensor<T>& x) const;

  /// Accumulates weight/bias gradients. Writes dL/dx into *grad_x when it
  /// is non-null.
  void backward(const Tensor<T>& x, const Tensor<T>& grad_y, Tensor<T>* grad_x);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return kernel_; }
  int dilation() const { return dilation_; }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>* bias() { return has_bias_ ? &bias_ : nullptr; }
  void collect(std::vector<Parameter<T>*>& out);

 private:
  int in_ = 0, out_ = 0, kernel_ = 3, dilation_ = 1;
  bool has_bias_ = false;
  Parameter<T> weight_;
  Parameter<T> bias_;
};

/// Per-channel spatial standardisation followed by a learned scale/shift.
template <typename T>
class InstanceNorm {
 public:
  static constexpr double kEpsilon = 1e-5;

  InstanceNorm() = default;
  InstanceNorm(std::string name, int channels);

  /// Stores the normalised activations for backward.
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_y);

  const Tensor<T>& normalized() const { return normalized_; }
  void collect(std::vector<Parameter<T>*>& out);

 private:
  int channels_ = 0;
  Parameter<T> gamma_;
  Parameter<T> beta_;
  Tensor<T> normalized_;
  std::vector<double> inv_std_;
};

/// 3×3 convolution → instance norm → ReLU.
template <typename T>
class ConvInReLU {
 public:
  ConvInReLU() = default;
  ConvInReLU(const std::string& name, int in_channels, int out_channels, int dilation = 1);

  void init(std::mt19937_64& rng) { conv_.init(rng); }

  /// Caches the output; the caller keeps the input alive for backward.
  const Tensor<T>& forward(const Tensor<T>& x);

  /// Returns dL/dx (empty when need_grad_input is false). x must be the
  /// tensor passed to the matching forward call.
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& grad_y, bool need_grad_input = true);

  const Tensor<T>& output() const { return output_; }
  const InstanceNorm<T>& norm() const { return norm_; }
  Conv2d<T>& conv() { return conv_; }
  int out_channels() const { return conv_.out_channels(); }
  void collect(std::vector<Parameter<T>*>& out);

 private:
  Conv2d<T> conv_;
  InstanceNorm<T> norm_;
  Tensor<T> output_;
};

}  // namespace superpix
