#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "superpix/layers.hpp"
#include "superpix/tensor.hpp"

namespace superpix {

struct NetworkConfig {
  int n_superpixels = 100;
  int base_channels = 32;
  int n_feature_blocks = 4;
  std::vector<int> dilation_rates{1, 2, 4, 8};
  int aspp_branch_channels = 64;
  int projection_channels = 256;
  /// Feed the ASPP block with every feature block's output (true) or only
  /// the last block's (false). The Laplacian response is appended either way.
  bool dense_features = true;
  std::uint64_t seed = 0;

  void validate() const;

  /// Channel count of the feature extractor output.
  int feature_channels() const;

  bool operator==(const NetworkConfig&) const = default;
};

template <typename T>
struct ModelOutput {
  Tensor<T> assignment;      // P, N×H×W, softmax over channels
  Tensor<T> reconstruction;  // Ĩ, 3×H×W, unbounded
};

/// Per-image CNN: ConvInReLU feature blocks with doubling widths, Laplacian
/// feature concatenation, an ASPP block of dilated ConvInReLU branches, a
/// ConvInReLU projection and a 1×1 head producing N + 3 channels.
template <typename T>
class Network {
 public:
  static constexpr int kInputChannels = 5;

  explicit Network(NetworkConfig cfg);

  const NetworkConfig& config() const { return cfg_; }

  /// Concatenation of the feature block outputs (or the last one only when
  /// dense_features is off).
  Tensor<T> feature_extractor(const Tensor<T>& input);
  /// Concatenated ASPP branch outputs for the given (Laplacian-augmented)
  /// features.
  Tensor<T> aspp_forward(const Tensor<T>& features);

  /// Full forward pass; caches every activation needed by backward.
  ModelOutput<T> forward(const Tensor<T>& input);

  /// Accumulates parameter gradients given dL/dP and dL/dĨ for the most
  /// recent forward call.
  void backward(const Tensor<T>& grad_assignment, const Tensor<T>& grad_reconstruction);

  std::vector<Parameter<T>*> parameters();
  std::size_t parameter_count();
  void zero_grad();

  /// ConvInReLU outputs cached by the most recent forward call, in
  /// evaluation order.
  std::vector<const Tensor<T>*> activations() const;

  /// Copies all parameter values from a network with identical architecture.
  template <typename U>
  void copy_weights_from(Network<U>& other) {
    auto dst = parameters();
    auto src = other.parameters();
    if (dst.size() != src.size()) throw std::invalid_argument("copy_weights_from: architecture mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (dst[i]->shape != src[i]->shape) throw std::invalid_argument("copy_weights_from: shape mismatch");
      std::copy(src[i]->value.begin(), src[i]->value.end(), dst[i]->value.begin());
    }
  }

 private:
  NetworkConfig cfg_;
  std::vector<ConvInReLU<T>> blocks_;
  std::vector<ConvInReLU<T>> aspp_;
  ConvInReLU<T> projection_;
  Conv2d<T> head_;

  // Forward caches.
  Tensor<T> input_;
  Tensor<T> features_;
  Tensor<T> augmented_;
  Tensor<T> aspp_out_;
  Tensor<T> head_out_;
  Tensor<T> assignment_;
};

/// Writes all parameters as a little-endian binary container: an 8-byte
/// header length, a JSON header listing names and shapes, then the raw
/// float32 values in parameter order.
template <typename T>
void save_weights(Network<T>& net, const std::filesystem::path& path);

/// Loads weights written by save_weights into a network with the same
/// architecture. Throws on any name or shape mismatch.
template <typename T>
void load_weights(Network<T>& net, const std::filesystem::path& path);

}  // namespace superpix
