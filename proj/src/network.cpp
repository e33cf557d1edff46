#include "superpix/network.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "superpix/losses.hpp"
#include "superpix/superpix_ops.hpp"

namespace superpix {

void NetworkConfig::validate() const {
  if (n_superpixels < 2) throw std::invalid_argument("NetworkConfig: n_superpixels must be >= 2");
  if (n_feature_blocks < 1) throw std::invalid_argument("NetworkConfig: n_feature_blocks must be >= 1");
  if (base_channels < 1) throw std::invalid_argument("NetworkConfig: base_channels must be >= 1");
  if (dilation_rates.empty()) throw std::invalid_argument("NetworkConfig: dilation_rates is empty");
  for (int d : dilation_rates) {
    if (d < 1) throw std::invalid_argument("NetworkConfig: dilation rates must be >= 1");
  }
  if (aspp_branch_channels < 1 || projection_channels < 1) {
    throw std::invalid_argument("NetworkConfig: branch and projection widths must be >= 1");
  }
}

int NetworkConfig::feature_channels() const {
  const int last = base_channels << (n_feature_blocks - 1);
  return dense_features ? base_channels * ((1 << n_feature_blocks) - 1) : last;
}

template <typename T>
Network<T>::Network(NetworkConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  int in = kInputChannels;
  for (int b = 0; b < cfg_.n_feature_blocks; ++b) {
    const int out = cfg_.base_channels << b;
    blocks_.emplace_back("features." + std::to_string(b), in, out);
    in = out;
  }
  const int augmented = 2 * cfg_.feature_channels();
  for (std::size_t r = 0; r < cfg_.dilation_rates.size(); ++r) {
    aspp_.emplace_back("aspp." + std::to_string(r), augmented, cfg_.aspp_branch_channels,
                       cfg_.dilation_rates[r]);
  }
  const int aspp_channels = cfg_.aspp_branch_channels * static_cast<int>(cfg_.dilation_rates.size());
  projection_ = ConvInReLU<T>("projection", aspp_channels, cfg_.projection_channels);
  head_ = Conv2d<T>("head", cfg_.projection_channels, cfg_.n_superpixels + 3, 1, 1, /*bias=*/true);

  std::mt19937_64 rng(cfg_.seed);
  for (auto& b : blocks_) b.init(rng);
  for (auto& b : aspp_) b.init(rng);
  projection_.init(rng);
  head_.init(rng);
}

template <typename T>
Tensor<T> Network<T>::feature_extractor(const Tensor<T>& input) {
  if (input.channels() != kInputChannels) {
    throw std::invalid_argument("Network: input must have 5 channels");
  }
  input_ = input;
  const Tensor<T>* prev = &input_;
  for (auto& b : blocks_) prev = &b.forward(*prev);
  if (!cfg_.dense_features) return blocks_.back().output();
  std::vector<const Tensor<T>*> parts;
  for (const auto& b : blocks_) parts.push_back(&b.output());
  return concat_channels<T>(parts);
}

template <typename T>
Tensor<T> Network<T>::aspp_forward(const Tensor<T>& features) {
  std::vector<const Tensor<T>*> parts;
  for (auto& b : aspp_) parts.push_back(&b.forward(features));
  return concat_channels<T>(parts);
}

template <typename T>
ModelOutput<T> Network<T>::forward(const Tensor<T>& input) {
  features_ = feature_extractor(input);
  const Tensor<T> lap = laplacian_response(features_);
  const Tensor<T>* parts[] = {&features_, &lap};
  augmented_ = concat_channels<T>(parts);
  aspp_out_ = aspp_forward(augmented_);
  head_out_ = head_.forward(projection_.forward(aspp_out_));
  assignment_ = channel_softmax(slice_channels(head_out_, 0, cfg_.n_superpixels));
  return {assignment_, slice_channels(head_out_, cfg_.n_superpixels, 3)};
}

template <typename T>
void Network<T>::backward(const Tensor<T>& grad_assignment, const Tensor<T>& grad_reconstruction) {
  if (head_out_.empty()) throw std::logic_error("Network::backward called before forward");
  const Tensor<T> grad_logits = channel_softmax_backward(assignment_, grad_assignment);
  const Tensor<T>* head_parts[] = {&grad_logits, &grad_reconstruction};
  const Tensor<T> grad_head = concat_channels<T>(head_parts);

  Tensor<T> grad_proj;
  head_.backward(projection_.output(), grad_head, &grad_proj);
  const Tensor<T> grad_aspp = projection_.backward(aspp_out_, grad_proj);

  Tensor<T> grad_aug(augmented_.channels(), augmented_.height(), augmented_.width());
  const int width = cfg_.aspp_branch_channels;
  for (std::size_t b = 0; b < aspp_.size(); ++b) {
    const Tensor<T> gb = slice_channels(grad_aspp, static_cast<int>(b) * width, width);
    const Tensor<T> gx = aspp_[b].backward(augmented_, gb);
    for (std::size_t k = 0; k < gx.size(); ++k) grad_aug[k] += gx[k];
  }

  const int f = features_.channels();
  Tensor<T> grad_features = slice_channels(grad_aug, 0, f);
  const Tensor<T> grad_lap = laplacian_backward(slice_channels(grad_aug, f, f));
  for (std::size_t k = 0; k < grad_features.size(); ++k) grad_features[k] += grad_lap[k];

  // Walk the feature blocks in reverse; each block receives its slice of the
  // feature gradient plus the gradient flowing back from the next block.
  Tensor<T> carry;
  int offset = f;
  for (int b = static_cast<int>(blocks_.size()) - 1; b >= 0; --b) {
    const int ch = blocks_[b].out_channels();
    Tensor<T> g;
    if (cfg_.dense_features) {
      offset -= ch;
      g = slice_channels(grad_features, offset, ch);
    } else if (b == static_cast<int>(blocks_.size()) - 1) {
      g = grad_features;
    } else {
      g = Tensor<T>(ch, grad_features.height(), grad_features.width());
    }
    if (!carry.empty()) {
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += carry[k];
    }
    const Tensor<T>& x = b == 0 ? input_ : blocks_[b - 1].output();
    carry = blocks_[b].backward(x, g, /*need_grad_input=*/b > 0);
  }
}

template <typename T>
std::vector<Parameter<T>*> Network<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& b : blocks_) b.collect(out);
  for (auto& b : aspp_) b.collect(out);
  projection_.collect(out);
  head_.collect(out);
  return out;
}

template <typename T>
std::size_t Network<T>::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->size();
  return n;
}

template <typename T>
std::vector<const Tensor<T>*> Network<T>::activations() const {
  std::vector<const Tensor<T>*> out;
  for (const auto& b : blocks_) out.push_back(&b.output());
  for (const auto& b : aspp_) out.push_back(&b.output());
  out.push_back(&projection_.output());
  return out;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

namespace {

constexpr const char* kWeightsFormat = "superpix-weights";

void write_u64_le(std::ostream& os, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(bytes, 8);
}

std::uint64_t read_u64_le(std::istream& is) {
  unsigned char bytes[8];
  is.read(reinterpret_cast<char*>(bytes), 8);
  if (!is) throw std::runtime_error("load_weights: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

template <typename T>
void save_weights(Network<T>& net, const std::filesystem::path& path) {
  nlohmann::json header;
  header["format"] = kWeightsFormat;
  header["version"] = 1;
  header["dtype"] = "float32";
  header["endianness"] = "little";
  auto& params = header["parameters"] = nlohmann::json::array();
  for (auto* p : net.parameters()) params.push_back({{"name", p->name}, {"shape", p->shape}});
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_weights: cannot open " + path.string());
  write_u64_le(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (auto* p : net.parameters()) {
    for (T v : p->value) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      char bytes[4];
      for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
      os.write(bytes, 4);
    }
  }
  if (!os) throw std::runtime_error("save_weights: write failed for " + path.string());
}

template <typename T>
void load_weights(Network<T>& net, const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_weights: cannot open " + path.string());
  const std::uint64_t len = read_u64_le(is);
  if (len > (std::uint64_t{1} << 26)) throw std::runtime_error("load_weights: implausible header size");
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error("load_weights: truncated header");
  const auto header = nlohmann::json::parse(text);
  if (header.value("format", "") != kWeightsFormat) {
    throw std::runtime_error("load_weights: not a superpix weights file");
  }
  auto params = net.parameters();
  const auto& listed = header.at("parameters");
  if (listed.size() != params.size()) throw std::runtime_error("load_weights: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (listed[i].at("name").get<std::string>() != params[i]->name ||
        listed[i].at("shape").get<std::vector<int>>() != params[i]->shape) {
      throw std::runtime_error("load_weights: mismatch at parameter " + params[i]->name);
    }
  }
  for (auto* p : params) {
    for (T& v : p->value) {
      unsigned char bytes[4];
      is.read(reinterpret_cast<char*>(bytes), 4);
      if (!is) throw std::runtime_error("load_weights: truncated data");
      std::uint32_t bits = 0;
      for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
      v = static_cast<T>(std::bit_cast<float>(bits));
    }
  }
}

template class Network<float>;
template class Network<double>;
template void save_weights(Network<float>&, const std::filesystem::path&);
template void save_weights(Network<double>&, const std::filesystem::path&);
template void load_weights(Network<float>&, const std::filesystem::path&);
template void load_weights(Network<double>&, const std::filesystem::path&);

}  // namespace superpix
