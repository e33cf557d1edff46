#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace superpix {

/// Planar C×H×W raster. Each channel is stored row-major and channels are
/// contiguous, so channel(c) is a plain H·W span.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(int channels, int height, int width, T fill = T{0})
      : channels_(channels), height_(height), width_(width) {
    if (channels < 0 || height < 0 || width < 0) {
      throw std::invalid_argument("Tensor: negative dimension");
    }
    data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int c, int i, int j) { return data_[index(c, i, j)]; }
  const T& operator()(int c, int i, int j) const { return data_[index(c, i, j)]; }

  T& operator[](std::size_t k) { return data_[k]; }
  const T& operator[](std::size_t k) const { return data_[k]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  std::span<T> channel(int c) { return {data_.data() + c * plane(), plane()}; }
  std::span<const T> channel(int c) const { return {data_.data() + c * plane(), plane()}; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_spatial(const Tensor& o) const { return height_ == o.height_ && width_ == o.width_; }
  bool same_shape(const Tensor& o) const { return channels_ == o.channels_ && same_spatial(o); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(channels_, height_, width_);
    std::copy(data_.begin(), data_.end(), out.data());
    return out;
  }

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t index(int c, int i, int j) const {
    assert(c >= 0 && c < channels_ && i >= 0 && i < height_ && j >= 0 && j < width_);
    return (static_cast<std::size_t>(c) * height_ + i) * width_ + j;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// Concatenates tensors with equal spatial shape along the channel axis.
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  int total = 0;
  for (const auto* p : parts) {
    if (!p->same_spatial(*parts.front())) {
      throw std::invalid_argument("concat_channels: spatial shape mismatch");
    }
    total += p->channels();
  }
  Tensor<T> out(total, parts.front()->height(), parts.front()->width());
  T* dst = out.data();
  for (const auto* p : parts) dst = std::copy(p->data(), p->data() + p->size(), dst);
  return out;
}

/// Copies channels [first, first + count) into a new tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, int first, int count) {
  if (first < 0 || count < 0 || first + count > t.channels()) {
    throw std::out_of_range("slice_channels: channel range out of bounds");
  }
  Tensor<T> out(count, t.height(), t.width());
  const T* src = t.data() + first * t.plane();
  std::copy(src, src + out.size(), out.data());
  return out;
}

/// H×W integer superpixel or ground-truth segment IDs.
class LabelMap {
 public:
  using label_type = std::int32_t;

  LabelMap() = default;
  LabelMap(int height, int width, label_type fill = 0)
      : height_(height), width_(width), labels_(static_cast<std::size_t>(height) * width, fill) {
    if (height < 0 || width < 0) throw std::invalid_argument("LabelMap: negative dimension");
  }
  LabelMap(int height, int width, std::vector<label_type> labels)
      : height_(height), width_(width), labels_(std::move(labels)) {
    if (height < 0 || width < 0 || labels_.size() != static_cast<std::size_t>(height) * width) {
      throw std::invalid_argument("LabelMap: label count does not match shape");
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return labels_.size(); }

  label_type& operator()(int i, int j) { return labels_[static_cast<std::size_t>(i) * width_ + j]; }
  label_type operator()(int i, int j) const { return labels_[static_cast<std::size_t>(i) * width_ + j]; }
  label_type& operator[](std::size_t k) { return labels_[k]; }
  label_type operator[](std::size_t k) const { return labels_[k]; }

  std::span<const label_type> values() const { return labels_; }
  std::span<label_type> values() { return labels_; }

  bool same_shape(const LabelMap& o) const { return height_ == o.height_ && width_ == o.width_; }
  template <typename T>
  bool same_shape(const Tensor<T>& t) const {
    return height_ == t.height() && width_ == t.width();
  }

  std::size_t count_distinct() const {
    std::vector<label_type> v = labels_;
    std::sort(v.begin(), v.end());
    return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
  }

  bool operator==(const LabelMap&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<label_type> labels_;
};

/// Renumbers labels to 0..K-1 in raster order of first appearance.
inline LabelMap compact_labels(const LabelMap& labels) {
  LabelMap out(labels.height(), labels.width());
  std::unordered_map<LabelMap::label_type, LabelMap::label_type> remap;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    auto [it, inserted] =
        remap.try_emplace(labels[k], static_cast<LabelMap::label_type>(remap.size()));
    out[k] = it->second;
  }
  return out;
}

}  // namespace superpix
