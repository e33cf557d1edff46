#include "superpix/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "superpix/blas.hpp"

namespace superpix {

namespace {

// Upper bound on the per-group tap response buffer, in elements.
constexpr std::size_t kTapBudget = std::size_t{1} << 23;

struct Tap {
  int index, dy, dx;
};

// Kernel taps whose shifted window overlaps the image at all.
std::vector<Tap> live_taps(int kernel, int dilation, int h, int w) {
  std::vector<Tap> taps;
  const int half = kernel / 2;
  for (int ky = 0; ky < kernel; ++ky) {
    for (int kx = 0; kx < kernel; ++kx) {
      const int dy = (ky - half) * dilation, dx = (kx - half) * dilation;
      if (std::abs(dy) < h && std::abs(dx) < w) taps.push_back({ky * kernel + kx, dy, dx});
    }
  }
  return taps;
}

// dst(i, j) += src(i + dy, j + dx) wherever the source is inside the plane.
template <typename T>
void add_shifted(T* dst, const T* src, int h, int w, int dy, int dx) {
  const int i0 = std::max(0, -dy), i1 = std::min(h, h - dy);
  const int j0 = std::max(0, -dx), j1 = std::min(w, w - dx);
  for (int i = i0; i < i1; ++i) {
    T* d = dst + static_cast<std::size_t>(i) * w;
    const T* s = src + static_cast<std::size_t>(i + dy) * w + dx;
    for (int j = j0; j < j1; ++j) d[j] += s[j];
  }
}

// dst(i, j) = src(i - dy, j - dx), zero where the source is outside.
template <typename T>
void set_shifted(T* dst, const T* src, int h, int w, int dy, int dx) {
  std::fill(dst, dst + static_cast<std::size_t>(h) * w, T{0});
  add_shifted(dst, src, h, w, -dy, -dx);
}

std::size_t taps_per_group(std::size_t out, std::size_t plane, std::size_t live) {
  return std::clamp<std::size_t>(kTapBudget / std::max<std::size_t>(out * plane, 1), 1, live);
}

}  // namespace

template <typename T>
Parameter<T>::Parameter(std::string n, std::vector<int> s, T fill)
    : name(std::move(n)), shape(std::move(s)) {
  const std::size_t count =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  value.assign(count, fill);
  grad.assign(count, T{0});
}

template <typename T>
Conv2d<T>::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int dilation,
                  bool bias)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      dilation_(dilation),
      has_bias_(bias),
      weight_(name + ".weight", {out_channels, in_channels, kernel, kernel}),
      bias_(bias ? Parameter<T>(name + ".bias", {out_channels}) : Parameter<T>()) {
  if (kernel % 2 != 1 || dilation < 1 || in_channels < 1 || out_channels < 1) {
    throw std::invalid_argument("Conv2d: invalid geometry for " + name);
  }
}

template <typename T>
void Conv2d<T>::init(std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / (static_cast<double>(in_) * kernel_ * kernel_));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : weight_.value) v = static_cast<T>(dist(rng));
  std::fill(bias_.value.begin(), bias_.value.end(), T{0});
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) const {
  if (x.channels() != in_) throw std::invalid_argument("Conv2d: input channel mismatch");
  const int h = x.height(), w = x.width();
  const std::size_t plane = x.plane();
  const int ld = static_cast<int>(plane);
  Tensor<T> y(out_, h, w);
  if (kernel_ == 1) {
    blas::gemm(false, false, out_, ld, in_, T{1}, weight_.value.data(), in_, x.data(), ld, T{0},
               y.data(), ld);
  } else {
    const auto taps = live_taps(kernel_, dilation_, h, w);
    const std::size_t group = taps_per_group(out_, plane, taps.size());
    const std::size_t kk = static_cast<std::size_t>(kernel_) * kernel_;
    std::vector<T> wt(group * out_ * in_);
    std::vector<T> z(group * out_ * plane);
    for (std::size_t t0 = 0; t0 < taps.size(); t0 += group) {
      const std::size_t g = std::min(group, taps.size() - t0);
      for (std::size_t t = 0; t < g; ++t)
        for (int o = 0; o < out_; ++o)
          for (int c = 0; c < in_; ++c)
            wt[(t * out_ + o) * in_ + c] = weight_.value[(static_cast<std::size_t>(o) * in_ + c) * kk + taps[t0 + t].index];
      const int rows = static_cast<int>(g * out_);
      blas::gemm(false, false, rows, ld, in_, T{1}, wt.data(), in_, x.data(), ld, T{0}, z.data(), ld);
      for (std::size_t t = 0; t < g; ++t) {
        const Tap& tap = taps[t0 + t];
        for (int o = 0; o < out_; ++o)
          add_shifted(y.channel(o).data(), z.data() + (t * out_ + o) * plane, h, w, tap.dy, tap.dx);
      }
    }
  }
  if (has_bias_) {
    for (int o = 0; o < out_; ++o) {
      for (T& v : y.channel(o)) v += bias_.value[o];
    }
  }
  return y;
}

template <typename T>
void Conv2d<T>::backward(const Tensor<T>& x, const Tensor<T>& grad_y, Tensor<T>* grad_x) {
  const int h = x.height(), w = x.width();
  const std::size_t plane = x.plane();
  const int ld = static_cast<int>(plane);
  if (has_bias_) {
    for (int o = 0; o < out_; ++o) {
      double acc = 0.0;
      for (T v : grad_y.channel(o)) acc += v;
      bias_.grad[o] += static_cast<T>(acc);
    }
  }
  if (grad_x) *grad_x = Tensor<T>(in_, h, w);
  if (kernel_ == 1) {
    blas::gemm(false, true, out_, in_, ld, T{1}, grad_y.data(), ld, x.data(), ld, T{1},
               weight_.grad.data(), in_);
    if (grad_x) {
      blas::gemm(true, false, in_, ld, out_, T{1}, weight_.value.data(), in_, grad_y.data(), ld, T{0},
                 grad_x->data(), ld);
    }
    return;
  }
  const auto taps = live_taps(kernel_, dilation_, h, w);
  const std::size_t group = taps_per_group(out_, plane, taps.size());
  const std::size_t kk = static_cast<std::size_t>(kernel_) * kernel_;
  std::vector<T> wt(group * out_ * in_);
  std::vector<T> gw(group * out_ * in_);
  std::vector<T> dz(group * out_ * plane);
  for (std::size_t t0 = 0; t0 < taps.size(); t0 += group) {
    const std::size_t g = std::min(group, taps.size() - t0);
    const int rows = static_cast<int>(g * out_);
    for (std::size_t t = 0; t < g; ++t) {
      const Tap& tap = taps[t0 + t];
      for (int o = 0; o < out_; ++o)
        set_shifted(dz.data() + (t * out_ + o) * plane, grad_y.channel(o).data(), h, w, tap.dy, tap.dx);
    }
    blas::gemm(false, true, rows, in_, ld, T{1}, dz.data(), ld, x.data(), ld, T{0}, gw.data(), in_);
    for (std::size_t t = 0; t < g; ++t)
      for (int o = 0; o < out_; ++o)
        for (int c = 0; c < in_; ++c)
          weight_.grad[(static_cast<std::size_t>(o) * in_ + c) * kk + taps[t0 + t].index] += gw[(t * out_ + o) * in_ + c];
    if (grad_x) {
      for (std::size_t t = 0; t < g; ++t)
        for (int o = 0; o < out_; ++o)
          for (int c = 0; c < in_; ++c)
            wt[(t * out_ + o) * in_ + c] = weight_.value[(static_cast<std::size_t>(o) * in_ + c) * kk + taps[t0 + t].index];
      blas::gemm(true, false, in_, ld, rows, T{1}, wt.data(), in_, dz.data(), ld, T{1}, grad_x->data(), ld);
    }
  }
}

template <typename T>
void Conv2d<T>::collect(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

template <typename T>
InstanceNorm<T>::InstanceNorm(std::string name, int channels)
    : channels_(channels),
      gamma_(name + ".gamma", {channels}, T{1}),
      beta_(name + ".beta", {channels}, T{0}) {}

template <typename T>
Tensor<T> InstanceNorm<T>::forward(const Tensor<T>& x) {
  const std::size_t np = x.plane();
  normalized_ = Tensor<T>(channels_, x.height(), x.width());
  inv_std_.assign(channels_, 0.0);
  Tensor<T> y(channels_, x.height(), x.width());
  for (int c = 0; c < channels_; ++c) {
    auto xc = x.channel(c);
    double mean = 0.0;
    for (T v : xc) mean += v;
    mean /= static_cast<double>(np);
    double var = 0.0;
    for (T v : xc) var += (v - mean) * (v - mean);
    var /= static_cast<double>(np);
    const double inv = 1.0 / std::sqrt(var + kEpsilon);
    inv_std_[c] = inv;
    auto nc = normalized_.channel(c);
    auto yc = y.channel(c);
    const T g = gamma_.value[c], b = beta_.value[c];
    for (std::size_t p = 0; p < np; ++p) {
      nc[p] = static_cast<T>((xc[p] - mean) * inv);
      yc[p] = g * nc[p] + b;
    }
  }
  return y;
}

template <typename T>
Tensor<T> InstanceNorm<T>::backward(const Tensor<T>& grad_y) {
  const std::size_t np = grad_y.plane();
  Tensor<T> grad_x(channels_, grad_y.height(), grad_y.width());
  for (int c = 0; c < channels_; ++c) {
    auto gy = grad_y.channel(c);
    auto nc = normalized_.channel(c);
    double sum_g = 0.0, sum_gn = 0.0;
    for (std::size_t p = 0; p < np; ++p) {
      sum_g += gy[p];
      sum_gn += static_cast<double>(gy[p]) * nc[p];
    }
    gamma_.grad[c] += static_cast<T>(sum_gn);
    beta_.grad[c] += static_cast<T>(sum_g);
    const double g = gamma_.value[c];
    const double mean_g = sum_g / static_cast<double>(np);
    const double mean_gn = sum_gn / static_cast<double>(np);
    const double k = g * inv_std_[c];
    auto gx = grad_x.channel(c);
    for (std::size_t p = 0; p < np; ++p) {
      gx[p] = static_cast<T>(k * (gy[p] - mean_g - nc[p] * mean_gn));
    }
  }
  return grad_x;
}

template <typename T>
void InstanceNorm<T>::collect(std::vector<Parameter<T>*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

template <typename T>
ConvInReLU<T>::ConvInReLU(const std::string& name, int in_channels, int out_channels, int dilation)
    : conv_(name + ".conv", in_channels, out_channels, 3, dilation, /*bias=*/false),
      norm_(name + ".norm", out_channels) {}

template <typename T>
const Tensor<T>& ConvInReLU<T>::forward(const Tensor<T>& x) {
  output_ = norm_.forward(conv_.forward(x));
  for (T& v : output_.values()) v = std::max(v, T{0});
  return output_;
}

template <typename T>
Tensor<T> ConvInReLU<T>::backward(const Tensor<T>& x, const Tensor<T>& grad_y, bool need_grad_input) {
  Tensor<T> g = grad_y;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!(output_[k] > T{0})) g[k] = T{0};
  }
  const Tensor<T> grad_conv = norm_.backward(g);
  Tensor<T> grad_x;
  conv_.backward(x, grad_conv, need_grad_input ? &grad_x : nullptr);
  return grad_x;
}

template <typename T>
void ConvInReLU<T>::collect(std::vector<Parameter<T>*>& out) {
  conv_.collect(out);
  norm_.collect(out);
}

template struct Parameter<float>;
template struct Parameter<double>;
template class Conv2d<float>;
template class Conv2d<double>;
template class InstanceNorm<float>;
template class InstanceNorm<double>;
template class ConvInReLU<float>;
template class ConvInReLU<double>;

}  // namespace superpix
