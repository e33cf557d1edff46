#pragma once

// Superpixel operators on assignment tensors: Laplacian responses, soft and
// hard superpixelated images, argmax labelling and spatial edge
// distributions. Every differentiable operator has a matching *_backward
// that maps an upstream gradient onto its differentiable input.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "superpix/tensor.hpp"

namespace superpix {

/// Denominator guard for superpixels with (near) zero soft mass.
inline constexpr double kMassEpsilon = 1e-8;

/// Per-channel 4-neighbour Laplacian [[0,1,0],[1,-4,1],[0,1,0]] with
/// replicate (edge-clamp) padding.
template <typename T>
Tensor<T> laplacian_response(const Tensor<T>& t) {
  const int h = t.height(), w = t.width();
  Tensor<T> out(t.channels(), h, w);
  for (int c = 0; c < t.channels(); ++c) {
    const T* src = t.channel(c).data();
    T* dst = out.channel(c).data();
    for (int i = 0; i < h; ++i) {
      const T* up = src + std::max(i - 1, 0) * w;
      const T* row = src + i * w;
      const T* down = src + std::min(i + 1, h - 1) * w;
      T* o = dst + i * w;
      for (int j = 0; j < w; ++j) {
        const int l = std::max(j - 1, 0), r = std::min(j + 1, w - 1);
        o[j] = up[j] + down[j] + row[l] + row[r] - T{4} * row[j];
      }
    }
  }
  return out;
}

/// Adjoint of laplacian_response: scatters each output gradient back onto
/// the (clamped) input taps it was read from.
template <typename T>
Tensor<T> laplacian_backward(const Tensor<T>& grad_out) {
  const int h = grad_out.height(), w = grad_out.width();
  Tensor<T> grad(grad_out.channels(), h, w);
  for (int c = 0; c < grad_out.channels(); ++c) {
    const T* g = grad_out.channel(c).data();
    T* dst = grad.channel(c).data();
    for (int i = 0; i < h; ++i) {
      T* up = dst + std::max(i - 1, 0) * w;
      T* row = dst + i * w;
      T* down = dst + std::min(i + 1, h - 1) * w;
      const T* gr = g + i * w;
      for (int j = 0; j < w; ++j) {
        const T v = gr[j];
        up[j] += v;
        down[j] += v;
        row[std::max(j - 1, 0)] += v;
        row[std::min(j + 1, w - 1)] += v;
        row[j] -= T{4} * v;
      }
    }
  }
  return grad;
}

/// Soft per-superpixel mean colours: colour[s] = sum_p P[s,p] I[:,p] / max(mass[s], eps).
struct SuperpixelColors {
  int n_superpixels = 0;
  int n_channels = 0;
  std::vector<double> colors;  // n_superpixels × n_channels, row-major
  std::vector<double> masses;  // sum over pixels of P[s, :]

  double color(int s, int c) const { return colors[static_cast<std::size_t>(s) * n_channels + c]; }
};

namespace detail {
template <typename T, typename U>
void require_matching(const Tensor<T>& p, const Tensor<U>& image, const char* what) {
  if (!p.same_spatial(image)) {
    throw std::invalid_argument(std::string(what) + ": assignment and image shapes differ");
  }
}
}  // namespace detail

template <typename T>
SuperpixelColors soft_superpixel_colors(const Tensor<T>& assignment, const Tensor<T>& image) {
  detail::require_matching(assignment, image, "soft_superpixel_colors");
  const int n = assignment.channels(), ch = image.channels();
  const std::size_t np = assignment.plane();
  SuperpixelColors out;
  out.n_superpixels = n;
  out.n_channels = ch;
  out.colors.assign(static_cast<std::size_t>(n) * ch, 0.0);
  out.masses.assign(n, 0.0);
  for (int s = 0; s < n; ++s) {
    const T* ps = assignment.channel(s).data();
    double mass = 0.0;
    for (std::size_t p = 0; p < np; ++p) mass += ps[p];
    out.masses[s] = mass;
    const double denom = std::max(mass, kMassEpsilon);
    for (int c = 0; c < ch; ++c) {
      const T* ic = image.channel(c).data();
      double acc = 0.0;
      for (std::size_t p = 0; p < np; ++p) acc += static_cast<double>(ps[p]) * ic[p];
      out.colors[static_cast<std::size_t>(s) * ch + c] = acc / denom;
    }
  }
  return out;
}

/// Î[:,p] = sum_s P[s,p] colour[s], using precomputed colours.
template <typename T>
Tensor<T> soft_superpixelated_image(const Tensor<T>& assignment, const SuperpixelColors& colors) {
  const int n = assignment.channels(), ch = colors.n_channels;
  const std::size_t np = assignment.plane();
  Tensor<T> out(ch, assignment.height(), assignment.width());
  std::vector<double> acc(np);
  for (int c = 0; c < ch; ++c) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int s = 0; s < n; ++s) {
      const double col = colors.color(s, c);
      const T* ps = assignment.channel(s).data();
      for (std::size_t p = 0; p < np; ++p) acc[p] += ps[p] * col;
    }
    std::copy(acc.begin(), acc.end(), out.channel(c).data());
  }
  return out;
}

template <typename T>
Tensor<T> soft_superpixelated_image(const Tensor<T>& assignment, const Tensor<T>& image) {
  return soft_superpixelated_image(assignment, soft_superpixel_colors(assignment, image));
}

/// Gradient of a scalar loss w.r.t. P, given dL/dÎ. The image is treated as
/// a constant.
template <typename T>
Tensor<T> soft_superpixelated_image_backward(const Tensor<T>& assignment, const Tensor<T>& image,
                                             const SuperpixelColors& colors,
                                             const Tensor<T>& grad_out) {
  const int n = assignment.channels(), ch = image.channels();
  const std::size_t np = assignment.plane();
  Tensor<T> grad(n, assignment.height(), assignment.width());
  std::vector<double> acc(np);
  std::vector<double> grad_color(ch);
  for (int s = 0; s < n; ++s) {
    const T* ps = assignment.channel(s).data();
    std::fill(acc.begin(), acc.end(), 0.0);
    // Direct path: dÎ[c,p]/dP[s,p] = colour[s,c].
    for (int c = 0; c < ch; ++c) {
      const T* g = grad_out.channel(c).data();
      const double col = colors.color(s, c);
      double gc = 0.0;
      for (std::size_t p = 0; p < np; ++p) {
        acc[p] += g[p] * col;
        gc += static_cast<double>(g[p]) * ps[p];
      }
      grad_color[c] = gc;
    }
    // Colour path: d colour[s,c] / dP[s,q] = (I[c,q] - colour[s,c]) / mass[s]
    // while the mass is above the guard; below it the denominator is constant.
    const double mass = colors.masses[s];
    const bool clamped = mass < kMassEpsilon;
    const double denom = clamped ? kMassEpsilon : mass;
    for (int c = 0; c < ch; ++c) {
      const double k = grad_color[c] / denom;
      const double offset = clamped ? 0.0 : colors.color(s, c);
      const T* ic = image.channel(c).data();
      for (std::size_t p = 0; p < np; ++p) acc[p] += k * (ic[p] - offset);
    }
    std::copy(acc.begin(), acc.end(), grad.channel(s).data());
  }
  return grad;
}

/// Per-pixel argmax over the superpixel axis; ties go to the lowest index.
template <typename T>
LabelMap hard_assignment(const Tensor<T>& assignment) {
  LabelMap labels(assignment.height(), assignment.width());
  const std::size_t np = assignment.plane();
  std::vector<T> best(np, -std::numeric_limits<T>::infinity());
  for (int s = 0; s < assignment.channels(); ++s) {
    const T* ps = assignment.channel(s).data();
    for (std::size_t p = 0; p < np; ++p) {
      if (ps[p] > best[p]) {
        best[p] = ps[p];
        labels[p] = s;
      }
    }
  }
  return labels;
}

/// Replaces each pixel by the mean colour of all pixels sharing its label.
template <typename T>
Tensor<T> hard_superpixelated_image(const LabelMap& labels, const Tensor<T>& image) {
  if (!labels.same_shape(image)) {
    throw std::invalid_argument("hard_superpixelated_image: label and image shapes differ");
  }
  const std::size_t np = image.plane();
  std::unordered_map<LabelMap::label_type, std::size_t> slot;
  for (std::size_t p = 0; p < np; ++p) slot.try_emplace(labels[p], slot.size());
  const int ch = image.channels();
  std::vector<double> sums(slot.size() * ch, 0.0);
  std::vector<double> counts(slot.size(), 0.0);
  std::vector<std::size_t> idx(np);
  for (std::size_t p = 0; p < np; ++p) {
    idx[p] = slot[labels[p]];
    counts[idx[p]] += 1.0;
  }
  for (int c = 0; c < ch; ++c) {
    const T* ic = image.channel(c).data();
    for (std::size_t p = 0; p < np; ++p) sums[idx[p] * ch + c] += ic[p];
  }
  Tensor<T> out(ch, image.height(), image.width());
  for (int c = 0; c < ch; ++c) {
    T* oc = out.channel(c).data();
    for (std::size_t p = 0; p < np; ++p) {
      oc[p] = static_cast<T>(sums[idx[p] * ch + c] / counts[idx[p]]);
    }
  }
  return out;
}

/// Spatial softmax over the channel-mean Laplacian response. Returns a
/// single-channel map whose entries are positive and sum to one.
template <typename T>
Tensor<T> edge_distribution(const Tensor<T>& t) {
  if (t.channels() < 1) throw std::invalid_argument("edge_distribution: no channels");
  const Tensor<T> lap = laplacian_response(t);
  const std::size_t np = t.plane();
  std::vector<double> r(np, 0.0);
  for (int c = 0; c < t.channels(); ++c) {
    const T* lc = lap.channel(c).data();
    for (std::size_t p = 0; p < np; ++p) r[p] += lc[p];
  }
  const double inv_c = 1.0 / t.channels();
  double mx = -std::numeric_limits<double>::infinity();
  for (auto& v : r) {
    v *= inv_c;
    mx = std::max(mx, v);
  }
  double z = 0.0;
  for (auto& v : r) {
    v = std::exp(v - mx);
    z += v;
  }
  Tensor<T> out(1, t.height(), t.width());
  for (std::size_t p = 0; p < np; ++p) out[p] = static_cast<T>(r[p] / z);
  return out;
}

/// Gradient w.r.t. the input image of a loss on edge_distribution(t), given
/// the forward output and dL/dE.
template <typename T>
Tensor<T> edge_distribution_backward(const Tensor<T>& edges, const Tensor<T>& grad_edges,
                                     int input_channels) {
  const std::size_t np = edges.plane();
  double dot = 0.0;
  for (std::size_t p = 0; p < np; ++p) dot += static_cast<double>(grad_edges[p]) * edges[p];
  Tensor<T> grad_r(input_channels, edges.height(), edges.width());
  const double inv_c = 1.0 / input_channels;
  for (std::size_t p = 0; p < np; ++p) {
    const T v = static_cast<T>(edges[p] * (grad_edges[p] - dot) * inv_c);
    for (int c = 0; c < input_channels; ++c) grad_r[c * np + p] = v;
  }
  return laplacian_backward(grad_r);
}

}  // namespace superpix
