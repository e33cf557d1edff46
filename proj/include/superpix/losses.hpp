#pragma once

// Objective terms for per-image superpixel optimisation. Each term has a
// value function and a *_backward that accumulates scale · dTerm/dInput into
// a caller-owned gradient buffer. All sums are accumulated in double.

#include <cmath>
#include <stdexcept>

#include "superpix/superpix_ops.hpp"
#include "superpix/tensor.hpp"

namespace superpix {

/// Clamp applied before every logarithm.
inline constexpr double kLogFloor = 1e-12;

struct LossWeights {
  double lambda = 2.0;  // marginal-entropy balance inside the clustering term
  double alpha = 2.0;   // smoothness
  double beta = 10.0;   // reconstruction
  double eta = 1.0;     // edge KL
  double sigma = 8.0;   // smoothness bandwidth

  /// Throws std::invalid_argument unless all weights are finite and
  /// non-negative and sigma is positive.
  void validate() const;

  bool operator==(const LossWeights&) const = default;
};

struct LossReport {
  double clustering = 0.0;
  double smoothness = 0.0;
  double reconstruction = 0.0;
  double edge = 0.0;
  double total = 0.0;
};

namespace detail {
inline double safe_log(double v) { return std::log(std::max(v, kLogFloor)); }
// d/dv [v log(max(v, floor))]
inline double xlogx_slope(double v) { return v > kLogFloor ? std::log(v) + 1.0 : std::log(kLogFloor); }

template <typename T>
std::vector<double> marginal(const Tensor<T>& assignment) {
  std::vector<double> m(assignment.channels(), 0.0);
  const double inv = 1.0 / static_cast<double>(assignment.plane());
  for (int s = 0; s < assignment.channels(); ++s) {
    double acc = 0.0;
    for (T v : assignment.channel(s)) acc += v;
    m[s] = acc * inv;
  }
  return m;
}
}  // namespace detail

/// Mean per-pixel entropy plus lambda times the negative entropy of the
/// marginal assignment.
template <typename T>
double clustering_loss(const Tensor<T>& assignment, double lambda) {
  double ent = 0.0;
  for (T v : assignment.values()) ent -= v * detail::safe_log(v);
  ent /= static_cast<double>(assignment.plane());
  double neg_marginal_ent = 0.0;
  for (double m : detail::marginal(assignment)) neg_marginal_ent += m * detail::safe_log(m);
  return ent + lambda * neg_marginal_ent;
}

template <typename T>
void clustering_loss_backward(const Tensor<T>& assignment, double lambda, double scale,
                              Tensor<T>& grad) {
  const double inv = 1.0 / static_cast<double>(assignment.plane());
  const auto m = detail::marginal(assignment);
  for (int s = 0; s < assignment.channels(); ++s) {
    const double marginal_term = lambda * detail::xlogx_slope(m[s]) * inv;
    auto ps = assignment.channel(s);
    auto gs = grad.channel(s);
    for (std::size_t p = 0; p < ps.size(); ++p) {
      gs[p] += static_cast<T>(scale * (-detail::xlogx_slope(ps[p]) * inv + marginal_term));
    }
  }
}

namespace detail {
// exp(-||I[:,a] - I[:,b]||^2 / sigma) for right (dx) or bottom (dy) neighbours.
template <typename T>
double edge_weight(const Tensor<T>& image, std::size_t a, std::size_t b, double sigma) {
  double d2 = 0.0;
  for (int c = 0; c < image.channels(); ++c) {
    const double d = static_cast<double>(image[c * image.plane() + b]) - image[c * image.plane() + a];
    d2 += d * d;
  }
  return std::exp(-d2 / sigma);
}

// Visits every forward-difference pair (a, b) with b the right or bottom
// neighbour of a.
template <typename F>
void for_each_forward_pair(int h, int w, F&& f) {
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const std::size_t a = static_cast<std::size_t>(i) * w + j;
      if (j + 1 < w) f(a, a + 1);
      if (i + 1 < h) f(a, a + w);
    }
  }
}
}  // namespace detail

/// Edge-aware total variation of P: L1 forward differences weighted by
/// exp(-||dI||^2 / sigma), averaged over all H·W pixels.
template <typename T>
double smoothness_loss(const Tensor<T>& assignment, const Tensor<T>& image, double sigma) {
  detail::require_matching(assignment, image, "smoothness_loss");
  const std::size_t np = assignment.plane();
  double total = 0.0;
  detail::for_each_forward_pair(assignment.height(), assignment.width(), [&](std::size_t a, std::size_t b) {
    double l1 = 0.0;
    for (int s = 0; s < assignment.channels(); ++s) {
      l1 += std::abs(static_cast<double>(assignment[s * np + b]) - assignment[s * np + a]);
    }
    total += l1 * detail::edge_weight(image, a, b, sigma);
  });
  return total / static_cast<double>(np);
}

template <typename T>
void smoothness_loss_backward(const Tensor<T>& assignment, const Tensor<T>& image, double sigma,
                              double scale, Tensor<T>& grad) {
  const std::size_t np = assignment.plane();
  const double inv = scale / static_cast<double>(np);
  detail::for_each_forward_pair(assignment.height(), assignment.width(), [&](std::size_t a, std::size_t b) {
    const double k = inv * detail::edge_weight(image, a, b, sigma);
    for (int s = 0; s < assignment.channels(); ++s) {
      const double d = static_cast<double>(assignment[s * np + b]) - assignment[s * np + a];
      const double g = d > 0 ? k : (d < 0 ? -k : 0.0);
      grad[s * np + b] += static_cast<T>(g);
      grad[s * np + a] -= static_cast<T>(g);
    }
  });
}

/// (1/3HW)(||I - Ĩ||² + ||I - Î||²).
template <typename T>
double reconstruction_loss(const Tensor<T>& image, const Tensor<T>& reconstruction,
                           const Tensor<T>& soft_image) {
  if (!image.same_shape(reconstruction) || !image.same_shape(soft_image)) {
    throw std::invalid_argument("reconstruction_loss: shape mismatch");
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < image.size(); ++k) {
    const double a = static_cast<double>(image[k]) - reconstruction[k];
    const double b = static_cast<double>(image[k]) - soft_image[k];
    acc += a * a + b * b;
  }
  return acc / static_cast<double>(image.size());
}

/// Accumulates scale · dL/dĨ into grad_reconstruction and scale · dL/dÎ into
/// grad_soft.
template <typename T>
void reconstruction_loss_backward(const Tensor<T>& image, const Tensor<T>& reconstruction,
                                  const Tensor<T>& soft_image, double scale,
                                  Tensor<T>& grad_reconstruction, Tensor<T>& grad_soft) {
  const double k = 2.0 * scale / static_cast<double>(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    grad_reconstruction[i] += static_cast<T>(k * (static_cast<double>(reconstruction[i]) - image[i]));
    grad_soft[i] += static_cast<T>(k * (static_cast<double>(soft_image[i]) - image[i]));
  }
}

/// KL(p || q) = sum p log(p / q).
template <typename T>
double kl_divergence(const Tensor<T>& p, const Tensor<T>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    acc += p[k] * (detail::safe_log(p[k]) - detail::safe_log(q[k]));
  }
  return acc;
}

template <typename T>
double edge_loss(const Tensor<T>& edges_image, const Tensor<T>& edges_reconstruction,
                 const Tensor<T>& edges_soft) {
  return kl_divergence(edges_image, edges_reconstruction) + kl_divergence(edges_image, edges_soft);
}

/// Accumulates scale · dKL(p||q)/dq into grad_q.
template <typename T>
void kl_divergence_backward_q(const Tensor<T>& p, const Tensor<T>& q, double scale, Tensor<T>& grad_q) {
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double qk = q[k];
    if (qk > kLogFloor) grad_q[k] += static_cast<T>(-scale * p[k] / qk);
  }
}

template <typename T>
struct ObjectiveGradients {
  Tensor<T> assignment;      // dL/dP
  Tensor<T> reconstruction;  // dL/dĨ
};

/// All four terms and the weighted total. P is N×H×W, image and
/// reconstruction are 3×H×W.
template <typename T>
LossReport total_objective(const Tensor<T>& assignment, const Tensor<T>& image,
                           const Tensor<T>& reconstruction, const LossWeights& weights) {
  if (!image.same_shape(reconstruction)) {
    throw std::invalid_argument("total_objective: image and reconstruction shapes differ");
  }
  detail::require_matching(assignment, image, "total_objective");
  const Tensor<T> soft = soft_superpixelated_image(assignment, image);
  LossReport r;
  r.clustering = clustering_loss(assignment, weights.lambda);
  r.smoothness = smoothness_loss(assignment, image, weights.sigma);
  r.reconstruction = reconstruction_loss(image, reconstruction, soft);
  r.edge = edge_loss(edge_distribution(image), edge_distribution(reconstruction), edge_distribution(soft));
  r.total = r.clustering + weights.alpha * r.smoothness + weights.beta * r.reconstruction +
            weights.eta * r.edge;
  return r;
}

/// Loss report plus gradients w.r.t. P and Ĩ. Zero-weighted terms are
/// skipped in the backward pass.
template <typename T>
std::pair<LossReport, ObjectiveGradients<T>> total_objective_with_gradients(
    const Tensor<T>& assignment, const Tensor<T>& image, const Tensor<T>& reconstruction,
    const LossWeights& weights) {
  if (!image.same_shape(reconstruction)) {
    throw std::invalid_argument("total_objective: image and reconstruction shapes differ");
  }
  detail::require_matching(assignment, image, "total_objective");
  const SuperpixelColors colors = soft_superpixel_colors(assignment, image);
  const Tensor<T> soft = soft_superpixelated_image(assignment, colors);
  const Tensor<T> e_image = edge_distribution(image);
  const Tensor<T> e_rec = edge_distribution(reconstruction);
  const Tensor<T> e_soft = edge_distribution(soft);

  LossReport r;
  r.clustering = clustering_loss(assignment, weights.lambda);
  r.smoothness = smoothness_loss(assignment, image, weights.sigma);
  r.reconstruction = reconstruction_loss(image, reconstruction, soft);
  r.edge = edge_loss(e_image, e_rec, e_soft);
  r.total = r.clustering + weights.alpha * r.smoothness + weights.beta * r.reconstruction +
            weights.eta * r.edge;

  ObjectiveGradients<T> g{Tensor<T>(assignment.channels(), assignment.height(), assignment.width()),
                          Tensor<T>(3, image.height(), image.width())};
  Tensor<T> grad_soft(image.channels(), image.height(), image.width());
  clustering_loss_backward(assignment, weights.lambda, 1.0, g.assignment);
  if (weights.alpha != 0.0) {
    smoothness_loss_backward(assignment, image, weights.sigma, weights.alpha, g.assignment);
  }
  if (weights.beta != 0.0) {
    reconstruction_loss_backward(image, reconstruction, soft, weights.beta, g.reconstruction, grad_soft);
  }
  if (weights.eta != 0.0) {
    Tensor<T> grad_e_rec(1, image.height(), image.width());
    Tensor<T> grad_e_soft(1, image.height(), image.width());
    kl_divergence_backward_q(e_image, e_rec, weights.eta, grad_e_rec);
    kl_divergence_backward_q(e_image, e_soft, weights.eta, grad_e_soft);
    const Tensor<T> d_rec = edge_distribution_backward(e_rec, grad_e_rec, reconstruction.channels());
    const Tensor<T> d_soft = edge_distribution_backward(e_soft, grad_e_soft, soft.channels());
    for (std::size_t k = 0; k < d_rec.size(); ++k) {
      g.reconstruction[k] += d_rec[k];
      grad_soft[k] += d_soft[k];
    }
  }
  if (weights.beta != 0.0 || weights.eta != 0.0) {
    const Tensor<T> d_p = soft_superpixelated_image_backward(assignment, image, colors, grad_soft);
    for (std::size_t k = 0; k < d_p.size(); ++k) g.assignment[k] += d_p[k];
  }
  return {r, std::move(g)};
}

/// Softmax over the channel axis at every pixel.
template <typename T>
Tensor<T> channel_softmax(const Tensor<T>& logits) {
  Tensor<T> out(logits.channels(), logits.height(), logits.width());
  const std::size_t np = logits.plane();
  const int n = logits.channels();
  std::vector<double> mx(np, -std::numeric_limits<double>::infinity());
  std::vector<double> z(np, 0.0);
  for (int s = 0; s < n; ++s) {
    auto ls = logits.channel(s);
    for (std::size_t p = 0; p < np; ++p) mx[p] = std::max(mx[p], static_cast<double>(ls[p]));
  }
  for (int s = 0; s < n; ++s) {
    auto ls = logits.channel(s);
    auto os = out.channel(s);
    for (std::size_t p = 0; p < np; ++p) {
      const double e = std::exp(ls[p] - mx[p]);
      os[p] = static_cast<T>(e);
      z[p] += e;
    }
  }
  for (int s = 0; s < n; ++s) {
    auto os = out.channel(s);
    for (std::size_t p = 0; p < np; ++p) os[p] = static_cast<T>(os[p] / z[p]);
  }
  return out;
}

/// dL/dlogits from dL/dP and P = channel_softmax(logits).
template <typename T>
Tensor<T> channel_softmax_backward(const Tensor<T>& probs, const Tensor<T>& grad_probs) {
  const std::size_t np = probs.plane();
  std::vector<double> dot(np, 0.0);
  for (int s = 0; s < probs.channels(); ++s) {
    auto ps = probs.channel(s);
    auto gs = grad_probs.channel(s);
    for (std::size_t p = 0; p < np; ++p) dot[p] += static_cast<double>(ps[p]) * gs[p];
  }
  Tensor<T> out(probs.channels(), probs.height(), probs.width());
  for (int s = 0; s < probs.channels(); ++s) {
    auto ps = probs.channel(s);
    auto gs = grad_probs.channel(s);
    auto os = out.channel(s);
    for (std::size_t p = 0; p < np; ++p) os[p] = static_cast<T>(ps[p] * (gs[p] - dot[p]));
  }
  return out;
}

inline void LossWeights::validate() const {
  for (double v : {lambda, alpha, beta, eta}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("LossWeights: lambda, alpha, beta and eta must be finite and >= 0");
    }
  }
  if (!std::isfinite(sigma) || sigma <= 0.0) {
    throw std::invalid_argument("LossWeights: sigma must be finite and > 0");
  }
}

}  // namespace superpix
