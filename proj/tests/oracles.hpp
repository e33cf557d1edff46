#pragma once

// Brute-force reference implementations used only by the tests. They are
// written straight from the defining sums with nested loops over plain
// vectors and share no code with the library beyond the container types.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "superpix/tensor.hpp"

namespace oracle {

using superpix::LabelMap;
using superpix::Tensor;

inline double clog(double v) { return std::log(std::max(v, 1e-12)); }

// (1/HW) sum_ij sum_s -P log P + lambda sum_s pbar_s log pbar_s
template <typename T>
double clustering(const Tensor<T>& P, double lambda) {
  const int n = P.channels(), h = P.height(), w = P.width();
  double first = 0.0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int s = 0; s < n; ++s) first += -P(s, i, j) * clog(P(s, i, j));
  first /= h * w;
  double second = 0.0;
  for (int s = 0; s < n; ++s) {
    double pbar = 0.0;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) pbar += P(s, i, j);
    pbar /= h * w;
    second += pbar * clog(pbar);
  }
  return first + lambda * second;
}

template <typename T>
double smoothness(const Tensor<T>& P, const Tensor<T>& I, double sigma) {
  const int h = P.height(), w = P.width();
  double total = 0.0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (j + 1 < w) {
        double l1 = 0.0, d2 = 0.0;
        for (int s = 0; s < P.channels(); ++s) l1 += std::abs(double(P(s, i, j + 1)) - P(s, i, j));
        for (int c = 0; c < I.channels(); ++c) d2 += std::pow(double(I(c, i, j + 1)) - I(c, i, j), 2);
        total += l1 * std::exp(-d2 / sigma);
      }
      if (i + 1 < h) {
        double l1 = 0.0, d2 = 0.0;
        for (int s = 0; s < P.channels(); ++s) l1 += std::abs(double(P(s, i + 1, j)) - P(s, i, j));
        for (int c = 0; c < I.channels(); ++c) d2 += std::pow(double(I(c, i + 1, j)) - I(c, i, j), 2);
        total += l1 * std::exp(-d2 / sigma);
      }
    }
  }
  return total / (h * w);
}

// Soft superpixelated image by the defining double sum, recomputing every
// superpixel colour from scratch for each output pixel.
template <typename T>
Tensor<double> soft_image(const Tensor<T>& P, const Tensor<T>& I) {
  const int n = P.channels(), h = P.height(), w = P.width();
  Tensor<double> out(I.channels(), h, w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int c = 0; c < I.channels(); ++c) {
        double v = 0.0;
        for (int s = 0; s < n; ++s) {
          double num = 0.0, den = 0.0;
          for (int a = 0; a < h; ++a)
            for (int b = 0; b < w; ++b) {
              num += double(P(s, a, b)) * I(c, a, b);
              den += P(s, a, b);
            }
          v += P(s, i, j) * num / std::max(den, 1e-8);
        }
        out(c, i, j) = v;
      }
    }
  }
  return out;
}

template <typename T>
double reconstruction(const Tensor<T>& I, const Tensor<T>& rec, const Tensor<T>& soft) {
  double a = 0.0, b = 0.0;
  for (int c = 0; c < I.channels(); ++c)
    for (int i = 0; i < I.height(); ++i)
      for (int j = 0; j < I.width(); ++j) {
        a += std::pow(double(I(c, i, j)) - rec(c, i, j), 2);
        b += std::pow(double(I(c, i, j)) - soft(c, i, j), 2);
      }
  return (a + b) / (3.0 * I.height() * I.width());
}

// Laplacian with explicit kernel taps and clamped reads.
template <typename T>
Tensor<double> laplacian(const Tensor<T>& t) {
  static const int K[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};
  const int h = t.height(), w = t.width();
  Tensor<double> out(t.channels(), h, w);
  for (int c = 0; c < t.channels(); ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double acc = 0.0;
        for (int a = -1; a <= 1; ++a)
          for (int b = -1; b <= 1; ++b) {
            const int si = std::clamp(i + a, 0, h - 1), sj = std::clamp(j + b, 0, w - 1);
            acc += K[a + 1][b + 1] * double(t(c, si, sj));
          }
        out(c, i, j) = acc;
      }
  return out;
}

template <typename T>
std::vector<double> edge_distribution(const Tensor<T>& t) {
  const auto lap = laplacian(t);
  const int h = t.height(), w = t.width();
  std::vector<double> r(h * w, 0.0);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      for (int c = 0; c < t.channels(); ++c) r[i * w + j] += lap(c, i, j);
      r[i * w + j] /= t.channels();
    }
  double z = 0.0;
  for (double v : r) z += std::exp(v);
  for (double& v : r) v = std::exp(v) / z;
  return r;
}

inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) acc += p[k] * std::log(p[k] / q[k]);
  return acc;
}

// sum_s max_g |pred_s ∩ gt_g| / HW by counting every (s, g) pair directly.
inline double asa(const LabelMap& pred, const LabelMap& gt) {
  std::set<int> ps(pred.values().begin(), pred.values().end());
  std::set<int> gs(gt.values().begin(), gt.values().end());
  long hit = 0;
  for (int s : ps) {
    long best = 0;
    for (int g : gs) {
      long count = 0;
      for (std::size_t k = 0; k < pred.size(); ++k) count += (pred[k] == s && gt[k] == g);
      best = std::max(best, count);
    }
    hit += best;
  }
  return double(hit) / pred.size();
}

inline bool is_boundary(const LabelMap& m, int i, int j) {
  return (j + 1 < m.width() && m(i, j + 1) != m(i, j)) || (i + 1 < m.height() && m(i + 1, j) != m(i, j));
}

// For every gt boundary pixel, scan all pred boundary pixels for one within
// Chebyshev distance r.
inline double boundary_recall(const LabelMap& pred, const LabelMap& gt, int r) {
  std::vector<std::pair<int, int>> pb;
  for (int i = 0; i < pred.height(); ++i)
    for (int j = 0; j < pred.width(); ++j)
      if (is_boundary(pred, i, j)) pb.emplace_back(i, j);
  long total = 0, hit = 0;
  for (int i = 0; i < gt.height(); ++i)
    for (int j = 0; j < gt.width(); ++j) {
      if (!is_boundary(gt, i, j)) continue;
      ++total;
      for (auto [a, b] : pb) {
        if (std::max(std::abs(a - i), std::abs(b - j)) <= r) {
          ++hit;
          break;
        }
      }
    }
  return total == 0 ? 1.0 : double(hit) / total;
}

// Random generators shared by property tests.
template <typename T>
Tensor<T> random_assignment(std::mt19937_64& rng, int n, int h, int w) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Tensor<T> P(n, h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double z = 0.0;
      for (int s = 0; s < n; ++s) z += (P(s, i, j) = static_cast<T>(u(rng)));
      for (int s = 0; s < n; ++s) P(s, i, j) = static_cast<T>(P(s, i, j) / z);
    }
  return P;
}

template <typename T>
Tensor<T> random_image(std::mt19937_64& rng, int c, int h, int w, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> t(c, h, w);
  for (auto& v : t.values()) v = static_cast<T>(u(rng));
  return t;
}

inline LabelMap random_labels(std::mt19937_64& rng, int h, int w, int max_labels) {
  std::uniform_int_distribution<int> u(0, max_labels - 1);
  LabelMap m(h, w);
  for (auto& v : m.values()) v = u(rng);
  return m;
}

template <typename T>
Tensor<T> one_hot(const LabelMap& labels, int n) {
  Tensor<T> P(n, labels.height(), labels.width());
  for (int i = 0; i < labels.height(); ++i)
    for (int j = 0; j < labels.width(); ++j) P(labels(i, j), i, j) = T{1};
  return P;
}

}  // namespace oracle
