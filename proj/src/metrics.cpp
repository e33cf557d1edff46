#include "superpix/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace superpix {

namespace {

void require_same_shape(const LabelMap& a, const LabelMap& b, const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": label map shapes differ");
}

// Maps arbitrary label IDs to dense indices.
std::vector<std::size_t> densify(const LabelMap& m, std::size_t& count) {
  std::unordered_map<LabelMap::label_type, std::size_t> slot;
  std::vector<std::size_t> out(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) out[k] = slot.try_emplace(m[k], slot.size()).first->second;
  count = slot.size();
  return out;
}

}  // namespace

double asa(const LabelMap& pred, const LabelMap& gt) {
  require_same_shape(pred, gt, "asa");
  if (pred.size() == 0) return 1.0;
  std::size_t n_pred = 0, n_gt = 0;
  const auto p = densify(pred, n_pred);
  const auto g = densify(gt, n_gt);
  // Sparse contingency rows keep memory linear in the number of overlaps.
  std::vector<std::unordered_map<std::size_t, std::size_t>> overlap(n_pred);
  for (std::size_t k = 0; k < p.size(); ++k) ++overlap[p[k]][g[k]];
  std::size_t hit = 0;
  for (const auto& row : overlap) {
    std::size_t best = 0;
    for (const auto& [gid, count] : row) best = std::max(best, count);
    hit += best;
  }
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

std::vector<bool> boundary_map(const LabelMap& labels) {
  const int h = labels.height(), w = labels.width();
  std::vector<bool> out(labels.size(), false);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const auto v = labels(i, j);
      out[static_cast<std::size_t>(i) * w + j] =
          (j + 1 < w && labels(i, j + 1) != v) || (i + 1 < h && labels(i + 1, j) != v);
    }
  }
  return out;
}

double boundary_recall(const LabelMap& pred, const LabelMap& gt, int r) {
  require_same_shape(pred, gt, "boundary_recall");
  if (r < 0) throw std::invalid_argument("boundary_recall: tolerance must be >= 0");
  const int h = gt.height(), w = gt.width();
  const auto pb = boundary_map(pred);
  const auto gb = boundary_map(gt);

  // Summed-area table of predicted boundary pixels; a square window query
  // answers "any predicted boundary within Chebyshev distance r".
  std::vector<long> sat(static_cast<std::size_t>(h + 1) * (w + 1), 0);
  auto at = [&](int i, int j) -> long& { return sat[static_cast<std::size_t>(i) * (w + 1) + j]; };
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      at(i + 1, j + 1) = at(i, j + 1) + at(i + 1, j) - at(i, j) + (pb[static_cast<std::size_t>(i) * w + j] ? 1 : 0);
    }
  }
  std::size_t total = 0, matched = 0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!gb[static_cast<std::size_t>(i) * w + j]) continue;
      ++total;
      const int i0 = std::max(i - r, 0), i1 = std::min(i + r, h - 1);
      const int j0 = std::max(j - r, 0), j1 = std::min(j + r, w - 1);
      const long count = at(i1 + 1, j1 + 1) - at(i0, j1 + 1) - at(i1 + 1, j0) + at(i0, j0);
      if (count > 0) ++matched;
    }
  }
  if (total == 0) return 1.0;
  return static_cast<double>(matched) / static_cast<double>(total);
}

MetricsReport evaluate(const LabelMap& pred, std::span<const LabelMap> gts, int r) {
  if (gts.empty()) throw std::invalid_argument("evaluate: no ground-truth annotations");
  MetricsReport report;
  report.n_superpixels_used = pred.count_distinct();
  for (const auto& gt : gts) {
    PairMetrics m{asa(pred, gt), boundary_recall(pred, gt, r)};
    report.asa += m.asa;
    report.br += m.br;
    report.per_ground_truth.push_back(m);
  }
  report.asa /= static_cast<double>(gts.size());
  report.br /= static_cast<double>(gts.size());
  return report;
}

}  // namespace superpix
