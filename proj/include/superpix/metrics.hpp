#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "superpix/tensor.hpp"

namespace superpix {

/// Boundary tolerance used by default for boundary recall.
inline constexpr int kDefaultBoundaryTolerance = 2;

struct PairMetrics {
  double asa = 0.0;
  double br = 0.0;

  bool operator==(const PairMetrics&) const = default;
};

struct MetricsReport {
  double asa = 0.0;  // mean over annotations
  double br = 0.0;   // mean over annotations
  std::size_t n_superpixels_used = 0;
  std::vector<PairMetrics> per_ground_truth;

  bool operator==(const MetricsReport&) const = default;
};

/// Achievable segmentation accuracy: each predicted segment is credited with
/// its largest overlap with any ground-truth segment, normalised by H·W.
double asa(const LabelMap& pred, const LabelMap& gt);

/// Pixel is a boundary iff its right or bottom neighbour carries a
/// different label. Row-major H·W mask.
std::vector<bool> boundary_map(const LabelMap& labels);

/// Fraction of ground-truth boundary pixels with a predicted boundary pixel
/// within Chebyshev distance r. Returns 1 when gt has no boundary.
double boundary_recall(const LabelMap& pred, const LabelMap& gt, int r);

/// ASA and BR averaged over all annotations. Throws on an empty list.
MetricsReport evaluate(const LabelMap& pred, std::span<const LabelMap> gts,
                       int r = kDefaultBoundaryTolerance);

}  // namespace superpix
