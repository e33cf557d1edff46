#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "superpix/dataset_io.hpp"
#include "superpix/losses.hpp"
#include "superpix/network.hpp"

namespace superpix {

struct TrainConfig {
  int iterations = 1000;
  double learning_rate = 0.01;
  double weight_decay = 0.0;
  LossWeights loss_weights;
  std::uint64_t seed = 0;
  bool enforce_connectivity = false;
  double min_component_frac = 0.25;

  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

struct TrainTrace {
  std::vector<LossReport> losses;  // one entry per iteration, before its update
  double seconds = 0.0;
};

struct FitResult {
  ModelOutput<float> output;
  TrainTrace trace;
};

/// Raised when the objective becomes NaN or infinite.
class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(int iteration, const LossReport& report);
  int iteration() const { return iteration_; }
  const LossReport& report() const { return report_; }

 private:
  int iteration_;
  LossReport report_;
};

using ProgressCallback = std::function<void(int iteration, const LossReport&)>;

/// Optimises a freshly initialised network on a single image. The network
/// seed is taken from train_cfg.seed. Requires H, W >= 16.
FitResult fit(const Image& image, const NetworkConfig& net_cfg, const TrainConfig& train_cfg,
              const ProgressCallback& progress = {});

struct Segmentation {
  LabelMap labels;
  FitResult fit;
};

/// fit() followed by argmax labelling and optional connectivity enforcement.
/// Labels are compacted to 0..K-1.
Segmentation segment_image(const Image& image, const NetworkConfig& net_cfg,
                           const TrainConfig& train_cfg, const ProgressCallback& progress = {});

LabelMap segment(const Image& image, const NetworkConfig& net_cfg, const TrainConfig& train_cfg);

/// Merges every 4-connected component smaller than
/// min_component_frac · H·W / n_superpixels into the adjacent component it
/// shares the longest border with. Each output label is one 4-connected
/// component; labels are compacted in raster order.
LabelMap enforce_connectivity(const LabelMap& labels, int n_superpixels, double min_component_frac);

/// 4-connected component labelling, components numbered in raster order.
LabelMap connected_components(const LabelMap& labels);

/// CSV with header iteration,clustering,smoothness,reconstruction,edge,total;
/// iterations are 1-based.
void write_trace_csv(const TrainTrace& trace, std::ostream& os);
void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& path);

}  // namespace superpix
