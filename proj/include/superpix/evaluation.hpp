#pragma once

// Dataset-level orchestration shared by the eval and sweep commands.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "superpix/dataset_io.hpp"
#include "superpix/run_config.hpp"

namespace superpix {

struct EvalOptions {
  NetworkConfig network;
  TrainConfig train;
  int tolerance = kDefaultBoundaryTolerance;
  /// Use the first annotation as the prediction instead of training.
  bool oracle = false;
  int jobs = 1;
  /// When set, predicted label maps are written here as <id>_n<N>.png.
  std::optional<std::filesystem::path> labels_dir;
};

/// Segments and scores every entry. Entries without annotations are
/// recorded as skipped; per-image failures are recorded as failed. Records
/// come back in entry order regardless of the worker count.
std::vector<ImageRecord> evaluate_dataset(const std::vector<DatasetEntry>& entries, const EvalOptions& opts);

/// Worker count: SUPERPIX_THREADS when set to a positive integer, else the
/// requested value, else the number of hardware threads.
int resolve_jobs(std::optional<int> requested);

/// Quotes a CSV field when it contains a comma, quote or line break.
std::string csv_field(const std::string& s);

/// Rows image_id,n_superpixels,asa,br for each scored record, then a "mean"
/// summary row. Returns the number of data rows written.
std::size_t write_eval_csv(const std::vector<ImageRecord>& records, std::ostream& os);

/// Long-format rows count,image_id,asa,br; each count group is followed by a
/// "mean" summary row.
void write_sweep_csv(const std::vector<std::pair<int, std::vector<ImageRecord>>>& groups, std::ostream& os);

/// Default superpixel counts for sweeps.
inline const std::vector<int> kDefaultSweepCounts{25, 50, 100, 200, 400};

}  // namespace superpix
