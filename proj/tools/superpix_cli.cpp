// superpix: unsupervised per-image superpixel segmentation.
//
//   superpix segment IMAGE -o OUT_DIR [flags]
//   superpix eval DATASET_DIR -o RESULTS.csv [flags]
//   superpix sweep DATASET_DIR -o SWEEP.csv [--counts 25,50,...] [flags]

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "superpix/dataset_io.hpp"
#include "superpix/evaluation.hpp"
#include "superpix/run_config.hpp"
#include "superpix/trainer.hpp"

namespace fs = std::filesystem;
using namespace superpix;

namespace {

constexpr int kExitIoError = 1;
constexpr int kExitNonFinite = 2;

struct CommonFlags {
  NetworkConfig network;
  TrainConfig train;
  int tolerance = kDefaultBoundaryTolerance;
  std::optional<int> jobs;
  bool oracle = false;
  bool quiet = false;
  std::string out;
};

void add_common_flags(CLI::App& cmd, CommonFlags& f) {
  cmd.add_option("-n,--superpixels", f.network.n_superpixels, "Maximum number of superpixels N")
      ->check(CLI::Range(2, 65535))
      ->capture_default_str();
  cmd.add_option("--iterations", f.train.iterations, "Adam iterations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd.add_option("--lr", f.train.learning_rate, "Learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  cmd.add_option("--lambda", f.train.loss_weights.lambda, "Marginal-entropy weight")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd.add_option("--alpha", f.train.loss_weights.alpha, "Smoothness weight")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd.add_option("--beta", f.train.loss_weights.beta, "Reconstruction weight")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd.add_option("--eta", f.train.loss_weights.eta, "Edge KL weight")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd.add_option("--sigma", f.train.loss_weights.sigma, "Smoothness bandwidth")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd.add_option("--seed", f.train.seed, "Random seed")->capture_default_str();
  cmd.add_flag("--enforce-connectivity", f.train.enforce_connectivity,
               "Merge small disconnected fragments into neighbours");
  cmd.add_option("--min-component-frac", f.train.min_component_frac,
                 "Fragments below this fraction of H*W/N are merged")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd.add_flag("-q,--quiet", f.quiet, "Suppress progress output");
  cmd.add_option("-o,--out", f.out, "Output location")->required();
}

void add_dataset_flags(CLI::App& cmd, CommonFlags& f) {
  cmd.add_option("--tolerance", f.tolerance, "Boundary recall tolerance r")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd.add_option("--jobs", f.jobs, "Parallel images (SUPERPIX_THREADS overrides)")->check(CLI::PositiveNumber);
  cmd.add_flag("--oracle", f.oracle, "Score the first annotation as the prediction (no training)");
}

fs::path manifest_path_for(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".manifest.json");
  return p;
}

int cmd_segment(const std::string& image_path, const CommonFlags& f) {
  const auto start = std::chrono::steady_clock::now();
  Image image;
  try {
    image = load_image(image_path);
    fs::create_directories(f.out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIoError;
  }

  Segmentation seg;
  try {
    ProgressCallback progress;
    if (!f.quiet) {
      progress = [](int it, const LossReport& r) {
        if (it == 1 || it % 100 == 0) std::cerr << "iter " << it << " loss " << r.total << '\n';
      };
    }
    seg = segment_image(image, f.network, f.train, progress);
  } catch (const NonFiniteLossError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNonFinite;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIoError;
  }

  const std::string stem = fs::path(image_path).stem().string();
  const fs::path out_dir(f.out);
  const fs::path labels = out_dir / (stem + "_labels.png");
  const fs::path overlay = out_dir / (stem + "_overlay.png");
  const fs::path trace = out_dir / (stem + "_trace.csv");
  const fs::path manifest_path = out_dir / (stem + "_manifest.json");
  try {
    save_label_map(seg.labels, labels);
    save_image_png(render_boundary_overlay(image, seg.labels), overlay);
    write_trace_csv(seg.fit.trace, trace);

    RunManifest manifest;
    manifest.command = "segment";
    manifest.network = f.network;
    manifest.network.seed = f.train.seed;
    manifest.train = f.train;
    manifest.inputs = {image_path};
    manifest.outputs = {labels.string(), overlay.string(), trace.string(), manifest_path.string()};
    ImageRecord rec;
    rec.id = stem;
    rec.image = image_path;
    rec.n_superpixels = f.network.n_superpixels;
    rec.outputs = {labels.string(), overlay.string(), trace.string()};
    rec.seconds = seg.fit.trace.seconds;
    manifest.images = {rec};
    manifest.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    save_manifest(manifest, manifest_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIoError;
  }
  if (!f.quiet) {
    std::cerr << "wrote " << seg.labels.count_distinct() << " superpixels to " << labels.string() << '\n';
  }
  return 0;
}

EvalOptions eval_options(const CommonFlags& f) {
  EvalOptions opts;
  opts.network = f.network;
  opts.train = f.train;
  opts.tolerance = f.tolerance;
  opts.oracle = f.oracle;
  opts.jobs = resolve_jobs(f.jobs);
  return opts;
}

RunManifest base_manifest(const std::string& command, const std::string& dataset_dir, const CommonFlags& f) {
  RunManifest m;
  m.command = command;
  m.network = f.network;
  m.network.seed = f.train.seed;
  m.train = f.train;
  m.tolerance = f.tolerance;
  m.oracle = f.oracle;
  m.inputs = {dataset_dir};
  return m;
}

void warn_unscored(const std::vector<ImageRecord>& records) {
  for (const auto& r : records) {
    if (r.status != "ok") std::cerr << "warning: " << r.id << " " << r.status << ": " << r.message << '\n';
  }
}

int cmd_eval(const std::string& dataset_dir, const CommonFlags& f) {
  const auto start = std::chrono::steady_clock::now();
  try {
    const auto entries = scan_dataset(dataset_dir);
    const auto records = evaluate_dataset(entries, eval_options(f));
    warn_unscored(records);
    const fs::path csv(f.out);
    if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
    std::ofstream os(csv);
    if (!os) throw std::runtime_error("cannot open " + csv.string());
    write_eval_csv(records, os);
    os.close();

    RunManifest m = base_manifest("eval", dataset_dir, f);
    m.outputs = {csv.string(), manifest_path_for(csv).string()};
    m.images = records;
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    save_manifest(m, manifest_path_for(csv));
    for (const auto& r : records) {
      if (r.status == "failed" && r.message.find("non-finite") != std::string::npos) return kExitNonFinite;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIoError;
  }
  return 0;
}

int cmd_sweep(const std::string& dataset_dir, const std::vector<int>& counts, const CommonFlags& f) {
  const auto start = std::chrono::steady_clock::now();
  try {
    const auto entries = scan_dataset(dataset_dir);
    std::vector<std::pair<int, std::vector<ImageRecord>>> groups;
    RunManifest m = base_manifest("sweep", dataset_dir, f);
    for (int n : counts) {
      CommonFlags fn = f;
      fn.network.n_superpixels = n;
      if (!f.quiet) std::cerr << "sweep: N=" << n << '\n';
      auto records = evaluate_dataset(entries, eval_options(fn));
      warn_unscored(records);
      m.images.insert(m.images.end(), records.begin(), records.end());
      groups.emplace_back(n, std::move(records));
    }
    const fs::path csv(f.out);
    if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
    std::ofstream os(csv);
    if (!os) throw std::runtime_error("cannot open " + csv.string());
    write_sweep_csv(groups, os);
    os.close();
    m.outputs = {csv.string(), manifest_path_for(csv).string()};
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    save_manifest(m, manifest_path_for(csv));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIoError;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised per-image superpixel segmentation"};
  app.require_subcommand(1);

  CommonFlags seg_flags;
  std::string image_path;
  auto* seg = app.add_subcommand("segment", "Segment one image");
  seg->add_option("image", image_path, "Input PNG/JPEG")->required();
  add_common_flags(*seg, seg_flags);

  CommonFlags eval_flags;
  std::string eval_dir;
  auto* ev = app.add_subcommand("eval", "Segment and score every annotated image in a directory");
  ev->add_option("dataset_dir", eval_dir, "Directory of <id>.png|jpg and <id>_gt<k>.png|csv")->required();
  add_common_flags(*ev, eval_flags);
  add_dataset_flags(*ev, eval_flags);

  CommonFlags sweep_flags;
  std::string sweep_dir;
  std::vector<int> counts = kDefaultSweepCounts;
  auto* sw = app.add_subcommand("sweep", "Run eval for several superpixel counts");
  sw->add_option("dataset_dir", sweep_dir, "Dataset directory")->required();
  sw->add_option("--counts", counts, "Superpixel counts")->delimiter(',')->check(CLI::Range(2, 65535));
  add_common_flags(*sw, sweep_flags);
  add_dataset_flags(*sw, sweep_flags);

  CLI11_PARSE(app, argc, argv);

  if (*seg) return cmd_segment(image_path, seg_flags);
  if (*ev) return cmd_eval(eval_dir, eval_flags);
  return cmd_sweep(sweep_dir, counts, sweep_flags);
}
