#include "superpix/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "superpix/adam.hpp"
#include "superpix/superpix_ops.hpp"

namespace superpix {

void TrainConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("TrainConfig: iterations must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  }
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  if (!(min_component_frac >= 0.0)) throw std::invalid_argument("TrainConfig: min_component_frac must be >= 0");
  loss_weights.validate();
}

namespace {
std::string describe(int iteration, const LossReport& r) {
  std::ostringstream os;
  os << "non-finite loss at iteration " << iteration << " (clustering=" << r.clustering
     << ", smoothness=" << r.smoothness << ", reconstruction=" << r.reconstruction
     << ", edge=" << r.edge << ", total=" << r.total << ")";
  return os.str();
}
}  // namespace

NonFiniteLossError::NonFiniteLossError(int iteration, const LossReport& report)
    : std::runtime_error(describe(iteration, report)), iteration_(iteration), report_(report) {}

FitResult fit(const Image& image, const NetworkConfig& net_cfg, const TrainConfig& train_cfg,
              const ProgressCallback& progress) {
  train_cfg.validate();
  if (image.channels() != 3) throw std::invalid_argument("fit: expected an RGB image");
  if (image.height() < 16 || image.width() < 16) {
    throw std::invalid_argument("fit: image must be at least 16x16");
  }
  const auto start = std::chrono::steady_clock::now();

  NetworkConfig cfg = net_cfg;
  cfg.seed = train_cfg.seed;
  Network<float> net(cfg);
  const Tensor<float> input = build_network_input(image);
  AdamOptions opts;
  opts.learning_rate = train_cfg.learning_rate;
  opts.weight_decay = train_cfg.weight_decay;
  Adam<float> adam(net.parameters(), opts);

  FitResult result;
  result.trace.losses.reserve(train_cfg.iterations);
  for (int it = 1; it <= train_cfg.iterations; ++it) {
    const ModelOutput<float> out = net.forward(input);
    auto [report, grads] =
        total_objective_with_gradients(out.assignment, image, out.reconstruction, train_cfg.loss_weights);
    if (!std::isfinite(report.total)) throw NonFiniteLossError(it, report);
    result.trace.losses.push_back(report);
    if (progress) progress(it, report);
    net.zero_grad();
    net.backward(grads.assignment, grads.reconstruction);
    adam.step();
  }
  result.output = net.forward(input);
  result.trace.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

Segmentation segment_image(const Image& image, const NetworkConfig& net_cfg,
                           const TrainConfig& train_cfg, const ProgressCallback& progress) {
  Segmentation seg;
  seg.fit = fit(image, net_cfg, train_cfg, progress);
  const LabelMap hard = hard_assignment(seg.fit.output.assignment);
  seg.labels = train_cfg.enforce_connectivity
                   ? enforce_connectivity(hard, net_cfg.n_superpixels, train_cfg.min_component_frac)
                   : compact_labels(hard);
  return seg;
}

LabelMap segment(const Image& image, const NetworkConfig& net_cfg, const TrainConfig& train_cfg) {
  return segment_image(image, net_cfg, train_cfg).labels;
}

LabelMap connected_components(const LabelMap& labels) {
  const int h = labels.height(), w = labels.width();
  LabelMap comp(h, w, -1);
  std::vector<std::size_t> stack;
  LabelMap::label_type next = 0;
  for (std::size_t seed = 0; seed < labels.size(); ++seed) {
    if (comp[seed] >= 0) continue;
    const auto v = labels[seed];
    comp[seed] = next;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const int i = static_cast<int>(p / w), j = static_cast<int>(p % w);
      auto visit = [&](int ni, int nj) {
        if (ni < 0 || ni >= h || nj < 0 || nj >= w) return;
        const std::size_t q = static_cast<std::size_t>(ni) * w + nj;
        if (comp[q] < 0 && labels[q] == v) {
          comp[q] = next;
          stack.push_back(q);
        }
      };
      visit(i - 1, j);
      visit(i + 1, j);
      visit(i, j - 1);
      visit(i, j + 1);
    }
    ++next;
  }
  return comp;
}

LabelMap enforce_connectivity(const LabelMap& labels, int n_superpixels, double min_component_frac) {
  if (n_superpixels < 1) throw std::invalid_argument("enforce_connectivity: n_superpixels must be >= 1");
  const int h = labels.height(), w = labels.width();
  const LabelMap comp = connected_components(labels);
  std::size_t n_comp = 0;
  for (auto c : comp.values()) n_comp = std::max<std::size_t>(n_comp, static_cast<std::size_t>(c) + 1);

  std::vector<std::vector<std::size_t>> pixels(n_comp);
  for (std::size_t p = 0; p < comp.size(); ++p) pixels[comp[p]].push_back(p);
  std::vector<std::size_t> parent(n_comp);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  const double threshold = min_component_frac * static_cast<double>(labels.size()) / n_superpixels;
  std::vector<std::size_t> order(n_comp);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pixels[a].size() < pixels[b].size(); });

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t c : order) {
      const std::size_t r = find(c);
      if (static_cast<double>(pixels[r].size()) >= threshold) continue;
      std::unordered_map<std::size_t, std::size_t> border;
      for (std::size_t p : pixels[r]) {
        const int i = static_cast<int>(p / w), j = static_cast<int>(p % w);
        auto touch = [&](int ni, int nj) {
          if (ni < 0 || ni >= h || nj < 0 || nj >= w) return;
          const std::size_t q = find(comp[static_cast<std::size_t>(ni) * w + nj]);
          if (q != r) ++border[q];
        };
        touch(i - 1, j);
        touch(i + 1, j);
        touch(i, j - 1);
        touch(i, j + 1);
      }
      if (border.empty()) continue;
      std::size_t best = 0, best_count = 0;
      bool first = true;
      for (const auto& [q, count] : border) {
        if (first || count > best_count || (count == best_count && q < best)) {
          best = q;
          best_count = count;
          first = false;
        }
      }
      parent[r] = best;
      pixels[best].insert(pixels[best].end(), pixels[r].begin(), pixels[r].end());
      pixels[r].clear();
      changed = true;
    }
  }

  LabelMap merged(h, w);
  for (std::size_t p = 0; p < comp.size(); ++p) {
    merged[p] = static_cast<LabelMap::label_type>(find(comp[p]));
  }
  return compact_labels(merged);
}

void write_trace_csv(const TrainTrace& trace, std::ostream& os) {
  os << "iteration,clustering,smoothness,reconstruction,edge,total\n";
  os << std::setprecision(10);
  for (std::size_t i = 0; i < trace.losses.size(); ++i) {
    const auto& r = trace.losses[i];
    os << (i + 1) << ',' << r.clustering << ',' << r.smoothness << ',' << r.reconstruction << ','
       << r.edge << ',' << r.total << '\n';
  }
}

void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_trace_csv: cannot open " + path.string());
  write_trace_csv(trace, os);
  if (!os) throw std::runtime_error("write_trace_csv: write failed for " + path.string());
}

}  // namespace superpix
