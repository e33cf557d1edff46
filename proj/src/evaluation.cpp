#include "superpix/evaluation.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <thread>

#include <cblas.h>

#include "superpix/metrics.hpp"
#include "superpix/trainer.hpp"

namespace superpix {

namespace {

ImageRecord run_one(const DatasetEntry& entry, const EvalOptions& opts) {
  ImageRecord rec;
  rec.id = entry.id;
  rec.image = entry.image.string();
  rec.n_superpixels = opts.network.n_superpixels;
  for (const auto& g : entry.ground_truths) rec.ground_truths.push_back(g.string());
  if (entry.ground_truths.empty()) {
    rec.status = "skipped";
    rec.message = "no ground-truth annotations";
    return rec;
  }
  const auto start = std::chrono::steady_clock::now();
  try {
    const Image image = load_image(entry.image);
    std::vector<LabelMap> gts;
    for (const auto& g : entry.ground_truths) gts.push_back(load_label_map(g, image.height(), image.width()));
    LabelMap pred = opts.oracle ? gts.front() : segment(image, opts.network, opts.train);
    if (opts.labels_dir) {
      const auto path = *opts.labels_dir / (entry.id + "_n" + std::to_string(opts.network.n_superpixels) + ".png");
      save_label_map(pred, path);
      rec.outputs.push_back(path.string());
    }
    rec.metrics = evaluate(pred, gts, opts.tolerance);
  } catch (const std::exception& e) {
    rec.status = "failed";
    rec.message = e.what();
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace

std::vector<ImageRecord> evaluate_dataset(const std::vector<DatasetEntry>& entries, const EvalOptions& opts) {
  std::vector<ImageRecord> out(entries.size());
  const int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(entries.size())));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < entries.size(); ++i) out[i] = run_one(entries[i], opts);
    return out;
  }
  // Image-level parallelism only; keep BLAS single-threaded per worker.
  openblas_set_num_threads(1);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < entries.size(); i = next++) out[i] = run_one(entries[i], opts);
    });
  }
  for (auto& t : workers) t.join();
  return out;
}

int resolve_jobs(std::optional<int> requested) {
  if (const char* env = std::getenv("SUPERPIX_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  if (requested && *requested > 0) return *requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

std::size_t write_eval_csv(const std::vector<ImageRecord>& records, std::ostream& os) {
  os << "image_id,n_superpixels,asa,br\n" << std::setprecision(10);
  double sum_n = 0.0, sum_asa = 0.0, sum_br = 0.0;
  std::size_t rows = 0;
  for (const auto& r : records) {
    if (!r.metrics) continue;
    os << csv_field(r.id) << ',' << r.metrics->n_superpixels_used << ',' << r.metrics->asa << ','
       << r.metrics->br << '\n';
    sum_n += static_cast<double>(r.metrics->n_superpixels_used);
    sum_asa += r.metrics->asa;
    sum_br += r.metrics->br;
    ++rows;
  }
  const double k = rows ? static_cast<double>(rows) : 1.0;
  os << "mean," << sum_n / k << ',' << sum_asa / k << ',' << sum_br / k << '\n';
  return rows;
}

void write_sweep_csv(const std::vector<std::pair<int, std::vector<ImageRecord>>>& groups, std::ostream& os) {
  os << "count,image_id,asa,br\n" << std::setprecision(10);
  for (const auto& [count, records] : groups) {
    double sum_asa = 0.0, sum_br = 0.0;
    std::size_t rows = 0;
    for (const auto& r : records) {
      if (!r.metrics) continue;
      os << count << ',' << csv_field(r.id) << ',' << r.metrics->asa << ',' << r.metrics->br << '\n';
      sum_asa += r.metrics->asa;
      sum_br += r.metrics->br;
      ++rows;
    }
    const double k = rows ? static_cast<double>(rows) : 1.0;
    os << count << ",mean," << sum_asa / k << ',' << sum_br / k << '\n';
  }
}

}  // namespace superpix
