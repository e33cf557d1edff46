#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "superpix/evaluation.hpp"
#include "superpix/run_config.hpp"
#include "test_support.hpp"

using namespace superpix;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SUPERPIX_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Minimal RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t k = 0; k < text.size(); ++k) {
    const char c = text[k];
    if (quoted) {
      if (c == '"' && k + 1 < text.size() && text[k + 1] == '"') {
        field += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(field);
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && k + 1 < text.size() && text[k + 1] == '\n') ++k;
      row.push_back(field);
      rows.push_back(row);
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (any) {
    row.push_back(field);
    rows.push_back(row);
  }
  return rows;
}

void write_quadrants(const fs::path& dir, const std::string& id, int h, int w) {
  Image img(3, h, w);
  LabelMap gt(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const int q = (i >= h / 2) * 2 + (j >= w / 2);
      gt(i, j) = q;
      img(0, i, j) = q & 1 ? 0.9f : 0.1f;
      img(1, i, j) = q & 2 ? 0.8f : 0.2f;
      img(2, i, j) = 0.5f;
    }
  save_image_png(img, dir / (id + ".png"));
  save_label_map(gt, dir / (id + "_gt0.png"));
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("segment writes four outputs and is reproducible") {
  TempDir dir;
  write_quadrants(dir.path(), "img", 16, 16);
  const auto img = (dir / "img.png").string();
  REQUIRE(run_cli("segment " + img + " -n 6 --iterations 2 --seed 7 -q -o " + (dir / "a").string()) == 0);
  REQUIRE(run_cli("segment " + img + " -n 6 --iterations 2 --seed 7 -q -o " + (dir / "b").string()) == 0);
  for (const char* f : {"img_labels.png", "img_overlay.png", "img_trace.csv", "img_manifest.json"}) {
    CHECK_MESSAGE(fs::exists(dir / "a" / f), f);
  }
  CHECK(std::distance(fs::directory_iterator(dir / "a"), fs::directory_iterator{}) == 4);
  CHECK(load_label_map(dir / "a" / "img_labels.png") == load_label_map(dir / "b" / "img_labels.png"));

  const auto trace = parse_csv(slurp(dir / "a" / "img_trace.csv"));
  CHECK(trace.size() == 3);

  const RunManifest m = load_manifest(dir / "a" / "img_manifest.json");
  CHECK(m.command == "segment");
  CHECK(m.network.n_superpixels == 6);
  CHECK(m.train.seed == 7);
  CHECK(m.train.iterations == 2);
  for (const auto& out : m.outputs) CHECK_MESSAGE(fs::exists(out), out);
}

TEST_CASE("segment argument errors") {
  TempDir dir;
  write_quadrants(dir.path(), "img", 16, 16);
  const auto img = (dir / "img.png").string();
  CHECK(run_cli("segment " + img + " --superpixels 1 -o " + (dir / "x").string()) != 0);
  CHECK_FALSE(fs::exists(dir / "x" / "img_labels.png"));
  CHECK(run_cli("segment " + (dir / "missing.png").string() + " -o " + (dir / "y").string()) == 1);
  CHECK(run_cli("segment " + img) != 0);
}

TEST_CASE("eval in oracle mode scores perfectly") {
  TempDir dir;
  fs::create_directories(dir / "data");
  write_quadrants(dir / "data", "one", 16, 16);
  const auto csv = dir / "res.csv";
  REQUIRE(run_cli("eval " + (dir / "data").string() + " --oracle -q -o " + csv.string()) == 0);
  const auto rows = parse_csv(slurp(csv));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"image_id", "n_superpixels", "asa", "br"});
  CHECK(rows[1][0] == "one");
  CHECK(std::stod(rows[1][2]) == 1.0);
  CHECK(std::stod(rows[1][3]) == 1.0);
  CHECK(rows[2][0] == "mean");
  const auto manifest = load_manifest(dir / "res.manifest.json");
  CHECK(manifest.oracle);
  CHECK(manifest.tolerance == 2);
}

TEST_CASE("eval trains, summarises and records skipped images") {
  TempDir dir;
  fs::create_directories(dir / "data");
  write_quadrants(dir / "data", "a", 16, 16);
  write_quadrants(dir / "data", "b,c", 16, 20);
  write_quadrants(dir / "data", "d", 18, 16);
  fs::remove(dir / "data" / "d_gt0.png");
  const auto csv = dir / "out" / "res.csv";
  REQUIRE(run_cli("eval " + (dir / "data").string() + " -n 5 --iterations 2 --jobs 2 --tolerance 3 -q -o " +
                  csv.string()) == 0);
  const auto rows = parse_csv(slurp(csv));
  REQUIRE(rows.size() == 4);
  CHECK(rows[1][0] == "a");
  CHECK(rows[2][0] == "b,c");
  double asa_sum = 0.0, br_sum = 0.0, n_sum = 0.0;
  for (int r = 1; r <= 2; ++r) {
    REQUIRE(rows[r].size() == 4);
    n_sum += std::stod(rows[r][1]);
    asa_sum += std::stod(rows[r][2]);
    br_sum += std::stod(rows[r][3]);
    CHECK(std::stoi(rows[r][1]) <= 5);
  }
  CHECK(rows[3][0] == "mean");
  CHECK(std::stod(rows[3][1]) == doctest::Approx(n_sum / 2));
  CHECK(std::stod(rows[3][2]) == doctest::Approx(asa_sum / 2));
  CHECK(std::stod(rows[3][3]) == doctest::Approx(br_sum / 2));

  const auto manifest = load_manifest(dir / "out" / "res.manifest.json");
  REQUIRE(manifest.images.size() == 3);
  CHECK(manifest.images[2].id == "d");
  CHECK(manifest.images[2].status == "skipped");
  CHECK(manifest.tolerance == 3);
}

TEST_CASE("sweep writes one group per count") {
  TempDir dir;
  fs::create_directories(dir / "data");
  for (const char* id : {"p", "q", "r"}) write_quadrants(dir / "data", id, 16, 16);
  const auto csv = dir / "sweep.csv";
  REQUIRE(run_cli("sweep " + (dir / "data").string() + " --counts 4,9 --oracle -q -o " + csv.string()) == 0);
  const auto rows = parse_csv(slurp(csv));
  REQUIRE(rows.size() == 1 + 6 + 2);
  CHECK(rows[0] == std::vector<std::string>{"count", "image_id", "asa", "br"});
  int data = 0, summary = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) (rows[r][1] == "mean" ? summary : data)++;
  CHECK(data == 6);
  CHECK(summary == 2);
  CHECK(rows[4] == std::vector<std::string>{"4", "mean", "1", "1"});
  CHECK(fs::exists(dir / "sweep.manifest.json"));
}

TEST_CASE("default sweep counts") {
  CHECK(kDefaultSweepCounts == std::vector<int>{25, 50, 100, 200, 400});
}

TEST_CASE("csv quoting") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(parse_csv(csv_field("x\"y,z") + "\n")[0][0] == "x\"y,z");
}

TEST_CASE("eval csv mean row matches the data rows") {
  std::vector<ImageRecord> recs(3);
  for (int k = 0; k < 3; ++k) {
    recs[k].id = "img" + std::to_string(k);
    MetricsReport m;
    m.asa = 0.5 + 0.1 * k;
    m.br = 0.9 - 0.2 * k;
    m.n_superpixels_used = 10 + k;
    recs[k].metrics = m;
  }
  recs[1].metrics.reset();
  recs[1].status = "failed";
  std::ostringstream os;
  CHECK(write_eval_csv(recs, os) == 2);
  const auto rows = parse_csv(os.str());
  REQUIRE(rows.size() == 4);
  CHECK(std::stod(rows[3][2]) == doctest::Approx((0.5 + 0.7) / 2));
  CHECK(std::stod(rows[3][3]) == doctest::Approx((0.9 + 0.5) / 2));
}

TEST_CASE("worker count resolution") {
  ::unsetenv("SUPERPIX_THREADS");
  CHECK(resolve_jobs(3) == 3);
  CHECK(resolve_jobs(std::nullopt) >= 1);
  ::setenv("SUPERPIX_THREADS", "5", 1);
  CHECK(resolve_jobs(3) == 5);
  ::setenv("SUPERPIX_THREADS", "junk", 1);
  CHECK(resolve_jobs(2) == 2);
  ::unsetenv("SUPERPIX_THREADS");
}

TEST_CASE("manifest json round trip") {
  TempDir dir;
  RunManifest m;
  m.command = "eval";
  m.network.n_superpixels = 77;
  m.network.dilation_rates = {1, 3};
  m.network.seed = 9;
  m.train.iterations = 12;
  m.train.loss_weights.eta = 0.5;
  m.train.enforce_connectivity = true;
  m.tolerance = 4;
  m.inputs = {"data"};
  m.outputs = {"a.csv", "a.manifest.json"};
  ImageRecord rec;
  rec.id = "x";
  rec.image = "data/x.png";
  rec.ground_truths = {"data/x_gt0.png", "data/x_gt1.csv"};
  rec.n_superpixels = 77;
  MetricsReport metrics;
  metrics.asa = 0.123456789012345;
  metrics.br = 1.0 / 3.0;
  metrics.n_superpixels_used = 70;
  metrics.per_ground_truth = {{0.1, 0.2}, {0.3, 0.4}};
  rec.metrics = metrics;
  rec.seconds = 1.5;
  ImageRecord skipped;
  skipped.id = "y";
  skipped.status = "skipped";
  skipped.message = "no ground-truth annotations";
  m.images = {rec, skipped};
  m.seconds = 2.25;
  save_manifest(m, dir / "m.json");
  CHECK(load_manifest(dir / "m.json") == m);
  nlohmann::json j = nlohmann::json::parse(slurp(dir / "m.json"));
  CHECK(j.contains("network"));
  CHECK(j.contains("train"));
}

TEST_CASE("dataset evaluation in oracle mode keeps entry order") {
  TempDir dir;
  for (const char* id : {"a", "b", "c", "d"}) write_quadrants(dir.path(), id, 16, 16);
  EvalOptions opts;
  opts.oracle = true;
  opts.jobs = 3;
  const auto records = evaluate_dataset(scan_dataset(dir.path()), opts);
  REQUIRE(records.size() == 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(records[k].id == std::string(1, static_cast<char>('a' + k)));
    CHECK(records[k].status == "ok");
    REQUIRE(records[k].metrics);
    CHECK(records[k].metrics->asa == 1.0);
  }
}

}  // TEST_SUITE
