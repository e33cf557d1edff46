#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include <opencv2/imgcodecs.hpp>

#include "oracles.hpp"
#include "superpix/dataset_io.hpp"
#include "test_support.hpp"

using namespace superpix;
using testing_support::TempDir;

namespace {

void write_bgr(const std::filesystem::path& p, int h, int w, cv::Scalar bgr) {
  cv::Mat m(h, w, CV_8UC3, bgr);
  REQUIRE(cv::imwrite(p.string(), m));
}

double channel_mean(const Tensor<float>& t, int c) {
  double s = 0.0;
  for (float v : t.channel(c)) s += v;
  return s / t.plane();
}

double channel_var(const Tensor<float>& t, int c) {
  const double mu = channel_mean(t, c);
  double s = 0.0;
  for (float v : t.channel(c)) s += (v - mu) * (v - mu);
  return s / t.plane();
}

}  // namespace

TEST_SUITE("dataset_io") {

TEST_CASE("black and white images load as zeros and ones") {
  TempDir dir;
  write_bgr(dir / "black.png", 2, 2, {0, 0, 0});
  write_bgr(dir / "white.png", 2, 2, {255, 255, 255});
  const Image black = load_image(dir / "black.png");
  const Image white = load_image(dir / "white.png");
  CHECK(black.channels() == 3);
  CHECK(black.height() == 2);
  CHECK(black.width() == 2);
  for (float v : black.values()) CHECK(v == 0.0f);
  for (float v : white.values()) CHECK(v == 1.0f);
}

TEST_CASE("channel order is RGB and values stay in the unit range") {
  TempDir dir;
  cv::Mat m(5, 7, CV_8UC3);
  std::mt19937 rng(3);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) m.at<cv::Vec3b>(i, j) = cv::Vec3b(rng() % 256, rng() % 256, rng() % 256);
  REQUIRE(cv::imwrite((dir / "rand.png").string(), m));
  const Image img = load_image(dir / "rand.png");
  REQUIRE(img.height() == 5);
  REQUIRE(img.width() == 7);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 7; ++j) {
      const auto px = m.at<cv::Vec3b>(i, j);
      CHECK(img(0, i, j) == doctest::Approx(px[2] / 255.0));
      CHECK(img(1, i, j) == doctest::Approx(px[1] / 255.0));
      CHECK(img(2, i, j) == doctest::Approx(px[0] / 255.0));
    }
  for (float v : img.values()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("grayscale images expand to three equal channels") {
  TempDir dir;
  cv::Mat g(3, 4, CV_8UC1, cv::Scalar(51));
  REQUIRE(cv::imwrite((dir / "g.png").string(), g));
  const Image img = load_image(dir / "g.png");
  CHECK(img.channels() == 3);
  for (float v : img.values()) CHECK(v == doctest::Approx(0.2));
}

TEST_CASE("load_image errors") {
  TempDir dir;
  CHECK_THROWS(load_image(dir / "missing.png"));
  std::ofstream(dir / "junk.png") << "not an image";
  CHECK_THROWS(load_image(dir / "junk.png"));
}

TEST_CASE("label CSV parses verbatim") {
  const LabelMap m = parse_label_csv("0,0\n1,1\n");
  REQUIRE(m.height() == 2);
  REQUIRE(m.width() == 2);
  CHECK(m(0, 0) == 0);
  CHECK(m(0, 1) == 0);
  CHECK(m(1, 0) == 1);
  CHECK(m(1, 1) == 1);

  const LabelMap sparse = parse_label_csv("7, 300\r\n12,7");
  CHECK(sparse(0, 1) == 300);
  CHECK(sparse(1, 0) == 12);
}

TEST_CASE("label CSV rejects bad input") {
  CHECK_THROWS(parse_label_csv("0,-1\n1,1"));
  CHECK_THROWS(parse_label_csv("0,1\n1"));
  CHECK_THROWS(parse_label_csv("0,x\n1,1"));
  CHECK_THROWS(parse_label_csv("0,1.5\n1,1"));
  CHECK_THROWS(parse_label_csv(""));
}

TEST_CASE("label CSV loads from disk with shape check") {
  TempDir dir;
  std::ofstream(dir / "gt.csv") << "0,0,1\n2,2,1\n";
  const LabelMap m = load_label_map(dir / "gt.csv");
  CHECK(m.height() == 2);
  CHECK(m.width() == 3);
  CHECK(m(1, 2) == 1);
  CHECK_NOTHROW(load_label_map(dir / "gt.csv", 2, 3));
  CHECK_THROWS(load_label_map(dir / "gt.csv", 3, 2));
}

TEST_CASE("label PNG round trip") {
  TempDir dir;
  SUBCASE("all zero map decodes to zeros") {
    const LabelMap zeros(4, 5, 0);
    save_label_map(zeros, dir / "z.png");
    const cv::Mat raw = cv::imread((dir / "z.png").string(), cv::IMREAD_UNCHANGED);
    CHECK(raw.depth() == CV_16U);
    CHECK(raw.channels() == 1);
    CHECK(cv::countNonZero(raw) == 0);
    CHECK(load_label_map(dir / "z.png") == zeros);
  }
  SUBCASE("largest 16-bit id survives") {
    LabelMap m(2, 3, 0);
    m(1, 2) = 65535;
    save_label_map(m, dir / "max.png");
    CHECK(load_label_map(dir / "max.png") == m);
  }
  SUBCASE("400 distinct ids stay distinct") {
    LabelMap m(20, 20);
    for (int k = 0; k < 400; ++k) m[k] = k * 37 % 401;
    save_label_map(m, dir / "many.png");
    const LabelMap back = load_label_map(dir / "many.png");
    std::set<int> ids(back.values().begin(), back.values().end());
    CHECK(ids.size() == 400);
    CHECK(back == m);
  }
  SUBCASE("random maps round trip exactly") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 10; ++t) {
      const LabelMap m = oracle::random_labels(rng, 3 + t, 9 - t / 2, 65536);
      save_label_map(m, dir / "r.png");
      CHECK(load_label_map(dir / "r.png") == m);
    }
  }
  SUBCASE("ids above 16 bits are rejected") {
    LabelMap m(2, 2, 0);
    m(0, 0) = 65536;
    CHECK_THROWS_AS(save_label_map(m, dir / "big.png"), std::out_of_range);
  }
}

TEST_CASE("coordinate channels before standardisation") {
  const Image img(3, 3, 3, 0.5f);
  const auto raw = assemble_network_channels(img);
  REQUIRE(raw.channels() == 5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CHECK(raw(3, i, j) == float(j));
      CHECK(raw(4, i, j) == float(i));
    }
}

TEST_CASE("network input channels are standardised") {
  std::mt19937_64 rng(5);
  for (auto [h, w] : {std::pair{16, 16}, std::pair{7, 23}, std::pair{31, 4}}) {
    const auto img = oracle::random_image<float>(rng, 3, h, w);
    const auto x = build_network_input(img);
    REQUIRE(x.channels() == 5);
    for (int c = 0; c < 5; ++c) {
      CHECK(std::abs(channel_mean(x, c)) < 1e-5);
      CHECK(std::abs(channel_var(x, c) - 1.0) < 1e-4);
    }
  }
}

TEST_CASE("constant colour channels standardise to zero") {
  const Image gray(3, 6, 8, 0.4f);
  const auto x = build_network_input(gray);
  for (int c = 0; c < 3; ++c)
    for (float v : x.channel(c)) CHECK(v == 0.0f);
  CHECK(std::abs(channel_var(x, 3) - 1.0) < 1e-4);
}

TEST_CASE("boundary overlay") {
  std::mt19937_64 rng(9);
  const auto img = oracle::random_image<float>(rng, 3, 2, 2);

  SUBCASE("uniform labels leave the image untouched") {
    CHECK(render_boundary_overlay(img, LabelMap(2, 2, 4)) == img);
  }
  SUBCASE("vertical split marks the left column") {
    const LabelMap m(2, 2, std::vector<int>{0, 1, 0, 1});
    const auto out = render_boundary_overlay(img, m);
    for (int i = 0; i < 2; ++i) {
      CHECK(out(0, i, 0) == 1.0f);
      CHECK(out(1, i, 0) == 0.0f);
      CHECK(out(2, i, 0) == 0.0f);
      for (int c = 0; c < 3; ++c) CHECK(out(c, i, 1) == img(c, i, 1));
    }
  }
  SUBCASE("checkerboard marks every pixel with a right or bottom neighbour") {
    const auto big = oracle::random_image<float>(rng, 3, 5, 6);
    LabelMap m(5, 6);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 6; ++j) m(i, j) = (i + j) % 2;
    const auto out = render_boundary_overlay(big, m);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 6; ++j) {
        const bool marked = out(0, i, j) == 1.0f && out(1, i, j) == 0.0f && out(2, i, j) == 0.0f;
        CHECK(marked == (i < 4 || j < 5));
      }
  }
  SUBCASE("only discontinuity pixels change") {
    const auto big = oracle::random_image<float>(rng, 3, 9, 11);
    const auto m = oracle::random_labels(rng, 9, 11, 3);
    const auto out = render_boundary_overlay(big, m);
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 11; ++j) {
        if (oracle::is_boundary(m, i, j)) continue;
        for (int c = 0; c < 3; ++c) CHECK(out(c, i, j) == big(c, i, j));
      }
  }
  SUBCASE("shape mismatch throws") {
    CHECK_THROWS(render_boundary_overlay(img, LabelMap(3, 2)));
  }
}

TEST_CASE("dataset scan pairs images with annotations") {
  TempDir dir;
  write_bgr(dir / "b.png", 4, 4, {0, 0, 0});
  write_bgr(dir / "a.jpg", 4, 4, {0, 0, 0});
  write_bgr(dir / "lonely.png", 4, 4, {0, 0, 0});
  save_label_map(LabelMap(4, 4, 0), dir / "a_gt0.png");
  std::ofstream(dir / "a_gt1.csv") << "0,0,0,0\n0,0,0,0\n1,1,1,1\n1,1,1,1\n";
  save_label_map(LabelMap(4, 4, 0), dir / "b_gt0.png");
  std::ofstream(dir / "notes.txt") << "ignored";

  const auto entries = scan_dataset(dir.path());
  REQUIRE(entries.size() == 3);
  CHECK(entries[0].id == "a");
  CHECK(entries[0].ground_truths.size() == 2);
  CHECK(entries[1].id == "b");
  CHECK(entries[1].ground_truths.size() == 1);
  CHECK(entries[2].id == "lonely");
  CHECK(entries[2].ground_truths.empty());
}

}  // TEST_SUITE
