#include "superpix/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace fs = std::filesystem;

namespace superpix {

namespace {

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

void standardize(std::span<float> channel) {
  double mean = 0.0;
  for (float v : channel) mean += v;
  mean /= static_cast<double>(channel.size());
  double var = 0.0;
  for (float v : channel) var += (v - mean) * (v - mean);
  var /= static_cast<double>(channel.size());
  const double sd = std::sqrt(var);
  // Relative threshold so float round-off on a constant channel is not
  // amplified into noise.
  if (sd <= 1e-6 * std::max(1.0, std::abs(mean))) {
    std::fill(channel.begin(), channel.end(), 0.0f);
    return;
  }
  for (float& v : channel) v = static_cast<float>((v - mean) / sd);
}

}  // namespace

Image load_image(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("load_image: no such file: " + path.string());
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw std::runtime_error("load_image: cannot decode " + path.string());

  cv::Mat bgr;
  switch (raw.channels()) {
    case 1: cv::cvtColor(raw, bgr, cv::COLOR_GRAY2BGR); break;
    case 3: bgr = raw; break;
    case 4: cv::cvtColor(raw, bgr, cv::COLOR_BGRA2BGR); break;
    default:
      throw std::runtime_error("load_image: unsupported channel count in " + path.string());
  }
  double scale = 1.0;
  switch (bgr.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    case CV_32F: scale = 1.0; break;
    default: throw std::runtime_error("load_image: unsupported bit depth in " + path.string());
  }
  cv::Mat f;
  bgr.convertTo(f, CV_32FC3, scale);

  Image out(3, f.rows, f.cols);
  for (int i = 0; i < f.rows; ++i) {
    const auto* row = f.ptr<cv::Vec3f>(i);
    for (int j = 0; j < f.cols; ++j) {
      out(0, i, j) = std::clamp(row[j][2], 0.0f, 1.0f);
      out(1, i, j) = std::clamp(row[j][1], 0.0f, 1.0f);
      out(2, i, j) = std::clamp(row[j][0], 0.0f, 1.0f);
    }
  }
  return out;
}

void save_image_png(const Image& image, const fs::path& path) {
  if (image.channels() != 3) throw std::invalid_argument("save_image_png: expected 3 channels");
  cv::Mat m(image.height(), image.width(), CV_8UC3);
  for (int i = 0; i < image.height(); ++i) {
    auto* row = m.ptr<cv::Vec3b>(i);
    for (int j = 0; j < image.width(); ++j) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image(c, i, j), 0.0f, 1.0f);
        row[j][2 - c] = static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
  }
  if (!cv::imwrite(path.string(), m)) throw std::runtime_error("save_image_png: cannot write " + path.string());
}

LabelMap parse_label_csv(const std::string& text) {
  std::vector<LabelMap::label_type> values;
  int rows = 0, cols = -1;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream cells(line);
    std::string cell;
    int n = 0;
    while (std::getline(cells, cell, ',')) {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(cell, &used);
      } catch (const std::exception&) {
        throw std::runtime_error("label CSV: not an integer: '" + cell + "'");
      }
      if (cell.find_first_not_of(" \t", used) != std::string::npos) {
        throw std::runtime_error("label CSV: not an integer: '" + cell + "'");
      }
      if (v < 0) throw std::runtime_error("label CSV: negative label " + std::to_string(v));
      if (v > std::numeric_limits<LabelMap::label_type>::max()) {
        throw std::runtime_error("label CSV: label out of range " + std::to_string(v));
      }
      values.push_back(static_cast<LabelMap::label_type>(v));
      ++n;
    }
    if (cols >= 0 && n != cols) throw std::runtime_error("label CSV: ragged rows");
    cols = n;
    ++rows;
  }
  if (rows == 0) throw std::runtime_error("label CSV: empty grid");
  return LabelMap(rows, cols, std::move(values));
}

LabelMap load_label_map(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("load_label_map: no such file: " + path.string());
  if (lower_extension(path) == ".csv") {
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_label_csv(ss.str());
  }
  const cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw std::runtime_error("load_label_map: cannot decode " + path.string());
  if (m.channels() != 1) throw std::runtime_error("load_label_map: expected single-channel PNG " + path.string());
  cv::Mat wide;
  m.convertTo(wide, CV_32S);
  LabelMap out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    const auto* row = wide.ptr<std::int32_t>(i);
    for (int j = 0; j < m.cols; ++j) out(i, j) = row[j];
  }
  return out;
}

LabelMap load_label_map(const fs::path& path, int expected_height, int expected_width) {
  LabelMap m = load_label_map(path);
  if (m.height() != expected_height || m.width() != expected_width) {
    throw std::runtime_error("load_label_map: " + path.string() + " is " + std::to_string(m.height()) +
                             "x" + std::to_string(m.width()) + ", expected " +
                             std::to_string(expected_height) + "x" + std::to_string(expected_width));
  }
  return m;
}

void save_label_map(const LabelMap& labels, const fs::path& path) {
  cv::Mat m(labels.height(), labels.width(), CV_16UC1);
  for (int i = 0; i < labels.height(); ++i) {
    auto* row = m.ptr<std::uint16_t>(i);
    for (int j = 0; j < labels.width(); ++j) {
      const auto v = labels(i, j);
      if (v < 0 || v > 65535) {
        throw std::out_of_range("save_label_map: label " + std::to_string(v) + " does not fit in 16 bits");
      }
      row[j] = static_cast<std::uint16_t>(v);
    }
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw std::runtime_error("save_label_map: cannot write " + path.string());
}

Tensor<float> assemble_network_channels(const Image& image) {
  if (image.channels() != 3) throw std::invalid_argument("build_network_input: expected an RGB image");
  const int h = image.height(), w = image.width();
  Tensor<float> x(5, h, w);
  std::copy(image.data(), image.data() + image.size(), x.data());
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      x(3, i, j) = static_cast<float>(j);
      x(4, i, j) = static_cast<float>(i);
    }
  }
  return x;
}

Tensor<float> build_network_input(const Image& image) {
  Tensor<float> x = assemble_network_channels(image);
  for (int c = 0; c < 5; ++c) standardize(x.channel(c));
  return x;
}

Image render_boundary_overlay(const Image& image, const LabelMap& labels) {
  if (!labels.same_shape(image) || image.channels() != 3) {
    throw std::invalid_argument("render_boundary_overlay: image and labels must share H×W");
  }
  Image out = image;
  const int h = labels.height(), w = labels.width();
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const bool edge = (j + 1 < w && labels(i, j + 1) != labels(i, j)) ||
                        (i + 1 < h && labels(i + 1, j) != labels(i, j));
      if (edge) {
        out(0, i, j) = 1.0f;
        out(1, i, j) = 0.0f;
        out(2, i, j) = 0.0f;
      }
    }
  }
  return out;
}

std::vector<DatasetEntry> scan_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("scan_dataset: not a directory: " + dir.string());
  static const std::regex gt_pattern(R"((.+)_gt(\d+)$)");
  std::map<std::string, DatasetEntry> entries;
  std::map<std::string, std::vector<std::pair<int, fs::path>>> gts;
  for (const auto& de : fs::directory_iterator(dir)) {
    if (!de.is_regular_file()) continue;
    const fs::path p = de.path();
    const std::string ext = lower_extension(p);
    const std::string stem = p.stem().string();
    std::smatch m;
    if (std::regex_match(stem, m, gt_pattern)) {
      if (ext == ".png" || ext == ".csv") gts[m[1].str()].emplace_back(std::stoi(m[2].str()), p);
    } else if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") {
      entries[stem] = DatasetEntry{stem, p, {}};
    }
  }
  std::vector<DatasetEntry> out;
  for (auto& [id, e] : entries) {
    auto it = gts.find(id);
    if (it != gts.end()) {
      std::sort(it->second.begin(), it->second.end());
      for (auto& [k, p] : it->second) e.ground_truths.push_back(p);
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace superpix
