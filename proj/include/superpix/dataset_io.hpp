#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "superpix/tensor.hpp"

namespace superpix {

/// RGB image, 3×H×W, values in [0, 1].
using Image = Tensor<float>;

/// Decodes a PNG or JPEG file into an RGB tensor scaled to [0, 1]. Grayscale
/// and alpha images are converted to RGB. Throws std::runtime_error when the
/// file is missing or cannot be decoded.
Image load_image(const std::filesystem::path& path);

/// Writes an RGB [0, 1] tensor as an 8-bit RGB PNG.
void save_image_png(const Image& image, const std::filesystem::path& path);

/// Reads a ground-truth or superpixel label map from a 16-bit (or 8-bit)
/// single-channel PNG or from a CSV grid of non-negative integers.
LabelMap load_label_map(const std::filesystem::path& path);

/// As load_label_map, additionally requiring the given shape.
LabelMap load_label_map(const std::filesystem::path& path, int expected_height, int expected_width);

/// Parses CSV text: comma-separated integers, one image row per line.
LabelMap parse_label_csv(const std::string& text);

/// Writes a 16-bit grayscale PNG. Throws std::out_of_range for IDs outside
/// [0, 65535].
void save_label_map(const LabelMap& labels, const std::filesystem::path& path);

/// R, G, B, column index, row index (zero-based), before standardisation.
Tensor<float> assemble_network_channels(const Image& image);

/// Five standardised channels (R, G, B, column, row); each channel has zero
/// mean and unit variance, constant channels become all zeros.
Tensor<float> build_network_input(const Image& image);

/// Copy of the image with every label-boundary pixel (right or bottom
/// neighbour differs) painted pure red.
Image render_boundary_overlay(const Image& image, const LabelMap& labels);

/// One evaluation sample: an image and its K ground-truth annotations.
struct DatasetEntry {
  std::string id;
  std::filesystem::path image;
  std::vector<std::filesystem::path> ground_truths;
};

/// Scans a directory for <id>.{png,jpg,jpeg} images and <id>_gt<k>.{png,csv}
/// annotations. Entries are sorted by id; images with no annotation are
/// returned with an empty ground_truths list.
std::vector<DatasetEntry> scan_dataset(const std::filesystem::path& dir);

}  // namespace superpix
