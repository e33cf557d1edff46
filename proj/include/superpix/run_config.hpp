#pragma once

// JSON mapping for configurations and run manifests.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "superpix/losses.hpp"
#include "superpix/metrics.hpp"
#include "superpix/network.hpp"
#include "superpix/trainer.hpp"

namespace superpix {

struct ImageRecord {
  std::string id;
  std::string image;
  std::vector<std::string> ground_truths;
  int n_superpixels = 0;
  std::string status = "ok";  // ok | skipped | failed
  std::string message;
  std::vector<std::string> outputs;
  std::optional<MetricsReport> metrics;
  double seconds = 0.0;

  bool operator==(const ImageRecord&) const = default;
};

struct RunManifest {
  std::string command;
  NetworkConfig network;
  TrainConfig train;
  int tolerance = kDefaultBoundaryTolerance;
  bool oracle = false;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<ImageRecord> images;
  double seconds = 0.0;

  bool operator==(const RunManifest&) const = default;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);
void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const PairMetrics& m);
void from_json(const nlohmann::json& j, PairMetrics& m);
void to_json(nlohmann::json& j, const MetricsReport& m);
void from_json(const nlohmann::json& j, MetricsReport& m);
void to_json(nlohmann::json& j, const ImageRecord& r);
void from_json(const nlohmann::json& j, ImageRecord& r);
void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

void save_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest load_manifest(const std::filesystem::path& path);

}  // namespace superpix
