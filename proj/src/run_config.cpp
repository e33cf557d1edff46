#include "superpix/run_config.hpp"

#include <fstream>
#include <stdexcept>

namespace superpix {

using nlohmann::json;

void to_json(json& j, const LossWeights& w) {
  j = json{{"lambda", w.lambda}, {"alpha", w.alpha}, {"beta", w.beta}, {"eta", w.eta}, {"sigma", w.sigma}};
}

void from_json(const json& j, LossWeights& w) {
  j.at("lambda").get_to(w.lambda);
  j.at("alpha").get_to(w.alpha);
  j.at("beta").get_to(w.beta);
  j.at("eta").get_to(w.eta);
  j.at("sigma").get_to(w.sigma);
}

void to_json(json& j, const NetworkConfig& c) {
  j = json{{"n_superpixels", c.n_superpixels},
           {"base_channels", c.base_channels},
           {"n_feature_blocks", c.n_feature_blocks},
           {"dilation_rates", c.dilation_rates},
           {"aspp_branch_channels", c.aspp_branch_channels},
           {"projection_channels", c.projection_channels},
           {"dense_features", c.dense_features},
           {"seed", c.seed}};
}

void from_json(const json& j, NetworkConfig& c) {
  j.at("n_superpixels").get_to(c.n_superpixels);
  j.at("base_channels").get_to(c.base_channels);
  j.at("n_feature_blocks").get_to(c.n_feature_blocks);
  j.at("dilation_rates").get_to(c.dilation_rates);
  j.at("aspp_branch_channels").get_to(c.aspp_branch_channels);
  j.at("projection_channels").get_to(c.projection_channels);
  j.at("dense_features").get_to(c.dense_features);
  j.at("seed").get_to(c.seed);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"iterations", c.iterations},
           {"learning_rate", c.learning_rate},
           {"weight_decay", c.weight_decay},
           {"loss_weights", c.loss_weights},
           {"seed", c.seed},
           {"enforce_connectivity", c.enforce_connectivity},
           {"min_component_frac", c.min_component_frac}};
}

void from_json(const json& j, TrainConfig& c) {
  j.at("iterations").get_to(c.iterations);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("weight_decay").get_to(c.weight_decay);
  j.at("loss_weights").get_to(c.loss_weights);
  j.at("seed").get_to(c.seed);
  j.at("enforce_connectivity").get_to(c.enforce_connectivity);
  j.at("min_component_frac").get_to(c.min_component_frac);
}

void to_json(json& j, const PairMetrics& m) { j = json{{"asa", m.asa}, {"br", m.br}}; }

void from_json(const json& j, PairMetrics& m) {
  j.at("asa").get_to(m.asa);
  j.at("br").get_to(m.br);
}

void to_json(json& j, const MetricsReport& m) {
  j = json{{"asa", m.asa},
           {"br", m.br},
           {"n_superpixels_used", m.n_superpixels_used},
           {"per_ground_truth", m.per_ground_truth}};
}

void from_json(const json& j, MetricsReport& m) {
  j.at("asa").get_to(m.asa);
  j.at("br").get_to(m.br);
  j.at("n_superpixels_used").get_to(m.n_superpixels_used);
  j.at("per_ground_truth").get_to(m.per_ground_truth);
}

void to_json(json& j, const ImageRecord& r) {
  j = json{{"id", r.id},
           {"image", r.image},
           {"ground_truths", r.ground_truths},
           {"n_superpixels", r.n_superpixels},
           {"status", r.status},
           {"message", r.message},
           {"outputs", r.outputs},
           {"seconds", r.seconds}};
  j["metrics"] = r.metrics ? json(*r.metrics) : json(nullptr);
}

void from_json(const json& j, ImageRecord& r) {
  j.at("id").get_to(r.id);
  j.at("image").get_to(r.image);
  j.at("ground_truths").get_to(r.ground_truths);
  j.at("n_superpixels").get_to(r.n_superpixels);
  j.at("status").get_to(r.status);
  j.at("message").get_to(r.message);
  j.at("outputs").get_to(r.outputs);
  j.at("seconds").get_to(r.seconds);
  if (j.at("metrics").is_null()) {
    r.metrics.reset();
  } else {
    r.metrics = j.at("metrics").get<MetricsReport>();
  }
}

void to_json(json& j, const RunManifest& m) {
  j = json{{"command", m.command},
           {"network", m.network},
           {"train", m.train},
           {"tolerance", m.tolerance},
           {"oracle", m.oracle},
           {"inputs", m.inputs},
           {"outputs", m.outputs},
           {"images", m.images},
           {"seconds", m.seconds}};
}

void from_json(const json& j, RunManifest& m) {
  j.at("command").get_to(m.command);
  j.at("network").get_to(m.network);
  j.at("train").get_to(m.train);
  j.at("tolerance").get_to(m.tolerance);
  j.at("oracle").get_to(m.oracle);
  j.at("inputs").get_to(m.inputs);
  j.at("outputs").get_to(m.outputs);
  j.at("images").get_to(m.images);
  j.at("seconds").get_to(m.seconds);
}

void save_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_manifest: cannot open " + path.string());
  os << json(manifest).dump(2) << '\n';
  if (!os) throw std::runtime_error("save_manifest: write failed for " + path.string());
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_manifest: cannot open " + path.string());
  return json::parse(is).get<RunManifest>();
}

}  // namespace superpix
