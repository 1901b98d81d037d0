#include "shiftcal/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace shiftcal {

using nlohmann::json;

namespace {

json net_to_json(const DenseNet& net) {
  json layers = json::array();
  for (const auto& l : net.layers) {
    layers.push_back({{"in", l.in_dim()},
                      {"out", l.out_dim()},
                      {"activation", activation_name(l.activation)},
                      {"weights", l.weights.data},
                      {"bias", l.bias}});
  }
  return {{"layers", layers}};
}

DenseNet net_from_json(const json& j) {
  DenseNet net;
  for (const auto& lj : j.at("layers")) {
    DenseLayer l;
    int in = lj.at("in").get<int>();
    int out = lj.at("out").get<int>();
    l.weights = Matrix(out, in);
    l.weights.data = lj.at("weights").get<std::vector<double>>();
    l.bias = lj.at("bias").get<std::vector<double>>();
    l.activation = activation_from_name(lj.at("activation").get<std::string>());
    if (static_cast<int>(l.weights.data.size()) != in * out ||
        static_cast<int>(l.bias.size()) != out)
      throw std::runtime_error("checkpoint: layer parameter count mismatch");
    net.layers.push_back(std::move(l));
  }
  if (net.layers.empty()) throw std::runtime_error("checkpoint: net has no layers");
  return net;
}

json pipeline_to_json(const FeaturePipeline& pipeline) {
  json stages = json::array();
  for (const auto& s : pipeline.stages) stages.push_back(net_to_json(s));
  return stages;
}

FeaturePipeline pipeline_from_json(const json& j) {
  FeaturePipeline p;
  for (const auto& sj : j) p.stages.push_back(net_from_json(sj));
  return p;
}

json parse(const std::string& text, const char* expected_kind) {
  json j = json::parse(text);
  if (j.value("format", "") != "shiftcal-model")
    throw std::runtime_error("checkpoint: not a shiftcal model file");
  if (j.value("kind", "") != expected_kind)
    throw std::runtime_error("checkpoint: expected kind '" + std::string(expected_kind) +
                             "', found '" + j.value("kind", "") + "'");
  return j;
}

}  // namespace

std::string forecaster_to_json(const Forecaster& forecaster) {
  json j{{"format", "shiftcal-model"},
         {"kind", "forecaster"},
         {"mode", calibration_mode_name(forecaster.mode)},
         {"temperature", forecaster.temperature},
         {"pipeline", pipeline_to_json(forecaster.features)},
         {"head", net_to_json(forecaster.head)}};
  return j.dump(2);
}

Forecaster forecaster_from_json(const std::string& text) {
  json j = parse(text, "forecaster");
  Forecaster f;
  f.mode = calibration_mode_from_name(j.at("mode").get<std::string>());
  f.temperature = j.at("temperature").get<double>();
  f.features = pipeline_from_json(j.at("pipeline"));
  f.head = net_from_json(j.at("head"));
  if (!(f.temperature > 0.0)) throw std::runtime_error("checkpoint: temperature must be positive");
  return f;
}

std::string discriminator_to_json(const SourceDiscriminator& disc) {
  json j{{"format", "shiftcal-model"},
         {"kind", "discriminator"},
         {"temperature", disc.temperature},
         {"clamp_bound", disc.clamp_bound},
         {"pipeline", pipeline_to_json(disc.features)},
         {"head", net_to_json(disc.head)}};
  return j.dump(2);
}

SourceDiscriminator discriminator_from_json(const std::string& text) {
  json j = parse(text, "discriminator");
  SourceDiscriminator d;
  d.temperature = j.at("temperature").get<double>();
  d.clamp_bound = j.at("clamp_bound").get<double>();
  d.features = pipeline_from_json(j.at("pipeline"));
  d.head = net_from_json(j.at("head"));
  return d;
}

void atomic_write(const std::string& path, const std::string& contents) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << contents;
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

static std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_forecaster(const Forecaster& forecaster, const std::string& path) {
  atomic_write(path, forecaster_to_json(forecaster));
}

Forecaster load_forecaster(const std::string& path) {
  return forecaster_from_json(read_file(path));
}

void save_discriminator(const SourceDiscriminator& disc, const std::string& path) {
  atomic_write(path, discriminator_to_json(disc));
}

SourceDiscriminator load_discriminator(const std::string& path) {
  return discriminator_from_json(read_file(path));
}

}  // namespace shiftcal
