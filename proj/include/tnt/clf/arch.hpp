#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "tnt/common/error.hpp"
#include "tnt/common/rng.hpp"
#include "tnt/nn/layers.hpp"

namespace tnt::clf {

enum class LayerKind { conv, maxpool, fc };
enum class Activation { relu, none, softmax };

/// One row of an architecture table: layer type, channel/unit count, filter
/// size, stride, activation. Convolutions use same-padding (filter/2).
struct LayerRow {
  LayerKind kind;
  std::size_t channels = 0;
  std::size_t filter = 0;
  std::size_t stride = 1;
  Activation act = Activation::none;
};

/// A classifier architecture as a layer table plus input geometry. The
/// trailing softmax row is realized outside the network (the net emits
/// logits; probabilities() applies the softmax).
///
/// width_mult scales every interior channel/unit count (the final row stays
/// at num_classes), which makes the full-width tables trainable at desk
/// scale on CPU.
struct ArchSpec {
  std::string name;
  std::vector<LayerRow> rows;
  std::size_t num_classes = 0;
  std::size_t input_size = 32;
  double width_mult = 1.0;

  std::size_t scaled(std::size_t channels) const {
    return std::max<std::size_t>(4, static_cast<std::size_t>(std::llround(channels * width_mult)));
  }

  void validate() const {
    if (rows.empty()) throw ConfigError("ArchSpec: empty layer table");
    if (rows.back().kind != LayerKind::fc || rows.back().channels != num_classes)
      throw ConfigError("ArchSpec: final layer must be fc with width = num_classes");
    for (const auto& r : rows) {
      if (r.kind == LayerKind::conv && (r.filter == 0 || r.channels == 0))
        throw ConfigError("ArchSpec: conv rows need filter and channels");
      if (r.kind == LayerKind::maxpool && r.filter == 0)
        throw ConfigError("ArchSpec: maxpool rows need a filter size");
    }
  }
};

/// 6 conv + 2 dense table used for the 32x32 scene-classification task.
inline ArchSpec cifar10_arch(double width_mult = 1.0, std::size_t num_classes = 10) {
  ArchSpec a;
  a.name = "cifar10";
  a.input_size = 32;
  a.num_classes = num_classes;
  a.width_mult = width_mult;
  a.rows = {
      {LayerKind::conv, 128, 3, 1, Activation::relu},
      {LayerKind::conv, 128, 3, 1, Activation::relu},
      {LayerKind::maxpool, 0, 2, 2, Activation::none},
      {LayerKind::conv, 256, 3, 1, Activation::relu},
      {LayerKind::conv, 256, 3, 1, Activation::relu},
      {LayerKind::maxpool, 0, 2, 2, Activation::none},
      {LayerKind::conv, 512, 3, 1, Activation::relu},
      {LayerKind::conv, 512, 3, 1, Activation::relu},
      {LayerKind::maxpool, 0, 2, 2, Activation::none},
      {LayerKind::fc, 1024, 0, 0, Activation::relu},
      {LayerKind::fc, num_classes, 0, 0, Activation::softmax},
  };
  return a;
}

/// 7 conv + 2 dense table for the 32x32 traffic-sign task (43 classes).
inline ArchSpec gtsrb_arch(double width_mult = 1.0, std::size_t num_classes = 43) {
  ArchSpec a;
  a.name = "gtsrb";
  a.input_size = 32;
  a.num_classes = num_classes;
  a.width_mult = width_mult;
  a.rows = {
      {LayerKind::conv, 128, 3, 1, Activation::relu},
      {LayerKind::conv, 128, 3, 1, Activation::relu},
      {LayerKind::maxpool, 0, 2, 2, Activation::none},
      {LayerKind::conv, 256, 3, 1, Activation::relu},
      {LayerKind::conv, 256, 3, 1, Activation::relu},
      {LayerKind::maxpool, 0, 2, 2, Activation::none},
      {LayerKind::conv, 512, 3, 1, Activation::relu},
      {LayerKind::conv, 512, 3, 1, Activation::relu},
      {LayerKind::maxpool, 0, 2, 2, Activation::none},
      {LayerKind::conv, 1024, 3, 1, Activation::relu},
      {LayerKind::maxpool, 0, 2, 2, Activation::none},
      {LayerKind::fc, 1024, 0, 0, Activation::relu},
      {LayerKind::fc, num_classes, 0, 0, Activation::softmax},
  };
  return a;
}

/// VGG-16-shaped table for 224x224 face recognition. Representable through
/// the same builder; not exercised by the desk-scale pipeline.
inline ArchSpec vggface_arch(double width_mult = 1.0, std::size_t num_classes = 170) {
  ArchSpec a;
  a.name = "vggface";
  a.input_size = 224;
  a.num_classes = num_classes;
  a.width_mult = width_mult;
  auto conv = [](std::size_t ch) { return LayerRow{LayerKind::conv, ch, 3, 1, Activation::relu}; };
  const LayerRow pool{LayerKind::maxpool, 0, 2, 2, Activation::none};
  a.rows = {conv(64), conv(64), pool,
            conv(128), conv(128), pool,
            conv(256), conv(256), conv(256), pool,
            conv(512), conv(512), conv(512), pool,
            conv(512), conv(512), conv(512), pool,
            {LayerKind::fc, 4096, 0, 0, Activation::relu},
            {LayerKind::fc, 4096, 0, 0, Activation::relu},
            {LayerKind::fc, num_classes, 0, 0, Activation::softmax}};
  return a;
}

inline ArchSpec arch_by_name(const std::string& name, double width_mult, std::size_t num_classes) {
  if (name == "cifar10") return cifar10_arch(width_mult, num_classes ? num_classes : 10);
  if (name == "gtsrb") return gtsrb_arch(width_mult, num_classes ? num_classes : 43);
  if (name == "vggface") return vggface_arch(width_mult, num_classes ? num_classes : 170);
  throw ConfigError("unknown architecture: " + name);
}

/// Instantiates the layer table as a logits network.
inline nn::Sequential<double> build_arch(const ArchSpec& arch, std::uint64_t seed) {
  arch.validate();
  nn::Sequential<double> net;
  Rng rng(seed);
  std::size_t ch = 3;
  std::size_t side = arch.input_size;
  bool flattened = false;
  std::size_t flat = 0;
  for (std::size_t i = 0; i < arch.rows.size(); ++i) {
    const LayerRow& row = arch.rows[i];
    switch (row.kind) {
      case LayerKind::conv: {
        if (flattened) throw ConfigError("ArchSpec: conv after fc is not supported");
        const std::size_t cout = arch.scaled(row.channels);
        net.emplace<nn::Conv2d<double>>(ch, cout, row.filter, row.stride, row.filter / 2, rng);
        ch = cout;
        side = (side + 2 * (row.filter / 2) - row.filter) / row.stride + 1;
        break;
      }
      case LayerKind::maxpool: {
        net.emplace<nn::MaxPool2d<double>>(row.filter, row.stride);
        side = (side - row.filter) / row.stride + 1;
        break;
      }
      case LayerKind::fc: {
        if (!flattened) {
          net.emplace<nn::Flatten<double>>();
          flat = ch * side * side;
          flattened = true;
        }
        const bool last = i + 1 == arch.rows.size();
        const std::size_t width = last ? arch.num_classes : arch.scaled(row.channels);
        net.emplace<nn::Dense<double>>(flat, width, rng);
        flat = width;
        break;
      }
    }
    if (row.act == Activation::relu) net.emplace<nn::ReLU<double>>();
  }
  return net;
}

inline nlohmann::ordered_json arch_to_json(const ArchSpec& a) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : a.rows) {
    const char* kind = r.kind == LayerKind::conv ? "conv" : r.kind == LayerKind::maxpool ? "maxpool" : "fc";
    const char* act = r.act == Activation::relu ? "relu" : r.act == Activation::softmax ? "softmax" : "none";
    rows.push_back({{"kind", kind}, {"channels", r.channels}, {"filter", r.filter},
                    {"stride", r.stride}, {"activation", act}});
  }
  return {{"name", a.name}, {"num_classes", a.num_classes}, {"input_size", a.input_size},
          {"width_mult", a.width_mult}, {"rows", rows}};
}

inline ArchSpec arch_from_json(const nlohmann::ordered_json& j) {
  ArchSpec a;
  a.name = j.at("name").get<std::string>();
  a.num_classes = j.at("num_classes").get<std::size_t>();
  a.input_size = j.at("input_size").get<std::size_t>();
  a.width_mult = j.at("width_mult").get<double>();
  for (const auto& r : j.at("rows")) {
    LayerRow row;
    const std::string kind = r.at("kind").get<std::string>();
    row.kind = kind == "conv" ? LayerKind::conv : kind == "maxpool" ? LayerKind::maxpool : LayerKind::fc;
    row.channels = r.at("channels").get<std::size_t>();
    row.filter = r.at("filter").get<std::size_t>();
    row.stride = r.at("stride").get<std::size_t>();
    const std::string act = r.at("activation").get<std::string>();
    row.act = act == "relu" ? Activation::relu : act == "softmax" ? Activation::softmax : Activation::none;
    a.rows.push_back(row);
  }
  a.validate();
  return a;
}

}  // namespace tnt::clf
