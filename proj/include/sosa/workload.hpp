// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "sosa/common.hpp"

namespace sosa {

enum class LayerKind { Conv2d, Dense, Matmul };

enum class PaddingMode { Same, Valid };

// One layer of a DNN model as read from a model-description file.
// Attention blocks are expected to be pre-lowered to matmul layers with
// explicit dimensions; element-wise ops are folded into the `activation`
// flag and the dependency edges.
struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::Dense;

  // conv2d fields
  std::int64_t in_h = 0, in_w = 0, in_c = 0;
  std::int64_t kernel_h = 0, kernel_w = 0;
  std::int64_t out_c = 0;
  std::int64_t stride = 1;
  PaddingMode padding = PaddingMode::Same;

  // dense / matmul fields
  std::int64_t in_features = 0;
  std::int64_t out_features = 0;
  std::int64_t seq_len = 1;  // sequence length or spatial positions

  bool activation = true;  // post-processor applies an element-wise op
  std::vector<std::string> predecessors;
};

// A layer lowered to matrix-multiply dimensions: X is d1 x d2, W is d2 x d3.
struct GemmSpec {
  std::string id;
  std::int64_t d1 = 1;  // filter reuse (rows of X)
  std::int64_t d2 = 1;  // features (cols of X = rows of W)
  std::int64_t d3 = 1;  // filters (cols of W)
  std::int64_t batch = 1;
  bool activation = true;
  std::vector<std::int32_t> predecessors;  // indices into ModelGraph::layers

  std::uint64_t macs() const {
    return static_cast<std::uint64_t>(d1) * d2 * d3;
  }
};

struct ModelGraph {
  std::string name;
  std::int64_t batch = 1;
  std::vector<GemmSpec> layers;       // in file order
  std::vector<std::int32_t> topo;     // cached topological order

  std::uint64_t total_macs() const {
    std::uint64_t t = 0;
    for (const auto& g : layers) t += g.macs();
    return t;
  }
};

inline std::pair<std::int64_t, std::int64_t> conv_output_hw(const LayerSpec& l) {
  std::int64_t oh, ow;
  if (l.padding == PaddingMode::Same) {
    oh = ceil_div(l.in_h, l.stride);
    ow = ceil_div(l.in_w, l.stride);
  } else {
    oh = (l.in_h - l.kernel_h) / l.stride + 1;
    ow = (l.in_w - l.kernel_w) / l.stride + 1;
  }
  return {oh, ow};
}

// Lower a conv2d layer to GEMM dimensions (im2col form):
//   d1 = batch * outH * outW, d2 = kH * kW * inC, d3 = outC.
inline GemmSpec conv_to_gemm(const LayerSpec& layer, std::int64_t batch) {
  if (layer.kind != LayerKind::Conv2d)
    throw ValidationError("conv_to_gemm: layer '" + layer.id + "' is not conv2d");
  auto [oh, ow] = conv_output_hw(layer);
  if (oh <= 0 || ow <= 0)
    throw ValidationError("conv_to_gemm: degenerate output size in layer '" +
                          layer.id + "'");
  GemmSpec g;
  g.id = layer.id;
  g.d1 = batch * oh * ow;
  g.d2 = layer.kernel_h * layer.kernel_w * layer.in_c;
  g.d3 = layer.out_c;
  g.batch = batch;
  g.activation = layer.activation;
  return g;
}

inline GemmSpec lower_layer(const LayerSpec& layer, std::int64_t batch) {
  if (layer.kind == LayerKind::Conv2d) return conv_to_gemm(layer, batch);
  GemmSpec g;
  g.id = layer.id;
  g.d1 = batch * layer.seq_len;
  g.d2 = layer.in_features;
  g.d3 = layer.out_features;
  g.batch = batch;
  g.activation = layer.activation;
  return g;
}

namespace detail {

inline void validate_positive(const LayerSpec& l) {
  auto bad = [&](const char* what) {
    throw ValidationError("layer '" + l.id + "': nonpositive " + what);
  };
  if (l.stride < 1) bad("stride");
  if (l.kind == LayerKind::Conv2d) {
    if (l.in_h < 1 || l.in_w < 1 || l.in_c < 1) bad("input dims");
    if (l.kernel_h < 1 || l.kernel_w < 1) bad("kernel dims");
    if (l.out_c < 1) bad("output channels");
  } else {
    if (l.in_features < 1) bad("input features");
    if (l.out_features < 1) bad("output features");
    if (l.seq_len < 1) bad("sequence length");
  }
}

inline LayerKind parse_kind(const std::string& s) {
  if (s == "conv2d") return LayerKind::Conv2d;
  if (s == "dense") return LayerKind::Dense;
  if (s == "matmul") return LayerKind::Matmul;
  throw ParseError("unknown layer kind '" + s + "'");
}

}  // namespace detail

// Build a ModelGraph from parsed LayerSpecs. Predecessors must refer to
// earlier layers (acyclic by construction); the topological order is the
// file order, re-verified here.
inline ModelGraph build_model_graph(const std::string& name,
                                    const std::vector<LayerSpec>& layers,
                                    std::int64_t batch) {
  if (batch < 1) throw ValidationError("batch must be >= 1");
  ModelGraph m;
  m.name = name;
  m.batch = batch;
  std::unordered_map<std::string, std::int32_t> index;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    detail::validate_positive(l);
    if (index.count(l.id))
      throw ValidationError("duplicate layer id '" + l.id + "'");
    GemmSpec g = lower_layer(l, batch);
    for (const auto& p : l.predecessors) {
      auto it = index.find(p);
      if (it == index.end())
        throw ValidationError("layer '" + l.id + "' references '" + p +
                              "' which is not an earlier layer");
      g.predecessors.push_back(it->second);
    }
    index[l.id] = static_cast<std::int32_t>(i);
    m.layers.push_back(std::move(g));
  }
  m.topo.resize(m.layers.size());
  for (std::size_t i = 0; i < m.topo.size(); ++i)
    m.topo[i] = static_cast<std::int32_t>(i);
  return m;
}

inline ModelGraph model_from_json(const nlohmann::json& j) {
  std::vector<LayerSpec> layers;
  try {
    std::string name = j.at("name").get<std::string>();
    std::int64_t batch = j.value("batch", 1);
    for (const auto& jl : j.at("layers")) {
      LayerSpec l;
      l.id = jl.at("id").get<std::string>();
      l.kind = detail::parse_kind(jl.at("kind").get<std::string>());
      if (l.kind == LayerKind::Conv2d) {
        l.in_h = jl.at("in_h").get<std::int64_t>();
        l.in_w = jl.at("in_w").get<std::int64_t>();
        l.in_c = jl.at("in_c").get<std::int64_t>();
        l.kernel_h = jl.at("kernel_h").get<std::int64_t>();
        l.kernel_w = jl.at("kernel_w").get<std::int64_t>();
        l.out_c = jl.at("out_c").get<std::int64_t>();
        l.stride = jl.value("stride", std::int64_t{1});
        std::string pad = jl.value("padding", std::string("same"));
        if (pad == "same")
          l.padding = PaddingMode::Same;
        else if (pad == "valid")
          l.padding = PaddingMode::Valid;
        else
          throw ParseError("unknown padding mode '" + pad + "'");
      } else {
        l.in_features = jl.at("in_features").get<std::int64_t>();
        l.out_features = jl.at("out_features").get<std::int64_t>();
        l.seq_len = jl.value("seq_len", std::int64_t{1});
      }
      l.activation = jl.value("activation", true);
      if (jl.contains("predecessors"))
        l.predecessors = jl.at("predecessors").get<std::vector<std::string>>();
      layers.push_back(std::move(l));
    }
    return build_model_graph(name, layers, batch);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
}

inline ModelGraph load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model file '" + path + "': " + e.what());
  }
  return model_from_json(j);
}

// MAC-weighted distribution statistics of one GEMM dimension.
struct DimStats {
  double p10 = 0;
  double mean = 0;  // MAC-weighted mean
  double p90 = 0;
};

struct DimensionStats {
  DimStats d1, d2, d3;
};

namespace detail {

inline DimStats weighted_stats(std::vector<std::pair<double, double>> vw) {
  // vw: (value, weight) pairs
  std::sort(vw.begin(), vw.end());
  double total = 0;
  for (auto& [v, w] : vw) total += w;
  DimStats s;
  double acc = 0, mean = 0;
  bool got10 = false, got90 = false;
  for (auto& [v, w] : vw) {
    acc += w;
    mean += v * w;
    if (!got10 && acc >= 0.10 * total) {
      s.p10 = v;
      got10 = true;
    }
    if (!got90 && acc >= 0.90 * total) {
      s.p90 = v;
      got90 = true;
    }
  }
  s.mean = mean / total;
  return s;
}

}  // namespace detail

// Weighted percentiles (10th, mean, 90th) of d1/d2/d3 across a set of
// models, weighted by per-layer MAC counts.
inline DimensionStats dimension_stats(const std::vector<ModelGraph>& models) {
  if (models.empty()) throw ValidationError("dimension_stats: empty model list");
  std::vector<std::pair<double, double>> v1, v2, v3;
  for (const auto& m : models) {
    for (const auto& g : m.layers) {
      double w = static_cast<double>(g.macs());
      v1.emplace_back(static_cast<double>(g.d1), w);
      v2.emplace_back(static_cast<double>(g.d2), w);
      v3.emplace_back(static_cast<double>(g.d3), w);
    }
  }
  DimensionStats s;
  s.d1 = detail::weighted_stats(std::move(v1));
  s.d2 = detail::weighted_stats(std::move(v2));
  s.d3 = detail::weighted_stats(std::move(v3));
  return s;
}

}  // namespace sosa
