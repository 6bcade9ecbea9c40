// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "sosa/common.hpp"
#include "sosa/workload.hpp"

namespace sosa {

// One r-sliced unit of work x_ij * w_jk (+ optional input psum).
// Activations and weights are 8-bit, partial sums 16-bit.
struct TileOp {
  std::uint32_t id = 0;
  std::int32_t layer = 0;
  std::int32_t i = 0, j = 0, k = 0;  // tile indices into X (i,j) and W (j,k)
  std::int32_t m = 0;                // x-tile rows (execution length)
  std::int32_t n = 0;                // x-tile cols = w-tile rows
  std::int32_t p = 0;                // w-tile cols

  std::int64_t x_bytes() const { return std::int64_t{1} * m * n; }
  std::int64_t w_bytes() const { return std::int64_t{1} * n * p; }
  std::int64_t psum_bytes() const { return std::int64_t{2} * m * p; }
  std::uint64_t macs() const { return std::uint64_t(m) * n * p; }
};

// Tiling of one layer: X is partitioned into k_part x r tiles, W into
// r x c tiles. Aggregation group (i, k) has arity j_count = ceil(d2/r).
struct LayerTiling {
  std::int64_t d1 = 0, d2 = 0, d3 = 0;
  std::int32_t r = 0, c = 0;
  std::int64_t k_part = 0;
  std::int32_t i_count = 0, j_count = 0, k_count = 0;
  bool activation = true;
  std::vector<std::int32_t> predecessors;
  // True when the predecessor's output grid maps elementwise onto this
  // layer's X (matmul chains: pred.d1 == d1 and pred.d3 == d2). Otherwise
  // the consumer depends on all of the predecessor's output tiles.
  std::vector<bool> fine_grained;
  std::uint32_t op_base = 0;  // index of this layer's first op in TileGraph

  std::int32_t tile_m(std::int32_t i) const {
    return static_cast<std::int32_t>(
        std::min<std::int64_t>(k_part, d1 - std::int64_t{i} * k_part));
  }
  std::int32_t tile_n(std::int32_t j) const {
    return static_cast<std::int32_t>(
        std::min<std::int64_t>(r, d2 - std::int64_t{j} * r));
  }
  std::int32_t tile_p(std::int32_t k) const {
    return static_cast<std::int32_t>(
        std::min<std::int64_t>(c, d3 - std::int64_t{k} * c));
  }
  std::int64_t group_count() const {
    return std::int64_t{i_count} * k_count;
  }
};

// Compact reference to a tile op; full geometry is recovered from the
// layer tiling. Ops of one layer are laid out so that the members of
// aggregation group (i, k) are contiguous with j ascending:
//   op index = op_base + ((i * k_count) + k) * j_count + j.
struct TileOpRef {
  std::int32_t layer;
  std::int32_t i, j, k;
};

struct TileGraph {
  std::vector<LayerTiling> layers;
  std::vector<TileOpRef> ops;  // in deterministic visit order (layer, i, k, j)

  std::size_t size() const { return ops.size(); }

  TileOp op(std::uint32_t id) const {
    const TileOpRef& ref = ops[id];
    const LayerTiling& lt = layers[ref.layer];
    TileOp t;
    t.id = id;
    t.layer = ref.layer;
    t.i = ref.i;
    t.j = ref.j;
    t.k = ref.k;
    t.m = lt.tile_m(ref.i);
    t.n = lt.tile_n(ref.j);
    t.p = lt.tile_p(ref.k);
    return t;
  }

  // Global aggregation-group id of an op.
  std::int64_t group_of(std::uint32_t id) const {
    const TileOpRef& ref = ops[id];
    const LayerTiling& lt = layers[ref.layer];
    return group_base(ref.layer) + std::int64_t{ref.i} * lt.k_count + ref.k;
  }

  std::int64_t group_base(std::int32_t layer) const {
    std::int64_t base = 0;
    for (std::int32_t l = 0; l < layer; ++l) base += layers[l].group_count();
    return base;
  }

  std::int64_t total_groups() const {
    return group_base(static_cast<std::int32_t>(layers.size()));
  }

  std::uint64_t total_macs() const {
    std::uint64_t t = 0;
    for (const auto& lt : layers)
      t += std::uint64_t(lt.d1) * lt.d2 * lt.d3;
    return t;
  }
};

// Partition one GEMM into tile operations. k_part defaults to r (the
// fixed-slice tiling); k_part = d1 disables partitioning of X's first
// dimension.
inline std::vector<TileOp> partition_gemm(const GemmSpec& g, std::int32_t r,
                                          std::int32_t c,
                                          std::int64_t k_part) {
  if (r < 1 || c < 1 || k_part < 1)
    throw ValidationError("partition_gemm: r, c, k_part must be >= 1");
  const std::int64_t d1 = g.d1 * 1, d2 = g.d2, d3 = g.d3;
  const auto ic = static_cast<std::int32_t>(ceil_div(d1, k_part));
  const auto jc = static_cast<std::int32_t>(ceil_div(d2, r));
  const auto kc = static_cast<std::int32_t>(ceil_div(d3, c));
  std::vector<TileOp> out;
  out.reserve(std::size_t(ic) * jc * kc);
  std::uint32_t id = 0;
  for (std::int32_t i = 0; i < ic; ++i)
    for (std::int32_t k = 0; k < kc; ++k)
      for (std::int32_t j = 0; j < jc; ++j) {
        TileOp t;
        t.id = id++;
        t.i = i;
        t.j = j;
        t.k = k;
        t.m = static_cast<std::int32_t>(
            std::min<std::int64_t>(k_part, d1 - std::int64_t{i} * k_part));
        t.n = static_cast<std::int32_t>(
            std::min<std::int64_t>(r, d2 - std::int64_t{j} * r));
        t.p = static_cast<std::int32_t>(
            std::min<std::int64_t>(c, d3 - std::int64_t{k} * c));
        out.push_back(t);
      }
  return out;
}

inline std::vector<TileOp> partition_gemm(const GemmSpec& g, std::int32_t r,
                                          std::int32_t c) {
  return partition_gemm(g, r, c, r);
}

struct WorkingSet {
  std::int64_t x_tile_bytes = 0;     // full x tile
  std::int64_t w_tile_bytes = 0;     // full w tile
  std::int64_t psum_tile_bytes = 0;  // full psum tile
  std::int64_t x_total_bytes = 0;    // whole activation matrix
  std::int64_t w_total_bytes = 0;    // whole weight matrix
  std::int64_t psum_total_bytes = 0; // all final output tiles
};

inline WorkingSet tile_working_set(const GemmSpec& g, std::int32_t r,
                                   std::int32_t c,
                                   std::int64_t k_part) {
  WorkingSet w;
  w.x_tile_bytes = k_part * r;
  w.w_tile_bytes = std::int64_t{r} * c;
  w.psum_tile_bytes = 2 * k_part * c;
  w.x_total_bytes = g.d1 * g.d2;
  w.w_total_bytes = g.d2 * g.d3;
  w.psum_total_bytes = 2 * g.d1 * g.d3;
  return w;
}

inline WorkingSet tile_working_set(const GemmSpec& g, std::int32_t r,
                                   std::int32_t c) {
  return tile_working_set(g, r, c, r);
}

// Tile every layer of a model. k_part <= 0 selects the default (r);
// k_part is clamped per layer to d1 when it exceeds the layer's d1.
inline TileGraph build_tile_graph(const ModelGraph& model, std::int32_t r,
                                  std::int32_t c, std::int64_t k_part = 0) {
  if (r < 1 || c < 1) throw ValidationError("build_tile_graph: bad r/c");
  TileGraph tg;
  tg.layers.reserve(model.layers.size());
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const GemmSpec& g = model.layers[li];
    LayerTiling lt;
    lt.d1 = g.d1;
    lt.d2 = g.d2;
    lt.d3 = g.d3;
    lt.r = r;
    lt.c = c;
    lt.k_part = (k_part <= 0) ? r : std::min<std::int64_t>(k_part, g.d1);
    lt.i_count = static_cast<std::int32_t>(ceil_div(g.d1, lt.k_part));
    lt.j_count = static_cast<std::int32_t>(ceil_div(g.d2, r));
    lt.k_count = static_cast<std::int32_t>(ceil_div(g.d3, c));
    lt.activation = g.activation;
    lt.predecessors = g.predecessors;
    for (auto p : g.predecessors) {
      const GemmSpec& pg = model.layers[p];
      lt.fine_grained.push_back(pg.d1 == g.d1 && pg.d3 == g.d2);
    }
    lt.op_base = static_cast<std::uint32_t>(tg.ops.size());
    for (std::int32_t i = 0; i < lt.i_count; ++i)
      for (std::int32_t k = 0; k < lt.k_count; ++k)
        for (std::int32_t j = 0; j < lt.j_count; ++j)
          tg.ops.push_back(TileOpRef{static_cast<std::int32_t>(li), i, j, k});
    tg.layers.push_back(std::move(lt));
  }
  return tg;
}

// Union of several tile graphs (multi-tenant scheduling): layers and ops
// are concatenated; graphs stay mutually independent.
inline TileGraph merge_tile_graphs(const std::vector<TileGraph>& graphs) {
  TileGraph out;
  std::int32_t layer_off = 0;
  for (const auto& g : graphs) {
    const auto op_off = static_cast<std::uint32_t>(out.ops.size());
    for (const auto& lt : g.layers) {
      LayerTiling copy = lt;
      for (auto& p : copy.predecessors) p += layer_off;
      copy.op_base += op_off;
      out.layers.push_back(std::move(copy));
    }
    for (const auto& ref : g.ops) {
      TileOpRef r2 = ref;
      r2.layer += layer_off;
      out.ops.push_back(r2);
    }
    layer_off += static_cast<std::int32_t>(g.layers.size());
  }
  return out;
}

}  // namespace sosa
