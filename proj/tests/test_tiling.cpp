// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sosa/tiling.hpp"
#include "sosa/workload.hpp"

using namespace sosa;

namespace {

ModelGraph single_gemm(std::int64_t d1, std::int64_t d2, std::int64_t d3) {
  LayerSpec l;
  l.id = "g";
  l.kind = LayerKind::Dense;
  l.in_features = d2;
  l.out_features = d3;
  l.seq_len = d1;
  return build_model_graph("t", {l}, 1);
}

}  // namespace

TEST_CASE("tile counts and op ordering") {
  // d1 = 70, d2 = 70, d3 = 40 with r = 32, c = 16: i = 3, j = 3, k = 3.
  auto tg = build_tile_graph(single_gemm(70, 70, 40), 32, 16);
  const auto& lt = tg.layers[0];
  CHECK(lt.i_count == 3);
  CHECK(lt.j_count == 3);
  CHECK(lt.k_count == 3);  // ceil(40 / 16)
  CHECK(tg.size() == 27);
  CHECK(tg.total_groups() == 9);
  // groups are contiguous runs of ascending j with fixed (i, k)
  for (std::uint32_t id = 0; id < tg.size(); ++id) {
    const TileOp op = tg.op(id);
    CHECK(op.j == std::int64_t(id) % lt.j_count);
    CHECK(tg.group_of(id) == std::int64_t(id) / lt.j_count);
  }
}

TEST_CASE("edge tiles carry the remainders") {
  auto tg = build_tile_graph(single_gemm(70, 70, 40), 32, 32);
  const auto& lt = tg.layers[0];
  CHECK(lt.tile_m(0) == 32);
  CHECK(lt.tile_m(2) == 6);
  CHECK(lt.tile_n(2) == 6);
  CHECK(lt.tile_p(1) == 8);
}

TEST_CASE("work conservation over random shapes") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::int64_t> dd(1, 300);
  for (int t = 0; t < 200; ++t) {
    const std::int64_t d1 = dd(rng), d2 = dd(rng), d3 = dd(rng);
    auto tg = build_tile_graph(single_gemm(d1, d2, d3), 32, 32);
    std::int64_t covered = 0;
    for (std::uint32_t id = 0; id < tg.size(); ++id) {
      const TileOp op = tg.op(id);
      covered += std::int64_t{op.m} * op.n * op.p;
    }
    REQUIRE(covered == d1 * d2 * d3);
    REQUIRE(tg.total_macs() == std::uint64_t(d1 * d2 * d3));
  }
}

TEST_CASE("activation partition size controls i granularity") {
  // d1 = 128 with k_part = 16 on 32-row arrays: 8 row-partitions.
  auto t16 = build_tile_graph(single_gemm(128, 32, 32), 32, 32, 16);
  CHECK(t16.layers[0].i_count == 8);
  auto t_default = build_tile_graph(single_gemm(128, 32, 32), 32, 32);
  CHECK(t_default.layers[0].i_count == 4);  // k_part defaults to r
  // no-partition degenerates to one giant row block
  auto t_all = build_tile_graph(single_gemm(128, 32, 32), 32, 32, 1 << 30);
  CHECK(t_all.layers[0].i_count == 1);
  // total work is identical regardless of partitioning
  CHECK(t16.total_macs() == t_default.total_macs());
  CHECK(t_all.total_macs() == t_default.total_macs());
}

TEST_CASE("group arity is ceil(d2 / r)") {
  for (std::int64_t d2 : {1, 31, 32, 33, 64, 100}) {
    auto tg = build_tile_graph(single_gemm(32, d2, 32), 32, 32);
    CHECK(tg.layers[0].j_count == (d2 + 31) / 32);
    CHECK(tg.layers[0].group_count() == 1);
  }
}

TEST_CASE("merged graphs keep per-model layers and ops") {
  auto a = build_tile_graph(single_gemm(64, 64, 64), 32, 32);
  auto b = build_tile_graph(single_gemm(96, 32, 32), 32, 32);
  std::vector<TileGraph> gs = {a, b};
  auto m = merge_tile_graphs(gs);
  CHECK(m.size() == a.size() + b.size());
  CHECK(m.layers.size() == a.layers.size() + b.layers.size());
  CHECK(m.total_macs() == a.total_macs() + b.total_macs());
  CHECK(m.total_groups() == a.total_groups() + b.total_groups());
  // ops of the second model reference shifted layer indices
  const TileOp last = m.op(static_cast<std::uint32_t>(m.size() - 1));
  CHECK(last.layer == std::int32_t(a.layers.size()));
}

TEST_CASE("per-slice working set fits the designed bank budget") {
  // One full tile op touches an r x k_part activation tile, an r x c
  // weight tile, and a c-wide psum stripe per row: all byte sizes that
  // motivated the 256 KB default bank.
  auto tg = build_tile_graph(single_gemm(32, 32, 32), 32, 32);
  const auto& lt = tg.layers[0];
  const std::int64_t x_bytes = lt.tile_m(0) * lt.tile_n(0);
  const std::int64_t w_bytes = lt.tile_n(0) * lt.tile_p(0);
  const std::int64_t y_bytes = 2 * lt.tile_m(0) * lt.tile_p(0);
  CHECK(x_bytes + w_bytes + y_bytes <= 256 * 1024);
}
