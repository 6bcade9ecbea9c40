// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sosa/scheduler.hpp"
#include "sosa/tiling.hpp"
#include "sosa/workload.hpp"

using namespace sosa;

namespace {

ModelGraph single_gemm(std::int64_t d1, std::int64_t d2, std::int64_t d3,
                       bool activation = true) {
  LayerSpec l;
  l.id = "g";
  l.kind = LayerKind::Dense;
  l.in_features = d2;
  l.out_features = d3;
  l.seq_len = d1;
  l.activation = activation;
  return build_model_graph("t", {l}, 1);
}

ModelGraph chain_gemm(std::int64_t d1, std::int64_t d2, std::int64_t d3,
                      std::int64_t d4) {
  LayerSpec a;
  a.id = "a";
  a.kind = LayerKind::Dense;
  a.in_features = d2;
  a.out_features = d3;
  a.seq_len = d1;
  LayerSpec b = a;
  b.id = "b";
  b.in_features = d3;
  b.out_features = d4;
  b.predecessors = {"a"};
  return build_model_graph("t", {a, b}, 1);
}

PodConfig pods_of(std::int32_t p) {
  PodConfig pc;
  pc.pods = p;
  return pc;
}

InterconnectConfig net_of(std::int32_t p,
                          Topology t = Topology::Crossbar) {
  InterconnectConfig net;
  net.topology = t;
  net.ports = p;
  net.expansion = 2;
  return net;
}

}  // namespace

TEST_CASE("two-by-two-by-two toy instance on four pods") {
  // d1 = 2r, d2 = 2r, d3 = 2c: 2 x-row blocks, 2 aggregation steps per
  // group, 2 filter blocks -> 8 tile ops in 4 groups.
  auto m = single_gemm(64, 64, 64);
  auto tg = build_tile_graph(m, 32, 32);
  REQUIRE(tg.size() == 8);
  REQUIRE(tg.total_groups() == 4);
  auto sched = schedule(tg, pods_of(4), 4, net_of(4));
  CHECK(validate(sched, tg, sched.net).empty());
  // each group chains its second member onto the first (same pod,
  // consecutive slices), so no post-adds are needed
  CHECK(sched.chained_psums + sched.post_adds == 4);
  int activations = 0;
  for (const auto& sl : sched.slices)
    for (const auto& p : sl.post_ops)
      if (p.kind == PostOp::Kind::Activate) ++activations;
  CHECK(activations == 4);
  // 8 ops on 4 pods with chaining: both members of a group share a pod,
  // so the dense packing is 2 compute slices plus the post tail
  CHECK(sched.makespan_slices() <= 4);
}

TEST_CASE("independent tiles pack densely") {
  // 16 independent single-op groups on 4 pods: exactly 4 slices.
  auto tg = build_tile_graph(single_gemm(16 * 32, 32, 32, false), 32, 32);
  REQUIRE(tg.size() == 16);
  auto sched = schedule(tg, pods_of(4), 4, net_of(4));
  REQUIRE(validate(sched, tg, sched.net).empty());
  CHECK(sched.makespan_slices() == 4);
  for (const auto& sl : sched.slices)
    CHECK(sl.assignments.size() == 4);
}

TEST_CASE("cross-layer dependencies are respected") {
  auto tg = build_tile_graph(chain_gemm(32, 32, 32, 32), 32, 32);
  auto sched = schedule(tg, pods_of(2), 2, net_of(2));
  REQUIRE(validate(sched, tg, sched.net).empty());
  // layer 1's op must start strictly after layer 0's group completes
  REQUIRE(tg.size() == 2);
  CHECK(sched.op_slice[1] > sched.group_done[tg.group_of(0)]);
}

TEST_CASE("schedules are deterministic") {
  auto tg = build_tile_graph(chain_gemm(96, 64, 96, 64), 32, 32);
  auto a = schedule(tg, pods_of(4), 4, net_of(4, Topology::Butterfly));
  auto b = schedule(tg, pods_of(4), 4, net_of(4, Topology::Butterfly));
  REQUIRE(a.slices.size() == b.slices.size());
  CHECK(a.op_slice == b.op_slice);
  CHECK(a.group_done == b.group_done);
  for (std::size_t l = 0; l < a.slices.size(); ++l) {
    const auto& sa = a.slices[l];
    const auto& sb = b.slices[l];
    REQUIRE(sa.assignments.size() == sb.assignments.size());
    for (std::size_t i = 0; i < sa.assignments.size(); ++i) {
      CHECK(sa.assignments[i].op == sb.assignments[i].op);
      CHECK(sa.assignments[i].pod == sb.assignments[i].pod);
      CHECK(sa.assignments[i].x_bank == sb.assignments[i].x_bank);
    }
  }
}

TEST_CASE("validator flags corrupted schedules") {
  auto tg = build_tile_graph(single_gemm(64, 64, 64), 32, 32);
  auto good = schedule(tg, pods_of(4), 4, net_of(4));
  REQUIRE(validate(good, tg, good.net).empty());

  SECTION("duplicated op") {
    auto bad = good;
    for (auto& sl : bad.slices)
      if (!sl.assignments.empty()) {
        sl.assignments.push_back(sl.assignments.front());
        break;
      }
    CHECK_FALSE(validate(bad, tg, bad.net).empty());
  }
  SECTION("two ops on one pod in one slice") {
    auto bad = good;
    for (auto& sl : bad.slices)
      if (sl.assignments.size() >= 2) {
        sl.assignments[1].pod = sl.assignments[0].pod;
        break;
      }
    CHECK_FALSE(validate(bad, tg, bad.net).empty());
  }
  SECTION("dropped activation") {
    auto bad = good;
    for (auto& sl : bad.slices)
      if (!sl.post_ops.empty()) {
        sl.post_ops.pop_back();
        break;
      }
    CHECK_FALSE(validate(bad, tg, bad.net).empty());
  }
  SECTION("missing op") {
    auto bad = good;
    for (auto& sl : bad.slices)
      if (!sl.assignments.empty()) {
        sl.assignments.pop_back();
        break;
      }
    CHECK_FALSE(validate(bad, tg, bad.net).empty());
  }
}

TEST_CASE("butterfly routing certificates are carried and checked") {
  auto tg = build_tile_graph(single_gemm(12 * 32, 64, 64), 32, 32);
  auto good = schedule(tg, pods_of(8), 8, net_of(8, Topology::Butterfly));
  REQUIRE(validate(good, tg, good.net).empty());
  // corrupt one slice's X-network certificate
  auto bad = good;
  bool mutated = false;
  for (auto& sl : bad.slices) {
    if (sl.routing[kNetX].planes.size() >= 2) {
      sl.routing[kNetX].planes.clear();
      sl.routing[kNetX].srcs.clear();
      mutated = true;
      break;
    }
  }
  REQUIRE(mutated);
  CHECK_FALSE(validate(bad, tg, bad.net).empty());
}

TEST_CASE("trivial inputs") {
  TileGraph empty;
  auto sched = schedule(empty, pods_of(2), 2, net_of(2));
  CHECK(sched.slices.empty());
  CHECK(validate(sched, empty, sched.net).empty());

  auto one = build_tile_graph(single_gemm(8, 8, 8), 32, 32);
  REQUIRE(one.size() == 1);
  auto s1 = schedule(one, pods_of(1), 1, net_of(1));
  CHECK(validate(s1, one, s1.net).empty());
  CHECK(s1.makespan_slices() >= 1);
}

TEST_CASE("random graphs schedule validator-clean") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::int64_t> dd(1, 150);
  std::uniform_int_distribution<int> dl(1, 4), dp(1, 3);
  for (int t = 0; t < 60; ++t) {
    std::vector<LayerSpec> layers;
    const int n = dl(rng);
    for (int i = 0; i < n; ++i) {
      LayerSpec l;
      l.id = "l" + std::to_string(i);
      l.kind = LayerKind::Dense;
      l.in_features = dd(rng);
      l.out_features = dd(rng);
      l.seq_len = dd(rng);
      if (i > 0 && dp(rng) > 1)
        l.predecessors = {"l" + std::to_string(i - 1)};
      layers.push_back(l);
    }
    auto m = build_model_graph("r", layers, 1);
    auto tg = build_tile_graph(m, 32, 32);
    const std::int32_t P = 1 << dp(rng);
    auto sched = schedule(tg, pods_of(P), P,
                          net_of(P, t % 2 ? Topology::Butterfly
                                          : Topology::Crossbar));
    INFO("trial " << t);
    REQUIRE(validate(sched, tg, sched.net).empty());
    // every op placed exactly once
    std::vector<int> seen(tg.size(), 0);
    for (const auto& sl : sched.slices)
      for (const auto& a : sl.assignments) ++seen[a.op];
    for (int c : seen) REQUIRE(c == 1);
  }
}
