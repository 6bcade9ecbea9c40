// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "sosa/common.hpp"
#include "sosa/interconnect.hpp"
#include "sosa/tiling.hpp"

namespace sosa {

struct PodConfig {
  std::int32_t pods = 256;
  std::int32_t rows = 32;
  std::int32_t cols = 32;
  std::int32_t multicast_u = 16;  // activation multicast width (U)
  std::int32_t fanin_v = 16;      // partial-sum fan-in offset (V)
  double clock_hz = 1e9;

  void validate() const {
    if (pods < 1 || rows < 1 || cols < 1)
      throw ValidationError("pod config: nonpositive dimension");
    if (multicast_u < 1 || multicast_u > cols)
      throw ValidationError("pod config: U must be in [1, cols]");
    if (fanin_v < 1 || fanin_v > rows)
      throw ValidationError("pod config: V must be in [1, rows]");
  }
};

inline constexpr std::uint32_t kNoOp = std::numeric_limits<std::uint32_t>::max();

// One tile op placed on one pod in one time slice, together with the
// banks it touches and, for butterfly networks, the routing plane of the
// demand that serves it on each network.
struct Assignment {
  std::uint32_t op = kNoOp;
  std::int32_t pod = -1;
  std::int32_t x_bank = -1;
  std::int32_t w_bank = -1;       // -1 when the weight tile is reused
  std::int32_t psum_in_bank = -1; // -1 when no input psum
  std::uint32_t psum_in_op = kNoOp;
  std::int32_t psum_out_bank = -1;
  bool w_reload = true;
};

// Post-processor work item. Adds occupy a post-processor pair
// (2q, 2q+1); activation applies occupy a single post-processor.
struct PostOp {
  enum class Kind : std::uint8_t { Add, Activate };
  Kind kind = Kind::Add;
  std::int32_t pp = 0;  // pair base for Add, single index for Activate
  std::int32_t layer = 0;
  std::int64_t group = 0;
  std::int32_t m = 0, p = 0;
  std::int32_t bank_a = -1, bank_b = -1, bank_out = -1;
};

// Routing certificate of one network in one slice: the plane each source
// port's demand was assigned to (meaningful for butterfly; planes are 0
// elsewhere). Kept per slice because re-routing may move earlier demands.
struct NetCert {
  std::vector<std::int32_t> srcs;
  std::vector<std::int32_t> planes;

  std::int32_t plane_of(std::int32_t src) const {
    for (std::size_t i = 0; i < srcs.size(); ++i)
      if (srcs[i] == src) return planes[i];
    return -1;
  }
};

enum NetId : std::size_t { kNetX = 0, kNetW = 1, kNetPIn = 2, kNetPOut = 3 };

struct Slice {
  std::vector<Assignment> assignments;
  std::vector<PostOp> post_ops;
  NetCert routing[4];  // indexed by NetId
};

struct Schedule {
  PodConfig pods;
  InterconnectConfig net;
  std::int32_t banks = 0;
  bool weight_reuse = true;
  std::vector<Slice> slices;
  std::vector<std::int32_t> op_slice;    // tile op -> slice
  std::vector<std::int32_t> group_done;  // global group -> ready slice
  std::int64_t chained_psums = 0;
  std::int64_t post_adds = 0;

  std::int64_t makespan_slices() const {
    return static_cast<std::int64_t>(slices.size());
  }
};

namespace detail {

inline std::int64_t x_tile_key(std::int32_t layer, std::int32_t i,
                               std::int32_t j) {
  return (std::int64_t{layer} << 44) | (std::int64_t{i} << 20) | j;
}
inline std::int64_t w_tile_key(std::int32_t layer, std::int32_t j,
                               std::int32_t k) {
  return (std::int64_t{layer} << 44) | (std::int64_t{j} << 20) | k;
}

}  // namespace detail

inline constexpr std::int32_t kComboBudget = 4096;

// Offline slice scheduler. Visits tile ops in deterministic order
// (topological by layer, then i, k, with the reduction index j innermost)
// and places each at the earliest slice with a free pod, conflict-free
// banks, and a feasible routing on all four networks. Aggregation groups
// are reduced by psum chaining when a member lands after its predecessor
// anyway, and by pairwise post-processor adds otherwise.
class Scheduler {
 public:
  Scheduler(const TileGraph& tg, const PodConfig& pods, std::int32_t banks,
            const InterconnectConfig& net, bool weight_reuse = true)
      : tg_(tg), pods_(pods), banks_(banks), net_(net) {
    pods_.validate();
    net_.validate();
    if (banks_ != pods_.pods)
      throw ValidationError("scheduler: bank count must equal pod count");
    if (net_.ports != pods_.pods)
      throw ValidationError("scheduler: network ports must equal pod count");
    sched_.pods = pods_;
    sched_.net = net_;
    sched_.banks = banks_;
    sched_.weight_reuse = weight_reuse;
    gbase_.resize(tg_.layers.size() + 1);
    gbase_[0] = 0;
    for (std::size_t li = 0; li < tg_.layers.size(); ++li)
      gbase_[li + 1] = gbase_[li] + tg_.layers[li].group_count();
  }

  // scheduling diagnostics (inspect after run())
  std::int64_t diag_home_skip = 0;     // slice skipped: home sourcing other tile
  std::int64_t diag_pods_exhausted = 0;  // slice skipped: no pod placed the op

  Schedule run() {
    sched_.op_slice.assign(tg_.size(), -1);
    sched_.group_done.assign(static_cast<std::size_t>(tg_.total_groups()), -1);
    layer_done_.assign(tg_.layers.size(), -1);

    std::uint32_t op = 0;
    for (std::size_t li = 0; li < tg_.layers.size(); ++li) {
      const LayerTiling& lt = tg_.layers[li];
      const std::int64_t gbase = gbase_[li];
      for (std::int32_t i = 0; i < lt.i_count; ++i) {
        for (std::int32_t k = 0; k < lt.k_count; ++k) {
          const std::int64_t group = gbase + std::int64_t{i} * lt.k_count + k;
          schedule_group(static_cast<std::int32_t>(li), lt, i, k, group, op);
          op += lt.j_count;
        }
      }
      // layer complete: cache the latest group-done slice
      std::int32_t done = -1;
      for (std::int64_t g = gbase; g < gbase + lt.group_count(); ++g)
        done = std::max(done, sched_.group_done[g]);
      layer_done_[li] = done;
    }
    trim();
    finalize_slices();
    return std::move(sched_);
  }

 private:
  struct SliceState {
    std::vector<std::uint8_t> pod_busy;
    std::int32_t free_pods = 0;
    std::vector<std::uint8_t> post_busy;
    std::int32_t free_post = 0;
    std::vector<SliceRouter> nets;  // X, W, P-in, P-out
    std::unordered_map<std::int32_t, std::int64_t> x_tile_at_bank;
    std::unordered_map<std::int32_t, std::int64_t> w_tile_at_bank;
    // producer op whose psum this bank is sourcing on P-in this slice
    std::unordered_map<std::int32_t, std::uint32_t> pin_op_at_bank;
    std::vector<std::int64_t> pod_wtile;  // w tile resident per pod, -1 none
    std::unordered_map<std::int64_t, std::int32_t> wtile_pod;
  };

  struct Root {
    std::int32_t ready = 0;  // slice whose end makes the value available
    std::int32_t bank = -1;
    std::int32_t m = 0, p = 0;
  };

  SliceState& state(std::int64_t l) {
    while (static_cast<std::int64_t>(states_.size()) <= l) {
      SliceState s;
      s.pod_busy.assign(pods_.pods, 0);
      s.free_pods = pods_.pods;
      s.post_busy.assign(pods_.pods, 0);
      s.free_post = pods_.pods;
      for (int n = 0; n < 4; ++n) s.nets.emplace_back(net_);
      s.pod_wtile.assign(pods_.pods, -1);
      states_.push_back(std::move(s));
      sched_.slices.emplace_back();
    }
    return states_[l];
  }

  // Earliest slice permitted by layer-to-layer dependences.
  std::int32_t dep_earliest(std::int32_t layer, std::int32_t i,
                            std::int32_t j) const {
    const LayerTiling& lt = tg_.layers[layer];
    std::int32_t earliest = 0;
    for (std::size_t pi = 0; pi < lt.predecessors.size(); ++pi) {
      const std::int32_t pl = lt.predecessors[pi];
      if (!lt.fine_grained[pi]) {
        earliest = std::max(earliest, layer_done_[pl] + 1);
        continue;
      }
      const LayerTiling& plt = tg_.layers[pl];
      const std::int64_t gbase = gbase_[pl];
      // x rows [i*k_part, i*k_part+m) map to producer i' tiles,
      // x cols [j*r, j*r+n) map to producer k' tiles
      const std::int64_t row_lo = std::int64_t{i} * lt.k_part;
      const std::int64_t row_hi = row_lo + lt.tile_m(i) - 1;
      const std::int64_t col_lo = std::int64_t{j} * lt.r;
      const std::int64_t col_hi = col_lo + lt.tile_n(j) - 1;
      const auto i_lo = static_cast<std::int32_t>(row_lo / plt.k_part);
      const auto i_hi = static_cast<std::int32_t>(row_hi / plt.k_part);
      const auto k_lo = static_cast<std::int32_t>(col_lo / plt.c);
      const auto k_hi = static_cast<std::int32_t>(col_hi / plt.c);
      for (std::int32_t pi2 = i_lo; pi2 <= i_hi; ++pi2)
        for (std::int32_t pk = k_lo; pk <= k_hi; ++pk) {
          const std::int64_t g = gbase + std::int64_t{pi2} * plt.k_count + pk;
          earliest = std::max(earliest, sched_.group_done[g] + 1);
        }
    }
    return earliest;
  }

  void schedule_group(std::int32_t layer, const LayerTiling& lt,
                      std::int32_t i, std::int32_t k, std::int64_t group,
                      std::uint32_t op_base) {
    roots_.clear();
    std::int32_t prev_slice = -1;
    std::int32_t prev_bank = -1;
    std::uint32_t prev_op = kNoOp;
    bool prev_is_root = false;

    for (std::int32_t j = 0; j < lt.j_count; ++j) {
      const std::uint32_t op = op_base + j;
      const std::int32_t l0 = dep_earliest(layer, i, j);
      Placed pl = place_op(op, layer, i, j, k, l0, prev_slice, prev_bank,
                           prev_op);
      sched_.op_slice[op] = pl.slice;
      if (pl.chained) {
        ++sched_.chained_psums;
        // predecessor's output is consumed by this op
        if (prev_is_root) roots_.pop_back();
      }
      roots_.push_back(Root{pl.slice, pl.psum_bank, lt.tile_m(i), lt.tile_p(k)});
      prev_is_root = true;
      prev_slice = pl.slice;
      prev_bank = pl.psum_bank;
      prev_op = op;
    }

    reduce_group(layer, lt, group);
  }

  struct Placed {
    std::int32_t slice = -1;
    std::int32_t psum_bank = -1;
    bool chained = false;
  };

  Placed place_op(std::uint32_t op, std::int32_t layer, std::int32_t i,
                  std::int32_t j, std::int32_t k, std::int32_t l0,
                  std::int32_t prev_slice, std::int32_t prev_bank,
                  std::uint32_t prev_op) {
    const std::int64_t xt = detail::x_tile_key(layer, i, j);
    const std::int64_t wt = detail::w_tile_key(layer, j, k);

    // start after the previous group member so its output can be chained
    // into this op's accumulator input
    const std::int32_t start =
        prev_op != kNoOp ? std::max(l0, prev_slice + 1) : l0;
    for (std::int64_t l = start;; ++l) {
      SliceState& ss = state(l);
      if (ss.free_pods == 0) continue;
      std::int32_t combos = 0;

      bool chain = prev_op != kNoOp && prev_slice < l;
      if (chain) {
        // The producer's bank streams a different psum all slice: fall
        // back to a post-processor add rather than deferring the op.
        // Route failures, by contrast, defer — only topology-independent
        // bank conflicts may drop the chain.
        auto at = ss.pin_op_at_bank.find(prev_bank);
        if (at != ss.pin_op_at_bank.end() && at->second != prev_op)
          chain = false;
      }

      // candidate pods: weight-reuse pod first, then ascending free pods
      std::int32_t reuse_pod = -1;
      if (sched_.weight_reuse && l > 0) {
        const SliceState& prev = states_[l - 1];
        auto it = prev.wtile_pod.find(wt);
        if (it != prev.wtile_pod.end() && !ss.pod_busy[it->second])
          reuse_pod = it->second;
      }

      // a stationary weight home sourcing a different tile blocks every pod
      if (reuse_pod < 0) {
        if (auto it = w_home_.find(wt); it != w_home_.end()) {
          auto at = ss.w_tile_at_bank.find(it->second);
          if (at != ss.w_tile_at_bank.end() && at->second != wt) {
            ++diag_home_skip;
            continue;
          }
        }
      }

      // For chained ops, scan pods from the producer's psum bank index:
      // bank b -> pod b is the straight P-in path on every topology.
      const std::int32_t pod0 = chain ? prev_bank : 0;
      for (std::int32_t pi = -1; pi < pods_.pods; ++pi) {
        std::int32_t pod;
        if (pi < 0) {
          if (reuse_pod < 0) continue;
          pod = reuse_pod;
        } else {
          pod = (pod0 + pi) % pods_.pods;
          if (pod == reuse_pod || ss.pod_busy[pod]) continue;
        }
        if (++combos > kComboBudget) break;
        Placed res;
        if (try_place(op, ss, static_cast<std::int32_t>(l), pod, xt, wt,
                      chain, prev_bank, prev_op, res))
          return res;
      }
      ++diag_pods_exhausted;
    }
  }

  bool try_place(std::uint32_t op, SliceState& ss,
                 std::int32_t l, std::int32_t pod, std::int64_t xt,
                 std::int64_t wt, bool chain, std::int32_t prev_bank,
                 std::uint32_t prev_op, Placed& out) {
    SliceRouter& xnet = ss.nets[0];
    SliceRouter& wnet = ss.nets[1];
    SliceRouter& pin = ss.nets[2];
    SliceRouter& pout = ss.nets[3];

    const bool reuse = sched_.weight_reuse && l > 0 &&
                       states_[l - 1].pod_wtile[pod] == wt;

    xnet.begin_txn();
    wnet.begin_txn();
    pin.begin_txn();
    pout.begin_txn();
    bool ok = true;
    std::int32_t x_bank = -1, w_bank = -1, out_bank = -1;

    // X network: bank -> pod
    {
      auto it = x_home_.find(xt);
      if (it != x_home_.end()) {
        x_bank = it->second;
        auto at = ss.x_tile_at_bank.find(x_bank);
        if (at != ss.x_tile_at_bank.end() && at->second != xt) {
          // Home occupied by another tile this slice: copy the
          // activation into a fresh bank. A failed route, by contrast,
          // defers the op — re-homing must not paper over congestion.
          const auto h = static_cast<std::int32_t>(
              ((static_cast<std::uint64_t>(xt) * 0x9E3779B97F4A7C15ull) >>
               32) %
              static_cast<std::uint64_t>(banks_));
          x_bank = pick_bank(ss.x_tile_at_bank, xnet, pod, h);
          ok = x_bank >= 0;
        } else {
          ok = xnet.try_add(x_bank, pod);
        }
      } else {
        // First use: fetch into any free bank the network can reach from.
        const auto h = static_cast<std::int32_t>(
            ((static_cast<std::uint64_t>(xt) * 0x9E3779B97F4A7C15ull) >> 32) %
            static_cast<std::uint64_t>(banks_));
        x_bank = pick_bank(ss.x_tile_at_bank, xnet, pod, h);
        ok = x_bank >= 0;  // pick_bank already reserved the route
      }
    }

    // W network: bank -> pod, skipped on weight reuse
    if (ok && !reuse) {
      // Weights are stationary: a weight tile keeps its first home for
      // the whole run, so a blocked home defers the op instead of
      // triggering a DRAM refetch into another bank.
      auto it = w_home_.find(wt);
      if (it != w_home_.end()) {
        w_bank = it->second;
        auto at = ss.w_tile_at_bank.find(w_bank);
        if (at != ss.w_tile_at_bank.end() && at->second != wt)
          ok = false;
        else
          ok = wnet.try_add(w_bank, pod);
      } else {
        w_bank = pick_bank(ss.w_tile_at_bank, wnet, pod, pod);
        ok = w_bank >= 0;
      }
    }

    // P-in network: previous member's psum bank -> pod
    if (ok && chain) {
      auto at = ss.pin_op_at_bank.find(prev_bank);
      if (at != ss.pin_op_at_bank.end() && at->second != prev_op)
        ok = false;  // bank already streaming a different psum this slice
      else
        ok = pin.try_add(prev_bank, pod);
    }

    // P-out network: pod -> bank (co-indexed bank first, then scan)
    if (ok) {
      out_bank = -1;
      for (std::int32_t t = 0; t < pods_.pods; ++t) {
        const std::int32_t b = (pod + t) % pods_.pods;
        if (!pout.dst_free(b)) continue;
        if (pout.try_add(pod, b)) {
          out_bank = b;
          break;
        }
      }
      ok = out_bank >= 0;
    }

    if (!ok) {
      xnet.rollback_txn();
      wnet.rollback_txn();
      pin.rollback_txn();
      pout.rollback_txn();
      return false;
    }
    xnet.commit_txn();
    wnet.commit_txn();
    pin.commit_txn();
    pout.commit_txn();

    x_home_[xt] = x_bank;
    if (!reuse) w_home_[wt] = w_bank;
    ss.x_tile_at_bank[x_bank] = xt;
    if (!reuse) ss.w_tile_at_bank[w_bank] = wt;
    if (chain) ss.pin_op_at_bank[prev_bank] = prev_op;
    ss.pod_busy[pod] = 1;
    --ss.free_pods;
    ss.pod_wtile[pod] = wt;
    ss.wtile_pod[wt] = pod;

    Assignment a;
    a.op = op;
    a.pod = pod;
    a.x_bank = x_bank;
    a.w_bank = reuse ? -1 : w_bank;
    a.w_reload = !reuse;
    a.psum_in_bank = chain ? prev_bank : -1;
    a.psum_in_op = chain ? prev_op : kNoOp;
    a.psum_out_bank = out_bank;
    sched_.slices[l].assignments.push_back(a);

    out.slice = l;
    out.psum_bank = out_bank;
    out.chained = chain;
    return true;
  }

  // Home bank for a tile seen for the first time: scan from a
  // tile-dependent start so homes spread across banks, and return the
  // first free bank whose route to `pod` the network accepts. Trying
  // every candidate bank matters for the butterfly: a new tile is free
  // to live wherever a conflict-free path exists.
  // `start`: preferred bank index for the new home. Weight tiles pass the
  // consuming pod (weight reuse pins the pod, so later reloads become the
  // straight bank i -> pod i path); activation tiles pass a tile hash so
  // homes spread and same-slice bank collisions stay rare.
  std::int32_t pick_bank(
      const std::unordered_map<std::int32_t, std::int64_t>& at_bank,
      SliceRouter& net, std::int32_t pod, std::int32_t start) const {
    for (std::int32_t t = 0; t < banks_; ++t) {
      const std::int32_t b = (start + t) % banks_;
      if (at_bank.count(b)) continue;  // sourcing another tile this slice
      if (net.try_add(b, pod)) return b;
    }
    return -1;
  }

  // Binary-tree reduction of the group's unconsumed outputs on
  // post-processor pairs, then the activation apply.
  void reduce_group(std::int32_t layer, const LayerTiling& lt,
                    std::int64_t group) {
    sort_roots();
    while (roots_.size() > 1) {
      Root a = roots_[0];
      Root b = roots_[1];
      roots_.erase(roots_.begin(), roots_.begin() + 2);
      const std::int32_t t0 = std::max(a.ready, b.ready) + 1;
      auto [s, pp] = find_post_pair(t0);
      PostOp po;
      po.kind = PostOp::Kind::Add;
      po.pp = pp;
      po.layer = layer;
      po.group = group;
      po.m = a.m;
      po.p = a.p;
      po.bank_a = a.bank;
      po.bank_b = b.bank;
      po.bank_out = a.bank;
      sched_.slices[s].post_ops.push_back(po);
      ++sched_.post_adds;
      insert_root(Root{s, a.bank, a.m, a.p});
    }
    std::int32_t done = roots_.empty() ? 0 : roots_[0].ready;
    if (lt.activation && !roots_.empty()) {
      const std::int32_t t0 = done + 1;
      auto [s, pp] = find_post_single(t0);
      PostOp po;
      po.kind = PostOp::Kind::Activate;
      po.pp = pp;
      po.layer = layer;
      po.group = group;
      po.m = roots_[0].m;
      po.p = roots_[0].p;
      po.bank_a = roots_[0].bank;
      po.bank_out = roots_[0].bank;
      sched_.slices[s].post_ops.push_back(po);
      done = s;
    }
    sched_.group_done[group] = done;
  }

  void sort_roots() {
    std::stable_sort(roots_.begin(), roots_.end(),
                     [](const Root& a, const Root& b) { return a.ready < b.ready; });
  }
  void insert_root(Root r) {
    auto it = std::upper_bound(
        roots_.begin(), roots_.end(), r,
        [](const Root& a, const Root& b) { return a.ready < b.ready; });
    roots_.insert(it, r);
  }

  std::pair<std::int32_t, std::int32_t> find_post_pair(std::int32_t t0) {
    for (std::int64_t l = t0;; ++l) {
      SliceState& ss = state(l);
      if (ss.free_post < 2) continue;
      for (std::int32_t q = 0; q + 1 < pods_.pods; q += 2) {
        if (!ss.post_busy[q] && !ss.post_busy[q + 1]) {
          ss.post_busy[q] = ss.post_busy[q + 1] = 1;
          ss.free_post -= 2;
          return {static_cast<std::int32_t>(l), q};
        }
      }
    }
  }

  std::pair<std::int32_t, std::int32_t> find_post_single(std::int32_t t0) {
    for (std::int64_t l = t0;; ++l) {
      SliceState& ss = state(l);
      if (ss.free_post < 1) continue;
      for (std::int32_t q = 0; q < pods_.pods; ++q) {
        if (!ss.post_busy[q]) {
          ss.post_busy[q] = 1;
          --ss.free_post;
          return {static_cast<std::int32_t>(l), q};
        }
      }
    }
  }

  void trim() {
    while (!sched_.slices.empty() && sched_.slices.back().assignments.empty() &&
           sched_.slices.back().post_ops.empty()) {
      sched_.slices.pop_back();
      states_.pop_back();
    }
  }

  void finalize_slices() {
    for (std::size_t l = 0; l < states_.size(); ++l) {
      for (std::size_t n = 0; n < 4; ++n) {
        const SliceRouter& net = states_[l].nets[n];
        NetCert& cert = sched_.slices[l].routing[n];
        const auto& ds = net.demands();
        cert.srcs.reserve(ds.size());
        cert.planes.reserve(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
          cert.srcs.push_back(ds[i].src);
          cert.planes.push_back(net.planes()[i]);
        }
      }
    }
    states_.clear();
  }

  const TileGraph& tg_;
  PodConfig pods_;
  std::int32_t banks_;
  InterconnectConfig net_;
  Schedule sched_;
  std::vector<SliceState> states_;
  std::vector<std::int32_t> layer_done_;
  std::unordered_map<std::int64_t, std::int32_t> x_home_, w_home_;
  std::vector<Root> roots_;
  std::vector<std::int64_t> gbase_;
};

inline Schedule schedule(const TileGraph& tg, const PodConfig& pods,
                         std::int32_t banks, const InterconnectConfig& nets,
                         bool weight_reuse = true) {
  Scheduler s(tg, pods, banks, nets, weight_reuse);
  return s.run();
}

// ---------------------------------------------------------------------
// Independent schedule checker. Rebuilds each slice's routing problems
// from the recorded assignments and re-verifies every invariant with
// fresh state.
// ---------------------------------------------------------------------
inline std::vector<std::string> validate(const Schedule& sched,
                                         const TileGraph& tg,
                                         const InterconnectConfig& nets) {
  std::vector<std::string> v;
  auto fail = [&](std::string msg) { v.push_back(std::move(msg)); };

  const std::int32_t P = sched.pods.pods;
  std::vector<std::int32_t> op_slice(tg.size(), -1);
  std::vector<std::int32_t> op_pod(tg.size(), -1);
  std::vector<std::int32_t> op_out_bank(tg.size(), -1);
  std::vector<std::uint32_t> op_chain(tg.size(), kNoOp);
  std::size_t n_assigned = 0;

  // pass 1: uniqueness, per-slice exclusivity, routing
  for (std::size_t l = 0; l < sched.slices.size(); ++l) {
    const Slice& sl = sched.slices[l];
    std::vector<char> pod_used(P, 0);
    // per network: src -> (tile/op id, dest list)
    struct Dem {
      std::int64_t tile;
      std::vector<std::int32_t> dests;
    };
    std::unordered_map<std::int32_t, Dem> xd, wd, pind, poutd;

    auto add_demand = [&](std::unordered_map<std::int32_t, Dem>& m,
                          std::int32_t src, std::int64_t tile,
                          std::int32_t dst, const char* net_name) {
      auto [it, fresh] = m.try_emplace(src, Dem{tile, {}});
      if (!fresh && it->second.tile != tile)
        fail("slice " + std::to_string(l) + ": bank " + std::to_string(src) +
             " sources two tiles on " + net_name);
      it->second.dests.push_back(dst);
    };

    for (const Assignment& a : sl.assignments) {
      if (a.op >= tg.size()) {
        fail("slice " + std::to_string(l) + ": bad op id");
        continue;
      }
      if (op_slice[a.op] >= 0)
        fail("op " + std::to_string(a.op) + " assigned twice");
      op_slice[a.op] = static_cast<std::int32_t>(l);
      op_pod[a.op] = a.pod;
      op_out_bank[a.op] = a.psum_out_bank;
      op_chain[a.op] = a.psum_in_op;
      ++n_assigned;
      if (a.pod < 0 || a.pod >= P) {
        fail("slice " + std::to_string(l) + ": bad pod id");
        continue;
      }
      if (pod_used[a.pod]++)
        fail("slice " + std::to_string(l) + ": pod " + std::to_string(a.pod) +
             " double-booked");
      const TileOpRef& ref = tg.ops[a.op];
      add_demand(xd, a.x_bank, detail::x_tile_key(ref.layer, ref.i, ref.j),
                 a.pod, "X");
      if (a.w_reload)
        add_demand(wd, a.w_bank, detail::w_tile_key(ref.layer, ref.j, ref.k),
                   a.pod, "W");
      else if (a.w_bank != -1)
        fail("op " + std::to_string(a.op) + ": reused weight with a bank");
      if (a.psum_in_op != kNoOp)
        add_demand(pind, a.psum_in_bank, static_cast<std::int64_t>(a.psum_in_op),
                   a.pod, "P-in");
      add_demand(poutd, a.pod, static_cast<std::int64_t>(a.op),
                 a.psum_out_bank, "P-out");
    }

    auto check_net = [&](const std::unordered_map<std::int32_t, Dem>& m,
                         const NetCert& cert, const char* name) {
      if (cert.srcs.size() != m.size())
        fail("slice " + std::to_string(l) + ": " + name +
             " certificate covers " + std::to_string(cert.srcs.size()) +
             " demands, assignments imply " + std::to_string(m.size()));
      RoutingProblem p;
      p.ports = nets.ports;
      std::vector<std::int32_t> planes;
      std::vector<std::int32_t> srcs;
      srcs.reserve(m.size());
      for (const auto& [src, dem] : m) srcs.push_back(src);
      std::sort(srcs.begin(), srcs.end());
      bool covered = true;
      for (auto src : srcs) {
        const Dem& dem = m.at(src);
        Demand d;
        d.src = src;
        d.dests = dem.dests;
        std::sort(d.dests.begin(), d.dests.end());
        p.demands.push_back(std::move(d));
        const std::int32_t pl = cert.plane_of(src);
        if (pl < 0) covered = false;
        planes.push_back(pl);
      }
      if (!covered)
        fail("slice " + std::to_string(l) + ": " + name +
             " certificate is missing a source");
      else if (!verify_routing(nets, p, planes))
        fail("slice " + std::to_string(l) + ": " + name +
             " network routing invalid");
    };
    check_net(xd, sl.routing[kNetX], "X");
    check_net(wd, sl.routing[kNetW], "W");
    check_net(pind, sl.routing[kNetPIn], "P-in");
    check_net(poutd, sl.routing[kNetPOut], "P-out");
  }

  if (n_assigned != tg.size())
    fail("tile ops assigned: " + std::to_string(n_assigned) + " of " +
         std::to_string(tg.size()));
  for (std::size_t op = 0; op < tg.size(); ++op)
    if (op_slice[op] != sched.op_slice[op])
      fail("op " + std::to_string(op) + ": provenance map disagrees");

  // pass 2: weight reuse consistency
  for (std::size_t l = 0; l < sched.slices.size(); ++l) {
    for (const Assignment& a : sched.slices[l].assignments) {
      if (a.w_reload) continue;
      bool ok = false;
      if (l > 0) {
        const TileOpRef& ref = tg.ops[a.op];
        const std::int64_t wt = detail::w_tile_key(ref.layer, ref.j, ref.k);
        for (const Assignment& b : sched.slices[l - 1].assignments) {
          if (b.pod != a.pod) continue;
          const TileOpRef& bref = tg.ops[b.op];
          ok = detail::w_tile_key(bref.layer, bref.j, bref.k) == wt;
          break;
        }
      }
      if (!ok)
        fail("op " + std::to_string(a.op) +
             ": weight reuse without matching predecessor on pod");
    }
  }

  // pass 3: aggregation bookkeeping and RAW order
  const std::int64_t n_groups = tg.total_groups();
  std::vector<std::int32_t> group_reduced(n_groups, -1);  // last add slice
  std::vector<std::int64_t> group_adds(n_groups, 0);
  std::vector<std::int32_t> group_act(n_groups, -1);
  for (std::size_t l = 0; l < sched.slices.size(); ++l) {
    for (const PostOp& po : sched.slices[l].post_ops) {
      if (po.group < 0 || po.group >= n_groups) {
        fail("post op with bad group");
        continue;
      }
      if (po.kind == PostOp::Kind::Add) {
        if (po.pp % 2 != 0)
          fail("slice " + std::to_string(l) + ": add not on a pair base");
        ++group_adds[po.group];
        group_reduced[po.group] =
            std::max(group_reduced[po.group], static_cast<std::int32_t>(l));
      } else {
        if (group_act[po.group] >= 0)
          fail("group " + std::to_string(po.group) + ": two activations");
        group_act[po.group] = static_cast<std::int32_t>(l);
      }
    }
    // post-processor slot exclusivity
    std::vector<char> pp_used(P, 0);
    for (const PostOp& po : sched.slices[l].post_ops) {
      if (po.kind == PostOp::Kind::Add) {
        if (pp_used[po.pp]++ || pp_used[po.pp + 1]++)
          fail("slice " + std::to_string(l) + ": post-processor double-booked");
      } else {
        if (pp_used[po.pp]++)
          fail("slice " + std::to_string(l) + ": post-processor double-booked");
      }
    }
  }

  // chained psums per group, RAW on chains
  std::vector<std::int64_t> group_chained(n_groups, 0);
  for (std::size_t op = 0; op < tg.size(); ++op) {
    if (op_chain[op] == kNoOp) continue;
    const std::uint32_t prod = op_chain[op];
    ++group_chained[tg.group_of(static_cast<std::uint32_t>(op))];
    if (tg.group_of(prod) != tg.group_of(static_cast<std::uint32_t>(op)))
      fail("op " + std::to_string(op) + ": chained across groups");
    if (op_slice[prod] >= op_slice[op])
      fail("op " + std::to_string(op) + ": psum chain breaks RAW order");
    // the chain must read the bank the producer wrote
    bool found = false;
    for (const Assignment& a : sched.slices[op_slice[op]].assignments)
      if (a.op == op) {
        found = a.psum_in_bank == op_out_bank[prod];
        break;
      }
    if (!found)
      fail("op " + std::to_string(op) +
           ": psum chain reads a different bank than the producer wrote");
  }

  // group member slices and arity bookkeeping
  std::vector<std::int32_t> group_done(n_groups, -1);
  std::vector<std::int64_t> gbase_acc(tg.layers.size() + 1, 0);
  for (std::size_t li = 0; li < tg.layers.size(); ++li)
    gbase_acc[li + 1] = gbase_acc[li] + tg.layers[li].group_count();
  for (std::size_t li = 0; li < tg.layers.size(); ++li) {
    const LayerTiling& lt = tg.layers[li];
    const std::int64_t gbase = gbase_acc[li];
    for (std::int64_t gi = 0; gi < lt.group_count(); ++gi) {
      const std::int64_t g = gbase + gi;
      const std::uint32_t member0 =
          lt.op_base + static_cast<std::uint32_t>(gi * lt.j_count);
      std::int32_t last = -1;
      for (std::int32_t j = 0; j < lt.j_count; ++j)
        last = std::max(last, op_slice[member0 + j]);
      const std::int64_t expected_adds =
          lt.j_count - 1 - group_chained[g];
      if (group_adds[g] != expected_adds)
        fail("group " + std::to_string(g) + ": " +
             std::to_string(group_adds[g]) + " adds, expected " +
             std::to_string(expected_adds));
      std::int32_t done = std::max(last, group_reduced[g]);
      // the final add consumes the last-produced root, so it must land
      // strictly after every member
      if (expected_adds > 0 && group_reduced[g] <= last)
        fail("group " + std::to_string(g) + ": reduction before last member");
      if (lt.activation) {
        if (group_act[g] < 0)
          fail("group " + std::to_string(g) + ": missing activation");
        else {
          if (group_act[g] <= done)
            fail("group " + std::to_string(g) + ": activation before reduce");
          done = group_act[g];
        }
      } else if (group_act[g] >= 0) {
        fail("group " + std::to_string(g) + ": unexpected activation");
      }
      group_done[g] = done;
      if (sched.group_done[g] != done)
        fail("group " + std::to_string(g) + ": recorded done slice disagrees");
    }
  }

  // RAW across layers
  for (std::size_t li = 0; li < tg.layers.size(); ++li) {
    const LayerTiling& lt = tg.layers[li];
    if (lt.predecessors.empty()) continue;
    for (std::size_t pi = 0; pi < lt.predecessors.size(); ++pi) {
      const std::int32_t pl = lt.predecessors[pi];
      const LayerTiling& plt = tg.layers[pl];
      const std::int64_t pgbase = gbase_acc[pl];
      std::int32_t pred_done = -1;
      for (std::int64_t g = pgbase; g < pgbase + plt.group_count(); ++g)
        pred_done = std::max(pred_done, group_done[g]);
      for (std::uint32_t op = lt.op_base;
           op < lt.op_base + std::uint64_t(lt.i_count) * lt.k_count * lt.j_count;
           ++op) {
        const TileOpRef& ref = tg.ops[op];
        std::int32_t need;
        if (lt.fine_grained[pi]) {
          need = -1;
          const std::int64_t row_lo = std::int64_t{ref.i} * lt.k_part;
          const std::int64_t row_hi = row_lo + lt.tile_m(ref.i) - 1;
          const std::int64_t col_lo = std::int64_t{ref.j} * lt.r;
          const std::int64_t col_hi = col_lo + lt.tile_n(ref.j) - 1;
          const auto ilo = static_cast<std::int32_t>(row_lo / plt.k_part);
          const auto ihi = static_cast<std::int32_t>(row_hi / plt.k_part);
          const auto klo = static_cast<std::int32_t>(col_lo / plt.c);
          const auto khi = static_cast<std::int32_t>(col_hi / plt.c);
          for (std::int32_t i2 = ilo; i2 <= ihi; ++i2)
            for (std::int32_t k2 = klo; k2 <= khi; ++k2)
              need = std::max(need,
                              group_done[pgbase + std::int64_t{i2} * plt.k_count +
                                         k2]);
        } else {
          need = pred_done;
        }
        if (op_slice[op] <= need)
          fail("op " + std::to_string(op) + ": scheduled at slice " +
               std::to_string(op_slice[op]) + " but input ready after " +
               std::to_string(need));
      }
    }
  }

  return v;
}

}  // namespace sosa
