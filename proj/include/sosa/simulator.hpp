// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "sosa/common.hpp"
#include "sosa/interconnect.hpp"
#include "sosa/scheduler.hpp"
#include "sosa/tiling.hpp"

namespace sosa {

struct BankConfig {
  std::int64_t bank_bytes = 256 * 1024;
  std::int64_t dram_bytes_per_cycle = 900;

  void validate() const {
    if (bank_bytes < 1)
      throw ValidationError("bank config: nonpositive bank size");
    if (dram_bytes_per_cycle < 1)
      throw ValidationError("bank config: nonpositive DRAM bandwidth");
  }
};

struct ResidencyStats {
  std::int64_t dram_fetch_bytes = 0;    // first fetch of inputs and weights
  std::int64_t dram_spill_bytes = 0;    // evicted intermediates written back
  std::int64_t dram_refetch_bytes = 0;  // evicted data read again
  std::int64_t dram_writeback_bytes = 0;  // final layer outputs
  std::int64_t activation_evictions = 0;
  std::int64_t weight_evictions = 0;
  std::int64_t peak_bank_bytes = 0;
  // inbound DRAM traffic attributed to the slice that consumes it;
  // writes (spills, writebacks) only count against aggregate bandwidth
  std::vector<std::int64_t> slice_dram_bytes;

  std::int64_t total_dram_bytes() const {
    return dram_fetch_bytes + dram_spill_bytes + dram_refetch_bytes +
           dram_writeback_bytes;
  }
};

struct SimStats {
  std::int64_t makespan_cycles = 0;
  std::int64_t fill_drain_cycles = 0;
  double cycles_per_tile_op = 0;
  double utilization = 0;        // sustained MACs over peak MACs
  double busy_pod_fraction = 0;  // busy pod-slices over total pod-slices
  std::int64_t useful_macs = 0;
  std::int64_t sram_read_bytes = 0;
  std::int64_t sram_write_bytes = 0;
  // delivered bytes per network, indexed by NetId
  std::int64_t net_bytes[4] = {0, 0, 0, 0};
  std::int64_t post_add_elems = 0;       // element adds on post-processors
  std::int64_t post_activate_elems = 0;  // activation applications
  std::vector<std::int64_t> slice_cycles;
  ResidencyStats residency;
};

namespace detail {

// One allocatable object in a scratchpad bank.
struct BankObject {
  std::int64_t bank = 0;
  std::int64_t bytes = 0;
  bool from_dram = false;   // first materialization reads DRAM
  bool is_weight = false;
  bool writeback = false;   // final output, written to DRAM at death
  std::int32_t birth = 0;   // produced objects become resident here
  std::vector<std::int32_t> uses;  // sorted slice indices
};

}  // namespace detail

// ---------------------------------------------------------------------
// Scratchpad residency replay with Belady (farthest next use) eviction,
// run independently per bank. Objects never used at the current slice are
// eviction candidates; evicting an on-chip intermediate costs a spill and
// a refetch, evicting DRAM-backed data only a refetch.
// ---------------------------------------------------------------------
inline ResidencyStats bank_residency(const TileGraph& tg,
                                     const Schedule& sched,
                                     const BankConfig& banks) {
  banks.validate();
  ResidencyStats rs;
  const std::size_t n_slices = sched.slices.size();
  rs.slice_dram_bytes.assign(n_slices + 1, 0);

  // ---- object construction ------------------------------------------
  std::vector<detail::BankObject> objs;
  std::unordered_map<std::int64_t, std::size_t> x_obj, w_obj;
  // live psum value per (layer, group): object index of the running value
  std::vector<std::size_t> op_psum_obj(tg.size(), SIZE_MAX);

  std::vector<std::int64_t> gbase(tg.layers.size() + 1, 0);
  for (std::size_t li = 0; li < tg.layers.size(); ++li)
    gbase[li + 1] = gbase[li] + tg.layers[li].group_count();
  std::vector<std::size_t> group_obj(
      static_cast<std::size_t>(tg.total_groups()), SIZE_MAX);
  std::vector<char> layer_is_sink(tg.layers.size(), 1);
  for (const auto& lt : tg.layers)
    for (auto p : lt.predecessors) layer_is_sink[p] = 0;

  for (std::size_t l = 0; l < n_slices; ++l) {
    for (const Assignment& a : sched.slices[l].assignments) {
      const TileOpRef& ref = tg.ops[a.op];
      const LayerTiling& lt = tg.layers[ref.layer];
      const bool src_layer = lt.predecessors.empty();
      // x tile
      {
        const std::int64_t key = detail::x_tile_key(ref.layer, ref.i, ref.j);
        auto [it, fresh] = x_obj.try_emplace(key, objs.size());
        if (fresh) {
          detail::BankObject o;
          o.bank = a.x_bank;
          o.bytes = std::int64_t{lt.tile_m(ref.i)} * lt.tile_n(ref.j);
          o.from_dram = src_layer;
          o.birth = static_cast<std::int32_t>(l);
          objs.push_back(o);
        }
        objs[it->second].uses.push_back(static_cast<std::int32_t>(l));
      }
      // w tile
      if (a.w_reload) {
        const std::int64_t key = detail::w_tile_key(ref.layer, ref.j, ref.k);
        auto [it, fresh] = w_obj.try_emplace(key, objs.size());
        if (fresh) {
          detail::BankObject o;
          o.bank = a.w_bank;
          o.bytes = std::int64_t{lt.tile_n(ref.j)} * lt.tile_p(ref.k);
          o.from_dram = true;
          o.is_weight = true;
          o.birth = static_cast<std::int32_t>(l);
          objs.push_back(o);
        }
        objs[it->second].uses.push_back(static_cast<std::int32_t>(l));
      }
      // chained psum input: consume the producer's output object
      if (a.psum_in_op != kNoOp) {
        const std::size_t po = op_psum_obj[a.psum_in_op];
        if (po != SIZE_MAX)
          objs[po].uses.push_back(static_cast<std::int32_t>(l));
      }
      // psum output object
      {
        detail::BankObject o;
        o.bank = a.psum_out_bank;
        o.bytes = 2ll * lt.tile_m(ref.i) * lt.tile_p(ref.k);
        o.birth = static_cast<std::int32_t>(l);
        op_psum_obj[a.op] = objs.size();
        objs.push_back(o);
      }
    }
  }

  // post-op value objects: each add consumes two bank values and
  // produces a new one in bank_out; the activation quantizes the bytes.
  // Bank contents are matched by (group, bank) since a group's running
  // values stay in the banks its ops and adds wrote.
  std::unordered_map<std::int64_t, std::size_t> live_at;
  auto gb_key = [](std::int64_t group, std::int64_t bank) {
    return (group << 16) | bank;
  };
  // the last writer to a (group, bank) wins, matching the scheduler's
  // accumulate-in-place convention
  for (std::size_t l = 0; l < n_slices; ++l) {
    for (const Assignment& a : sched.slices[l].assignments)
      live_at[gb_key(tg.group_of(a.op), a.psum_out_bank)] = op_psum_obj[a.op];
    for (const PostOp& po : sched.slices[l].post_ops) {
      auto use = [&](std::int64_t bank) {
        auto it = live_at.find(gb_key(po.group, bank));
        if (it != live_at.end())
          objs[it->second].uses.push_back(static_cast<std::int32_t>(l));
      };
      if (po.kind == PostOp::Kind::Add) {
        use(po.bank_a);
        use(po.bank_b);
        detail::BankObject o;
        o.bank = po.bank_out;
        o.bytes = 2ll * po.m * po.p;
        o.birth = static_cast<std::int32_t>(l);
        live_at[gb_key(po.group, po.bank_out)] = objs.size();
        objs.push_back(o);
      } else {
        use(po.bank_a);
        detail::BankObject o;
        o.bank = po.bank_out;
        o.bytes = std::int64_t{po.m} * po.p;  // quantized after activation
        o.birth = static_cast<std::int32_t>(l);
        live_at[gb_key(po.group, po.bank_out)] = objs.size();
        objs.push_back(o);
      }
    }
  }
  // group result objects: objects are appended in slice order, so the
  // largest index among a group's live values is its final result
  {
    std::vector<std::int32_t> group_layer(
        static_cast<std::size_t>(tg.total_groups()));
    for (std::size_t li = 0; li < tg.layers.size(); ++li)
      for (std::int64_t g = gbase[li]; g < gbase[li + 1]; ++g)
        group_layer[g] = static_cast<std::int32_t>(li);
    for (const auto& [key, oi] : live_at) {
      const std::int64_t g = key >> 16;
      if (group_obj[g] == SIZE_MAX || oi > group_obj[g]) group_obj[g] = oi;
    }
    for (std::size_t g = 0; g < group_obj.size(); ++g)
      if (group_obj[g] != SIZE_MAX && layer_is_sink[group_layer[g]])
        objs[group_obj[g]].writeback = true;
  }
  // consumer reads of layer outputs: a consumer op's x fetch at slice s
  // reads the producer groups covering its x tile
  for (std::size_t li = 0; li < tg.layers.size(); ++li) {
    const LayerTiling& lt = tg.layers[li];
    if (lt.predecessors.empty()) continue;
    for (std::uint32_t op = lt.op_base;
         op < lt.op_base +
                  static_cast<std::uint32_t>(std::uint64_t(lt.i_count) *
                                             lt.k_count * lt.j_count);
         ++op) {
      const TileOpRef& ref = tg.ops[op];
      const std::int32_t s = sched.op_slice[op];
      for (std::size_t pi = 0; pi < lt.predecessors.size(); ++pi) {
        const std::int32_t pl = lt.predecessors[pi];
        if (!lt.fine_grained[pi]) continue;  // coarse deps read everything;
                                             // lifetimes handled by barrier
        const LayerTiling& plt = tg.layers[pl];
        const std::int64_t row_lo = std::int64_t{ref.i} * lt.k_part;
        const std::int64_t row_hi = row_lo + lt.tile_m(ref.i) - 1;
        const std::int64_t col_lo = std::int64_t{ref.j} * lt.r;
        const std::int64_t col_hi = col_lo + lt.tile_n(ref.j) - 1;
        for (auto i2 = static_cast<std::int32_t>(row_lo / plt.k_part);
             i2 <= static_cast<std::int32_t>(row_hi / plt.k_part); ++i2)
          for (auto k2 = static_cast<std::int32_t>(col_lo / plt.c);
               k2 <= static_cast<std::int32_t>(col_hi / plt.c); ++k2) {
            const std::size_t go =
                group_obj[gbase[pl] + std::int64_t{i2} * plt.k_count + k2];
            if (go != SIZE_MAX) objs[go].uses.push_back(s);
          }
      }
    }
  }

  // ---- Belady replay per bank ---------------------------------------
  for (auto& o : objs) {
    std::sort(o.uses.begin(), o.uses.end());
    o.uses.erase(std::unique(o.uses.begin(), o.uses.end()), o.uses.end());
  }
  std::vector<std::vector<std::size_t>> bank_objs(
      static_cast<std::size_t>(sched.banks));
  for (std::size_t i = 0; i < objs.size(); ++i) {
    if (objs[i].bank >= 0) bank_objs[objs[i].bank].push_back(i);
  }

  std::vector<char> is_res(objs.size(), 0);  // objects live in one bank
  for (auto& members : bank_objs) {
    // event list: (slice, object, is_birth)
    struct Ev {
      std::int32_t slice;
      std::size_t obj;
      bool birth;
    };
    std::vector<Ev> evs;
    for (auto oi : members) {
      const auto& o = objs[oi];
      if (!o.from_dram) evs.push_back({o.birth, oi, true});
      for (auto u : o.uses) evs.push_back({u, oi, false});
    }
    std::stable_sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) {
      return a.slice < b.slice;
    });

    std::vector<std::size_t> resident;
    std::int64_t live = 0;

    auto next_use = [&](std::size_t oi, std::int32_t now) -> std::int32_t {
      const auto& u = objs[oi].uses;
      auto it = std::upper_bound(u.begin(), u.end(), now);
      return it == u.end() ? std::numeric_limits<std::int32_t>::max() : *it;
    };

    auto evict_to_fit = [&](std::int32_t now) {
      while (live > banks.bank_bytes && resident.size() > 1) {
        // farthest next use among objects not used right now
        std::size_t victim = SIZE_MAX;
        std::int32_t far = -1;
        for (auto oi : resident) {
          const auto& u = objs[oi].uses;
          if (std::binary_search(u.begin(), u.end(), now)) continue;
          const std::int32_t nu = next_use(oi, now);
          if (nu > far) {
            far = nu;
            victim = oi;
          }
        }
        if (victim == SIZE_MAX) break;  // everything in use this slice
        resident.erase(std::find(resident.begin(), resident.end(), victim));
        is_res[victim] = 0;
        live -= objs[victim].bytes;
        if (objs[victim].is_weight)
          ++rs.weight_evictions;
        else
          ++rs.activation_evictions;
        if (!objs[victim].from_dram && far !=
            std::numeric_limits<std::int32_t>::max()) {
          // dirty intermediate still needed: write it out
          rs.dram_spill_bytes += objs[victim].bytes;
        }
      }
    };

    for (const Ev& e : evs) {
      const auto& o = objs[e.obj];
      if (e.birth) {
        if (o.uses.empty()) {
          // produced but never read again on-chip: streamed out directly
          if (o.writeback) rs.dram_writeback_bytes += o.bytes;
          continue;
        }
        if (!is_res[e.obj]) {
          is_res[e.obj] = 1;
          resident.push_back(e.obj);
          live += o.bytes;
          evict_to_fit(e.slice);
          rs.peak_bank_bytes = std::max(rs.peak_bank_bytes, live);
        }
        continue;
      }
      if (!is_res[e.obj]) {
        // (re)fetch
        if (o.from_dram) {
          if (o.uses.front() == e.slice)
            rs.dram_fetch_bytes += o.bytes;
          else
            rs.dram_refetch_bytes += o.bytes;
        } else {
          rs.dram_refetch_bytes += o.bytes;
        }
        rs.slice_dram_bytes[e.slice] += o.bytes;
        is_res[e.obj] = 1;
        resident.push_back(e.obj);
        live += o.bytes;
        evict_to_fit(e.slice);
      }
      // drop objects past their last use
      if (!o.uses.empty() && o.uses.back() == e.slice) {
        auto it = std::find(resident.begin(), resident.end(), e.obj);
        if (it != resident.end()) {
          resident.erase(it);
          is_res[e.obj] = 0;
          live -= o.bytes;
          if (o.writeback) rs.dram_writeback_bytes += o.bytes;
        }
      }
      rs.peak_bank_bytes = std::max(rs.peak_bank_bytes, live);
    }
  }

  return rs;
}

// ---------------------------------------------------------------------
// Lockstep slice timing. Slice l runs for
//   D(l) = max(exec span, next slice's weight preload, next slice's
//              network round trip, next slice's DRAM prefetch)
// so input movement for slice l+1 hides behind slice l's compute unless
// it is the bottleneck. Array fill and drain are paid once.
// ---------------------------------------------------------------------
inline SimStats simulate(const TileGraph& tg, const Schedule& sched,
                         const BankConfig& banks) {
  banks.validate();
  SimStats st;
  const std::size_t n_slices = sched.slices.size();
  st.slice_cycles.assign(n_slices, 0);
  st.residency = bank_residency(tg, sched, banks);

  std::vector<std::int64_t> exec(n_slices, 0);   // m_max + post spans
  std::vector<std::int64_t> wload(n_slices, 0);  // n_max over reloads
  std::vector<char> has_net(n_slices, 0);
  std::int64_t busy_pod_slices = 0;
  for (std::size_t l = 0; l < n_slices; ++l) {
    for (const Assignment& a : sched.slices[l].assignments) {
      const TileOpRef& ref = tg.ops[a.op];
      const LayerTiling& lt = tg.layers[ref.layer];
      const std::int64_t m = lt.tile_m(ref.i);
      const std::int64_t n = lt.tile_n(ref.j);
      const std::int64_t p = lt.tile_p(ref.k);
      exec[l] = std::max(exec[l], m);
      if (a.w_reload) wload[l] = std::max(wload[l], n);
      has_net[l] = 1;
      ++busy_pod_slices;
      // traffic: x and w read from banks and delivered over X/W nets,
      // psum written back over P-out; chained inputs read over P-in
      st.sram_read_bytes += m * n;
      st.net_bytes[kNetX] += m * n;
      if (a.w_reload) {
        st.sram_read_bytes += n * p;
        st.net_bytes[kNetW] += n * p;
      }
      if (a.psum_in_op != kNoOp) {
        st.sram_read_bytes += 2 * m * p;
        st.net_bytes[kNetPIn] += 2 * m * p;
      }
      st.sram_write_bytes += 2 * m * p;
      st.net_bytes[kNetPOut] += 2 * m * p;
    }
    for (const PostOp& po : sched.slices[l].post_ops) {
      exec[l] = std::max<std::int64_t>(exec[l], po.m);
      const std::int64_t elems = std::int64_t{po.m} * po.p;
      if (po.kind == PostOp::Kind::Add) {
        st.post_add_elems += elems;
        st.sram_read_bytes += 2 * 2 * elems;
        st.sram_write_bytes += 2 * elems;
      } else {
        st.post_activate_elems += elems;
        st.sram_read_bytes += 2 * elems;
        st.sram_write_bytes += elems;  // quantized output
      }
    }
  }

  const std::int64_t rt = 2ll * latency(sched.net);
  std::int64_t total = 0;
  for (std::size_t l = 0; l < n_slices; ++l) {
    std::int64_t d = exec[l];
    if (l + 1 < n_slices) {
      d = std::max(d, wload[l + 1]);
      if (has_net[l + 1]) d = std::max(d, rt);
      d = std::max(d, static_cast<std::int64_t>(ceil_div(
                          static_cast<std::uint64_t>(
                              st.residency.slice_dram_bytes[l + 1]),
                          static_cast<std::uint64_t>(
                              banks.dram_bytes_per_cycle))));
    }
    st.slice_cycles[l] = d;
    total += d;
  }

  // aggregate DRAM bandwidth floor: writes overlap compute but the bus
  // still has to move every byte
  const auto dram_floor = static_cast<std::int64_t>(
      ceil_div(static_cast<std::uint64_t>(st.residency.total_dram_bytes()),
               static_cast<std::uint64_t>(banks.dram_bytes_per_cycle)));
  total = std::max(total, dram_floor);

  if (n_slices > 0) {
    const auto fill = static_cast<std::int64_t>(
        ceil_div(static_cast<std::uint64_t>(sched.pods.cols),
                 static_cast<std::uint64_t>(sched.pods.multicast_u)));
    const auto drain = static_cast<std::int64_t>(
        ceil_div(static_cast<std::uint64_t>(sched.pods.rows),
                 static_cast<std::uint64_t>(sched.pods.fanin_v)));
    st.fill_drain_cycles = fill + drain;
  }
  st.makespan_cycles = total + st.fill_drain_cycles;

  // mean slice duration weighted by the ops resident in each slice
  std::int64_t op_cycles = 0;
  for (std::size_t l = 0; l < n_slices; ++l)
    op_cycles += st.slice_cycles[l] *
                 static_cast<std::int64_t>(sched.slices[l].assignments.size());
  st.cycles_per_tile_op =
      tg.size() ? double(op_cycles) / double(tg.size()) : 0.0;

  st.useful_macs = tg.total_macs();
  const double peak_macs_per_cycle = double(sched.pods.pods) *
                                     sched.pods.rows * sched.pods.cols;
  st.utilization =
      st.makespan_cycles
          ? double(st.useful_macs) /
                (peak_macs_per_cycle * double(st.makespan_cycles))
          : 0.0;
  st.busy_pod_fraction =
      n_slices ? double(busy_pod_slices) /
                     (double(sched.pods.pods) * double(n_slices))
               : 0.0;
  return st;
}

}  // namespace sosa
