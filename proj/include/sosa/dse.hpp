// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sosa/common.hpp"
#include "sosa/interconnect.hpp"
#include "sosa/powermodel.hpp"
#include "sosa/scheduler.hpp"
#include "sosa/simulator.hpp"
#include "sosa/tiling.hpp"
#include "sosa/workload.hpp"

namespace sosa {

struct DsePoint {
  std::int32_t rows = 32;
  std::int32_t cols = 32;
  std::int32_t pods = 0;  // 0: derive from TDP
  Topology topology = Topology::Butterfly;
  std::int32_t expansion = 2;
  std::int64_t k_part = 0;  // 0: default r x r
  std::int64_t bank_bytes = 256 * 1024;
  bool weight_reuse = true;
};

struct DseResult {
  DsePoint point;
  bool feasible = false;
  std::string error;
  std::int32_t pods = 0;
  double peak_w = 0;
  double peak_ops = 0;
  double peak_ops_at_tdp = 0;
  double utilization = 0;        // MAC-weighted mean
  double busy_pod_fraction = 0;  // MAC-weighted mean
  double cycles_per_tile_op = 0;
  double eff_ops = 0;
  double eff_ops_at_tdp = 0;
  double eff_ops_per_w = 0;
  std::int64_t dram_bytes = 0;
  std::int64_t activation_evictions = 0;
  std::int64_t weight_evictions = 0;
};

// Evaluates one design point over a benchmark set: tile, schedule, and
// simulate each model, then aggregate by MAC-weighted mean.
inline DseResult evaluate_point(const DsePoint& pt,
                                const std::vector<ModelGraph>& models,
                                const EnergyParams& params) {
  DseResult r;
  r.point = pt;
  try {
    const std::int32_t P =
        pt.pods > 0 ? pt.pods
                    : pods_for_tdp(pt.rows, pt.cols, pt.topology,
                                   pt.expansion, params);
    r.pods = P;
    PodConfig pc;
    pc.pods = P;
    pc.rows = pt.rows;
    pc.cols = pt.cols;
    pc.clock_hz = params.clock_hz;
    InterconnectConfig net;
    net.topology = pt.topology;
    net.ports = P;
    net.expansion = pt.expansion;
    BankConfig bc;
    bc.bank_bytes = pt.bank_bytes;

    double total_macs = 0, util_acc = 0, busy_acc = 0, cpo_acc = 0;
    for (const ModelGraph& m : models) {
      TileGraph tg = build_tile_graph(m, pt.rows, pt.cols, pt.k_part);
      Schedule sched = schedule(tg, pc, P, net, pt.weight_reuse);
      SimStats st = simulate(tg, sched, bc);
      const double w = double(tg.total_macs());
      total_macs += w;
      util_acc += w * st.utilization;
      busy_acc += w * st.busy_pod_fraction;
      cpo_acc += w * st.cycles_per_tile_op;
      r.dram_bytes += st.residency.total_dram_bytes();
      r.activation_evictions += st.residency.activation_evictions;
      r.weight_evictions += st.residency.weight_evictions;
    }
    if (total_macs > 0) {
      r.utilization = util_acc / total_macs;
      r.busy_pod_fraction = busy_acc / total_macs;
      r.cycles_per_tile_op = cpo_acc / total_macs;
    }
    const PowerReport pr =
        effective_throughput(pc, net, params, r.utilization);
    r.peak_w = pr.total_w;
    r.peak_ops = pr.peak_ops;
    r.peak_ops_at_tdp = pr.peak_ops_at_tdp;
    r.eff_ops = pr.eff_ops;
    r.eff_ops_at_tdp = pr.eff_ops_at_tdp;
    r.eff_ops_per_w = pr.eff_ops_per_w;
    r.feasible = true;
  } catch (const std::exception& e) {
    r.feasible = false;
    r.error = e.what();
  }
  return r;
}

// Runs a batch of points on a worker pool; results keep input order.
inline std::vector<DseResult> evaluate_points(
    const std::vector<DsePoint>& points,
    const std::vector<ModelGraph>& models, const EnergyParams& params,
    unsigned workers = 0) {
  if (workers == 0) workers = std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  std::vector<DseResult> out(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      out[i] = evaluate_point(points[i], models, params);
    }
  };
  std::vector<std::thread> pool;
  const unsigned n = std::min<std::size_t>(workers, points.size());
  for (unsigned t = 0; t + 1 < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

// ---- sweeps ----------------------------------------------------------

inline std::vector<DseResult> sweep_shape(
    const std::vector<std::pair<std::int32_t, std::int32_t>>& grid,
    const std::vector<ModelGraph>& models, const EnergyParams& params,
    std::int32_t pods_cap = 0, unsigned workers = 0) {
  std::vector<DsePoint> pts;
  pts.reserve(grid.size());
  for (auto [r, c] : grid) {
    DsePoint p;
    p.rows = r;
    p.cols = c;
    if (pods_cap > 0) {
      // cap for desk-scale runs: min(pods_for_tdp, cap)
      try {
        p.pods = std::min(pods_cap, pods_for_tdp(r, c, p.topology,
                                                 p.expansion, params));
      } catch (const ConfigError&) {
        p.pods = 0;  // infeasible; evaluate_point reports the error
      }
    }
    pts.push_back(p);
  }
  return evaluate_points(pts, models, params, workers);
}

inline std::vector<DseResult> sweep_granularity(
    const std::vector<std::int32_t>& sizes,
    const std::vector<ModelGraph>& models, const EnergyParams& params,
    std::int32_t pods_cap = 0, unsigned workers = 0) {
  std::vector<std::pair<std::int32_t, std::int32_t>> grid;
  for (auto s : sizes) grid.emplace_back(s, s);
  return sweep_shape(grid, models, params, pods_cap, workers);
}

inline std::vector<DseResult> sweep_partition(
    const std::vector<std::int64_t>& k_parts,
    const std::vector<ModelGraph>& models, const EnergyParams& params,
    std::int32_t pods, unsigned workers = 0) {
  std::vector<DsePoint> pts;
  for (auto k : k_parts) {
    DsePoint p;
    p.pods = pods;
    p.k_part = k;
    pts.push_back(p);
  }
  return evaluate_points(pts, models, params, workers);
}

inline std::vector<DseResult> sweep_banks(
    const std::vector<std::int64_t>& bank_sizes,
    const std::vector<ModelGraph>& models, const EnergyParams& params,
    std::int32_t pods, unsigned workers = 0) {
  std::vector<DsePoint> pts;
  for (auto b : bank_sizes) {
    DsePoint p;
    p.pods = pods;
    p.bank_bytes = b;
    pts.push_back(p);
  }
  return evaluate_points(pts, models, params, workers);
}

struct TenancyResult {
  DseResult together;    // union tile graph, one schedule
  DseResult sequential;  // sum of independent runs (makespans added)
  double speedup = 0;    // together eff / sequential eff
};

// Co-scheduling study: multiple models merged into one tile graph and
// scheduled together versus run back to back.
inline TenancyResult sweep_tenancy(const std::vector<ModelGraph>& models,
                                   const EnergyParams& params,
                                   std::int32_t pods) {
  TenancyResult tr;
  DsePoint pt;
  pt.pods = pods;

  PodConfig pc;
  pc.pods = pods;
  pc.rows = pt.rows;
  pc.cols = pt.cols;
  pc.clock_hz = params.clock_hz;
  InterconnectConfig net;
  net.topology = pt.topology;
  net.ports = pods;
  net.expansion = pt.expansion;
  BankConfig bc;
  bc.bank_bytes = pt.bank_bytes;

  // together: union of tile graphs
  {
    std::vector<TileGraph> gs;
    for (const ModelGraph& m : models)
      gs.push_back(build_tile_graph(m, pt.rows, pt.cols, pt.k_part));
    TileGraph merged = merge_tile_graphs(gs);
    Schedule sched = schedule(merged, pc, pods, net);
    SimStats st = simulate(merged, sched, bc);
    tr.together.point = pt;
    tr.together.pods = pods;
    tr.together.feasible = true;
    tr.together.utilization = st.utilization;
    tr.together.busy_pod_fraction = st.busy_pod_fraction;
    const PowerReport pr =
        effective_throughput(pc, net, params, st.utilization);
    tr.together.peak_w = pr.total_w;
    tr.together.eff_ops = pr.eff_ops;
    tr.together.eff_ops_per_w = pr.eff_ops_per_w;
  }
  // sequential: makespans add, MACs add
  {
    std::int64_t macs = 0, cycles = 0;
    for (const ModelGraph& m : models) {
      TileGraph tg = build_tile_graph(m, pt.rows, pt.cols, pt.k_part);
      Schedule sched = schedule(tg, pc, pods, net);
      SimStats st = simulate(tg, sched, bc);
      macs += st.useful_macs;
      cycles += st.makespan_cycles;
    }
    const double util =
        cycles ? double(macs) /
                     (double(pods) * pt.rows * pt.cols * double(cycles))
               : 0.0;
    tr.sequential.point = pt;
    tr.sequential.pods = pods;
    tr.sequential.feasible = true;
    tr.sequential.utilization = util;
    const PowerReport pr = effective_throughput(pc, net, params, util);
    tr.sequential.peak_w = pr.total_w;
    tr.sequential.eff_ops = pr.eff_ops;
    tr.sequential.eff_ops_per_w = pr.eff_ops_per_w;
  }
  tr.speedup = tr.sequential.eff_ops > 0
                   ? tr.together.eff_ops / tr.sequential.eff_ops
                   : 0.0;
  return tr;
}

// ---- CSV emission ----------------------------------------------------

inline std::string dse_csv(const std::vector<DseResult>& results) {
  std::ostringstream os;
  os << "rows,cols,pods,topology,expansion,k_part,bank_bytes,feasible,"
        "peak_w,peak_teraops,peak_teraops_at_tdp,utilization,"
        "busy_pod_fraction,cycles_per_tile_op,eff_teraops,"
        "eff_teraops_at_tdp,eff_gops_per_w,dram_bytes,"
        "activation_evictions,weight_evictions\n";
  os.precision(6);
  for (const DseResult& r : results) {
    os << r.point.rows << ',' << r.point.cols << ',' << r.pods << ','
       << topology_name(r.point.topology) << ',' << r.point.expansion << ','
       << r.point.k_part << ',' << r.point.bank_bytes << ','
       << (r.feasible ? 1 : 0) << ',' << r.peak_w << ','
       << r.peak_ops / 1e12 << ',' << r.peak_ops_at_tdp / 1e12 << ','
       << r.utilization << ',' << r.busy_pod_fraction << ','
       << r.cycles_per_tile_op << ',' << r.eff_ops / 1e12 << ','
       << r.eff_ops_at_tdp / 1e12 << ',' << r.eff_ops_per_w / 1e9 << ','
       << r.dram_bytes << ',' << r.activation_evictions << ','
       << r.weight_evictions << '\n';
  }
  return os.str();
}

}  // namespace sosa
