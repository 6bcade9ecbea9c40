// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "sosa/common.hpp"
#include "sosa/interconnect.hpp"
#include "sosa/scheduler.hpp"
#include "sosa/simulator.hpp"

namespace sosa {

// Energy/power parameters. The per-component multipliers are fitted once
// against the published area/power breakdown of the 256-pod 32x32 design
// (SRAM 45.81 %, arrays 37.64 %, interconnect 15.06 % of total); they are
// calibration constants, not first-principles values.
struct EnergyParams {
  double e_mac_pj = 0.4;        // pJ per MAC
  double e_sram_pj_byte = 2.7;  // pJ per SRAM byte
  double e_post_pj_elem = 0.2;  // pJ per post-processor element op
  double clock_hz = 1e9;
  double tdp_w = 400.0;
  // fitted multipliers (see note above)
  double cal_sram = 1.0;
  double cal_arrays = 1.0399560546875;
  double cal_interconnect = 1.7071;
  double cal_misc = 0.039541;  // misc/other as a fraction of the array term

  void validate() const {
    if (e_mac_pj <= 0 || e_sram_pj_byte <= 0 || e_post_pj_elem <= 0 ||
        clock_hz <= 0 || tdp_w <= 0 || cal_sram <= 0 || cal_arrays <= 0 ||
        cal_interconnect <= 0 || cal_misc < 0)
      throw ValidationError("energy params: nonpositive parameter");
  }
};

struct PowerReport {
  double arrays_w = 0;
  double sram_w = 0;
  double interconnect_w = 0;
  double misc_w = 0;
  double total_w = 0;

  double peak_ops = 0;           // ops/s, 1 MAC = 2 ops
  double peak_ops_at_tdp = 0;    // normalized to TDP
  double eff_ops = 0;            // peak x utilization
  double eff_ops_at_tdp = 0;
  double eff_ops_per_w = 0;
};

// Peak arithmetic throughput in ops/s (1 MAC = 2 ops).
inline double peak_throughput(const PodConfig& pods) {
  return 2.0 * pods.rows * pods.cols * pods.pods * pods.clock_hz;
}

// Peak power of a configuration, assuming every pod streams at full
// bandwidth: per pod per cycle, x read r + w read r + psum read 2c +
// psum write 2c bytes through SRAM and the interconnect.
inline PowerReport peak_power(const PodConfig& pods,
                              const InterconnectConfig& nets,
                              const EnergyParams& params) {
  params.validate();
  PowerReport r;
  if (pods.pods == 0) return r;
  pods.validate();
  nets.validate();

  const double bytes_per_cycle =
      double(2 * pods.rows + 4 * pods.cols) * pods.pods;
  r.arrays_w = params.cal_arrays * pods.pods * pods.rows * pods.cols *
               params.e_mac_pj * 1e-12 * params.clock_hz;
  r.sram_w = params.cal_sram * bytes_per_cycle * params.e_sram_pj_byte *
             1e-12 * params.clock_hz;
  const InterconnectCost ic = cost_model(nets);
  r.interconnect_w =
      params.cal_interconnect * bytes_per_cycle * ic.mw_per_byte * 1e-3;
  r.misc_w = params.cal_misc * r.arrays_w;
  r.total_w = r.arrays_w + r.sram_w + r.interconnect_w + r.misc_w;
  return r;
}

// Largest power-of-two pod count whose peak power stays below the TDP.
inline std::int32_t pods_for_tdp(std::int32_t rows, std::int32_t cols,
                                 Topology topology, std::int32_t expansion,
                                 const EnergyParams& params) {
  params.validate();
  std::int32_t best = 0;
  for (std::int32_t p = 1; p <= (1 << 20); p *= 2) {
    PodConfig pc;
    pc.pods = p;
    pc.rows = rows;
    pc.cols = cols;
    pc.clock_hz = params.clock_hz;
    InterconnectConfig net;
    net.topology = topology;
    net.ports = p;
    net.expansion = expansion;
    if (peak_power(pc, net, params).total_w < params.tdp_w)
      best = p;
    else
      break;
  }
  if (best == 0)
    throw ConfigError("pods_for_tdp: a single pod already exceeds the TDP");
  return best;
}

// Fills in the throughput side of a report from simulated utilization.
inline PowerReport effective_throughput(const PodConfig& pods,
                                        const InterconnectConfig& nets,
                                        const EnergyParams& params,
                                        double utilization) {
  PowerReport r = peak_power(pods, nets, params);
  r.peak_ops = peak_throughput(pods);
  const double scale = r.total_w > 0 ? params.tdp_w / r.total_w : 0.0;
  r.peak_ops_at_tdp = r.peak_ops * scale;
  r.eff_ops = r.peak_ops * utilization;
  r.eff_ops_at_tdp = r.eff_ops * scale;
  r.eff_ops_per_w = r.total_w > 0 ? r.eff_ops / r.total_w : 0.0;
  return r;
}

struct EnergyBreakdown {
  double compute_pj = 0;
  double sram_pj = 0;
  double interconnect_pj = 0;
  double post_pj = 0;

  double total_pj() const {
    return compute_pj + sram_pj + interconnect_pj + post_pj;
  }
};

// Run energy from simulated traffic counters. Interconnect energy per
// byte is its power-per-byte (per byte/cycle of bandwidth) divided by
// the clock.
inline EnergyBreakdown run_energy(const SimStats& stats,
                                  const InterconnectConfig& nets,
                                  const EnergyParams& params) {
  params.validate();
  EnergyBreakdown e;
  e.compute_pj = double(stats.useful_macs) * params.e_mac_pj;
  e.sram_pj = double(stats.sram_read_bytes + stats.sram_write_bytes) *
              params.e_sram_pj_byte;
  const double pj_per_byte =
      cost_model(nets).mw_per_byte * 1e-3 / params.clock_hz * 1e12;
  double net_bytes = 0;
  for (int n = 0; n < 4; ++n) net_bytes += double(stats.net_bytes[n]);
  e.interconnect_pj = net_bytes * pj_per_byte;
  e.post_pj = double(stats.post_add_elems + stats.post_activate_elems) *
              params.e_post_pj_elem;
  return e;
}

}  // namespace sosa
