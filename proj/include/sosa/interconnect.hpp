// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "sosa/common.hpp"

namespace sosa {

enum class Topology { Butterfly, BenesCopy, Crossbar };

inline const char* topology_name(Topology t) {
  switch (t) {
    case Topology::Butterfly: return "butterfly";
    case Topology::BenesCopy: return "benes_copy";
    case Topology::Crossbar: return "crossbar";
  }
  return "?";
}

struct InterconnectConfig {
  Topology topology = Topology::Butterfly;
  std::int32_t ports = 256;      // N, power of two
  std::int32_t expansion = 2;    // k, butterfly only
  std::int32_t link_bytes = 32;  // bytes per cycle per link
  std::int32_t stage_latency = 1;

  void validate() const {
    if (!is_power_of_two(static_cast<std::uint64_t>(ports)))
      throw ValidationError("interconnect: ports must be a power of two");
    if (expansion < 1)
      throw ValidationError("interconnect: expansion must be >= 1");
  }
};

// One source port driving one or more destination ports (multicast when
// |dests| > 1).
struct Demand {
  std::int32_t src = 0;
  std::vector<std::int32_t> dests;
};

struct RoutingProblem {
  std::int32_t ports = 0;
  std::vector<Demand> demands;
};

struct RoutingResult {
  bool feasible = false;
  std::vector<std::int32_t> planes;  // per-demand plane (butterfly only)
  std::int32_t latency = 0;
};

// One-way registered-stage latency.
inline std::int32_t latency(const InterconnectConfig& cfg) {
  const int n = log2_exact(static_cast<std::uint64_t>(cfg.ports));
  switch (cfg.topology) {
    case Topology::Butterfly: return (n + 1) * cfg.stage_latency;
    case Topology::Crossbar: return cfg.stage_latency;
    case Topology::BenesCopy: return 2 * (2 * n - 1) * cfg.stage_latency;
  }
  return 0;
}

namespace detail {

inline void validate_problem(const InterconnectConfig& cfg,
                             const RoutingProblem& problem) {
  std::vector<char> src_seen(cfg.ports, 0), dst_seen(cfg.ports, 0);
  for (const auto& d : problem.demands) {
    if (d.src < 0 || d.src >= cfg.ports)
      throw ValidationError("routing: source port out of range");
    if (src_seen[d.src]++)
      throw ValidationError("routing: duplicate source port");
    if (d.dests.empty())
      throw ValidationError("routing: demand with no destination");
    for (auto dst : d.dests) {
      if (dst < 0 || dst >= cfg.ports)
        throw ValidationError("routing: destination port out of range");
      if (dst_seen[dst]++)
        throw ValidationError("routing: duplicate destination port");
    }
  }
}

}  // namespace detail

// Butterfly plane geometry: a 2-ary n-fly with N ports, n = log2 N switch
// stages of N/2 two-by-two switches, and n-1 layers of links between
// switch stages. Input s enters switch row s >> 1; output d leaves switch
// row d >> 1. Destination-tag routing fixes one row bit per link layer
// (MSB first), so every (s, d) pair has a unique path:
//   row_0 = s >> 1,  row_{l+1} = row_l with bit (n-2-l) set to
//   bit (n-1-(l+1)) of d.
// Two demands conflict when they use the same directed inter-switch link.
class ButterflyPlane {
 public:
  explicit ButterflyPlane(std::int32_t ports)
      : ports_(ports), n_(log2_exact(static_cast<std::uint64_t>(ports))) {}

  std::int32_t link_layers() const { return std::max(n_ - 1, 0); }
  std::int32_t links_per_layer() const { return ports_; }
  std::int32_t total_links() const { return link_layers() * links_per_layer(); }

  // Appends the link ids of the unique (src, dst) path to `out`.
  void path_links(std::int32_t src, std::int32_t dst,
                  std::vector<std::int32_t>& out) const {
    std::int32_t row = src >> 1;
    for (std::int32_t l = 0; l < link_layers(); ++l) {
      const std::int32_t bit_pos = n_ - 2 - l;
      const std::int32_t dbit = (dst >> (bit_pos + 1)) & 1;
      const std::int32_t next = (row & ~(1 << bit_pos)) | (dbit << bit_pos);
      // link id: (layer, from-row, up/down output)
      const std::int32_t dir = (next == row) ? 0 : 1;
      out.push_back(l * links_per_layer() + row * 2 + dir);
      row = next;
    }
  }

  // Number of switch hops of the unique path (one per stage).
  std::int32_t hops() const { return n_; }

 private:
  std::int32_t ports_;
  std::int32_t n_;
};

namespace detail {

// Link set of one demand in one plane (multicast = union of per-dest
// paths; duplicates removed so a tree branch is counted once).
inline std::vector<std::int32_t> demand_links(const ButterflyPlane& plane,
                                              const Demand& d) {
  std::vector<std::int32_t> links;
  for (auto dst : d.dests) plane.path_links(d.src, dst, links);
  std::sort(links.begin(), links.end());
  links.erase(std::unique(links.begin(), links.end()), links.end());
  return links;
}

}  // namespace detail

inline constexpr std::int64_t kRouteNodeBudget = 10000;

// Backtracking assignment of demands to the k butterfly planes. Demands
// are visited sorted by source index, planes tried in ascending order.
// Exceeding the node budget counts as infeasible.
inline RoutingResult route_butterfly_k(const InterconnectConfig& cfg,
                                       const RoutingProblem& problem,
                                       std::int64_t node_budget = kRouteNodeBudget) {
  if (cfg.topology != Topology::Butterfly)
    throw ValidationError("route_butterfly_k: config is not butterfly");
  cfg.validate();
  detail::validate_problem(cfg, problem);

  RoutingResult res;
  res.latency = latency(cfg);

  const ButterflyPlane plane(cfg.ports);
  const std::int32_t k = cfg.expansion;

  std::vector<std::size_t> order(problem.demands.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return problem.demands[a].src < problem.demands[b].src;
  });

  std::vector<std::vector<std::int32_t>> links(problem.demands.size());
  for (std::size_t i = 0; i < links.size(); ++i)
    links[i] = detail::demand_links(plane, problem.demands[i]);

  // used[plane][link]
  std::vector<std::vector<char>> used(
      k, std::vector<char>(std::max(plane.total_links(), 1), 0));
  std::vector<std::int32_t> assign(problem.demands.size(), -1);

  std::int64_t nodes = 0;
  bool budget_hit = false;

  auto fits = [&](std::size_t di, std::int32_t pl) {
    for (auto l : links[di])
      if (used[pl][l]) return false;
    return true;
  };
  auto mark = [&](std::size_t di, std::int32_t pl, char v) {
    for (auto l : links[di]) used[pl][l] = v;
  };

  std::function<bool(std::size_t)> solve = [&](std::size_t idx) -> bool {
    if (idx == order.size()) return true;
    const std::size_t di = order[idx];
    for (std::int32_t pl = 0; pl < k; ++pl) {
      if (++nodes > node_budget) {
        budget_hit = true;
        return false;
      }
      if (!fits(di, pl)) continue;
      mark(di, pl, 1);
      assign[di] = pl;
      if (solve(idx + 1)) return true;
      mark(di, pl, 0);
      assign[di] = -1;
      if (budget_hit) return false;
    }
    return false;
  };

  if (solve(0)) {
    res.feasible = true;
    res.planes = std::move(assign);
  }
  return res;
}

// Crossbar: nonblocking, multicast free; feasible iff the problem is
// destination-exclusive (which validate_problem enforces).
inline RoutingResult route_crossbar(const InterconnectConfig& cfg,
                                    const RoutingProblem& problem) {
  cfg.validate();
  detail::validate_problem(cfg, problem);
  RoutingResult res;
  res.feasible = true;
  res.latency = latency(cfg);
  return res;
}

// Benes with a copy network: modeled as fully routable for every
// destination-exclusive demand set; only its latency and power matter.
inline RoutingResult route_benes_copy(const InterconnectConfig& cfg,
                                      const RoutingProblem& problem) {
  cfg.validate();
  detail::validate_problem(cfg, problem);
  RoutingResult res;
  res.feasible = true;
  res.latency = latency(cfg);
  return res;
}

inline RoutingResult route(const InterconnectConfig& cfg,
                           const RoutingProblem& problem) {
  switch (cfg.topology) {
    case Topology::Butterfly: return route_butterfly_k(cfg, problem);
    case Topology::Crossbar: return route_crossbar(cfg, problem);
    case Topology::BenesCopy: return route_benes_copy(cfg, problem);
  }
  return {};
}

struct InterconnectCost {
  std::int64_t switch_count = 0;
  double mw_per_byte = 0;  // per byte/cycle of sustained bandwidth
};

inline std::int64_t switch_count(Topology t, std::int32_t ports,
                                 std::int32_t k) {
  const std::int64_t n = log2_exact(static_cast<std::uint64_t>(ports));
  switch (t) {
    case Topology::Butterfly: return std::int64_t{k} * (ports / 2) * n;
    case Topology::BenesCopy: return std::int64_t{2} * ports * n;
    case Topology::Crossbar: return std::int64_t{ports} * ports;
  }
  return 0;
}

// Power-per-byte model. Anchored on measured values at N = 256
// (butterfly-1/2/4/8: 0.23/0.52/1.15/2.53, benes 0.92, crossbar 7.36
// mW/byte); other port counts scale with the switches a byte traverses,
// other expansion factors follow the fitted power law in k.
inline InterconnectCost cost_model(const InterconnectConfig& cfg) {
  cfg.validate();
  InterconnectCost out;
  out.switch_count = switch_count(cfg.topology, cfg.ports, cfg.expansion);
  const double n = log2_exact(static_cast<std::uint64_t>(cfg.ports));
  switch (cfg.topology) {
    case Topology::Butterfly: {
      double base;  // mW/byte at N = 256
      switch (cfg.expansion) {
        case 1: base = 0.23; break;
        case 2: base = 0.52; break;
        case 4: base = 1.15; break;
        case 8: base = 2.53; break;
        default:
          // fitted exponent: log2(2.53 / 0.23) / 3
          base = 0.23 * std::pow(double(cfg.expansion),
                                 std::log2(2.53 / 0.23) / 3.0);
      }
      out.mw_per_byte = base * (n / 8.0);
      break;
    }
    case Topology::BenesCopy:
      out.mw_per_byte = 0.92 * ((2.0 * n - 1.0) / 15.0);
      break;
    case Topology::Crossbar:
      out.mw_per_byte = 7.36 * (double(cfg.ports) / 256.0);
      break;
  }
  return out;
}

// ---------------------------------------------------------------------
// Incremental per-slice routing state used by the scheduler. Demands are
// added one at a time; for butterfly a greedy plane fit is tried first
// and a full backtracking re-route on miss. The accepted plane of every
// demand is recorded so schedules carry a verifiable routing certificate.
// ---------------------------------------------------------------------
class SliceRouter {
 public:
  explicit SliceRouter(const InterconnectConfig& cfg)
      : cfg_(cfg), plane_(cfg.ports) {
    if (cfg_.topology == Topology::Butterfly)
      used_.assign(std::size_t(cfg_.expansion) *
                       std::max(plane_.total_links(), 1),
                   0);
    src_of_.assign(cfg_.ports, -1);
    dst_used_.assign(cfg_.ports, 0);
  }

  const InterconnectConfig& config() const { return cfg_; }
  const std::vector<Demand>& demands() const { return demands_; }
  const std::vector<std::int32_t>& planes() const { return planes_; }

  // True if `dst` can be added for `src` without violating port
  // exclusivity (the routing itself is checked by try_add).
  bool dst_free(std::int32_t dst) const { return !dst_used_[dst]; }
  bool src_free_or_same(std::int32_t src, std::int32_t demand_idx) const {
    return src_of_[src] < 0 || src_of_[src] == demand_idx;
  }
  std::int32_t demand_at_src(std::int32_t src) const { return src_of_[src]; }

  // Lightweight transactions so the scheduler can undo a failed
  // placement candidate. Plain appends are popped; multicast extensions
  // and re-routes fall back to a full state backup.
  void begin_txn() {
    txn_active_ = true;
    txn_base_ = demands_.size();
    backup_.reset();
  }
  void commit_txn() {
    txn_active_ = false;
    backup_.reset();
  }
  void rollback_txn() {
    if (backup_) {
      demands_ = std::move(backup_->demands);
      planes_ = std::move(backup_->planes);
      links_of_ = std::move(backup_->links_of);
      used_ = std::move(backup_->used);
      src_of_ = std::move(backup_->src_of);
      dst_used_ = std::move(backup_->dst_used);
      backup_.reset();
    }
    // pop any plain appends made since the transaction began
    while (demands_.size() > txn_base_) {
      const Demand& d = demands_.back();
      src_of_[d.src] = -1;
      for (auto dst : d.dests) dst_used_[dst] = 0;
      if (cfg_.topology == Topology::Butterfly)
        for (auto l : links_of_.back())
          used_[link_index(planes_.back(), l)] = 0;
      demands_.pop_back();
      planes_.pop_back();
      links_of_.pop_back();
    }
    txn_active_ = false;
  }

  // Attempts to add (src -> dst). If the source already drives other
  // destinations, dst joins that demand's multicast set. Returns true and
  // commits on success; leaves the state untouched on failure.
  bool try_add(std::int32_t src, std::int32_t dst) {
    if (dst_used_[dst]) return false;
    const std::int32_t existing = src_of_[src];
    if (cfg_.topology != Topology::Butterfly) {
      if (existing >= 0) {
        save_backup();
        demands_[existing].dests.push_back(dst);
        dst_used_[dst] = 1;
      } else {
        commit(src, dst, 0);
      }
      return true;
    }
    if (existing >= 0) {
      save_backup();
      // extend the multicast tree in the demand's current plane
      const std::int32_t pl = planes_[existing];
      scratch_.clear();
      plane_.path_links(src, dst, scratch_);
      // links already owned by this demand are fine
      for (auto l : scratch_)
        if (used_[link_index(pl, l)] &&
            !owns_link(existing, pl, l))
          return tree_reroute(src, dst);
      for (auto l : scratch_) used_[link_index(pl, l)] = 1;
      demands_[existing].dests.push_back(dst);
      dst_used_[dst] = 1;
      links_of_[existing] = recompute_links(existing);
      return true;
    }
    // new demand: greedy plane scan
    scratch_.clear();
    plane_.path_links(src, dst, scratch_);
    for (std::int32_t pl = 0; pl < cfg_.expansion; ++pl) {
      bool ok = true;
      for (auto l : scratch_)
        if (used_[link_index(pl, l)]) {
          ok = false;
          break;
        }
      if (ok) {
        commit(src, dst, pl);
        return true;
      }
    }
    return full_reroute(src, dst);
  }

  // Routing problem snapshot (for validation / dumping).
  RoutingProblem problem() const {
    RoutingProblem p;
    p.ports = cfg_.ports;
    p.demands = demands_;
    return p;
  }

 private:
  struct Backup {
    std::vector<Demand> demands;
    std::vector<std::int32_t> planes;
    std::vector<std::vector<std::int32_t>> links_of;
    std::vector<char> used;
    std::vector<std::int32_t> src_of;
    std::vector<char> dst_used;
  };

  void save_backup() {
    if (!txn_active_ || backup_) return;
    backup_ = std::make_unique<Backup>();
    backup_->demands = demands_;
    backup_->planes = planes_;
    backup_->links_of = links_of_;
    backup_->used = used_;
    backup_->src_of = src_of_;
    backup_->dst_used = dst_used_;
  }

  std::size_t link_index(std::int32_t pl, std::int32_t link) const {
    return std::size_t(pl) * plane_.total_links() + link;
  }
  bool owns_link(std::int32_t di, std::int32_t pl, std::int32_t link) const {
    if (planes_[di] != pl) return false;
    const auto& ls = links_of_[di];
    return std::binary_search(ls.begin(), ls.end(), link);
  }
  std::vector<std::int32_t> recompute_links(std::int32_t di) const {
    return detail::demand_links(plane_, demands_[di]);
  }
  void commit(std::int32_t src, std::int32_t dst, std::int32_t pl) {
    Demand d;
    d.src = src;
    d.dests.push_back(dst);
    src_of_[src] = static_cast<std::int32_t>(demands_.size());
    dst_used_[dst] = 1;
    if (cfg_.topology == Topology::Butterfly) {
      auto ls = detail::demand_links(plane_, d);
      for (auto l : ls) used_[link_index(pl, l)] = 1;
      links_of_.push_back(std::move(ls));
    } else {
      links_of_.emplace_back();
    }
    planes_.push_back(pl);
    demands_.push_back(std::move(d));
  }

  // Full backtracking re-route of all demands plus the candidate.
  bool full_reroute(std::int32_t src, std::int32_t dst) {
    save_backup();
    RoutingProblem p = problem();
    Demand cand;
    cand.src = src;
    cand.dests.push_back(dst);
    p.demands.push_back(cand);
    RoutingResult r = route_butterfly_k(cfg_, p);
    if (!r.feasible) return false;
    adopt(p, r.planes);
    return true;
  }

  bool tree_reroute(std::int32_t src, std::int32_t dst) {
    save_backup();
    RoutingProblem p = problem();
    p.demands[src_of_[src]].dests.push_back(dst);
    RoutingResult r = route_butterfly_k(cfg_, p);
    if (!r.feasible) return false;
    adopt(p, r.planes);
    return true;
  }

  void adopt(const RoutingProblem& p, const std::vector<std::int32_t>& planes) {
    demands_ = p.demands;
    planes_ = planes;
    std::fill(used_.begin(), used_.end(), 0);
    std::fill(src_of_.begin(), src_of_.end(), -1);
    std::fill(dst_used_.begin(), dst_used_.end(), 0);
    links_of_.assign(demands_.size(), {});
    for (std::size_t i = 0; i < demands_.size(); ++i) {
      src_of_[demands_[i].src] = static_cast<std::int32_t>(i);
      for (auto d : demands_[i].dests) dst_used_[d] = 1;
      links_of_[i] = recompute_links(static_cast<std::int32_t>(i));
      for (auto l : links_of_[i]) used_[link_index(planes_[i], l)] = 1;
    }
  }

  InterconnectConfig cfg_;
  ButterflyPlane plane_;
  std::vector<Demand> demands_;
  std::vector<std::int32_t> planes_;
  std::vector<std::vector<std::int32_t>> links_of_;
  std::vector<char> used_;
  std::vector<std::int32_t> src_of_;
  std::vector<char> dst_used_;
  std::vector<std::int32_t> scratch_;
  bool txn_active_ = false;
  std::size_t txn_base_ = 0;
  std::unique_ptr<Backup> backup_;
};

// Independent check of a routed slice: recomputes every demand's links
// from scratch and verifies port exclusivity and per-plane link
// disjointness of the recorded plane assignment.
inline bool verify_routing(const InterconnectConfig& cfg,
                           const RoutingProblem& problem,
                           const std::vector<std::int32_t>& planes) {
  try {
    detail::validate_problem(cfg, problem);
  } catch (const ValidationError&) {
    return false;
  }
  if (cfg.topology != Topology::Butterfly) return true;
  if (planes.size() != problem.demands.size()) return false;
  ButterflyPlane plane(cfg.ports);
  std::vector<std::vector<char>> used(
      cfg.expansion, std::vector<char>(std::max(plane.total_links(), 1), 0));
  for (std::size_t i = 0; i < problem.demands.size(); ++i) {
    const std::int32_t pl = planes[i];
    if (pl < 0 || pl >= cfg.expansion) return false;
    auto links = detail::demand_links(plane, problem.demands[i]);
    for (auto l : links) {
      if (used[pl][l]) return false;
      used[pl][l] = 1;
    }
  }
  return true;
}

}  // namespace sosa
