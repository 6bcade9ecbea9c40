// SPDX-License-Identifier: Apache-2.0
//
// Command-line frontend: schedule | simulate | dse | ict-bench.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sosa/dse.hpp"
#include "sosa/interconnect.hpp"
#include "sosa/powermodel.hpp"
#include "sosa/scheduler.hpp"
#include "sosa/simulator.hpp"
#include "sosa/tiling.hpp"
#include "sosa/workload.hpp"

namespace {

using nlohmann::json;

struct RunConfig {
  std::vector<std::string> models;
  std::int32_t rows = 32;
  std::int32_t cols = 32;
  std::int32_t multicast_u = 16;
  std::int32_t fanin_v = 16;
  std::int32_t pods = 0;
  double tdp = 0;
  std::string topology = "butterfly";
  std::int32_t expansion = 2;
  std::int64_t bank_bytes = 256 * 1024;
  std::int64_t k_part = 0;
  std::int32_t batch = 0;  // 0: keep the model file's batch
  std::string params_file;
  std::string out = "out";
  std::uint64_t seed = 1;
};

sosa::Topology parse_topology(const std::string& s) {
  if (s == "butterfly") return sosa::Topology::Butterfly;
  if (s == "benes" || s == "benes_copy") return sosa::Topology::BenesCopy;
  if (s == "crossbar") return sosa::Topology::Crossbar;
  throw sosa::ConfigError("unknown topology: " + s);
}

sosa::EnergyParams load_params(const std::string& path) {
  sosa::EnergyParams p;
  if (path.empty()) return p;
  std::ifstream in(path);
  if (!in) throw sosa::ConfigError("cannot open params file: " + path);
  json j = json::parse(in);
  p.e_mac_pj = j.value("e_mac_pj", p.e_mac_pj);
  p.e_sram_pj_byte = j.value("e_sram_pj_byte", p.e_sram_pj_byte);
  p.e_post_pj_elem = j.value("e_post_pj_elem", p.e_post_pj_elem);
  p.clock_hz = j.value("clock_hz", p.clock_hz);
  p.tdp_w = j.value("tdp_w", p.tdp_w);
  p.cal_sram = j.value("cal_sram", p.cal_sram);
  p.cal_arrays = j.value("cal_arrays", p.cal_arrays);
  p.cal_interconnect = j.value("cal_interconnect", p.cal_interconnect);
  p.cal_misc = j.value("cal_misc", p.cal_misc);
  p.validate();
  return p;
}

std::vector<sosa::ModelGraph> load_models(const RunConfig& cfg) {
  std::vector<sosa::ModelGraph> out;
  for (const auto& path : cfg.models) {
    sosa::ModelGraph m = sosa::load_model(path);
    if (cfg.batch > 0) {
      // rebuild with the requested batch
      std::ifstream in(path);
      json j = json::parse(in);
      j["batch"] = cfg.batch;
      m = sosa::model_from_json(j);
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::int32_t resolve_pods(const RunConfig& cfg,
                          const sosa::EnergyParams& params) {
  if ((cfg.pods > 0) == (cfg.tdp > 0))
    throw sosa::ConfigError("give exactly one of --pods and --tdp");
  if (cfg.pods > 0) return cfg.pods;
  sosa::EnergyParams p = params;
  p.tdp_w = cfg.tdp;
  return sosa::pods_for_tdp(cfg.rows, cfg.cols, parse_topology(cfg.topology),
                            cfg.expansion, p);
}

json schedule_to_json(const sosa::Schedule& s) {
  json out;
  out["pods"] = {{"pods", s.pods.pods},   {"rows", s.pods.rows},
                 {"cols", s.pods.cols},   {"multicast_u", s.pods.multicast_u},
                 {"fanin_v", s.pods.fanin_v}};
  out["net"] = {{"topology", sosa::topology_name(s.net.topology)},
                {"ports", s.net.ports},
                {"expansion", s.net.expansion}};
  out["banks"] = s.banks;
  out["weight_reuse"] = s.weight_reuse;
  out["op_slice"] = s.op_slice;
  out["group_done"] = s.group_done;
  out["chained_psums"] = s.chained_psums;
  out["post_adds"] = s.post_adds;
  json slices = json::array();
  for (const auto& sl : s.slices) {
    json pods = json::array();
    for (const auto& a : sl.assignments)
      pods.push_back({{"pod", a.pod},
                      {"tile", a.op},
                      {"x_bank", a.x_bank},
                      {"w_bank", a.w_bank},
                      {"w_reload", a.w_reload},
                      {"psum_in_bank", a.psum_in_bank},
                      {"psum_in_op",
                       a.psum_in_op == sosa::kNoOp
                           ? -1
                           : static_cast<std::int64_t>(a.psum_in_op)},
                      {"psum_out_bank", a.psum_out_bank}});
    json post = json::array();
    for (const auto& p : sl.post_ops)
      post.push_back({{"kind", p.kind == sosa::PostOp::Kind::Add
                                   ? "add"
                                   : "activate"},
                      {"pp", p.pp},
                      {"layer", p.layer},
                      {"group", p.group},
                      {"m", p.m},
                      {"p", p.p},
                      {"bank_a", p.bank_a},
                      {"bank_b", p.bank_b},
                      {"bank_out", p.bank_out}});
    json routes = json::array();
    for (int n = 0; n < 4; ++n)
      routes.push_back({{"srcs", sl.routing[n].srcs},
                        {"planes", sl.routing[n].planes}});
    slices.push_back(
        {{"pods", pods}, {"post", post}, {"routes", routes}});
  }
  out["slices"] = std::move(slices);
  return out;
}

sosa::Schedule schedule_from_json(const json& j) {
  sosa::Schedule s;
  s.pods.pods = j.at("pods").at("pods").get<std::int32_t>();
  s.pods.rows = j.at("pods").at("rows").get<std::int32_t>();
  s.pods.cols = j.at("pods").at("cols").get<std::int32_t>();
  s.pods.multicast_u = j.at("pods").at("multicast_u").get<std::int32_t>();
  s.pods.fanin_v = j.at("pods").at("fanin_v").get<std::int32_t>();
  s.net.topology = parse_topology(j.at("net").at("topology"));
  s.net.ports = j.at("net").at("ports").get<std::int32_t>();
  s.net.expansion = j.at("net").at("expansion").get<std::int32_t>();
  s.banks = j.at("banks").get<std::int32_t>();
  s.weight_reuse = j.at("weight_reuse").get<bool>();
  s.op_slice = j.at("op_slice").get<std::vector<std::int32_t>>();
  s.group_done = j.at("group_done").get<std::vector<std::int32_t>>();
  s.chained_psums = j.at("chained_psums").get<std::int64_t>();
  s.post_adds = j.at("post_adds").get<std::int64_t>();
  for (const auto& jsl : j.at("slices")) {
    sosa::Slice sl;
    for (const auto& ja : jsl.at("pods")) {
      sosa::Assignment a;
      a.pod = ja.at("pod").get<std::int32_t>();
      a.op = ja.at("tile").get<std::uint32_t>();
      a.x_bank = ja.at("x_bank").get<std::int32_t>();
      a.w_bank = ja.at("w_bank").get<std::int32_t>();
      a.w_reload = ja.at("w_reload").get<bool>();
      a.psum_in_bank = ja.at("psum_in_bank").get<std::int32_t>();
      const auto pin = ja.at("psum_in_op").get<std::int64_t>();
      a.psum_in_op =
          pin < 0 ? sosa::kNoOp : static_cast<std::uint32_t>(pin);
      a.psum_out_bank = ja.at("psum_out_bank").get<std::int32_t>();
      sl.assignments.push_back(a);
    }
    for (const auto& jp : jsl.at("post")) {
      sosa::PostOp p;
      p.kind = jp.at("kind") == "add" ? sosa::PostOp::Kind::Add
                                      : sosa::PostOp::Kind::Activate;
      p.pp = jp.at("pp").get<std::int32_t>();
      p.layer = jp.at("layer").get<std::int32_t>();
      p.group = jp.at("group").get<std::int64_t>();
      p.m = jp.at("m").get<std::int32_t>();
      p.p = jp.at("p").get<std::int32_t>();
      p.bank_a = jp.at("bank_a").get<std::int32_t>();
      p.bank_b = jp.at("bank_b").get<std::int32_t>();
      p.bank_out = jp.at("bank_out").get<std::int32_t>();
      sl.post_ops.push_back(p);
    }
    int n = 0;
    for (const auto& jr : jsl.at("routes")) {
      sl.routing[n].srcs = jr.at("srcs").get<std::vector<std::int32_t>>();
      sl.routing[n].planes =
          jr.at("planes").get<std::vector<std::int32_t>>();
      ++n;
    }
    s.slices.push_back(std::move(sl));
  }
  return s;
}

void write_file(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path())
    std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw sosa::ConfigError("cannot write " + path);
  out << content;
}

struct Built {
  sosa::TileGraph tg;
  sosa::Schedule sched;
  sosa::PodConfig pc;
  sosa::InterconnectConfig net;
};

Built build_and_schedule(const RunConfig& cfg,
                         const sosa::EnergyParams& params) {
  auto models = load_models(cfg);
  std::vector<sosa::TileGraph> gs;
  for (const auto& m : models)
    gs.push_back(sosa::build_tile_graph(m, cfg.rows, cfg.cols, cfg.k_part));
  Built b;
  b.tg = gs.size() == 1 ? std::move(gs[0]) : sosa::merge_tile_graphs(gs);
  const std::int32_t P = resolve_pods(cfg, params);
  b.pc.pods = P;
  b.pc.rows = cfg.rows;
  b.pc.cols = cfg.cols;
  b.pc.multicast_u = cfg.multicast_u;
  b.pc.fanin_v = cfg.fanin_v;
  b.pc.clock_hz = params.clock_hz;
  b.net.topology = parse_topology(cfg.topology);
  b.net.ports = P;
  b.net.expansion = cfg.expansion;
  b.sched = sosa::schedule(b.tg, b.pc, P, b.net);
  return b;
}

json stats_to_json(const sosa::SimStats& st, const sosa::EnergyBreakdown& e) {
  return json{
      {"makespan_cycles", st.makespan_cycles},
      {"cycles_per_tile_op", st.cycles_per_tile_op},
      {"utilization", st.utilization},
      {"busy_pod_fraction", st.busy_pod_fraction},
      {"useful_macs", st.useful_macs},
      {"sram_read_bytes", st.sram_read_bytes},
      {"sram_write_bytes", st.sram_write_bytes},
      {"net_bytes",
       {st.net_bytes[0], st.net_bytes[1], st.net_bytes[2], st.net_bytes[3]}},
      {"dram_bytes", st.residency.total_dram_bytes()},
      {"activation_evictions", st.residency.activation_evictions},
      {"weight_evictions", st.residency.weight_evictions},
      {"energy_pj",
       {{"compute", e.compute_pj},
        {"sram", e.sram_pj},
        {"interconnect", e.interconnect_pj},
        {"post", e.post_pj},
        {"total", e.total_pj()}}}};
}

int cmd_schedule(const RunConfig& cfg) {
  const auto params = load_params(cfg.params_file);
  Built b = build_and_schedule(cfg, params);
  const auto violations = sosa::validate(b.sched, b.tg, b.net);
  if (!violations.empty()) {
    json err = {{"error", "schedule failed validation"},
                {"violations", violations}};
    std::cerr << err.dump(2) << "\n";
    return 2;
  }
  write_file(cfg.out + "/schedule.json", schedule_to_json(b.sched).dump(1));
  std::cout << "tile ops: " << b.tg.size()
            << "\nslices: " << b.sched.slices.size()
            << "\nchained psums: " << b.sched.chained_psums
            << "\npost adds: " << b.sched.post_adds
            << "\nschedule: " << cfg.out << "/schedule.json\n";
  return 0;
}

int cmd_simulate(const RunConfig& cfg, const std::string& schedule_file) {
  const auto params = load_params(cfg.params_file);
  sosa::TileGraph tg;
  sosa::Schedule sched;
  if (!schedule_file.empty()) {
    auto models = load_models(cfg);
    std::vector<sosa::TileGraph> gs;
    for (const auto& m : models)
      gs.push_back(
          sosa::build_tile_graph(m, cfg.rows, cfg.cols, cfg.k_part));
    tg = gs.size() == 1 ? std::move(gs[0]) : sosa::merge_tile_graphs(gs);
    std::ifstream in(schedule_file);
    if (!in)
      throw sosa::ConfigError("cannot open schedule: " + schedule_file);
    sched = schedule_from_json(json::parse(in));
  } else {
    Built b = build_and_schedule(cfg, params);
    tg = std::move(b.tg);
    sched = std::move(b.sched);
  }
  if (tg.size() == 0) {
    sosa::SimStats zero;
    write_file(cfg.out + "/stats.json",
               stats_to_json(zero, {}).dump(1) + "\n");
    std::cout << "empty model: zero stats written\n";
    return 0;
  }
  const auto violations = sosa::validate(sched, tg, sched.net);
  if (!violations.empty()) {
    json err = {{"error", "schedule failed validation"},
                {"violations", violations}};
    std::cerr << err.dump(2) << "\n";
    return 2;
  }
  sosa::BankConfig bc;
  bc.bank_bytes = cfg.bank_bytes;
  const sosa::SimStats st = sosa::simulate(tg, sched, bc);
  const auto energy = sosa::run_energy(st, sched.net, params);
  write_file(cfg.out + "/stats.json",
             stats_to_json(st, energy).dump(1) + "\n");
  // pod occupancy matrix for plotting
  std::ostringstream occ;
  occ << "slice,busy_pods,pods\n";
  for (std::size_t l = 0; l < sched.slices.size(); ++l)
    occ << l << ',' << sched.slices[l].assignments.size() << ','
        << sched.pods.pods << '\n';
  write_file(cfg.out + "/occupancy.csv", occ.str());
  std::cout << "makespan: " << st.makespan_cycles
            << " cycles\nutilization: " << st.utilization
            << "\nbusy-pod fraction: " << st.busy_pod_fraction
            << "\nstats: " << cfg.out << "/stats.json\n";
  return 0;
}

int cmd_dse(const RunConfig& cfg, const std::string& preset,
            bool full_scale) {
  auto params = load_params(cfg.params_file);
  if (cfg.tdp > 0) params.tdp_w = cfg.tdp;
  auto models = load_models(cfg);
  if (models.empty())
    throw sosa::ConfigError("dse needs at least one --model");
  const std::int32_t cap = full_scale ? 0 : 64;

  if (preset == "shape") {
    std::vector<std::pair<std::int32_t, std::int32_t>> grid;
    for (std::int32_t r : {8, 16, 24, 32, 48, 64, 96, 128})
      for (std::int32_t c : {8, 16, 24, 32, 48, 64, 96, 128})
        grid.emplace_back(r, c);
    auto res = sosa::sweep_shape(grid, models, params, cap);
    write_file(cfg.out + "/shape.csv", sosa::dse_csv(res));
    std::cout << "wrote " << cfg.out << "/shape.csv\n";
  } else if (preset == "granularity") {
    auto res = sosa::sweep_granularity({16, 32, 64, 128, 256, 512}, models,
                                       params, cap);
    write_file(cfg.out + "/granularity.csv", sosa::dse_csv(res));
    std::cout << "wrote " << cfg.out << "/granularity.csv\n";
  } else if (preset == "partition") {
    const std::int64_t r = cfg.rows;
    auto res = sosa::sweep_partition({r / 2, r, 2 * r, 1 << 30}, models,
                                     params, cfg.pods > 0 ? cfg.pods : 64);
    write_file(cfg.out + "/partition.csv", sosa::dse_csv(res));
    std::cout << "wrote " << cfg.out << "/partition.csv\n";
  } else if (preset == "banks") {
    auto res = sosa::sweep_banks(
        {64 << 10, 128 << 10, 256 << 10, 512 << 10, 1 << 20}, models,
        params, cfg.pods > 0 ? cfg.pods : 64);
    write_file(cfg.out + "/banks.csv", sosa::dse_csv(res));
    std::cout << "wrote " << cfg.out << "/banks.csv\n";
  } else if (preset == "tenancy") {
    auto tr = sosa::sweep_tenancy(models, params,
                                  cfg.pods > 0 ? cfg.pods : 64);
    std::ostringstream os;
    os << "mode,utilization,eff_teraops,eff_gops_per_w\n";
    os << "together," << tr.together.utilization << ','
       << tr.together.eff_ops / 1e12 << ','
       << tr.together.eff_ops_per_w / 1e9 << '\n';
    os << "sequential," << tr.sequential.utilization << ','
       << tr.sequential.eff_ops / 1e12 << ','
       << tr.sequential.eff_ops_per_w / 1e9 << '\n';
    os << "speedup," << tr.speedup << ",,\n";
    write_file(cfg.out + "/tenancy.csv", os.str());
    std::cout << "wrote " << cfg.out << "/tenancy.csv\n";
  } else {
    throw sosa::ConfigError("unknown preset: " + preset);
  }
  return 0;
}

int cmd_ict_bench(const RunConfig& cfg, std::int32_t trials) {
  std::mt19937_64 rng(cfg.seed);
  std::ostringstream os;
  os << "topology,ports,expansion,feasibility_rate,latency_cycles,"
        "mw_per_byte,switches\n";
  struct Row {
    sosa::Topology t;
    std::int32_t k;
  };
  std::vector<Row> rows = {{sosa::Topology::Butterfly, 1},
                           {sosa::Topology::Butterfly, 2},
                           {sosa::Topology::Butterfly, 4},
                           {sosa::Topology::Butterfly, 8},
                           {sosa::Topology::BenesCopy, 1},
                           {sosa::Topology::Crossbar, 1}};
  const std::int32_t N = cfg.pods > 0 ? cfg.pods : 64;
  for (const Row& row : rows) {
    sosa::InterconnectConfig net;
    net.topology = row.t;
    net.ports = N;
    net.expansion = row.k;
    std::int32_t feasible = 0;
    for (std::int32_t t = 0; t < trials; ++t) {
      // random destination-exclusive demand set: a random partial
      // permutation with half the ports active
      std::vector<std::int32_t> perm(N);
      for (std::int32_t i = 0; i < N; ++i) perm[i] = i;
      std::shuffle(perm.begin(), perm.end(), rng);
      sosa::RoutingProblem p;
      p.ports = N;
      for (std::int32_t i = 0; i < N / 2; ++i) {
        sosa::Demand d;
        d.src = i;
        d.dests.push_back(perm[i]);
        p.demands.push_back(d);
      }
      if (sosa::route(net, p).feasible) ++feasible;
    }
    const auto cost = sosa::cost_model(net);
    os << sosa::topology_name(row.t) << ',' << N << ',' << row.k << ','
       << double(feasible) / trials << ',' << sosa::latency(net) << ','
       << cost.mw_per_byte << ',' << cost.switch_count << '\n';
  }
  write_file(cfg.out + "/ict.csv", os.str());
  std::cout << "wrote " << cfg.out << "/ict.csv\n";
  return 0;
}

void add_common(CLI::App* app, RunConfig& cfg) {
  app->add_option("--model", cfg.models, "model description JSON (repeatable)")
      ->envname("SOSA_MODEL");
  app->add_option("--rows", cfg.rows, "array rows r")->envname("SOSA_ROWS");
  app->add_option("--cols", cfg.cols, "array cols c")->envname("SOSA_COLS");
  app->add_option("--pods", cfg.pods, "pod count P")->envname("SOSA_PODS");
  app->add_option("--tdp", cfg.tdp, "TDP in W (derives P)")
      ->envname("SOSA_TDP");
  app->add_option("--topology", cfg.topology,
                  "butterfly | benes_copy | crossbar")
      ->envname("SOSA_TOPOLOGY");
  app->add_option("--expansion", cfg.expansion, "butterfly expansion k")
      ->envname("SOSA_EXPANSION");
  app->add_option("--bank-size", cfg.bank_bytes, "SRAM bank bytes")
      ->envname("SOSA_BANK_SIZE");
  app->add_option("--kpart", cfg.k_part,
                  "activation partition size (0 = r)")
      ->envname("SOSA_KPART");
  app->add_option("--batch", cfg.batch, "override model batch")
      ->envname("SOSA_BATCH");
  app->add_option("--params", cfg.params_file, "energy parameter JSON")
      ->envname("SOSA_PARAMS");
  app->add_option("--out", cfg.out, "output directory")
      ->envname("SOSA_OUT");
  app->add_option("--seed", cfg.seed, "RNG seed")->envname("SOSA_SEED");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"systolic-pod scale-out simulator and scheduling compiler"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string schedule_file, preset = "granularity";
  bool full_scale = false;
  std::int32_t trials = 1000;

  CLI::App* sch = app.add_subcommand("schedule", "compile a schedule");
  add_common(sch, cfg);
  CLI::App* sim = app.add_subcommand("simulate", "simulate a schedule");
  add_common(sim, cfg);
  sim->add_option("--schedule", schedule_file,
                  "previously dumped schedule.json");
  CLI::App* dse = app.add_subcommand("dse", "design-space sweeps");
  add_common(dse, cfg);
  dse->add_option("--preset", preset,
                  "shape | granularity | partition | banks | tenancy");
  dse->add_flag("--full-scale", full_scale, "no pod cap (slow)");
  CLI::App* ict = app.add_subcommand("ict-bench", "interconnect benchmark");
  add_common(ict, cfg);
  ict->add_option("--trials", trials, "random demand sets per topology");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sch->parsed()) return cmd_schedule(cfg);
    if (sim->parsed()) return cmd_simulate(cfg, schedule_file);
    if (dse->parsed()) return cmd_dse(cfg, preset, full_scale);
    if (ict->parsed()) return cmd_ict_bench(cfg, trials);
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
