#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "ttplan/bench.hpp"
#include "ttplan/cost_model.hpp"
#include "ttplan/device_sim.hpp"
#include "ttplan/executor.hpp"
#include "ttplan/plan.hpp"

using namespace ttplan;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

std::vector<std::uint64_t> parse_u64_list(const std::string& s, const char* what) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split(s, ',')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw InputError(std::string("bad ") + what + " entry '" + item + "'");
    }
  }
  if (out.empty()) throw InputError(std::string("empty ") + what);
  return out;
}

struct TensorArgs {
  std::string dims;
  std::string perm;
  unsigned elem = 8;

  TensorLayout layout() const { return TensorLayout(parse_u64_list(dims, "extent"), elem); }
  Permutation permutation() const {
    const auto p = parse_u64_list(perm, "permutation");
    return Permutation::from_one_based(std::vector<int>(p.begin(), p.end()));
  }
};

void add_tensor_options(CLI::App* app, TensorArgs& t) {
  app->add_option("--dims", t.dims, "Extents, comma separated (dimension 1 first)")->required();
  app->add_option("--perm", t.perm, "Output order as one-based labels, comma separated")->required();
  app->add_option("--elem", t.elem, "Element size in bytes")->check(CLI::IsMember({4u, 8u}));
}

// Plan index given by the user, or the heuristic choice.
std::size_t choose_plan(const std::vector<TransposePlan>& plans, const DeviceProfile& device, int index,
                        std::uint64_t seed) {
  if (index >= 0) {
    if (static_cast<std::size_t>(index) >= plans.size())
      throw InputError("plan index " + std::to_string(index) + " out of range (" + std::to_string(plans.size()) +
                       " plans)");
    return static_cast<std::size_t>(index);
  }
  return select_heuristic(plans, device, seed).index;
}

void print_traffic(std::ostream& os, const TrafficReport& t) {
  os << "ld_req " << t.ld_req << "  st_req " << t.st_req << "\n"
     << "ld_tran " << t.ld_tran << "  st_tran " << t.st_tran << "\n"
     << "cl_full " << t.cl_full << "  cl_part " << t.cl_part << "\n"
     << "shmem_req " << t.shmem_req << "  shmem_tran " << t.shmem_tran << "\n"
     << "shmem_read_req " << t.shmem_read_req << "  shmem_read_tran " << t.shmem_read_tran << "  shmem_read_ideal "
     << t.shmem_read_ideal << "\n";
}

void print_estimate(std::ostream& os, const CostEstimate& e) {
  os << "tpr_mem " << e.tpr_mem << "  mem_lat " << e.mem_lat << "  bytes_req " << e.bytes_req << "\n"
     << "mlp " << e.mlp << "  mwp " << e.mwp << " (mem " << e.mwp_mem << ", peak " << e.mwp_peak << ", warps/SM "
     << e.n_warps_per_sm << ")\n"
     << "cycles_mem " << e.cycles_mem << "  tpr_shmem " << e.tpr_shmem << "  cycles_shmem " << e.cycles_shmem
     << "  cycles_ac " << e.cycles_ac << "\n"
     << "n_iter " << e.n_iter << "  total_cycles " << e.total_cycles << "\n";
  for (const auto& w : e.warnings) os << "warning: " << w << "\n";
}

int cmd_plan(const TensorArgs& t, const std::string& device_name, std::uint64_t seed, const std::string& mode_s,
             bool json) {
  const auto device = resolve_profile(device_name);
  const auto layout = t.layout();
  const auto perm = t.permutation();
  const auto plans = build_all_plans(layout, perm, device);
  const SelectMode mode = parse_select_mode(mode_s);
  const Selection h = select_heuristic(plans, device, seed);
  std::optional<Selection> s;
  if (mode != SelectMode::Heuristic) s = select_simulated(plans, device);

  if (json) {
    std::cout << "{\"plans\": [";
    for (std::size_t i = 0; i < plans.size(); ++i) {
      std::cout << (i ? ",\n" : "\n") << "{\"index\": " << i << ", \"modeled_cycles\": " << h.scores[i];
      if (s) std::cout << ", \"simulated_score\": " << s->scores[i];
      std::cout << ", \"plan\": " << plan_to_json(plans[i]) << "}";
    }
    std::cout << "\n], \"heuristic\": " << h.index;
    if (s) std::cout << ", \"simulated\": " << s->index;
    std::cout << "}\n";
    return 0;
  }

  std::cout << "tensor " << join_extents(layout.extents(), 'x') << " perm ";
  const auto p1 = perm.one_based();
  for (std::size_t i = 0; i < p1.size(); ++i) std::cout << (i ? "," : "") << p1[i];
  std::cout << "  element " << layout.element_size() << " B  device " << device.name << "\n";
  std::cout << std::left << std::setw(5) << "idx" << std::setw(5) << "sel" << std::right << std::setw(16)
            << "model_cycles";
  if (s) std::cout << std::setw(16) << "sim_score";
  std::cout << "  plan\n";
  for (std::size_t i = 0; i < plans.size(); ++i) {
    std::string mark;
    if (i == h.index) mark += "H";
    if (s && i == s->index) mark += "S";
    std::cout << std::left << std::setw(5) << i << std::setw(5) << mark << std::right << std::setw(16)
              << std::setprecision(8) << h.scores[i];
    if (s) std::cout << std::setw(16) << s->scores[i];
    std::cout << "  " << plan_summary(plans[i]) << "\n";
  }
  std::cout << "\nheuristic choice:\n" << plan_to_text(plans[h.index]);
  if (s) std::cout << "\nsimulated choice:\n" << plan_to_text(plans[s->index]);
  return 0;
}

SimScope parse_scope(const std::string& s) {
  if (s == "full") return SimScope::full();
  const auto colon = s.find(':');
  if (colon != std::string::npos) {
    const std::string kind = s.substr(0, colon);
    const auto idx = parse_u64_list(s.substr(colon + 1), "scope index");
    if (idx.size() == 1 && kind == "slice") return SimScope::slice(idx[0]);
    if (idx.size() == 1 && kind == "unit") return SimScope::unit(idx[0]);
  }
  throw InputError("scope must be full, slice:B or unit:U");
}

int cmd_simulate(const TensorArgs& t, const std::string& device_name, std::uint64_t seed, int plan_index,
                 const std::string& scope_s, bool unpadded, bool trace) {
  const auto device = resolve_profile(device_name);
  const auto plans = build_all_plans(t.layout(), t.permutation(), device);
  const auto& plan = plans[choose_plan(plans, device, plan_index, seed)];
  SimConfig cfg = SimConfig::from_profile(device);
  if (unpadded) cfg.tiled_pitch = kTileWidth;
  if (trace) cfg.trace = &std::cout;
  const SimScope scope = parse_scope(scope_s);
  const TrafficReport r = simulate_plan(plan, cfg, scope);

  std::cout << "plan " << plan_summary(plan) << "\n";
  std::cout << "scope " << scope_s << "\n";
  print_traffic(std::cout, r);
  if (scope.kind == SimScope::Kind::Full) {
    std::cout << "verified " << (r.verified ? "yes" : "no") << "  errors " << r.errors << "\n";
    if (!unpadded) {
      std::cout << "model on exact per-slice traffic:\n";
      print_estimate(std::cout, estimate_from_traffic(plan, device, r.scaled(1.0 / static_cast<double>(plan.mbar_volume()))));
    }
  }
  std::cout << "model on sampled traffic:\n";
  print_estimate(std::cout, estimate_cycles(plan, device, seed));
  return r.verified ? 0 : 1;
}

int cmd_exec(const TensorArgs& t, const std::string& device_name, std::uint64_t seed, int plan_index, int workers,
             bool accumulate, bool floating, int reps, const std::string& input_path, const std::string& output_path) {
  const auto device = resolve_profile(device_name);
  const auto layout = t.layout();
  const auto perm = t.permutation();
  const auto plans = build_all_plans(layout, perm, device);
  const auto& plan = plans[choose_plan(plans, device, plan_index, seed)];
  const ElementType type = floating ? ElementType::Floating : ElementType::Unsigned;
  const WriteMode mode = accumulate ? WriteMode::Accumulate : WriteMode::Write;

  TensorBuffer input(layout, type);
  if (!input_path.empty()) {
    std::ifstream f(input_path, std::ios::binary);
    if (!f) throw InputError("cannot open input file " + input_path);
    f.read(reinterpret_cast<char*>(input.bytes()), static_cast<std::streamsize>(input.byte_size()));
    if (static_cast<std::size_t>(f.gcount()) != input.byte_size() || f.peek() != EOF)
      throw InputError("input file size does not match the tensor (" + std::to_string(input.byte_size()) + " bytes)");
  } else {
    input.fill_random(seed);
  }

  TensorBuffer expect(output_layout(layout, perm), type), got(output_layout(layout, perm), type);
  if (accumulate) {
    expect.fill_iota();
    got.fill_iota();
  }
  transpose_scatter_into(input, perm, mode, expect);
  transpose_execute_into(plan, input, mode, workers, got);
  const bool ok = got.same_bytes(expect);
  std::cout << "plan " << plan_summary(plan) << "\n";
  std::cout << "workers " << workers << "  mode " << (accumulate ? "accumulate" : "write") << "\n";
  std::cout << "verified " << (ok ? "yes" : "no") << "\n";
  if (reps > 0) {
    const auto bw = measure_bandwidth(plan, mode, reps, workers);
    std::cout << "median_seconds " << bw.median_seconds << "  bandwidth_gbs " << bw.bytes_per_second / 1e9 << "\n";
  }
  if (!output_path.empty()) {
    std::ofstream f(output_path, std::ios::binary);
    if (!f) throw InputError("cannot open output file " + output_path);
    f.write(reinterpret_cast<const char*>(got.bytes()), static_cast<std::streamsize>(got.byte_size()));
  }
  return ok ? 0 : 1;
}

struct BenchArgs {
  std::string device = "kepler-k20x";
  std::uint64_t seed = 1;
  std::string mode = "heuristic";
  int workers = 1;
  std::string out = "csv";
  std::string output;
  bool timing = false;
  int reps = 3;
  unsigned elem = 8;
};

int run_and_report(const std::vector<BenchCase>& cases, const BenchArgs& a) {
  const auto device = resolve_profile(a.device);
  BenchOptions opt;
  opt.mode = parse_select_mode(a.mode);
  opt.workers = a.workers;
  opt.seed = a.seed;
  opt.timing = a.timing;
  opt.repetitions = a.reps;
  const auto records = run_bench(cases, device, opt);
  const auto summary = summarize_records(records);

  std::ofstream file;
  if (!a.output.empty()) {
    file.open(a.output);
    if (!file) throw InputError("cannot open output file " + a.output);
  }
  std::ostream& rec_os = a.output.empty() ? std::cout : static_cast<std::ostream&>(file);
  if (a.out == "json")
    write_json(rec_os, records, summary, a.timing);
  else
    write_csv(rec_os, records, a.timing);
  write_summary_table(a.output.empty() ? std::cerr : std::cout, summary, a.timing);
  return summary.failures == 0 ? 0 : 1;
}

void add_bench_options(CLI::App* app, BenchArgs& a) {
  app->add_option("--device", a.device, "Built-in profile name or profile file");
  app->add_option("--seed", a.seed, "Seed for case generation and sampling");
  app->add_option("--mode", a.mode, "Plan selection: heuristic, simulated or both")
      ->check(CLI::IsMember({"heuristic", "simulated", "both"}));
  app->add_option("--workers", a.workers, "Worker threads")->check(CLI::PositiveNumber);
  app->add_option("--out", a.out, "Record format")->check(CLI::IsMember({"csv", "json"}));
  app->add_option("--output", a.output, "Write records to this file (summary then goes to stdout)");
  app->add_flag("--timing", a.timing, "Measure host bandwidth (cases run one at a time)");
  app->add_option("--reps", a.reps, "Timing repetitions")->check(CLI::PositiveNumber);
  app->add_option("--elem", a.elem, "Element size in bytes")->check(CLI::IsMember({4u, 8u}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor transpose planner, simulator and benchmark driver"};
  app.require_subcommand(1);

  TensorArgs tensor;
  std::string device = "kepler-k20x";
  std::uint64_t seed = 1;
  int plan_index = -1;

  auto* plan_cmd = app.add_subcommand("plan", "List candidate plans with modeled cost");
  add_tensor_options(plan_cmd, tensor);
  std::string plan_mode = "heuristic";
  bool plan_json = false;
  plan_cmd->add_option("--device", device, "Built-in profile name or profile file");
  plan_cmd->add_option("--seed", seed, "Sampling seed");
  plan_cmd->add_option("--mode", plan_mode, "heuristic, simulated or both")
      ->check(CLI::IsMember({"heuristic", "simulated", "both"}));
  plan_cmd->add_flag("--json", plan_json, "JSON output");

  auto* sim_cmd = app.add_subcommand("simulate", "Count memory traffic of one plan");
  add_tensor_options(sim_cmd, tensor);
  std::string scope = "full";
  bool unpadded = false, trace = false;
  sim_cmd->add_option("--device", device, "Built-in profile name or profile file");
  sim_cmd->add_option("--seed", seed, "Sampling seed");
  sim_cmd->add_option("--plan", plan_index, "Plan index from 'plan' (default: heuristic choice)");
  sim_cmd->add_option("--scope", scope, "full, slice:B or unit:U");
  sim_cmd->add_flag("--unpadded", unpadded, "Tiled staging rows without padding");
  sim_cmd->add_flag("--trace", trace, "Print every warp access");

  auto* exec_cmd = app.add_subcommand("exec", "Run one plan on the host and verify it");
  add_tensor_options(exec_cmd, tensor);
  int workers = 1, reps = 0;
  bool accumulate = false, floating = false;
  std::string input_path, output_path;
  exec_cmd->add_option("--device", device, "Built-in profile name or profile file");
  exec_cmd->add_option("--seed", seed, "Input fill and sampling seed");
  exec_cmd->add_option("--plan", plan_index, "Plan index from 'plan' (default: heuristic choice)");
  exec_cmd->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  exec_cmd->add_flag("--accumulate", accumulate, "Add into the output instead of overwriting");
  exec_cmd->add_flag("--float", floating, "Floating-point elements");
  exec_cmd->add_option("--reps", reps, "Bandwidth repetitions (0: no timing)");
  exec_cmd->add_option("--input", input_path, "Raw little-endian input tensor");
  exec_cmd->add_option("--output", output_path, "Write the transposed tensor here");

  auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark suite");
  bench_cmd->require_subcommand(1);
  BenchArgs bench;
  BenchSpec spec;
  auto* set1_cmd = bench_cmd->add_subcommand("set1", "Random extents with fixed largest/smallest ratios");
  add_bench_options(set1_cmd, bench);
  set1_cmd->add_option("--rank-min", spec.rank_min, "Smallest rank");
  set1_cmd->add_option("--rank-max", spec.rank_max, "Largest rank");
  set1_cmd->add_option("--count", spec.perms_per_rank, "Permutations per rank and ratio");
  set1_cmd->add_option("--mean-volume", spec.mean_volume, "Mean tensor volume");
  set1_cmd->add_option("--sd-volume", spec.sd_volume, "Volume standard deviation");
  set1_cmd->add_option("--ratios", spec.ratios, "Largest/smallest extent ratios")->delimiter(',');

  auto* set2_cmd = bench_cmd->add_subcommand("set2", "Fixed rank-8 and rank-12 shapes");
  add_bench_options(set2_cmd, bench);
  std::uint64_t scale = 4;
  int random_perms = 8;
  set2_cmd->add_option("--scale", scale, "Divide the four largest extents by this (minimum extent 2)");
  set2_cmd->add_option("--count", random_perms, "Random permutations per shape");

  auto* custom_cmd = bench_cmd->add_subcommand("custom", "Cases from a file: 'extents | perm [| elem]' per line");
  add_bench_options(custom_cmd, bench);
  std::string case_file;
  custom_cmd->add_option("file", case_file, "Case file")->required();

  auto* profile_cmd = app.add_subcommand("profile", "Device profiles");
  profile_cmd->require_subcommand(1);
  auto* plist = profile_cmd->add_subcommand("list", "List built-in profiles");
  auto* pshow = profile_cmd->add_subcommand("show", "Print one profile");
  std::string profile_name;
  pshow->add_option("name", profile_name, "Built-in name or profile file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan_cmd) return cmd_plan(tensor, device, seed, plan_mode, plan_json);
    if (*sim_cmd) return cmd_simulate(tensor, device, seed, plan_index, scope, unpadded, trace);
    if (*exec_cmd)
      return cmd_exec(tensor, device, seed, plan_index, workers, accumulate, floating, reps, input_path, output_path);
    if (*set1_cmd) {
      spec.element_size = bench.elem;
      return run_and_report(gen_set1(spec, bench.seed), bench);
    }
    if (*set2_cmd) return run_and_report(gen_set2(scale, random_perms, bench.seed, bench.elem), bench);
    if (*custom_cmd) return run_and_report(load_custom_cases(case_file, bench.elem), bench);
    if (*plist) {
      std::cout << std::left << std::setw(14) << "name" << std::right << std::setw(6) << "SMs" << std::setw(12)
                << "mem_bw GB/s" << std::setw(10) << "freq MHz" << std::setw(8) << "delta" << std::setw(10)
                << "baselat" << std::setw(10) << "shmem_lat" << std::setw(10) << "cycles_ac" << "\n";
      for (const auto& p : builtin_profiles())
        std::cout << std::left << std::setw(14) << p.name << std::right << std::setw(6) << p.n_sm << std::setw(12)
                  << p.mem_bw / 1e9 << std::setw(10) << p.freq / 1e6 << std::setw(8) << p.delta << std::setw(10)
                  << p.mem_baselat << std::setw(10) << p.shmem_lat << std::setw(10) << p.cycles_ac << "\n";
      return 0;
    }
    if (*pshow) {
      std::cout << profile_to_text(resolve_profile(profile_name));
      return 0;
    }
  } catch (const SizeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
