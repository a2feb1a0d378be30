#include "ttplan/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "json_util.hpp"
#include "ttplan/executor.hpp"
#include "ttplan/traffic_key.hpp"

namespace ttplan {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join_ints(const std::vector<int>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
  return s;
}

Permutation random_perm(int rank, std::mt19937_64& rng) {
  std::vector<Dim> order(static_cast<std::size_t>(rank));
  for (int i = 0; i < rank; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  return Permutation(std::move(order));
}

double log_volume(const std::vector<std::uint64_t>& e) {
  double s = 0;
  for (auto x : e) s += std::log(static_cast<double>(x));
  return s;
}

std::vector<std::uint64_t> parse_list(const std::string& field, int lineno, const char* what) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(field);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw InputError("line " + std::to_string(lineno) + ": empty entry in " + what);
    item = item.substr(b, e - b + 1);
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v < 0)
      throw InputError("line " + std::to_string(lineno) + ": bad " + what + " entry '" + item + "'");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  if (out.empty()) throw InputError("line " + std::to_string(lineno) + ": empty " + what);
  return out;
}

}  // namespace

std::string join_extents(const std::vector<std::uint64_t>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
  return s;
}

void BenchSpec::validate() const {
  if (rank_min < 1 || rank_max < rank_min) throw InputError("bad rank range");
  if (mean_volume <= 0 || sd_volume < 0) throw InputError("volume parameters must be positive");
  if (ratios.empty()) throw InputError("at least one extent ratio is required");
  for (int r : ratios)
    if (r < 1) throw InputError("extent ratio must be at least 1");
  if (perms_per_rank < 1) throw InputError("permutation count must be positive");
  if (element_size != 4 && element_size != 8) throw InputError("element size must be 4 or 8");
}

std::vector<std::uint64_t> set1_extents(int rank, double target_volume, int ratio, std::uint64_t seed) {
  if (rank < 1 || target_volume < 1 || ratio < 1) throw InputError("invalid extent request");
  const double log_v = std::log(target_volume);
  if (ratio == 1 || rank == 1) {
    if (ratio != 1) throw InputError("rank-1 tensors only admit ratio 1");
    const double e = std::exp(log_v / rank);
    const auto lo = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(e)));
    const std::uint64_t hi = lo + 1;
    const double dlo = std::abs(rank * std::log(static_cast<double>(lo)) - log_v);
    const double dhi = std::abs(rank * std::log(static_cast<double>(hi)) - log_v);
    return std::vector<std::uint64_t>(static_cast<std::size_t>(rank), dlo <= dhi ? lo : hi);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_r = std::log(static_cast<double>(ratio));
  const double tol_v = std::log(1.05);
  for (int attempt = 0; attempt < 4000; ++attempt) {
    std::vector<double> u(static_cast<std::size_t>(rank));
    for (auto& x : u) x = unit(rng);
    const auto imin = static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(rank));
    auto imax = static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(rank - 1));
    if (imax >= imin) ++imax;
    u[imin] = 0.0;
    u[imax] = 1.0;
    double su = 0;
    for (double x : u) su += x;
    const double log_e = (log_v - log_r * su) / rank;
    std::vector<std::uint64_t> ext(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
      ext[i] = std::max<std::int64_t>(1, std::llround(std::exp(log_e + log_r * u[i])));

    // Nudge the free extents by one until the volume lands within tolerance.
    for (int step = 0; step < 256 && std::abs(log_volume(ext) - log_v) > tol_v; ++step) {
      double best = std::abs(log_volume(ext) - log_v);
      std::size_t best_i = ext.size();
      int best_d = 0;
      for (std::size_t i = 0; i < ext.size(); ++i) {
        if (i == imin || i == imax) continue;
        for (int d : {-1, 1}) {
          if (d < 0 && ext[i] <= ext[imin]) continue;
          if (d > 0 && ext[i] >= ext[imax]) continue;
          ext[i] = static_cast<std::uint64_t>(static_cast<std::int64_t>(ext[i]) + d);
          const double err = std::abs(log_volume(ext) - log_v);
          ext[i] = static_cast<std::uint64_t>(static_cast<std::int64_t>(ext[i]) - d);
          if (err < best) {
            best = err;
            best_i = i;
            best_d = d;
          }
        }
      }
      if (best_i == ext.size()) break;
      ext[best_i] = static_cast<std::uint64_t>(static_cast<std::int64_t>(ext[best_i]) + best_d);
    }
    const auto [mn, mx] = std::minmax_element(ext.begin(), ext.end());
    const double got_ratio = static_cast<double>(*mx) / static_cast<double>(*mn);
    if (std::abs(log_volume(ext) - log_v) <= tol_v && got_ratio >= 0.9 * ratio && got_ratio <= 1.1 * ratio) return ext;
  }
  throw InputError("cannot generate rank-" + std::to_string(rank) + " extents with ratio " + std::to_string(ratio) +
                   " near volume " + fmt(target_volume));
}

std::vector<BenchCase> gen_set1(const BenchSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::vector<BenchCase> cases;
  for (int ratio : spec.ratios) {
    for (int rank = spec.rank_min; rank <= spec.rank_max; ++rank) {
      for (int i = 0; i < spec.perms_per_rank; ++i) {
        std::normal_distribution<double> vol_dist(spec.mean_volume, spec.sd_volume);
        const double target = std::max(vol_dist(rng), static_cast<double>(rank));
        const std::uint64_t ext_seed = rng();
        auto ext = set1_extents(rank, target, ratio, ext_seed);
        Permutation perm = random_perm(rank, rng);
        cases.push_back({TensorLayout(std::move(ext), spec.element_size), std::move(perm),
                         "rank" + std::to_string(rank) + " ratio" + std::to_string(ratio)});
      }
    }
  }
  return cases;
}

std::vector<std::vector<std::uint64_t>> set2_shapes(std::uint64_t scale) {
  if (scale < 1) throw InputError("scale must be at least 1");
  std::vector<std::vector<std::uint64_t>> shapes = {{5, 3, 2, 4, 35, 33, 37, 40},
                                                    {2, 3, 4, 3, 2, 2, 3, 2, 20, 18, 22, 24}};
  for (auto& s : shapes)
    for (std::size_t i = s.size() - 4; i < s.size(); ++i) s[i] = std::max<std::uint64_t>(2, s[i] / scale);
  return shapes;
}

std::vector<BenchCase> gen_set2(std::uint64_t scale, int random_perms, std::uint64_t seed, unsigned element_size) {
  if (random_perms < 0) throw InputError("permutation count must not be negative");
  std::mt19937_64 rng(seed);
  std::vector<BenchCase> cases;
  for (const auto& shape : set2_shapes(scale)) {
    const int n = static_cast<int>(shape.size());
    const TensorLayout layout(shape, element_size);
    const std::string r = "rank" + std::to_string(n);
    cases.push_back({layout, Permutation::identity(n), r + " trivial"});
    std::vector<Dim> rev(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) rev[static_cast<std::size_t>(i)] = n - 1 - i;
    cases.push_back({layout, Permutation(rev), r + " reverse"});
    for (int i = 0; i < random_perms; ++i) cases.push_back({layout, random_perm(n, rng), r + " random"});
  }
  return cases;
}

std::vector<BenchCase> parse_custom_cases(const std::string& text, unsigned default_element_size) {
  std::vector<BenchCase> cases;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '|')) fields.push_back(f);
    if (fields.size() < 2 || fields.size() > 3)
      throw InputError("line " + std::to_string(lineno) + ": expected 'extents | permutation [| element_size]'");
    const auto ext = parse_list(fields[0], lineno, "extent");
    const auto perm_u = parse_list(fields[1], lineno, "permutation");
    unsigned elem = default_element_size;
    if (fields.size() == 3) elem = static_cast<unsigned>(parse_list(fields[2], lineno, "element size").at(0));
    try {
      if (perm_u.size() != ext.size()) throw InputError("permutation length differs from rank");
      std::vector<int> perm_i(perm_u.begin(), perm_u.end());
      cases.push_back({TensorLayout(ext, elem), Permutation::from_one_based(perm_i), "custom"});
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cases;
}

std::vector<BenchCase> load_custom_cases(const std::string& path, unsigned default_element_size) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open case file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_custom_cases(ss.str(), default_element_size);
}

std::string dump_custom_cases(const std::vector<BenchCase>& cases) {
  std::ostringstream os;
  for (const auto& c : cases)
    os << join_extents(c.layout.extents(), ',') << " | " << join_ints(c.perm.one_based(), ',') << " | "
       << c.layout.element_size() << '\n';
  return os.str();
}

SelectMode parse_select_mode(const std::string& s) {
  if (s == "heuristic") return SelectMode::Heuristic;
  if (s == "simulated") return SelectMode::Simulated;
  if (s == "both") return SelectMode::Both;
  throw InputError("mode must be heuristic, simulated or both");
}

namespace {

BenchRecord run_case(std::size_t index, const BenchCase& c, const DeviceProfile& device, const BenchOptions& opt,
                     int exec_workers) {
  BenchRecord rec;
  rec.index = index;
  rec.bench_case = c;
  try {
    const auto plans = build_all_plans(c.layout, c.perm, device);
    rec.plan_count = plans.size();
    const std::uint64_t vol = c.layout.volume();
    const bool can_sim = vol <= opt.sim_cap;

    const Selection h = select_heuristic(plans, device, opt.seed);
    rec.heuristic_plan = plans[h.index];
    rec.heuristic_cycles = h.scores[h.index];

    std::optional<Selection> s;
    if (opt.mode != SelectMode::Heuristic && can_sim) {
      s = select_simulated(plans, device, opt.sim_cap);
      rec.simulated_plan = plans[s->index];
      rec.simulated_score = s->scores[s->index];
      rec.heuristic_score = s->scores[h.index];
      rec.match = traffic_key(plans[h.index]) == traffic_key(plans[s->index]);
    }
    if (can_sim) {
      SimConfig cfg = SimConfig::from_profile(device);
      cfg.volume_cap = opt.sim_cap;
      rec.heuristic_traffic = simulate_plan(*rec.heuristic_plan, cfg);
      if (!s) rec.heuristic_score = simulated_score(*rec.heuristic_traffic);
      if (!rec.heuristic_traffic->verified) rec.error = "simulated schedule misplaces elements";
    }

    const TransposePlan& run = opt.mode == SelectMode::Simulated && rec.simulated_plan ? *rec.simulated_plan
                                                                                         : *rec.heuristic_plan;
    if (vol <= opt.verify_cap) {
      TensorBuffer input(c.layout);
      input.fill_random(opt.seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
      const TensorBuffer expect = transpose_scatter(input, c.perm);
      const TensorBuffer got = transpose_execute(run, input, WriteMode::Write, exec_workers);
      rec.executed = true;
      rec.verified = got.same_bytes(expect) && (!rec.heuristic_traffic || rec.heuristic_traffic->verified);
      if (!got.same_bytes(expect)) rec.error = "executor output differs from scatter reference";
      if (opt.timing) rec.bandwidth = measure_bandwidth(run, WriteMode::Write, opt.repetitions, exec_workers).bytes_per_second;
    } else {
      rec.error = "not executed: volume above verification cap";
    }
  } catch (const std::exception& e) {
    rec.error = e.what();
    rec.verified = false;
  }
  return rec;
}

}  // namespace

std::vector<BenchRecord> run_bench(const std::vector<BenchCase>& cases, const DeviceProfile& device,
                                   const BenchOptions& opt) {
  if (cases.empty()) throw InputError("no benchmark cases");
  if (opt.workers < 1) throw InputError("worker count must be at least 1");
  std::vector<BenchRecord> records(cases.size());
  if (opt.timing || opt.workers == 1) {
    // Sequential cases keep wall-clock measurements free of interference.
    for (std::size_t i = 0; i < cases.size(); ++i) records[i] = run_case(i, cases[i], device, opt, opt.workers);
    return records;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < opt.workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < cases.size();) records[i] = run_case(i, cases[i], device, opt, 1);
    });
  for (auto& t : pool) t.join();
  return records;
}

Stats summarize(std::vector<double> v) {
  Stats s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  const std::size_t n = v.size();
  s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return s;
}

BenchSummary summarize_records(const std::vector<BenchRecord>& records) {
  BenchSummary s;
  s.cases = records.size();
  std::vector<double> ratio, cycles, bw;
  std::size_t compared = 0, agree = 0;
  for (const auto& r : records) {
    const bool failed = r.executed ? !r.verified : (!r.error.empty() && !r.heuristic_plan);
    if (failed) ++s.failures;
    if (r.executed && r.verified) ++s.verified;
    if (r.match) {
      ++compared;
      agree += *r.match ? 1 : 0;
      if (r.simulated_score > 0) ratio.push_back(r.heuristic_score / r.simulated_score);
    }
    if (r.heuristic_plan) cycles.push_back(r.heuristic_cycles);
    if (r.bandwidth > 0) bw.push_back(r.bandwidth / 1e9);
  }
  if (compared) s.agreement = static_cast<double>(agree) / static_cast<double>(compared);
  s.traffic_ratio = summarize(ratio);
  s.cycles = summarize(cycles);
  s.bandwidth_gbs = summarize(bw);
  return s;
}

void write_csv(std::ostream& os, const std::vector<BenchRecord>& records, bool timing) {
  os << "case,tag,rank,element_size,volume,extents,perm,plans,heuristic_plan,heuristic_cycles,ld_req,st_req,"
        "ld_tran,st_tran,cl_full,cl_part,shmem_tran,simulated_plan,traffic_ratio,match,verified,error";
  if (timing) os << ",bandwidth_gbs";
  os << '\n';
  for (const auto& r : records) {
    const auto& c = r.bench_case;
    os << r.index << ',' << csv_field(c.tag) << ',' << c.layout.rank() << ',' << c.layout.element_size() << ','
       << c.layout.volume() << ',' << join_extents(c.layout.extents(), 'x') << ','
       << csv_field(join_ints(c.perm.one_based(), ',')) << ',' << r.plan_count << ','
       << csv_field(r.heuristic_plan ? plan_summary(*r.heuristic_plan) : "") << ',' << fmt(r.heuristic_cycles) << ',';
    if (r.heuristic_traffic) {
      const auto& t = *r.heuristic_traffic;
      os << fmt(t.ld_req) << ',' << fmt(t.st_req) << ',' << fmt(t.ld_tran) << ',' << fmt(t.st_tran) << ','
         << fmt(t.cl_full) << ',' << fmt(t.cl_part) << ',' << fmt(t.shmem_tran) << ',';
    } else {
      os << ",,,,,,,";
    }
    os << csv_field(r.simulated_plan ? plan_summary(*r.simulated_plan) : "") << ','
       << (r.match && r.simulated_score > 0 ? fmt(r.heuristic_score / r.simulated_score) : "") << ','
       << (r.match ? (*r.match ? "1" : "0") : "") << ',' << (r.verified ? 1 : 0) << ',' << csv_field(r.error);
    if (timing) os << ',' << fmt(r.bandwidth / 1e9);
    os << '\n';
  }
}

namespace {

nlohmann::json stats_json(const Stats& s) {
  return {{"count", s.count}, {"min", s.min}, {"median", s.median}, {"max", s.max}};
}

}  // namespace

void write_json(std::ostream& os, const std::vector<BenchRecord>& records, const BenchSummary& summary, bool timing) {
  nlohmann::json out;
  out["records"] = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json j;
    j["case"] = r.index;
    j["tag"] = r.bench_case.tag;
    j["extents"] = r.bench_case.layout.extents();
    j["perm"] = r.bench_case.perm.one_based();
    j["element_size"] = r.bench_case.layout.element_size();
    j["plans"] = r.plan_count;
    if (r.heuristic_plan) {
      j["heuristic"] = {{"plan", plan_json(*r.heuristic_plan)}, {"cycles", r.heuristic_cycles}};
    }
    if (r.simulated_plan) j["simulated"] = {{"plan", plan_json(*r.simulated_plan)}, {"score", r.simulated_score}};
    if (r.heuristic_traffic) {
      const auto& t = *r.heuristic_traffic;
      j["traffic"] = {{"ld_req", t.ld_req},   {"st_req", t.st_req},   {"ld_tran", t.ld_tran},
                      {"st_tran", t.st_tran}, {"cl_full", t.cl_full}, {"cl_part", t.cl_part},
                      {"shmem_req", t.shmem_req}, {"shmem_tran", t.shmem_tran}};
    }
    if (r.match) j["match"] = *r.match;
    j["verified"] = r.verified;
    if (!r.error.empty()) j["error"] = r.error;
    if (timing) j["bandwidth_gbs"] = r.bandwidth / 1e9;
    out["records"].push_back(std::move(j));
  }
  nlohmann::json s;
  s["cases"] = summary.cases;
  s["failures"] = summary.failures;
  s["verified"] = summary.verified;
  s["agreement"] = summary.agreement ? nlohmann::json(*summary.agreement) : nlohmann::json();
  s["traffic_ratio"] = stats_json(summary.traffic_ratio);
  s["modeled_cycles"] = stats_json(summary.cycles);
  if (timing) s["bandwidth_gbs"] = stats_json(summary.bandwidth_gbs);
  out["summary"] = s;
  os << out.dump(2) << '\n';
}

void write_summary_table(std::ostream& os, const BenchSummary& s, bool timing) {
  auto row = [&](const char* name, const Stats& st) {
    os << std::left << std::setw(22) << name << std::right << std::setw(8) << st.count << std::setw(16) << fmt(st.min)
       << std::setw(16) << fmt(st.median) << std::setw(16) << fmt(st.max) << '\n';
  };
  os << "cases " << s.cases << ", verified " << s.verified << ", failures " << s.failures;
  if (s.agreement) os << ", heuristic/simulated agreement " << fmt(*s.agreement);
  os << '\n';
  os << std::left << std::setw(22) << "metric" << std::right << std::setw(8) << "n" << std::setw(16) << "worst/min"
     << std::setw(16) << "median" << std::setw(16) << "best/max" << '\n';
  row("modeled cycles", s.cycles);
  if (s.traffic_ratio.count) row("traffic ratio", s.traffic_ratio);
  if (timing) row("bandwidth GB/s", s.bandwidth_gbs);
}

double arithmetic_intensity(double vol_d, double vol_l, double vol_r) {
  if (vol_d <= 0 || vol_l <= 0 || vol_r <= 0) throw InputError("volumes must be positive");
  return 2.0 * std::sqrt(vol_d * vol_l * vol_r) / (vol_d + vol_l + vol_r);
}

}  // namespace ttplan
