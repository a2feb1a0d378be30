#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ttplan/cost_model.hpp"
#include "ttplan/device_profile.hpp"
#include "ttplan/device_sim.hpp"
#include "ttplan/index_math.hpp"
#include "ttplan/plan.hpp"

namespace ttplan {

struct BenchCase {
  TensorLayout layout;
  Permutation perm;
  std::string tag;  // e.g. "r3 ratio5", "rank8 reverse"
};

struct BenchSpec {
  int rank_min = 2;
  int rank_max = 7;
  double mean_volume = 1 << 20;
  double sd_volume = 0.2 * (1 << 20);
  std::vector<int> ratios{1, 5, 15};
  int perms_per_rank = 4;
  unsigned element_size = 8;

  void validate() const;
};

// Extents whose max/min ratio is within 10% of `ratio` and whose product is
// within 5% of target_volume (ratio 1: the equal extent closest in log).
std::vector<std::uint64_t> set1_extents(int rank, double target_volume, int ratio, std::uint64_t seed);

std::vector<BenchCase> gen_set1(const BenchSpec& spec, std::uint64_t seed);

std::vector<std::vector<std::uint64_t>> set2_shapes(std::uint64_t scale);
std::vector<BenchCase> gen_set2(std::uint64_t scale, int random_perms, std::uint64_t seed, unsigned element_size = 8);

// One case per line: "d1,d2,... | w1,w2,..." with an optional "| element_size".
std::vector<BenchCase> parse_custom_cases(const std::string& text, unsigned default_element_size = 8);
std::vector<BenchCase> load_custom_cases(const std::string& path, unsigned default_element_size = 8);
std::string dump_custom_cases(const std::vector<BenchCase>& cases);

enum class SelectMode { Heuristic, Simulated, Both };
SelectMode parse_select_mode(const std::string& s);

struct BenchOptions {
  SelectMode mode = SelectMode::Heuristic;
  int workers = 1;
  std::uint64_t seed = 1;
  bool timing = false;
  int repetitions = 3;
  std::uint64_t sim_cap = kDefaultSimCap;
  std::uint64_t verify_cap = std::uint64_t{1} << 26;
};

struct BenchRecord {
  std::size_t index = 0;
  BenchCase bench_case;
  std::size_t plan_count = 0;
  std::optional<TransposePlan> heuristic_plan;
  double heuristic_cycles = 0;
  std::optional<TransposePlan> simulated_plan;
  std::optional<TrafficReport> heuristic_traffic;  // exact, volume permitting
  double heuristic_score = 0;                      // weighted exact traffic
  double simulated_score = 0;
  std::optional<bool> match;  // same memory behaviour as the simulated choice
  bool verified = false;
  bool executed = false;
  double bandwidth = 0;  // bytes/s, timing only
  std::string error;
};

struct Stats {
  std::size_t count = 0;
  double min = 0, median = 0, max = 0;
};
Stats summarize(std::vector<double> values);

struct BenchSummary {
  std::size_t cases = 0;
  std::size_t failures = 0;  // verification failures or errors
  std::size_t verified = 0;
  std::optional<double> agreement;  // heuristic = simulated rate
  Stats traffic_ratio;              // heuristic / simulated weighted traffic
  Stats cycles;
  Stats bandwidth_gbs;
};

BenchSummary summarize_records(const std::vector<BenchRecord>& records);

std::vector<BenchRecord> run_bench(const std::vector<BenchCase>& cases, const DeviceProfile& device,
                                   const BenchOptions& options);

void write_csv(std::ostream& os, const std::vector<BenchRecord>& records, bool timing);
void write_json(std::ostream& os, const std::vector<BenchRecord>& records, const BenchSummary& summary, bool timing);
void write_summary_table(std::ostream& os, const BenchSummary& summary, bool timing);

double arithmetic_intensity(double vol_d, double vol_l, double vol_r);

std::string join_extents(const std::vector<std::uint64_t>& v, char sep);

}  // namespace ttplan
