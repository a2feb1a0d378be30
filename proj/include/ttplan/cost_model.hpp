#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ttplan/device_profile.hpp"
#include "ttplan/device_sim.hpp"
#include "ttplan/plan.hpp"

namespace ttplan {

struct TileCensus {
  std::uint64_t t_full = 0;
  std::uint64_t t_horz = 0;  // right-column tiles of width h
  std::uint64_t t_vert = 0;  // bottom-row tiles of height v
  std::uint64_t t_corn = 0;
  std::uint64_t v = 0;  // vol_k mod L
  std::uint64_t h = 0;  // vol_m mod L

  std::uint64_t total() const { return t_full + t_horz + t_vert + t_corn; }
};

TileCensus tile_census(std::uint64_t vol_m, std::uint64_t vol_k, std::uint64_t L);

double mlp_tiled(const TileCensus& c, std::uint64_t L, std::uint64_t R);
double mlp_tiled_copy(const TileCensus& c, std::uint64_t L, std::uint64_t R);
int mlp_packed(int n_reg);
double plan_mlp(const TransposePlan& plan);

struct TprResult {
  double value = 1.0;
  bool clamped = false;  // raw value was below 1
};

TprResult tpr_mem(const TrafficReport& traffic);
double mem_latency(const DeviceProfile& profile, double tpr);

struct MwpResult {
  double bytes_req = 0;
  double bw_warp = 0;
  double mwp_peak = 0;
  double mwp_mem = 0;
  double mwp = 0;
};

double bytes_per_request(const DeviceProfile& profile, double tpr);
MwpResult mwp(const DeviceProfile& profile, double mem_lat, double mlp, double n_warps_per_sm, double bytes_req);
double cycles_mem(double mem_lat, double mlp, double n_warp, double mwp);
double warps_per_sm(const TransposePlan& plan, const DeviceProfile& profile);

// Average bank transactions per staged read request, normalized by the
// conflict-free minimum. Tiled returns 1; TiledCopy throws.
double tpr_shmem(const TransposePlan& plan, const DeviceProfile& profile);
double cycles_shmem(const DeviceProfile& profile, double tpr_shmem, double mlp);

inline constexpr int kTrafficSamples = 10;

// Per-slice traffic averaged over ten sampled work slices (PackedSplit samples
// chunks and scales by n_sp). Request counts come from the plan geometry.
TrafficReport sample_traffic(const TransposePlan& plan, const DeviceProfile& profile, std::uint64_t rng_seed);
// Exact per-slice request counts from geometry alone.
std::pair<double, double> analytic_requests(const TransposePlan& plan);

struct CostEstimate {
  double cycles_mem = 0;
  double cycles_shmem = 0;
  double cycles_ac = 0;
  double n_iter = 1;
  double total_cycles = 0;
  double mem_lat = 0;
  double tpr_mem = 1;
  double tpr_shmem = 0;
  double mlp = 0;
  double mwp = 0;
  double mwp_mem = 0;
  double mwp_peak = 0;
  double bw_warp = 0;
  double bytes_req = 0;
  double n_warps_per_sm = 0;
  TrafficReport traffic;
  std::vector<std::string> warnings;
};

CostEstimate estimate_cycles(const TransposePlan& plan, const DeviceProfile& profile, std::uint64_t rng_seed);
// Same chain on caller-supplied traffic (exact or sampled).
CostEstimate estimate_from_traffic(const TransposePlan& plan, const DeviceProfile& profile,
                                   const TrafficReport& traffic);

}  // namespace ttplan
