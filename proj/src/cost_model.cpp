#include "ttplan/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace ttplan {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

}  // namespace

TileCensus tile_census(std::uint64_t vol_m, std::uint64_t vol_k, std::uint64_t L) {
  if (vol_m == 0 || vol_k == 0 || L == 0) throw InputError("tile census needs positive volumes and tile width");
  TileCensus c;
  c.h = vol_m % L;
  c.v = vol_k % L;
  const std::uint64_t fm = vol_m / L, fk = vol_k / L;
  c.t_full = fm * fk;
  c.t_horz = c.h > 0 ? fk : 0;
  c.t_vert = c.v > 0 ? fm : 0;
  c.t_corn = (c.h > 0 && c.v > 0) ? 1 : 0;
  return c;
}

double mlp_tiled(const TileCensus& c, std::uint64_t L, std::uint64_t R) {
  if (R == 0) throw InputError("warps per block must be positive");
  if (c.total() == 0) throw InputError("MLP undefined for an empty tile grid");
  const double lr = static_cast<double>(L) / static_cast<double>(R);
  const double num = lr * static_cast<double>(2 * c.t_full + c.t_horz) +
                     static_cast<double>(ceil_div(c.v, R) * (c.t_vert + c.t_corn)) +
                     static_cast<double>(ceil_div(c.h, R) * (c.t_horz + c.t_corn));
  return num / (2.0 * static_cast<double>(c.total()));
}

double mlp_tiled_copy(const TileCensus& c, std::uint64_t L, std::uint64_t R) {
  if (R == 0) throw InputError("warps per block must be positive");
  if (c.total() == 0) throw InputError("MLP undefined for an empty tile grid");
  const double lr = static_cast<double>(L) / static_cast<double>(R);
  const double num = lr * static_cast<double>(c.t_full + c.t_horz) +
                     static_cast<double>(ceil_div(c.v, R) * (c.t_vert + c.t_corn));
  return num / static_cast<double>(c.total());
}

int mlp_packed(int n_reg) {
  if (n_reg < 1 || n_reg > kMaxRegisters) throw InputError("n_reg must lie in [1, 8]");
  return n_reg;
}

double plan_mlp(const TransposePlan& plan) {
  switch (plan.kind) {
    case AlgorithmKind::Tiled:
      return mlp_tiled(tile_census(plan.vol_m, plan.vol_k, kTileWidth), kTileWidth,
                       static_cast<std::uint64_t>(plan.n_warp));
    case AlgorithmKind::TiledCopy:
      return mlp_tiled_copy(tile_census(plan.vol_m, plan.vol_k, kTileWidth), kTileWidth,
                            static_cast<std::uint64_t>(plan.n_warp));
    case AlgorithmKind::Packed:
    case AlgorithmKind::PackedSplit: return mlp_packed(plan.n_reg);
  }
  return 1.0;
}

TprResult tpr_mem(const TrafficReport& t) {
  const double req = t.ld_req + t.st_req;
  if (req <= 0) throw InputError("TPR undefined without memory requests");
  const double lines = t.cl_full + t.cl_part;
  const double part_frac = lines > 0 ? t.cl_part / lines : 0.0;
  const double raw = (t.ld_tran + t.st_tran * (1.0 + part_frac)) / req;
  if (raw < 1.0) return {1.0, true};
  return {raw, false};
}

double mem_latency(const DeviceProfile& profile, double tpr) {
  return profile.mem_baselat + (std::max(tpr, 1.0) - 1.0) * profile.delta;
}

double bytes_per_request(const DeviceProfile& profile, double tpr) {
  return (tpr * (1.0 - profile.cache_hit) + profile.cache_hit) * profile.tran_size;
}

MwpResult mwp(const DeviceProfile& profile, double mem_lat, double mlp, double n_warps_per_sm, double bytes_req) {
  if (mem_lat <= 0 || mlp <= 0 || n_warps_per_sm <= 0 || bytes_req <= 0)
    throw InputError("MWP inputs must be positive");
  MwpResult r;
  r.bytes_req = bytes_req;
  r.bw_warp = profile.freq * bytes_req / mem_lat;
  r.mwp_peak = profile.mem_bw / (r.bw_warp * profile.n_sm);
  r.mwp_mem = mem_lat / profile.delta;
  r.mwp = std::min({r.mwp_mem * mlp, r.mwp_peak, n_warps_per_sm});
  return r;
}

double cycles_mem(double mem_lat, double mlp, double n_warp, double mwp_value) {
  if (mwp_value <= 0) throw InputError("MWP must be positive");
  return 2.0 * mem_lat * mlp * n_warp / mwp_value;
}

double warps_per_sm(const TransposePlan& plan, const DeviceProfile& profile) {
  const double max_warps = profile.max_warps_per_sm;
  if (plan.kind == AlgorithmKind::TiledCopy || plan.shmem_bytes() == 0) return max_warps;
  const std::uint64_t blocks = std::max<std::uint64_t>(1, profile.shmem_capacity / plan.shmem_bytes());
  return std::min(max_warps, static_cast<double>(blocks) * plan.n_warp);
}

double tpr_shmem(const TransposePlan& plan, const DeviceProfile& profile) {
  switch (plan.kind) {
    case AlgorithmKind::TiledCopy: throw InputError("TiledCopy does not use shared memory");
    case AlgorithmKind::Tiled: return 1.0;
    default: break;
  }
  SimConfig cfg = SimConfig::from_profile(profile);
  cfg.verify = false;
  const TrafficReport r = simulate_plan(plan, cfg, SimScope::unit(0));
  return r.shmem_read_ideal > 0 ? r.shmem_read_tran / r.shmem_read_ideal : 1.0;
}

double cycles_shmem(const DeviceProfile& profile, double tpr, double mlp) {
  return 2.0 * tpr * profile.shmem_lat * mlp;
}

std::pair<double, double> analytic_requests(const TransposePlan& plan) {
  const std::uint64_t L = kTileWidth;
  switch (plan.kind) {
    case AlgorithmKind::Tiled: {
      const TileCensus c = tile_census(plan.vol_m, plan.vol_k, L);
      const std::uint64_t ld = L * (c.t_full + c.t_horz) + c.v * (c.t_vert + c.t_corn);
      const std::uint64_t st = L * (c.t_full + c.t_vert) + c.h * (c.t_horz + c.t_corn);
      return {static_cast<double>(ld), static_cast<double>(st)};
    }
    case AlgorithmKind::TiledCopy: {
      const TileCensus c = tile_census(plan.vol_m, plan.vol_k, L);
      const std::uint64_t ld = L * (c.t_full + c.t_horz) + c.v * (c.t_vert + c.t_corn);
      return {static_cast<double>(ld), static_cast<double>(ld)};
    }
    case AlgorithmKind::Packed: {
      const auto r = static_cast<double>(ceil_div(plan.mmk_volume(), kWarpSize));
      return {r, r};
    }
    case AlgorithmKind::PackedSplit: {
      const std::uint64_t dg = plan.layout.extent(plan.split_dim);
      const std::uint64_t rest = plan.mmk_volume() / dg;
      const std::uint64_t tail = dg - (plan.n_sp - 1) * plan.chunk;
      const auto r = static_cast<double>((plan.n_sp - 1) * ceil_div(rest * plan.chunk, kWarpSize) +
                                         ceil_div(rest * tail, kWarpSize));
      return {r, r};
    }
  }
  return {0, 0};
}

TrafficReport sample_traffic(const TransposePlan& plan, const DeviceProfile& profile, std::uint64_t rng_seed) {
  const bool split = plan.kind == AlgorithmKind::PackedSplit;
  const std::uint64_t population = split ? plan.work_units : plan.mbar_volume();
  std::vector<std::uint64_t> picks;
  if (population <= static_cast<std::uint64_t>(kTrafficSamples)) {
    for (std::uint64_t i = 0; i < population; ++i) picks.push_back(i);
  } else {
    std::mt19937_64 rng(rng_seed);
    std::uniform_int_distribution<std::uint64_t> dist(0, population - 1);
    std::set<std::uint64_t> seen;
    while (picks.size() < static_cast<std::size_t>(kTrafficSamples)) {
      const std::uint64_t x = dist(rng);
      if (seen.insert(x).second) picks.push_back(x);
    }
  }

  SimConfig cfg = SimConfig::from_profile(profile);
  cfg.verify = false;
  TrafficReport sum;
  for (std::uint64_t x : picks) sum += simulate_plan(plan, cfg, split ? SimScope::unit(x) : SimScope::slice(x));

  double scale = 1.0 / static_cast<double>(picks.size());
  if (split) scale *= static_cast<double>(plan.n_sp);
  TrafficReport r = sum.scaled(scale);
  const auto [ld, st] = analytic_requests(plan);
  r.ld_req = ld;
  r.st_req = st;
  r.exact = false;
  return r;
}

CostEstimate estimate_from_traffic(const TransposePlan& plan, const DeviceProfile& profile,
                                   const TrafficReport& traffic) {
  CostEstimate e;
  e.traffic = traffic;
  const TprResult tpr = tpr_mem(traffic);
  if (tpr.clamped) e.warnings.push_back("TPR_mem below 1 clamped to 1");
  e.tpr_mem = tpr.value;
  e.mem_lat = mem_latency(profile, e.tpr_mem);
  e.bytes_req = bytes_per_request(profile, e.tpr_mem);
  e.n_warps_per_sm = warps_per_sm(plan, profile);
  e.mlp = plan_mlp(plan);
  const MwpResult m = mwp(profile, e.mem_lat, e.mlp, e.n_warps_per_sm, e.bytes_req);
  e.bw_warp = m.bw_warp;
  e.mwp_peak = m.mwp_peak;
  e.mwp_mem = m.mwp_mem;
  e.mwp = m.mwp;
  e.cycles_mem = cycles_mem(e.mem_lat, e.mlp, plan.n_warp, e.mwp);
  if (plan.kind != AlgorithmKind::TiledCopy) {
    e.tpr_shmem = tpr_shmem(plan, profile);
    e.cycles_shmem = cycles_shmem(profile, e.tpr_shmem, e.mlp);
  }
  e.cycles_ac = profile.cycles_ac;
  e.n_iter = static_cast<double>(plan.n_iter);
  e.total_cycles = (e.cycles_mem + e.cycles_shmem + e.cycles_ac) * e.n_iter;
  return e;
}

CostEstimate estimate_cycles(const TransposePlan& plan, const DeviceProfile& profile, std::uint64_t rng_seed) {
  return estimate_from_traffic(plan, profile, sample_traffic(plan, profile, rng_seed));
}

}  // namespace ttplan
