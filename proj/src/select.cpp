#include <map>
#include <tuple>

#include "ttplan/cost_model.hpp"
#include "ttplan/device_sim.hpp"
#include "ttplan/plan.hpp"
#include "ttplan/traffic_key.hpp"

namespace ttplan {

TrafficKey traffic_key(const TransposePlan& p) {
  // Warps always cover 32 consecutive staged elements, so n_thread does not
  // change any global or shared access pattern.
  return {static_cast<int>(p.kind), p.part.mmk_in.dims, p.n_sp};
}

namespace {

std::size_t argmin(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[best]) best = i;
  return best;
}

}  // namespace

double simulated_score(const TrafficReport& t) {
  const double lines = t.cl_full + t.cl_part;
  const double part_frac = lines > 0 ? t.cl_part / lines : 0.0;
  return t.ld_tran + t.st_tran * (1.0 + part_frac) + t.shmem_tran / 8.0;
}

Selection select_heuristic(const std::vector<TransposePlan>& plans, const DeviceProfile& device,
                           std::uint64_t rng_seed) {
  if (plans.empty()) throw InputError("no plans to select from");
  std::map<TrafficKey, TrafficReport> cache;
  Selection s;
  for (const auto& p : plans) {
    const TrafficKey key = traffic_key(p);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, sample_traffic(p, device, rng_seed)).first;
    s.scores.push_back(estimate_from_traffic(p, device, it->second).total_cycles);
  }
  s.index = argmin(s.scores);
  return s;
}

Selection select_simulated(const std::vector<TransposePlan>& plans, const DeviceProfile& device,
                           std::uint64_t volume_cap) {
  if (plans.empty()) throw InputError("no plans to select from");
  const std::uint64_t vol = plans.front().layout.volume();
  if (vol > volume_cap)
    throw SizeError("tensor volume " + std::to_string(vol) + " exceeds the simulation cap " +
                    std::to_string(volume_cap) + "; use heuristic selection");
  SimConfig cfg = SimConfig::from_profile(device);
  cfg.verify = false;
  cfg.volume_cap = volume_cap;
  std::map<TrafficKey, double> cache;
  Selection s;
  for (const auto& p : plans) {
    const TrafficKey key = traffic_key(p);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, simulated_score(simulate_plan(p, cfg))).first;
    s.scores.push_back(it->second);
  }
  s.index = argmin(s.scores);
  return s;
}

}  // namespace ttplan
