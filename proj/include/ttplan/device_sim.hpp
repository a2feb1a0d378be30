#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <utility>

#include "ttplan/device_profile.hpp"
#include "ttplan/index_math.hpp"
#include "ttplan/plan.hpp"

namespace ttplan {

enum class AccessKind { Load, Store };
enum class MemorySpace { Global, Shared };

struct WarpAccess {
  std::array<std::uint64_t, kWarpSize> lane_addresses{};  // bytes
  std::uint32_t active = 0;                               // bit i set: lane i participates
  AccessKind kind = AccessKind::Load;
  MemorySpace space = MemorySpace::Global;
  unsigned bytes_per_lane = 4;

  int active_lanes() const;
};

struct SimConfig {
  unsigned tran_size = 128;
  unsigned l2_line = 32;
  unsigned bank_count = 32;
  unsigned bank_width = 4;
  // Pitch of the Tiled staging rows; kTileWidth reproduces the unpadded layout.
  int tiled_pitch = kTileWidth + 1;
  bool verify = true;
  std::uint64_t volume_cap = kDefaultSimCap;
  std::ostream* trace = nullptr;

  static SimConfig from_profile(const DeviceProfile& device);
};

std::uint64_t coalesce(const WarpAccess& access, const SimConfig& cfg);

// (CL_full, CL_part) for one warp-store.
std::pair<std::uint64_t, std::uint64_t> classify_store_lines(const WarpAccess& access, const SimConfig& cfg);

std::uint64_t bank_transactions(const WarpAccess& access, const SimConfig& cfg);
// Conflict-free minimum: ceil(distinct bank words / bank_count).
std::uint64_t bank_ideal_transactions(const WarpAccess& access, const SimConfig& cfg);

struct TrafficReport {
  double ld_req = 0, st_req = 0;
  double ld_tran = 0, st_tran = 0;
  double cl_full = 0, cl_part = 0;
  double shmem_req = 0, shmem_tran = 0;
  // Shared reads alone (the transposed staging reads that can conflict).
  double shmem_read_req = 0, shmem_read_tran = 0, shmem_read_ideal = 0;
  bool exact = true;
  bool verified = true;       // data-flow check passed (meaningful when verification ran)
  std::uint64_t errors = 0;   // misplaced, doubled or missing output elements

  TrafficReport& operator+=(const TrafficReport& o);
  TrafficReport scaled(double f) const;
  double global_transactions() const { return ld_tran + st_tran; }
};

struct SimScope {
  enum class Kind { Full, Slice, Unit } kind = Kind::Full;
  std::uint64_t index = 0;

  static SimScope full() { return {}; }
  static SimScope slice(std::uint64_t b) { return {Kind::Slice, b}; }
  static SimScope unit(std::uint64_t u) { return {Kind::Unit, u}; }
};

// Walks the plan's warp schedule over the scope and counts every access.
// Full scope requires volume <= cfg.volume_cap (SizeError otherwise) and
// additionally checks that every output position is written exactly once.
TrafficReport simulate_plan(const TransposePlan& plan, const SimConfig& cfg, SimScope scope = SimScope::full());

}  // namespace ttplan
