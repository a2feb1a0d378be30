#include "ttplan/device_sim.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <limits>
#include <ostream>
#include <vector>

#include "ttplan/schedule.hpp"

namespace ttplan {

namespace {

constexpr std::uint64_t kEmpty = std::numeric_limits<std::uint64_t>::max();

// Distinct values of a small array; sorted in place.
std::size_t count_distinct(std::uint64_t* v, std::size_t n) {
  if (n == 0) return 0;
  bool sorted = true;
  for (std::size_t i = 1; i < n && sorted; ++i) sorted = v[i - 1] <= v[i];
  if (!sorted) std::sort(v, v + n);
  std::size_t d = 1;
  for (std::size_t i = 1; i < n; ++i) d += v[i] != v[i - 1];
  return d;
}

std::size_t gather_segments(const WarpAccess& a, unsigned granule, std::uint64_t* out) {
  std::size_t n = 0;
  for (int lane = 0; lane < kWarpSize; ++lane) {
    if (!(a.active >> lane & 1u)) continue;
    const std::uint64_t addr = a.lane_addresses[static_cast<std::size_t>(lane)];
    const std::uint64_t lo = addr / granule, hi = (addr + a.bytes_per_lane - 1) / granule;
    for (std::uint64_t s = lo; s <= hi; ++s) out[n++] = s;
  }
  return n;
}

// Largest per-lane fan-out is an 8-byte element over 4-byte words (or over two
// segments when misaligned), so 4 entries per lane is ample.
constexpr std::size_t kScratch = kWarpSize * 4;

void check_granule(const WarpAccess& a, unsigned granule) {
  if (granule == 0) throw InputError("granule size must be positive");
  if (a.bytes_per_lane == 0 || (a.bytes_per_lane + granule - 1) / granule + 1 > 4)
    throw InputError("bytes_per_lane too large for the simulator granule");
}

}  // namespace

int WarpAccess::active_lanes() const { return std::popcount(active); }

SimConfig SimConfig::from_profile(const DeviceProfile& device) {
  SimConfig c;
  c.tran_size = device.tran_size;
  c.l2_line = device.l2_line;
  c.bank_count = device.bank_count;
  c.bank_width = device.bank_width;
  return c;
}

std::uint64_t coalesce(const WarpAccess& a, const SimConfig& cfg) {
  check_granule(a, cfg.tran_size);
  std::uint64_t seg[kScratch];
  return count_distinct(seg, gather_segments(a, cfg.tran_size, seg));
}

std::pair<std::uint64_t, std::uint64_t> classify_store_lines(const WarpAccess& a, const SimConfig& cfg) {
  if (cfg.l2_line == 0 || cfg.l2_line > 64) throw InputError("l2_line must lie in [1, 64] bytes");
  // (line, byte mask) per touched line, merged after sorting by line.
  std::pair<std::uint64_t, std::uint64_t> lines[kScratch];
  std::size_t n = 0;
  for (int lane = 0; lane < kWarpSize; ++lane) {
    if (!(a.active >> lane & 1u)) continue;
    const std::uint64_t addr = a.lane_addresses[static_cast<std::size_t>(lane)];
    for (std::uint64_t byte = addr; byte < addr + a.bytes_per_lane;) {
      const std::uint64_t line = byte / cfg.l2_line;
      const std::uint64_t line_end = std::min<std::uint64_t>((line + 1) * cfg.l2_line, addr + a.bytes_per_lane);
      std::uint64_t mask = 0;
      for (std::uint64_t b = byte; b < line_end; ++b) mask |= std::uint64_t{1} << (b - line * cfg.l2_line);
      if (n == kScratch) throw InputError("store spans too many cache lines");
      lines[n++] = {line, mask};
      byte = line_end;
    }
  }
  std::sort(lines, lines + n);
  const std::uint64_t full_mask = cfg.l2_line == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << cfg.l2_line) - 1;
  std::uint64_t full = 0, part = 0;
  for (std::size_t i = 0; i < n;) {
    std::uint64_t mask = 0;
    std::size_t j = i;
    for (; j < n && lines[j].first == lines[i].first; ++j) mask |= lines[j].second;
    (mask == full_mask ? full : part) += 1;
    i = j;
  }
  return {full, part};
}

std::uint64_t bank_transactions(const WarpAccess& a, const SimConfig& cfg) {
  check_granule(a, cfg.bank_width);
  std::uint64_t words[kScratch];
  const std::size_t n = gather_segments(a, cfg.bank_width, words);
  const std::size_t d = count_distinct(words, n);
  if (d == 0) return 0;
  if (cfg.bank_count > 64) throw InputError("at most 64 banks are supported");
  std::array<std::uint32_t, 64> per_bank{};
  per_bank[words[0] % cfg.bank_count] = 1;
  for (std::size_t i = 1; i < n; ++i)
    if (words[i] != words[i - 1]) ++per_bank[words[i] % cfg.bank_count];
  return *std::max_element(per_bank.begin(), per_bank.end());
}

std::uint64_t bank_ideal_transactions(const WarpAccess& a, const SimConfig& cfg) {
  check_granule(a, cfg.bank_width);
  std::uint64_t words[kScratch];
  const std::size_t d = count_distinct(words, gather_segments(a, cfg.bank_width, words));
  return (d + cfg.bank_count - 1) / cfg.bank_count;
}

TrafficReport& TrafficReport::operator+=(const TrafficReport& o) {
  ld_req += o.ld_req;
  st_req += o.st_req;
  ld_tran += o.ld_tran;
  st_tran += o.st_tran;
  cl_full += o.cl_full;
  cl_part += o.cl_part;
  shmem_req += o.shmem_req;
  shmem_tran += o.shmem_tran;
  shmem_read_req += o.shmem_read_req;
  shmem_read_tran += o.shmem_read_tran;
  shmem_read_ideal += o.shmem_read_ideal;
  exact = exact && o.exact;
  verified = verified && o.verified;
  errors += o.errors;
  return *this;
}

TrafficReport TrafficReport::scaled(double f) const {
  TrafficReport r = *this;
  for (double* v : {&r.ld_req, &r.st_req, &r.ld_tran, &r.st_tran, &r.cl_full, &r.cl_part, &r.shmem_req,
                    &r.shmem_tran, &r.shmem_read_req, &r.shmem_read_tran, &r.shmem_read_ideal})
    *v *= f;
  return r;
}

namespace {

class SimVisitor {
 public:
  SimVisitor(const TransposePlan& plan, const SimConfig& cfg, bool track_writes)
      : plan_(plan), cfg_(cfg), elem_(plan.layout.element_size()) {
    const int n = plan.layout.rank();
    extents_ = plan.layout.extents();
    out_stride_.assign(static_cast<std::size_t>(n), 0);
    std::uint64_t c = 1;
    for (Dim d : plan.perm.order()) {
      out_stride_[static_cast<std::size_t>(d)] = c;
      c *= plan.layout.extent(d);
    }
    const std::uint64_t staging =
        plan.kind == AlgorithmKind::Tiled ? static_cast<std::uint64_t>(kTileWidth) * static_cast<std::uint64_t>(cfg.tiled_pitch)
                                          : plan.shmem_elems;
    shared_.assign(staging, kEmpty);
    if (track_writes) written_.assign(plan.layout.volume(), false);
  }

  void begin_unit() {
    if (cfg_.verify) std::fill(shared_.begin(), shared_.end(), kEmpty);
  }

  void global_load(const LaneSet& s) {
    make_access(s, AccessKind::Load, MemorySpace::Global);
    r_.ld_req += 1;
    r_.ld_tran += static_cast<double>(coalesce(acc_, cfg_));
    trace_global();
    if (cfg_.verify) for_lanes(s, [&](std::size_t l) { reg_[l] = s.idx[l]; });
  }

  void global_store(const LaneSet& s) {
    make_access(s, AccessKind::Store, MemorySpace::Global);
    r_.st_req += 1;
    r_.st_tran += static_cast<double>(coalesce(acc_, cfg_));
    const auto [full, part] = classify_store_lines(acc_, cfg_);
    r_.cl_full += static_cast<double>(full);
    r_.cl_part += static_cast<double>(part);
    trace_global();
    if (!cfg_.verify) return;
    for_lanes(s, [&](std::size_t l) {
      const std::uint64_t dst = s.idx[l];
      if (reg_[l] == kEmpty || dst >= plan_.layout.volume() || out_position(reg_[l]) != dst) {
        ++r_.errors;
        return;
      }
      if (!written_.empty()) {
        if (written_[dst]) ++r_.errors;
        written_[dst] = true;
      }
    });
  }

  void shared_store(const LaneSet& s) {
    make_access(s, AccessKind::Store, MemorySpace::Shared);
    r_.shmem_req += 1;
    r_.shmem_tran += static_cast<double>(bank_transactions(acc_, cfg_));
    trace_shared();
    if (!cfg_.verify) return;
    for_lanes(s, [&](std::size_t l) {
      if (s.idx[l] >= shared_.size()) {
        ++r_.errors;
        return;
      }
      shared_[s.idx[l]] = reg_[l];
    });
  }

  void shared_load(const LaneSet& s) {
    make_access(s, AccessKind::Load, MemorySpace::Shared);
    const auto tx = static_cast<double>(bank_transactions(acc_, cfg_));
    r_.shmem_req += 1;
    r_.shmem_tran += tx;
    r_.shmem_read_req += 1;
    r_.shmem_read_tran += tx;
    r_.shmem_read_ideal += static_cast<double>(bank_ideal_transactions(acc_, cfg_));
    trace_shared();
    if (!cfg_.verify) return;
    for_lanes(s, [&](std::size_t l) { reg_[l] = s.idx[l] < shared_.size() ? shared_[s.idx[l]] : kEmpty; });
  }

  TrafficReport finish() {
    if (cfg_.verify && !written_.empty())
      r_.errors += static_cast<std::uint64_t>(std::count(written_.begin(), written_.end(), false));
    r_.verified = !cfg_.verify || r_.errors == 0;
    return r_;
  }

 private:
  template <class F>
  void for_lanes(const LaneSet& s, F&& f) {
    for (std::uint32_t m = s.mask; m; m &= m - 1) f(static_cast<std::size_t>(std::countr_zero(m)));
  }

  void make_access(const LaneSet& s, AccessKind kind, MemorySpace space) {
    acc_.active = s.mask;
    acc_.kind = kind;
    acc_.space = space;
    acc_.bytes_per_lane = elem_;
    for_lanes(s, [&](std::size_t l) { acc_.lane_addresses[l] = s.idx[l] * elem_; });
  }

  std::uint64_t out_position(std::uint64_t p_in) const {
    std::uint64_t p = 0;
    for (std::size_t i = 0; i < extents_.size(); ++i) {
      p += (p_in % extents_[i]) * out_stride_[i];
      p_in /= extents_[i];
    }
    return p;
  }

  void trace_global() {
    if (!cfg_.trace) return;
    std::uint64_t seg[kScratch];
    const std::size_t n = gather_segments(acc_, cfg_.tran_size, seg);
    count_distinct(seg, n);
    *cfg_.trace << "global " << (acc_.kind == AccessKind::Load ? "load " : "store") << " lanes=" << acc_.active_lanes()
                << " segs=[";
    for (std::size_t i = 0; i < n; ++i)
      if (i == 0 || seg[i] != seg[i - 1]) *cfg_.trace << (i ? " " : "") << seg[i];
    *cfg_.trace << "]\n";
  }

  void trace_shared() {
    if (!cfg_.trace) return;
    *cfg_.trace << "shared " << (acc_.kind == AccessKind::Load ? "load " : "store") << " lanes=" << acc_.active_lanes()
                << " bank_tx=" << bank_transactions(acc_, cfg_) << " words=[";
    bool first = true;
    for_lanes(LaneSet{acc_.lane_addresses, acc_.active}, [&](std::size_t l) {
      *cfg_.trace << (first ? "" : " ") << acc_.lane_addresses[l] / cfg_.bank_width;
      first = false;
    });
    *cfg_.trace << "]\n";
  }

  const TransposePlan& plan_;
  const SimConfig& cfg_;
  unsigned elem_;
  std::vector<std::uint64_t> extents_, out_stride_;
  std::vector<std::uint64_t> shared_;
  std::vector<bool> written_;
  std::array<std::uint64_t, kWarpSize> reg_{};
  WarpAccess acc_;
  TrafficReport r_;
};

}  // namespace

TrafficReport simulate_plan(const TransposePlan& plan, const SimConfig& cfg, SimScope scope) {
  if (plan.kind == AlgorithmKind::Tiled && cfg.tiled_pitch < kTileWidth)
    throw InputError("tiled pitch must be at least the tile width");
  std::uint64_t first = 0, last = plan.work_units;
  const std::uint64_t per = plan.units_per_slice();
  switch (scope.kind) {
    case SimScope::Kind::Full:
      if (plan.layout.volume() > cfg.volume_cap)
        throw SizeError("tensor volume " + std::to_string(plan.layout.volume()) + " exceeds the simulation cap " +
                        std::to_string(cfg.volume_cap) + "; use heuristic selection");
      break;
    case SimScope::Kind::Slice:
      if (scope.index >= plan.mbar_volume()) throw InputError("slice index out of range");
      first = scope.index * per;
      last = first + per;
      break;
    case SimScope::Kind::Unit:
      if (scope.index >= plan.work_units) throw InputError("work unit out of range");
      first = scope.index;
      last = first + 1;
      break;
  }
  const Schedule sched = make_schedule(plan);
  SimVisitor v(plan, cfg, scope.kind == SimScope::Kind::Full && cfg.verify);
  for (std::uint64_t u = first; u < last; ++u) {
    v.begin_unit();
    walk_unit(sched, u, cfg.tiled_pitch, v);
  }
  TrafficReport r = v.finish();
  r.exact = true;
  return r;
}

}  // namespace ttplan
