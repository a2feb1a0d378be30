#include "ttplan/plan.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <tuple>

#include "json_util.hpp"

namespace ttplan {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

void finish_grid(TransposePlan& p, const DeviceProfile& device, const PlannerConfig& cfg) {
  p.work_units = p.mbar_volume() * p.units_per_slice();
  p.grid_blocks = std::min(p.work_units, grid_cap(device, cfg));
  p.n_iter = ceil_div(p.work_units, p.grid_blocks);
}

std::vector<Dim> sorted_dims(const MultiIndex& mi) {
  std::vector<Dim> d = mi.dims;
  std::sort(d.begin(), d.end());
  return d;
}

Dim largest_dim(const MultiIndex& mmk_in) {
  Dim g = mmk_in.dims.front();
  std::uint64_t best = mmk_in.extents.front();
  for (std::size_t i = 1; i < mmk_in.dims.size(); ++i) {
    if (mmk_in.extents[i] > best) {
      best = mmk_in.extents[i];
      g = mmk_in.dims[i];
    }
  }
  return g;
}

bool packed_fits(std::uint64_t vol, std::uint64_t cap, int n_thread) {
  return vol <= cap && ceil_div(vol, static_cast<std::uint64_t>(n_thread)) <= kMaxRegisters;
}

}  // namespace

const char* kind_name(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::Tiled: return "Tiled";
    case AlgorithmKind::TiledCopy: return "TiledCopy";
    case AlgorithmKind::Packed: return "Packed";
    case AlgorithmKind::PackedSplit: return "PackedSplit";
  }
  return "?";
}

AlgorithmKind parse_kind(const std::string& s) {
  for (auto k : {AlgorithmKind::Tiled, AlgorithmKind::TiledCopy, AlgorithmKind::Packed, AlgorithmKind::PackedSplit})
    if (s == kind_name(k)) return k;
  throw InputError("unknown algorithm kind '" + s + "'");
}

std::uint64_t TransposePlan::units_per_slice() const {
  switch (kind) {
    case AlgorithmKind::Tiled:
    case AlgorithmKind::TiledCopy: return tiles_m * tiles_k;
    case AlgorithmKind::Packed: return 1;
    case AlgorithmKind::PackedSplit: return n_sp;
  }
  return 1;
}

std::uint64_t grid_cap(const DeviceProfile& device, const PlannerConfig& cfg) {
  return static_cast<std::uint64_t>(device.n_sm) * static_cast<std::uint64_t>(cfg.blocks_per_sm_cap);
}

Partition build_partition(const TensorLayout& layout, const Permutation& perm, int m, int k) {
  const int n = layout.rank();
  if (perm.rank() != n) throw InputError("permutation rank does not match tensor rank");
  if (m < 1 || m > n || k < 1 || k > n) throw InputError("m and k must lie in [1, rank]");
  std::vector<bool> staged(static_cast<std::size_t>(n), false);
  for (int i = 0; i < m; ++i) staged[static_cast<std::size_t>(i)] = true;
  for (int j = 0; j < k; ++j) staged[static_cast<std::size_t>(perm[j])] = true;

  std::vector<Dim> mi, mo, bi, bo;
  for (Dim d = 0; d < n; ++d) (staged[static_cast<std::size_t>(d)] ? mi : bi).push_back(d);
  for (int j = 0; j < n; ++j) (staged[static_cast<std::size_t>(perm[j])] ? mo : bo).push_back(perm[j]);
  return Partition{MultiIndex(mi, layout), MultiIndex(mo, layout), MultiIndex(bi, layout), MultiIndex(bo, layout)};
}

std::optional<std::uint64_t> minimal_split(std::uint64_t vol_rest, std::uint64_t extent_g,
                                           std::uint64_t capacity_elems, int n_thread) {
  if (vol_rest == 0 || n_thread <= 0) return std::nullopt;
  if (vol_rest > capacity_elems) return std::nullopt;
  for (std::uint64_t n_sp = 2; n_sp <= extent_g; ++n_sp) {
    const std::uint64_t vol = vol_rest * ceil_div(extent_g, n_sp);
    if (packed_fits(vol, capacity_elems, n_thread)) return n_sp;
  }
  return std::nullopt;
}

TransposePlan plan_tiled(const TensorLayout& layout, const Permutation& perm, const DeviceProfile& device,
                         const PlannerConfig& cfg) {
  if (perm.rank() != layout.rank()) throw InputError("permutation rank does not match tensor rank");
  TransposePlan p;
  p.layout = layout;
  p.perm = perm;
  const bool copy = perm[0] == 0;
  if (copy) {
    p.kind = AlgorithmKind::TiledCopy;
    p.m = 1;
    p.k = layout.rank() >= 2 ? 2 : 1;
    p.tile_y_dim = layout.rank() >= 2 ? perm[1] : 0;
  } else {
    p.kind = AlgorithmKind::Tiled;
    p.m = 1;
    p.k = 1;
    p.tile_y_dim = perm[0];
  }
  p.part = build_partition(layout, perm, p.m, p.k);
  p.n_thread = kTiledThreads;
  p.n_warp = kTiledThreads / kWarpSize;
  p.n_reg = kTileWidth / p.n_warp;
  p.shmem_elems = copy ? 0 : static_cast<std::uint64_t>(kTileWidth) * (kTileWidth + 1);
  p.vol_m = layout.extent(0);
  p.vol_k = p.tile_y_dim == 0 ? 1 : layout.extent(p.tile_y_dim);
  p.tiles_m = ceil_div(p.vol_m, kTileWidth);
  p.tiles_k = ceil_div(p.vol_k, kTileWidth);
  finish_grid(p, device, cfg);
  return p;
}

std::optional<TransposePlan> packed_candidate(const TensorLayout& layout, const Permutation& perm,
                                              const DeviceProfile& device, int m, int k, int n_thread,
                                              const PlannerConfig& cfg) {
  if (n_thread <= 0 || n_thread % kWarpSize != 0) throw InputError("n_thread must be a positive multiple of 32");
  Partition part = build_partition(layout, perm, m, k);
  const std::uint64_t vol = part.mmk_in.volume();
  if (!packed_fits(vol, device.capacity_elements(layout.element_size()), n_thread)) return std::nullopt;
  TransposePlan p;
  p.kind = AlgorithmKind::Packed;
  p.layout = layout;
  p.perm = perm;
  p.m = m;
  p.k = k;
  p.part = std::move(part);
  p.n_thread = n_thread;
  p.n_warp = n_thread / kWarpSize;
  p.n_reg = static_cast<int>(ceil_div(vol, static_cast<std::uint64_t>(n_thread)));
  p.shmem_elems = vol;
  finish_grid(p, device, cfg);
  return p;
}

std::vector<TransposePlan> enumerate_packed(const TensorLayout& layout, const Permutation& perm,
                                            const DeviceProfile& device, const PlannerConfig& cfg) {
  const int n = layout.rank();
  const std::uint64_t cap = device.capacity_elements(layout.element_size());
  const int max_thread = *std::max_element(cfg.thread_choices.begin(), cfg.thread_choices.end());
  const std::uint64_t limit = std::min<std::uint64_t>(cap, static_cast<std::uint64_t>(max_thread) * kMaxRegisters);
  std::vector<TransposePlan> out;
  std::set<std::vector<Dim>> seen;
  for (int m = 1; m <= n; ++m) {
    for (int k = 1; k <= n; ++k) {
      const Partition part = build_partition(layout, perm, m, k);
      if (part.mmk_in.volume() > limit) break;
      if (!seen.insert(sorted_dims(part.mmk_in)).second) continue;
      for (int nt : cfg.thread_choices)
        if (auto c = packed_candidate(layout, perm, device, m, k, nt, cfg)) out.push_back(std::move(*c));
    }
  }
  return out;
}

std::vector<TransposePlan> enumerate_packed_split(const TensorLayout& layout, const Permutation& perm,
                                                  const DeviceProfile& device, const PlannerConfig& cfg) {
  const int n = layout.rank();
  const std::uint64_t cap = device.capacity_elements(layout.element_size());
  std::vector<TransposePlan> out;
  std::set<std::vector<Dim>> seen;
  for (int m = 1; m <= n; ++m) {
    for (int k = 1; k <= n; ++k) {
      Partition part = build_partition(layout, perm, m, k);
      if (!seen.insert(sorted_dims(part.mmk_in)).second) continue;
      const std::uint64_t vol = part.mmk_in.volume();
      const Dim g = largest_dim(part.mmk_in);
      const std::uint64_t dg = layout.extent(g);
      const std::uint64_t rest = vol / dg;
      for (int nt : cfg.thread_choices) {
        if (packed_fits(vol, cap, nt)) continue;
        const auto n_sp = minimal_split(rest, dg, cap, nt);
        if (!n_sp) continue;
        TransposePlan p;
        p.kind = AlgorithmKind::PackedSplit;
        p.layout = layout;
        p.perm = perm;
        p.m = m;
        p.k = k;
        p.part = part;
        p.split_dim = g;
        p.n_sp = *n_sp;
        p.chunk = ceil_div(dg, p.n_sp);
        p.n_thread = nt;
        p.n_warp = nt / kWarpSize;
        p.shmem_elems = rest * p.chunk;
        p.n_reg = static_cast<int>(ceil_div(p.shmem_elems, static_cast<std::uint64_t>(nt)));
        finish_grid(p, device, cfg);
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

std::vector<TransposePlan> build_all_plans(const TensorLayout& layout, const Permutation& perm,
                                           const DeviceProfile& device, const PlannerConfig& cfg) {
  std::vector<TransposePlan> plans;
  plans.push_back(plan_tiled(layout, perm, device, cfg));
  for (auto& p : enumerate_packed(layout, perm, device, cfg)) plans.push_back(std::move(p));
  for (auto& p : enumerate_packed_split(layout, perm, device, cfg)) plans.push_back(std::move(p));
  std::stable_sort(plans.begin(), plans.end(), [](const TransposePlan& a, const TransposePlan& b) {
    return std::make_tuple(static_cast<int>(a.kind), a.m, a.k, a.n_sp, a.n_thread) <
           std::make_tuple(static_cast<int>(b.kind), b.m, b.k, b.n_sp, b.n_thread);
  });
  return plans;
}

void validate_plan(const TransposePlan& p, const DeviceProfile& device) {
  auto fail = [&](const std::string& why) { throw InputError("invalid " + std::string(kind_name(p.kind)) + " plan: " + why); };
  if (p.n_reg < 1 || p.n_reg > kMaxRegisters) fail("n_reg out of [1, 8]");
  if (p.n_warp * kWarpSize != p.n_thread) fail("n_thread is not n_warp * 32");
  if (p.mmk_volume() * p.mbar_volume() != p.layout.volume()) fail("partition does not cover the tensor");
  const std::uint64_t cap = device.capacity_elements(p.layout.element_size());
  switch (p.kind) {
    case AlgorithmKind::Tiled:
      if (p.perm[0] == 0) fail("Tiled requires w_1 != 1");
      if (p.shmem_elems != static_cast<std::uint64_t>(kTileWidth) * (kTileWidth + 1)) fail("shmem must be L(L+1)");
      break;
    case AlgorithmKind::TiledCopy:
      if (p.perm[0] != 0) fail("TiledCopy requires w_1 = 1");
      if (p.shmem_elems != 0) fail("TiledCopy uses no shared memory");
      break;
    case AlgorithmKind::Packed:
      if (p.shmem_elems != p.mmk_volume() || p.shmem_elems > cap) fail("staged volume exceeds capacity");
      break;
    case AlgorithmKind::PackedSplit: {
      if (p.n_sp < 2 || !p.part.mmk_in.contains(p.split_dim)) fail("bad split");
      if (p.split_dim != largest_dim(p.part.mmk_in)) fail("split dimension is not the largest staged dimension");
      const std::uint64_t dg = p.layout.extent(p.split_dim);
      if (p.chunk != ceil_div(dg, p.n_sp) || p.chunk * p.n_sp < dg) fail("chunking does not cover d(g)");
      if (p.shmem_elems != p.mmk_volume() / dg * p.chunk || p.shmem_elems > cap) fail("split volume exceeds capacity");
      break;
    }
  }
  if (p.work_units != p.mbar_volume() * p.units_per_slice()) fail("work unit count mismatch");
  if (p.grid_blocks == 0 || p.n_iter * p.grid_blocks < p.work_units) fail("grid does not cover work units");
}

std::string plan_summary(const TransposePlan& p) {
  std::ostringstream os;
  os << kind_name(p.kind) << " m=" << p.m << " k=" << p.k << " Mmk=" << format_dims_one_based(p.part.mmk_in.dims);
  if (p.kind == AlgorithmKind::PackedSplit) os << " g=" << p.split_dim + 1 << " n_sp=" << p.n_sp;
  os << " threads=" << p.n_thread << " n_reg=" << p.n_reg << " shmem=" << p.shmem_bytes() << "B";
  return os.str();
}

namespace {

std::string mi_text(const MultiIndex& mi) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < mi.dims.size(); ++i) os << (i ? " " : "") << mi.dims[i] + 1 << ':' << mi.extents[i];
  os << "} vol=" << mi.volume();
  return os.str();
}

nlohmann::json mi_json(const MultiIndex& mi) {
  nlohmann::json a = nlohmann::json::array();
  for (std::size_t i = 0; i < mi.dims.size(); ++i) a.push_back({{"dim", mi.dims[i] + 1}, {"extent", mi.extents[i]}});
  return a;
}

}  // namespace

std::string plan_to_text(const TransposePlan& p) {
  std::ostringstream os;
  os << "kind        " << kind_name(p.kind) << '\n'
     << "m, k        " << p.m << ", " << p.k << '\n'
     << "Mmk (in)    " << mi_text(p.part.mmk_in) << '\n'
     << "Mmk (out)   " << mi_text(p.part.mmk_out) << '\n'
     << "Mbar (in)   " << mi_text(p.part.mbar_in) << '\n'
     << "Mbar (out)  " << mi_text(p.part.mbar_out) << '\n';
  if (p.kind == AlgorithmKind::PackedSplit)
    os << "split       g=" << p.split_dim + 1 << " n_sp=" << p.n_sp << " chunk=" << p.chunk << '\n';
  if (p.is_tiled())
    os << "tiles       " << p.tiles_m << " x " << p.tiles_k << " (vol_m=" << p.vol_m << ", vol_k=" << p.vol_k << ")\n";
  os << "n_thread    " << p.n_thread << " (" << p.n_warp << " warps)\n"
     << "n_reg       " << p.n_reg << '\n'
     << "shmem       " << p.shmem_elems << " elems, " << p.shmem_bytes() << " bytes\n"
     << "work units  " << p.work_units << '\n'
     << "grid_blocks " << p.grid_blocks << '\n'
     << "N_iter      " << p.n_iter << '\n';
  return os.str();
}

nlohmann::json plan_json(const TransposePlan& p) {
  nlohmann::json j;
  j["kind"] = kind_name(p.kind);
  j["extents"] = p.layout.extents();
  j["perm"] = p.perm.one_based();
  j["element_size"] = p.layout.element_size();
  j["m"] = p.m;
  j["k"] = p.k;
  j["mmk_in"] = mi_json(p.part.mmk_in);
  j["mmk_out"] = mi_json(p.part.mmk_out);
  j["mbar_in"] = mi_json(p.part.mbar_in);
  j["mbar_out"] = mi_json(p.part.mbar_out);
  j["split_dim"] = p.kind == AlgorithmKind::PackedSplit ? nlohmann::json(p.split_dim + 1) : nlohmann::json();
  j["n_sp"] = p.n_sp;
  j["n_thread"] = p.n_thread;
  j["n_warp"] = p.n_warp;
  j["n_reg"] = p.n_reg;
  j["shmem_elems"] = p.shmem_elems;
  j["shmem_bytes"] = p.shmem_bytes();
  j["work_units"] = p.work_units;
  j["grid_blocks"] = p.grid_blocks;
  j["n_iter"] = p.n_iter;
  return j;
}

std::string plan_to_json(const TransposePlan& p) { return plan_json(p).dump(2); }

}  // namespace ttplan
