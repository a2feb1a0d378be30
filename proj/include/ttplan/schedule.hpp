#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ttplan/index_math.hpp"
#include "ttplan/plan.hpp"

namespace ttplan {

// Precomputed minor-position tables for one staged block (Packed slice or
// PackedSplit chunk), indexed by the staged linear index.
struct MinorTables {
  std::uint64_t volume = 0;
  std::vector<std::uint64_t> minor_in;   // k over Mmk^I -> input offset
  std::vector<std::uint64_t> minor_out;  // k' over Mmk^O -> output offset
  std::vector<std::uint64_t> shared;     // k' over Mmk^O -> staging index
};

struct Schedule {
  const TransposePlan* plan = nullptr;
  std::vector<PositionTerm> major_in;   // Mbar^I decomposition, input strides
  std::vector<PositionTerm> major_out;  // Mbar^I decomposition, output strides

  // Tiled / TiledCopy
  std::uint64_t y_stride_in = 0;
  std::uint64_t y_stride_out = 0;  // TiledCopy
  std::uint64_t x_stride_out = 0;  // Tiled

  // Packed / PackedSplit
  MinorTables full;
  MinorTables tail;  // last PackedSplit chunk when shorter than plan.chunk
  std::uint64_t g_stride_in = 0;
  std::uint64_t g_stride_out = 0;

  std::uint64_t major_in_pos(std::uint64_t b) const { return evaluate_terms(b, major_in); }
  std::uint64_t major_out_pos(std::uint64_t b) const { return evaluate_terms(b, major_out); }
  const MinorTables& tables_for_chunk(std::uint64_t c) const;
};

Schedule make_schedule(const TransposePlan& plan);

// Tables for the staged block with the split dimension (if any) cut to len.
MinorTables build_minor_tables(const TransposePlan& plan, Dim cut_dim, std::uint64_t len);

struct UnitRef {
  std::uint64_t b = 0;    // Mbar slice
  std::uint64_t sub = 0;  // tile index within the slice, or split chunk
};

inline UnitRef decode_unit(const TransposePlan& plan, std::uint64_t unit) {
  const std::uint64_t per = plan.units_per_slice();
  return {unit / per, unit % per};
}

struct LaneSet {
  std::array<std::uint64_t, kWarpSize> idx{};
  std::uint32_t mask = 0;
};

// Tiled staging buffer pitch: L+1 padded, L unpadded.
inline constexpr int kPaddedPitch = kTileWidth + 1;

// Walks the warp-level schedule of one work unit. Element positions (not
// bytes) are reported to the visitor in issue order:
//   read phase:  global_load, then shared_store with the same lanes
//                (TiledCopy: global_load, then global_store)
//   write phase: shared_load, then global_store with the same lanes
template <class Visitor>
void walk_unit(const Schedule& s, std::uint64_t unit, int pitch, Visitor& v) {
  const TransposePlan& p = *s.plan;
  const UnitRef u = decode_unit(p, unit);
  const std::uint64_t mi = s.major_in_pos(u.b);
  const std::uint64_t mo = s.major_out_pos(u.b);
  const int warps = p.n_warp;

  if (p.is_tiled()) {
    const std::uint64_t x0 = (u.sub % p.tiles_m) * kTileWidth;
    const std::uint64_t y0 = (u.sub / p.tiles_m) * kTileWidth;
    const bool copy = p.kind == AlgorithmKind::TiledCopy;
    LaneSet a, c;
    for (int w = 0; w < warps; ++w) {
      for (int j = w; j < kTileWidth; j += warps) {
        const std::uint64_t y = y0 + static_cast<std::uint64_t>(j);
        if (y >= p.vol_k) continue;
        a.mask = c.mask = 0;
        for (int lane = 0; lane < kWarpSize; ++lane) {
          const std::uint64_t x = x0 + static_cast<std::uint64_t>(lane);
          if (x >= p.vol_m) continue;
          a.mask |= 1u << lane;
          a.idx[static_cast<std::size_t>(lane)] = mi + x + y * s.y_stride_in;
          c.idx[static_cast<std::size_t>(lane)] =
              copy ? mo + x + y * s.y_stride_out : static_cast<std::uint64_t>(j * pitch + lane);
        }
        c.mask = a.mask;
        v.global_load(a);
        if (copy)
          v.global_store(c);
        else
          v.shared_store(c);
      }
    }
    if (copy) return;
    for (int w = 0; w < warps; ++w) {
      for (int j = w; j < kTileWidth; j += warps) {
        const std::uint64_t x = x0 + static_cast<std::uint64_t>(j);
        if (x >= p.vol_m) continue;
        a.mask = 0;
        for (int lane = 0; lane < kWarpSize; ++lane) {
          const std::uint64_t y = y0 + static_cast<std::uint64_t>(lane);
          if (y >= p.vol_k) continue;
          a.mask |= 1u << lane;
          a.idx[static_cast<std::size_t>(lane)] = static_cast<std::uint64_t>(lane * pitch + j);
          c.idx[static_cast<std::size_t>(lane)] = mo + y + x * s.x_stride_out;
        }
        c.mask = a.mask;
        v.shared_load(a);
        v.global_store(c);
      }
    }
    return;
  }

  const MinorTables& t = s.tables_for_chunk(u.sub);
  const std::uint64_t start = p.kind == AlgorithmKind::PackedSplit ? u.sub * p.chunk : 0;
  const std::uint64_t oi = mi + start * s.g_stride_in;
  const std::uint64_t oo = mo + start * s.g_stride_out;
  const auto nt = static_cast<std::uint64_t>(p.n_thread);
  LaneSet a, c;
  for (int pass = 0; pass < 2; ++pass) {
    for (int w = 0; w < warps; ++w) {
      for (int r = 0; r < p.n_reg; ++r) {
        const std::uint64_t base = static_cast<std::uint64_t>(r) * nt + static_cast<std::uint64_t>(w) * kWarpSize;
        if (base >= t.volume) continue;
        a.mask = 0;
        for (int lane = 0; lane < kWarpSize; ++lane) {
          const std::uint64_t k = base + static_cast<std::uint64_t>(lane);
          if (k >= t.volume) break;
          a.mask |= 1u << lane;
          const auto l = static_cast<std::size_t>(lane);
          if (pass == 0) {
            a.idx[l] = oi + t.minor_in[k];
            c.idx[l] = k;
          } else {
            a.idx[l] = t.shared[k];
            c.idx[l] = oo + t.minor_out[k];
          }
        }
        c.mask = a.mask;
        if (pass == 0) {
          v.global_load(a);
          v.shared_store(c);
        } else {
          v.shared_load(a);
          v.global_store(c);
        }
      }
    }
  }
}

}  // namespace ttplan
