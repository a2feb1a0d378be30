#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ttplan/device_profile.hpp"
#include "ttplan/index_math.hpp"

namespace ttplan {

enum class AlgorithmKind { Tiled = 0, TiledCopy = 1, Packed = 2, PackedSplit = 3 };

const char* kind_name(AlgorithmKind k);
AlgorithmKind parse_kind(const std::string& s);

inline constexpr int kTileWidth = 32;          // L
inline constexpr int kTiledThreads = 256;      // 32 x 8 tile threads
inline constexpr int kMaxRegisters = 8;
inline constexpr int kThreadChoices[] = {128, 256, 512};

struct Partition {
  MultiIndex mmk_in;    // staged dims, input order
  MultiIndex mmk_out;   // staged dims, output order
  MultiIndex mbar_in;   // remaining dims, input order
  MultiIndex mbar_out;  // remaining dims, output order
};

// m leading input dims joined with k leading output dims.
Partition build_partition(const TensorLayout& layout, const Permutation& perm, int m, int k);

struct TransposePlan {
  AlgorithmKind kind = AlgorithmKind::Tiled;
  TensorLayout layout;
  Permutation perm;
  int m = 1;
  int k = 1;
  Partition part;
  Dim split_dim = -1;  // PackedSplit only
  std::uint64_t n_sp = 1;
  std::uint64_t chunk = 0;  // ceil(d(g)/n_sp) for PackedSplit
  int n_thread = kTiledThreads;
  int n_warp = kTiledThreads / kWarpSize;
  int n_reg = 1;
  std::uint64_t shmem_elems = 0;
  std::uint64_t work_units = 1;
  std::uint64_t grid_blocks = 1;
  std::uint64_t n_iter = 1;

  // Tile geometry (Tiled, TiledCopy): x runs along input dim 1, y along tile_y_dim.
  Dim tile_y_dim = 0;
  std::uint64_t vol_m = 1;
  std::uint64_t vol_k = 1;
  std::uint64_t tiles_m = 1;
  std::uint64_t tiles_k = 1;

  bool is_tiled() const { return kind == AlgorithmKind::Tiled || kind == AlgorithmKind::TiledCopy; }
  std::uint64_t mmk_volume() const { return part.mmk_in.volume(); }
  std::uint64_t mbar_volume() const { return part.mbar_in.volume(); }
  std::uint64_t shmem_bytes() const { return shmem_elems * layout.element_size(); }
  // Units executed per M-bar slice: tiles, 1, or n_sp chunks.
  std::uint64_t units_per_slice() const;
};

struct PlannerConfig {
  std::vector<int> thread_choices{std::begin(kThreadChoices), std::end(kThreadChoices)};
  int blocks_per_sm_cap = 32;
};

std::uint64_t grid_cap(const DeviceProfile& device, const PlannerConfig& cfg = {});

// Smallest n_sp >= 2 (and <= extent_g) with vol_rest*ceil(extent_g/n_sp) within
// capacity and ceil(split volume / n_thread) <= 8.
std::optional<std::uint64_t> minimal_split(std::uint64_t vol_rest, std::uint64_t extent_g,
                                           std::uint64_t capacity_elems, int n_thread);

TransposePlan plan_tiled(const TensorLayout& layout, const Permutation& perm, const DeviceProfile& device,
                         const PlannerConfig& cfg = {});
std::optional<TransposePlan> packed_candidate(const TensorLayout& layout, const Permutation& perm,
                                              const DeviceProfile& device, int m, int k, int n_thread,
                                              const PlannerConfig& cfg = {});
std::vector<TransposePlan> enumerate_packed(const TensorLayout& layout, const Permutation& perm,
                                            const DeviceProfile& device, const PlannerConfig& cfg = {});
std::vector<TransposePlan> enumerate_packed_split(const TensorLayout& layout, const Permutation& perm,
                                                  const DeviceProfile& device, const PlannerConfig& cfg = {});
std::vector<TransposePlan> build_all_plans(const TensorLayout& layout, const Permutation& perm,
                                           const DeviceProfile& device, const PlannerConfig& cfg = {});

// Throws InputError when the plan's invariants do not hold for its device.
void validate_plan(const TransposePlan& plan, const DeviceProfile& device);

struct Selection {
  std::size_t index = 0;
  std::vector<double> scores;  // one per plan, lower is better
};

Selection select_heuristic(const std::vector<TransposePlan>& plans, const DeviceProfile& device,
                           std::uint64_t rng_seed);

inline constexpr std::uint64_t kDefaultSimCap = std::uint64_t{1} << 22;

// Weighted exact traffic per plan. Throws SizeError when the tensor exceeds cap.
Selection select_simulated(const std::vector<TransposePlan>& plans, const DeviceProfile& device,
                           std::uint64_t volume_cap = kDefaultSimCap);

std::string plan_summary(const TransposePlan& plan);  // one line
std::string plan_to_text(const TransposePlan& plan);  // multi-line dump
std::string plan_to_json(const TransposePlan& plan);

}  // namespace ttplan
