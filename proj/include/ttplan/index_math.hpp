#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ttplan {

// Dimension labels are 0-based inside the library. The CLI, file formats and
// plan dumps use the 1-based labels; Permutation::from_one_based and
// Permutation::one_based() are the only conversion points.
using Dim = int;

class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Tensor or request too large for an exhaustive pass (simulation, verification).
class SizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TensorLayout {
 public:
  TensorLayout() = default;
  TensorLayout(std::vector<std::uint64_t> extents, unsigned element_size);

  int rank() const { return static_cast<int>(extents_.size()); }
  std::uint64_t extent(Dim d) const { return extents_[static_cast<std::size_t>(d)]; }
  const std::vector<std::uint64_t>& extents() const { return extents_; }
  unsigned element_size() const { return element_size_; }
  std::uint64_t volume() const { return volume_; }
  std::uint64_t bytes() const { return volume_ * element_size_; }

  bool operator==(const TensorLayout&) const = default;

 private:
  std::vector<std::uint64_t> extents_;
  unsigned element_size_ = 4;
  std::uint64_t volume_ = 1;
};

// Output ordering {w_j}: output dimension j is input dimension order()[j].
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<Dim> order);

  static Permutation identity(int rank);
  static Permutation from_one_based(std::span<const int> order);

  int rank() const { return static_cast<int>(order_.size()); }
  Dim operator[](int j) const { return order_[static_cast<std::size_t>(j)]; }
  const std::vector<Dim>& order() const { return order_; }
  std::vector<int> one_based() const;

  // Position of dimension d in the output ordering.
  int position_of(Dim d) const { return position_[static_cast<std::size_t>(d)]; }
  bool is_identity() const;
  Permutation inverse() const;

  bool operator==(const Permutation& o) const { return order_ == o.order_; }

 private:
  std::vector<Dim> order_;
  std::vector<int> position_;
};

// Ordered set of dimensions treated as one composite index.
struct MultiIndex {
  std::vector<Dim> dims;
  std::vector<std::uint64_t> extents;

  MultiIndex() = default;
  MultiIndex(std::vector<Dim> dims, const TensorLayout& layout);

  int size() const { return static_cast<int>(dims.size()); }
  bool empty() const { return dims.empty(); }
  std::uint64_t volume() const;
  bool contains(Dim d) const;

  bool operator==(const MultiIndex&) const = default;
};

// c(z, ordering): product of the extents preceding z in ordering.
std::uint64_t cumulative_volume(Dim z, std::span<const Dim> ordering, const TensorLayout& layout);
std::uint64_t cumulative_volume(Dim z, const MultiIndex& ordering);

// coords are indexed by dimension label: coords[d] is the coordinate along d.
std::uint64_t scalar_position(std::span<const std::uint64_t> coords, std::span<const Dim> ordering,
                              const TensorLayout& layout);
std::vector<std::uint64_t> coords_from_position(std::uint64_t p, std::span<const Dim> ordering,
                                                const TensorLayout& layout);

// Output linear position of the element stored at input position p_in.
std::uint64_t transpose_position(std::uint64_t p_in, const Permutation& perm,
                                 const TensorLayout& layout);

/// One term of a mixed-radix position sum: ((index / divisor) % extent) * stride.
struct PositionTerm {
  std::uint64_t divisor = 1;
  std::uint64_t extent = 1;
  std::uint64_t stride = 0;
};

inline std::uint64_t evaluate_terms(std::uint64_t index, std::span<const PositionTerm> terms) {
  std::uint64_t pos = 0;
  for (const auto& t : terms) pos += ((index / t.divisor) % t.extent) * t.stride;
  return pos;
}

// Term builders for the five position maps. The index is decomposed over
// `decompose` order; each dimension's stride is taken from `stride_order`.
std::vector<PositionTerm> position_terms(const MultiIndex& decompose, std::span<const Dim> stride_order,
                                         const TensorLayout& layout);
std::vector<PositionTerm> position_terms(const MultiIndex& decompose, const MultiIndex& stride_order);

// Major positions (b over vol of the complement multi-index).
std::uint64_t p_major_in(std::uint64_t b, const MultiIndex& mbar_in, const TensorLayout& layout);
std::uint64_t p_major_out(std::uint64_t b, const MultiIndex& mbar_out, const TensorLayout& layout,
                          const Permutation& perm);
// Write-side major position paired with p_major_in: b is decomposed in the
// input-ordered complement, so both sides name the same element.
std::uint64_t p_major_out_paired(std::uint64_t b, const MultiIndex& mbar_in, const TensorLayout& layout,
                                 const Permutation& perm);

// Minor positions (k over vol of the staged multi-index).
std::uint64_t p_minor_in(std::uint64_t k, const MultiIndex& mmk_in, const TensorLayout& layout);
std::uint64_t p_minor_out(std::uint64_t k, const MultiIndex& mmk_out, const TensorLayout& layout,
                          const Permutation& perm);
std::uint64_t p_shared(std::uint64_t k, const MultiIndex& mmk_out, const MultiIndex& mmk_in);

inline constexpr int kWarpSize = 32;

struct LaneReduction {
  std::uint64_t value = 0;
  std::array<std::uint64_t, kWarpSize> lanes{};
  bool replicated = false;  // every lane holds the same sum
};

// Warp-parallel position sum: lanes below h each evaluate one term, then an
// XOR butterfly reduces across the warp. `lanes` must be a power of two <= 32.
LaneReduction lane_parallel_position(std::uint64_t b, std::span<const std::uint64_t> c_lane,
                                     std::span<const std::uint64_t> d_lane,
                                     std::span<const std::uint64_t> ct_lane, int h,
                                     int lanes = kWarpSize);

std::string format_dims_one_based(std::span<const Dim> dims);

}  // namespace ttplan
