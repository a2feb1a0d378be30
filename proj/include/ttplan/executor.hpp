#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <vector>

#include "ttplan/index_math.hpp"
#include "ttplan/plan.hpp"

namespace ttplan {

enum class ElementType { Unsigned, Floating };
enum class WriteMode { Write, Accumulate };

// Flat tensor storage; 8-byte aligned backing regardless of element size.
class TensorBuffer {
 public:
  TensorBuffer() = default;
  TensorBuffer(TensorLayout layout, ElementType type = ElementType::Unsigned);

  const TensorLayout& layout() const { return layout_; }
  ElementType type() const { return type_; }
  std::uint64_t size() const { return layout_.volume(); }
  std::size_t byte_size() const { return static_cast<std::size_t>(layout_.bytes()); }

  unsigned char* bytes() { return reinterpret_cast<unsigned char*>(storage_.data()); }
  const unsigned char* bytes() const { return reinterpret_cast<const unsigned char*>(storage_.data()); }

  template <class T>
  T* as() {
    return reinterpret_cast<T*>(storage_.data());
  }
  template <class T>
  const T* as() const {
    return reinterpret_cast<const T*>(storage_.data());
  }

  // Element i widened to 64 bits (raw bit pattern).
  std::uint64_t raw(std::uint64_t i) const;
  void set_raw(std::uint64_t i, std::uint64_t bits);

  void fill_iota();
  void fill_random(std::uint64_t seed);
  void fill_zero() { std::fill(storage_.begin(), storage_.end(), 0); }

  bool same_bytes(const TensorBuffer& o) const;

 private:
  TensorLayout layout_;
  ElementType type_ = ElementType::Unsigned;
  std::vector<std::uint64_t> storage_;
};

// out[transpose_position(p)] = in[p] (Write) or += in[p] (Accumulate).
void transpose_scatter_into(const TensorBuffer& input, const Permutation& perm, WriteMode mode, TensorBuffer& out);
TensorBuffer transpose_scatter(const TensorBuffer& input, const Permutation& perm, WriteMode mode = WriteMode::Write);

// Runs the plan's blocked schedule with `workers` threads claiming work units.
void transpose_execute_into(const TransposePlan& plan, const TensorBuffer& input, WriteMode mode, int workers,
                            TensorBuffer& out);
TensorBuffer transpose_execute(const TransposePlan& plan, const TensorBuffer& input, WriteMode mode = WriteMode::Write,
                               int workers = 1);

// Layout of the transposed tensor: extent j is d(w_j).
TensorLayout output_layout(const TensorLayout& in, const Permutation& perm);

inline double bandwidth_factor(WriteMode mode) { return mode == WriteMode::Write ? 2.0 : 3.0; }
// factor * vol * element_size / seconds
double bandwidth_bytes_per_second(WriteMode mode, std::uint64_t volume, unsigned element_size, double seconds);

struct BandwidthResult {
  double median_seconds = 0;
  double bytes_per_second = 0;
};

BandwidthResult measure_bandwidth(const TransposePlan& plan, WriteMode mode, int repetitions, int workers = 1);

}  // namespace ttplan
