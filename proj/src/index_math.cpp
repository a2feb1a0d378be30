#include "ttplan/index_math.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace ttplan {

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
    throw InputError("tensor volume overflows 64 bits");
  return a * b;
}

int find_in(std::span<const Dim> ordering, Dim z) {
  auto it = std::find(ordering.begin(), ordering.end(), z);
  if (it == ordering.end())
    throw InputError("dimension " + std::to_string(z + 1) + " is not in the ordering");
  return static_cast<int>(it - ordering.begin());
}

void check_full_ordering(std::span<const Dim> ordering, const TensorLayout& layout) {
  if (static_cast<int>(ordering.size()) != layout.rank())
    throw InputError("ordering length does not match tensor rank");
}

}  // namespace

TensorLayout::TensorLayout(std::vector<std::uint64_t> extents, unsigned element_size)
    : extents_(std::move(extents)), element_size_(element_size) {
  if (extents_.empty()) throw InputError("tensor rank must be at least 1");
  if (element_size_ != 4 && element_size_ != 8) throw InputError("element size must be 4 or 8 bytes");
  volume_ = 1;
  for (auto e : extents_) {
    if (e == 0) throw InputError("tensor extents must be positive");
    volume_ = checked_mul(volume_, e);
  }
  checked_mul(volume_, element_size_);
}

Permutation::Permutation(std::vector<Dim> order) : order_(std::move(order)) {
  const int n = static_cast<int>(order_.size());
  if (n == 0) throw InputError("permutation must not be empty");
  position_.assign(order_.size(), -1);
  for (int j = 0; j < n; ++j) {
    Dim d = order_[static_cast<std::size_t>(j)];
    if (d < 0 || d >= n) throw InputError("permutation entry out of range");
    if (position_[static_cast<std::size_t>(d)] != -1)
      throw InputError("permutation repeats dimension " + std::to_string(d + 1));
    position_[static_cast<std::size_t>(d)] = j;
  }
}

Permutation Permutation::identity(int rank) {
  std::vector<Dim> order(static_cast<std::size_t>(rank));
  for (int i = 0; i < rank; ++i) order[static_cast<std::size_t>(i)] = i;
  return Permutation(std::move(order));
}

Permutation Permutation::from_one_based(std::span<const int> order) {
  std::vector<Dim> zero(order.size());
  std::transform(order.begin(), order.end(), zero.begin(), [](int v) { return v - 1; });
  return Permutation(std::move(zero));
}

std::vector<int> Permutation::one_based() const {
  std::vector<int> out(order_.size());
  std::transform(order_.begin(), order_.end(), out.begin(), [](Dim d) { return d + 1; });
  return out;
}

bool Permutation::is_identity() const {
  for (int j = 0; j < rank(); ++j)
    if (order_[static_cast<std::size_t>(j)] != j) return false;
  return true;
}

Permutation Permutation::inverse() const {
  // Output dimension j holds input dimension w_j, so transposing the output
  // again with position_ restores the input order.
  return Permutation(std::vector<Dim>(position_.begin(), position_.end()));
}

MultiIndex::MultiIndex(std::vector<Dim> d, const TensorLayout& layout) : dims(std::move(d)) {
  extents.reserve(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] < 0 || dims[i] >= layout.rank()) throw InputError("multi-index dimension out of range");
    if (std::find(dims.begin(), dims.begin() + static_cast<std::ptrdiff_t>(i), dims[i]) !=
        dims.begin() + static_cast<std::ptrdiff_t>(i))
      throw InputError("multi-index repeats a dimension");
    extents.push_back(layout.extent(dims[i]));
  }
}

std::uint64_t MultiIndex::volume() const {
  std::uint64_t v = 1;
  for (auto e : extents) v *= e;
  return v;
}

bool MultiIndex::contains(Dim d) const {
  return std::find(dims.begin(), dims.end(), d) != dims.end();
}

std::uint64_t cumulative_volume(Dim z, std::span<const Dim> ordering, const TensorLayout& layout) {
  const int i = find_in(ordering, z);
  std::uint64_t c = 1;
  for (int j = 0; j < i; ++j) c *= layout.extent(ordering[static_cast<std::size_t>(j)]);
  return c;
}

std::uint64_t cumulative_volume(Dim z, const MultiIndex& ordering) {
  const int i = find_in(ordering.dims, z);
  std::uint64_t c = 1;
  for (int j = 0; j < i; ++j) c *= ordering.extents[static_cast<std::size_t>(j)];
  return c;
}

std::uint64_t scalar_position(std::span<const std::uint64_t> coords, std::span<const Dim> ordering,
                              const TensorLayout& layout) {
  check_full_ordering(ordering, layout);
  if (static_cast<int>(coords.size()) != layout.rank())
    throw InputError("coordinate count does not match tensor rank");
  std::uint64_t p = 0;
  std::uint64_t stride = 1;
  for (Dim d : ordering) {
    const auto x = coords[static_cast<std::size_t>(d)];
    if (x >= layout.extent(d)) throw InputError("coordinate out of range");
    p += x * stride;
    stride *= layout.extent(d);
  }
  return p;
}

std::vector<std::uint64_t> coords_from_position(std::uint64_t p, std::span<const Dim> ordering,
                                                const TensorLayout& layout) {
  check_full_ordering(ordering, layout);
  if (p >= layout.volume()) throw InputError("position out of range");
  std::vector<std::uint64_t> coords(static_cast<std::size_t>(layout.rank()));
  std::uint64_t c = 1;
  for (Dim d : ordering) {
    coords[static_cast<std::size_t>(d)] = (p / c) % layout.extent(d);
    c *= layout.extent(d);
  }
  return coords;
}

std::uint64_t transpose_position(std::uint64_t p_in, const Permutation& perm, const TensorLayout& layout) {
  if (perm.rank() != layout.rank()) throw InputError("permutation rank does not match tensor rank");
  if (p_in >= layout.volume()) throw InputError("position out of range");
  // Coordinates of p_in come off in input order (c(i, I) grows with i); each
  // one is placed at its dimension's stride in the output ordering.
  std::vector<std::uint64_t> out_stride(static_cast<std::size_t>(layout.rank()));
  std::uint64_t c = 1;
  for (Dim d : perm.order()) {
    out_stride[static_cast<std::size_t>(d)] = c;
    c *= layout.extent(d);
  }
  std::uint64_t p_out = 0;
  std::uint64_t rest = p_in;
  for (int i = 0; i < layout.rank(); ++i) {
    const auto e = layout.extent(i);
    p_out += (rest % e) * out_stride[static_cast<std::size_t>(i)];
    rest /= e;
  }
  return p_out;
}

std::vector<PositionTerm> position_terms(const MultiIndex& decompose, std::span<const Dim> stride_order,
                                         const TensorLayout& layout) {
  std::vector<PositionTerm> terms;
  terms.reserve(decompose.dims.size());
  for (Dim d : decompose.dims)
    terms.push_back({cumulative_volume(d, decompose), layout.extent(d),
                     cumulative_volume(d, stride_order, layout)});
  return terms;
}

std::vector<PositionTerm> position_terms(const MultiIndex& decompose, const MultiIndex& stride_order) {
  std::vector<PositionTerm> terms;
  terms.reserve(decompose.dims.size());
  for (std::size_t i = 0; i < decompose.dims.size(); ++i) {
    const Dim d = decompose.dims[i];
    terms.push_back({cumulative_volume(d, decompose), decompose.extents[i], cumulative_volume(d, stride_order)});
  }
  return terms;
}

namespace {

std::uint64_t bounded_eval(std::uint64_t index, const MultiIndex& mi, std::span<const PositionTerm> terms) {
  if (index >= mi.volume()) throw InputError("index out of range for multi-index volume");
  return evaluate_terms(index, terms);
}

std::vector<Dim> identity_order(int rank) { return Permutation::identity(rank).order(); }

}  // namespace

std::uint64_t p_major_in(std::uint64_t b, const MultiIndex& mbar_in, const TensorLayout& layout) {
  const auto in = identity_order(layout.rank());
  return bounded_eval(b, mbar_in, position_terms(mbar_in, in, layout));
}

std::uint64_t p_major_out(std::uint64_t b, const MultiIndex& mbar_out, const TensorLayout& layout,
                          const Permutation& perm) {
  return bounded_eval(b, mbar_out, position_terms(mbar_out, perm.order(), layout));
}

std::uint64_t p_major_out_paired(std::uint64_t b, const MultiIndex& mbar_in, const TensorLayout& layout,
                                 const Permutation& perm) {
  return bounded_eval(b, mbar_in, position_terms(mbar_in, perm.order(), layout));
}

std::uint64_t p_minor_in(std::uint64_t k, const MultiIndex& mmk_in, const TensorLayout& layout) {
  const auto in = identity_order(layout.rank());
  return bounded_eval(k, mmk_in, position_terms(mmk_in, in, layout));
}

std::uint64_t p_minor_out(std::uint64_t k, const MultiIndex& mmk_out, const TensorLayout& layout,
                          const Permutation& perm) {
  return bounded_eval(k, mmk_out, position_terms(mmk_out, perm.order(), layout));
}

std::uint64_t p_shared(std::uint64_t k, const MultiIndex& mmk_out, const MultiIndex& mmk_in) {
  return bounded_eval(k, mmk_out, position_terms(mmk_out, mmk_in));
}

LaneReduction lane_parallel_position(std::uint64_t b, std::span<const std::uint64_t> c_lane,
                                     std::span<const std::uint64_t> d_lane,
                                     std::span<const std::uint64_t> ct_lane, int h, int lanes) {
  if (lanes < 1 || lanes > kWarpSize || (lanes & (lanes - 1)) != 0)
    throw InputError("lane count must be a power of two no larger than 32");
  if (h < 0 || h > lanes) throw InputError("term count exceeds lane count");
  if (static_cast<int>(c_lane.size()) < h || static_cast<int>(d_lane.size()) < h ||
      static_cast<int>(ct_lane.size()) < h)
    throw InputError("lane arrays shorter than term count");

  LaneReduction r;
  for (int lane = 0; lane < lanes; ++lane) {
    if (lane < h) {
      const auto i = static_cast<std::size_t>(lane);
      r.lanes[i] = ((b / c_lane[i]) % d_lane[i]) * ct_lane[i];
    }
  }
  std::array<std::uint64_t, kWarpSize> next{};
  for (int offset = lanes / 2; offset >= 1; offset /= 2) {
    for (int lane = 0; lane < lanes; ++lane)
      next[static_cast<std::size_t>(lane)] =
          r.lanes[static_cast<std::size_t>(lane)] + r.lanes[static_cast<std::size_t>(lane ^ offset)];
    std::copy_n(next.begin(), lanes, r.lanes.begin());
  }
  r.value = r.lanes[0];
  r.replicated = std::all_of(r.lanes.begin(), r.lanes.begin() + lanes,
                             [&](std::uint64_t v) { return v == r.value; });
  return r;
}

std::string format_dims_one_based(std::span<const Dim> dims) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i] + 1;
  os << '}';
  return os.str();
}

}  // namespace ttplan
