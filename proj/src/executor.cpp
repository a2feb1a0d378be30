#include "ttplan/executor.hpp"

#include <atomic>
#include <chrono>
#include <random>
#include <thread>

#include "ttplan/schedule.hpp"

namespace ttplan {

TensorBuffer::TensorBuffer(TensorLayout layout, ElementType type)
    : layout_(std::move(layout)), type_(type), storage_((layout_.bytes() + 7) / 8, 0) {}

std::uint64_t TensorBuffer::raw(std::uint64_t i) const {
  if (layout_.element_size() == 4) return as<std::uint32_t>()[i];
  return as<std::uint64_t>()[i];
}

void TensorBuffer::set_raw(std::uint64_t i, std::uint64_t bits) {
  if (layout_.element_size() == 4)
    as<std::uint32_t>()[i] = static_cast<std::uint32_t>(bits);
  else
    as<std::uint64_t>()[i] = bits;
}

void TensorBuffer::fill_iota() {
  for (std::uint64_t i = 0; i < size(); ++i) {
    if (type_ == ElementType::Unsigned) {
      set_raw(i, i);
    } else if (layout_.element_size() == 4) {
      as<float>()[i] = static_cast<float>(i);
    } else {
      as<double>()[i] = static_cast<double>(i);
    }
  }
}

void TensorBuffer::fill_random(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::uint64_t i = 0; i < size(); ++i) {
    const std::uint64_t r = rng();
    if (type_ == ElementType::Unsigned) {
      set_raw(i, r);
    } else {
      // Small dyadic values keep floating sums exact.
      const double v = static_cast<double>(r % 4096) / 8.0;
      if (layout_.element_size() == 4)
        as<float>()[i] = static_cast<float>(v);
      else
        as<double>()[i] = v;
    }
  }
}

bool TensorBuffer::same_bytes(const TensorBuffer& o) const {
  return byte_size() == o.byte_size() && std::memcmp(bytes(), o.bytes(), byte_size()) == 0;
}

TensorLayout output_layout(const TensorLayout& in, const Permutation& perm) {
  if (perm.rank() != in.rank()) throw InputError("permutation rank does not match tensor rank");
  std::vector<std::uint64_t> ext;
  for (Dim d : perm.order()) ext.push_back(in.extent(d));
  return TensorLayout(std::move(ext), in.element_size());
}

namespace {

struct Assign {
  template <class T>
  void operator()(T& dst, T v) const {
    dst = v;
  }
};
struct Add {
  template <class T>
  void operator()(T& dst, T v) const {
    dst += v;
  }
};

void check_output(const TensorBuffer& input, const Permutation& perm, const TensorBuffer& out) {
  if (!(out.layout() == output_layout(input.layout(), perm)))
    throw InputError("output buffer layout does not match the transposed layout");
  if (out.type() != input.type()) throw InputError("input and output element types differ");
}

// Calls f.template operator()<T, Op>() for the element/arithmetic combination.
template <class F>
void dispatch(const TensorBuffer& input, WriteMode mode, F&& f) {
  const bool four = input.layout().element_size() == 4;
  if (mode == WriteMode::Write) {
    if (four)
      f.template operator()<std::uint32_t, Assign>();
    else
      f.template operator()<std::uint64_t, Assign>();
  } else if (input.type() == ElementType::Unsigned) {
    if (four)
      f.template operator()<std::uint32_t, Add>();
    else
      f.template operator()<std::uint64_t, Add>();
  } else {
    if (four)
      f.template operator()<float, Add>();
    else
      f.template operator()<double, Add>();
  }
}

template <class T, class Op>
void run_unit(const Schedule& s, std::uint64_t unit, const T* in, T* out, T* scratch, Op op) {
  const TransposePlan& p = *s.plan;
  const UnitRef u = decode_unit(p, unit);
  const std::uint64_t mi = s.major_in_pos(u.b);
  const std::uint64_t mo = s.major_out_pos(u.b);
  constexpr std::uint64_t L = kTileWidth;
  constexpr std::uint64_t P = kPaddedPitch;

  switch (p.kind) {
    case AlgorithmKind::Tiled: {
      const std::uint64_t x0 = (u.sub % p.tiles_m) * L, y0 = (u.sub / p.tiles_m) * L;
      const std::uint64_t xn = std::min(L, p.vol_m - x0), yn = std::min(L, p.vol_k - y0);
      for (std::uint64_t j = 0; j < yn; ++j) {
        const T* row = in + mi + (y0 + j) * s.y_stride_in + x0;
        for (std::uint64_t x = 0; x < xn; ++x) scratch[j * P + x] = row[x];
      }
      for (std::uint64_t j = 0; j < xn; ++j) {
        T* col = out + mo + (x0 + j) * s.x_stride_out + y0;
        for (std::uint64_t y = 0; y < yn; ++y) op(col[y], scratch[y * P + j]);
      }
      break;
    }
    case AlgorithmKind::TiledCopy: {
      const std::uint64_t x0 = (u.sub % p.tiles_m) * L, y0 = (u.sub / p.tiles_m) * L;
      const std::uint64_t xn = std::min(L, p.vol_m - x0), yn = std::min(L, p.vol_k - y0);
      for (std::uint64_t j = 0; j < yn; ++j) {
        const T* src = in + mi + x0 + (y0 + j) * s.y_stride_in;
        T* dst = out + mo + x0 + (y0 + j) * s.y_stride_out;
        for (std::uint64_t x = 0; x < xn; ++x) op(dst[x], src[x]);
      }
      break;
    }
    case AlgorithmKind::Packed:
    case AlgorithmKind::PackedSplit: {
      const MinorTables& t = s.tables_for_chunk(u.sub);
      const std::uint64_t start = p.kind == AlgorithmKind::PackedSplit ? u.sub * p.chunk : 0;
      const T* src = in + mi + start * s.g_stride_in;
      T* dst = out + mo + start * s.g_stride_out;
      for (std::uint64_t k = 0; k < t.volume; ++k) scratch[k] = src[t.minor_in[k]];
      for (std::uint64_t k = 0; k < t.volume; ++k) op(dst[t.minor_out[k]], scratch[t.shared[k]]);
      break;
    }
  }
}

}  // namespace

void transpose_scatter_into(const TensorBuffer& input, const Permutation& perm, WriteMode mode, TensorBuffer& out) {
  check_output(input, perm, out);
  const TensorLayout& layout = input.layout();
  const int n = layout.rank();
  std::vector<std::uint64_t> out_stride(static_cast<std::size_t>(n));
  std::uint64_t c = 1;
  for (Dim d : perm.order()) {
    out_stride[static_cast<std::size_t>(d)] = c;
    c *= layout.extent(d);
  }
  dispatch(input, mode, [&]<class T, class Op>() {
    const T* in = input.as<T>();
    T* o = out.as<T>();
    Op op;
    // Odometer over input coordinates; p_out advances by the output strides.
    std::vector<std::uint64_t> coord(static_cast<std::size_t>(n), 0);
    std::uint64_t p_out = 0;
    const std::uint64_t vol = layout.volume();
    for (std::uint64_t p = 0; p < vol; ++p) {
      op(o[p_out], in[p]);
      for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (++coord[ui] < layout.extent(i)) {
          p_out += out_stride[ui];
          break;
        }
        p_out -= (coord[ui] - 1) * out_stride[ui];
        coord[ui] = 0;
      }
    }
  });
}

TensorBuffer transpose_scatter(const TensorBuffer& input, const Permutation& perm, WriteMode mode) {
  TensorBuffer out(output_layout(input.layout(), perm), input.type());
  transpose_scatter_into(input, perm, mode, out);
  return out;
}

void transpose_execute_into(const TransposePlan& plan, const TensorBuffer& input, WriteMode mode, int workers,
                            TensorBuffer& out) {
  if (!(plan.layout == input.layout())) throw InputError("plan was built for a different tensor layout");
  check_output(input, plan.perm, out);
  if (workers < 1) throw InputError("worker count must be at least 1");
  const Schedule sched = make_schedule(plan);
  const std::uint64_t scratch_elems =
      plan.kind == AlgorithmKind::Tiled ? static_cast<std::uint64_t>(kTileWidth) * kPaddedPitch : plan.shmem_elems;
  const std::uint64_t unit_elems = std::max<std::uint64_t>(1, plan.layout.volume() / plan.work_units);
  const std::uint64_t batch = std::max<std::uint64_t>(1, 8192 / unit_elems);

  dispatch(input, mode, [&]<class T, class Op>() {
    const T* in = input.as<T>();
    T* o = out.as<T>();
    std::atomic<std::uint64_t> next{0};
    auto worker = [&] {
      std::vector<T> scratch(static_cast<std::size_t>(scratch_elems));
      for (;;) {
        const std::uint64_t first = next.fetch_add(batch, std::memory_order_relaxed);
        if (first >= plan.work_units) break;
        const std::uint64_t last = std::min(plan.work_units, first + batch);
        for (std::uint64_t u = first; u < last; ++u) run_unit<T>(sched, u, in, o, scratch.data(), Op{});
      }
    };
    if (workers == 1) {
      worker();
      return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  });
}

TensorBuffer transpose_execute(const TransposePlan& plan, const TensorBuffer& input, WriteMode mode, int workers) {
  TensorBuffer out(output_layout(input.layout(), plan.perm), input.type());
  transpose_execute_into(plan, input, mode, workers, out);
  return out;
}

double bandwidth_bytes_per_second(WriteMode mode, std::uint64_t volume, unsigned element_size, double seconds) {
  if (seconds <= 0) throw InputError("elapsed time must be positive");
  return bandwidth_factor(mode) * static_cast<double>(volume) * element_size / seconds;
}

BandwidthResult measure_bandwidth(const TransposePlan& plan, WriteMode mode, int repetitions, int workers) {
  if (repetitions < 1) throw InputError("repetitions must be at least 1");
  TensorBuffer input(plan.layout);
  input.fill_random(1);
  TensorBuffer out(output_layout(plan.layout, plan.perm));
  transpose_execute_into(plan, input, mode, workers, out);  // warm-up
  std::vector<double> times;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    transpose_execute_into(plan, input, mode, workers, out);
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::max(std::chrono::duration<double>(t1 - t0).count(), 1e-9));
  }
  std::sort(times.begin(), times.end());
  const std::size_t n = times.size();
  BandwidthResult r;
  r.median_seconds = n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
  r.bytes_per_second = bandwidth_bytes_per_second(mode, plan.layout.volume(), plan.layout.element_size(), r.median_seconds);
  return r;
}

}  // namespace ttplan
