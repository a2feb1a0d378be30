#include "ttplan/schedule.hpp"

namespace ttplan {

const MinorTables& Schedule::tables_for_chunk(std::uint64_t c) const {
  if (plan->kind == AlgorithmKind::PackedSplit && c + 1 == plan->n_sp && tail.volume != 0) return tail;
  return full;
}

MinorTables build_minor_tables(const TransposePlan& plan, Dim cut_dim, std::uint64_t len) {
  const TensorLayout& layout = plan.layout;
  const Partition& part = plan.part;
  auto extent = [&](Dim d) { return d == cut_dim ? len : layout.extent(d); };

  // Input/output strides of every dimension in the full tensor.
  const int n = layout.rank();
  std::vector<std::uint64_t> in_stride(static_cast<std::size_t>(n)), out_stride(static_cast<std::size_t>(n));
  std::uint64_t c = 1;
  for (Dim d = 0; d < n; ++d) {
    in_stride[static_cast<std::size_t>(d)] = c;
    c *= layout.extent(d);
  }
  c = 1;
  for (Dim d : plan.perm.order()) {
    out_stride[static_cast<std::size_t>(d)] = c;
    c *= layout.extent(d);
  }

  // Staging strides: compact cumulative volume over Mmk^I with the cut extent.
  std::vector<std::uint64_t> sh_stride(static_cast<std::size_t>(n), 0);
  c = 1;
  for (Dim d : part.mmk_in.dims) {
    sh_stride[static_cast<std::size_t>(d)] = c;
    c *= extent(d);
  }

  MinorTables t;
  t.volume = c;
  t.minor_in.resize(t.volume);
  t.minor_out.resize(t.volume);
  t.shared.resize(t.volume);

  // Odometer walks keep the tables exact without per-element division.
  auto fill = [&](const std::vector<Dim>& order, auto&& emit) {
    std::vector<std::uint64_t> coord(order.size(), 0);
    for (std::uint64_t k = 0; k < t.volume; ++k) {
      emit(k, coord);
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (++coord[i] < extent(order[i])) break;
        coord[i] = 0;
      }
    }
  };
  const auto& mi = part.mmk_in.dims;
  const auto& mo = part.mmk_out.dims;
  fill(mi, [&](std::uint64_t k, const std::vector<std::uint64_t>& x) {
    std::uint64_t pos = 0;
    for (std::size_t i = 0; i < mi.size(); ++i) pos += x[i] * in_stride[static_cast<std::size_t>(mi[i])];
    t.minor_in[k] = pos;
  });
  fill(mo, [&](std::uint64_t k, const std::vector<std::uint64_t>& x) {
    std::uint64_t pos = 0, sh = 0;
    for (std::size_t i = 0; i < mo.size(); ++i) {
      pos += x[i] * out_stride[static_cast<std::size_t>(mo[i])];
      sh += x[i] * sh_stride[static_cast<std::size_t>(mo[i])];
    }
    t.minor_out[k] = pos;
    t.shared[k] = sh;
  });
  return t;
}

Schedule make_schedule(const TransposePlan& plan) {
  Schedule s;
  s.plan = &plan;
  const TensorLayout& layout = plan.layout;
  const auto in_order = Permutation::identity(layout.rank()).order();
  s.major_in = position_terms(plan.part.mbar_in, in_order, layout);
  s.major_out = position_terms(plan.part.mbar_in, plan.perm.order(), layout);

  switch (plan.kind) {
    case AlgorithmKind::Tiled:
      s.y_stride_in = cumulative_volume(plan.tile_y_dim, in_order, layout);
      s.x_stride_out = cumulative_volume(0, plan.perm.order(), layout);
      break;
    case AlgorithmKind::TiledCopy:
      s.y_stride_in = cumulative_volume(plan.tile_y_dim, in_order, layout);
      s.y_stride_out = cumulative_volume(plan.tile_y_dim, plan.perm.order(), layout);
      break;
    case AlgorithmKind::Packed:
      s.full = build_minor_tables(plan, -1, 0);
      break;
    case AlgorithmKind::PackedSplit: {
      const Dim g = plan.split_dim;
      const std::uint64_t dg = layout.extent(g);
      s.full = build_minor_tables(plan, g, plan.chunk);
      const std::uint64_t tail_len = dg - (plan.n_sp - 1) * plan.chunk;
      if (tail_len != plan.chunk) s.tail = build_minor_tables(plan, g, tail_len);
      s.g_stride_in = cumulative_volume(g, in_order, layout);
      s.g_stride_out = cumulative_volume(g, plan.perm.order(), layout);
      break;
    }
  }
  return s;
}

}  // namespace ttplan
