#include <catch_amalgamated.hpp>

#include <random>

#include "support/random_cases.hpp"
#include "ttplan/index_math.hpp"
#include "ttplan/plan.hpp"

using namespace ttplan;
using ttplan::testing::CaseSpec;
using ttplan::testing::random_case;

namespace {

Permutation P(std::initializer_list<int> one_based) {
  std::vector<int> v(one_based);
  return Permutation::from_one_based(v);
}

TensorLayout T(std::vector<std::uint64_t> e, unsigned elem = 4) { return TensorLayout(std::move(e), elem); }

}  // namespace

TEST_CASE("layout and permutation validation", "[index]") {
  CHECK_THROWS_AS(T({}), InputError);
  CHECK_THROWS_AS(T({2, 0, 3}), InputError);
  CHECK_THROWS_AS(T({2, 3}, 2), InputError);
  CHECK_THROWS_AS(T({std::uint64_t{1} << 40, std::uint64_t{1} << 30}), InputError);
  CHECK_THROWS_AS(P({1, 1, 2}), InputError);
  CHECK_THROWS_AS(P({0, 1}), InputError);
  CHECK_THROWS_AS(P({}), InputError);
  CHECK(T({2, 3, 4}).volume() == 24);
  CHECK(T({1, 1, 5}).volume() == 5);
  CHECK(P({3, 1, 2}).one_based() == std::vector<int>{3, 1, 2});
  CHECK(P({1, 2, 3}).is_identity());
  CHECK(P({3, 1, 2}).inverse() == P({2, 3, 1}));
}

TEST_CASE("cumulative_volume examples", "[index]") {
  const auto L = T({2, 3, 4});
  const std::vector<Dim> ident{0, 1, 2};
  const std::vector<Dim> rot{2, 0, 1};
  CHECK(cumulative_volume(0, ident, L) == 1);
  CHECK(cumulative_volume(2, ident, L) == 6);
  CHECK(cumulative_volume(1, rot, L) == 8);
  const std::vector<Dim> partial{0, 2};
  CHECK_THROWS_AS(cumulative_volume(1, partial, L), InputError);
}

TEST_CASE("scalar_position and coords_from_position", "[index]") {
  const auto L = T({2, 3});
  const std::vector<Dim> ident{0, 1};
  const std::vector<std::uint64_t> origin{0, 0}, x{1, 2}, bad{2, 0};
  CHECK(scalar_position(origin, ident, L) == 0);
  CHECK(scalar_position(x, ident, L) == 5);
  CHECK_THROWS_AS(scalar_position(bad, ident, L), InputError);
  CHECK(coords_from_position(0, ident, L) == std::vector<std::uint64_t>{0, 0});
  CHECK(coords_from_position(5, ident, L) == std::vector<std::uint64_t>{1, 2});
  CHECK_THROWS_AS(coords_from_position(6, ident, L), InputError);

  const auto R1 = T({17});
  const std::vector<Dim> one{0};
  const std::vector<std::uint64_t> k{11};
  CHECK(scalar_position(k, one, R1) == 11);

  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto c = random_case(rng, CaseSpec{1, 8, 1 << 16});
    std::vector<std::uint64_t> coords;
    for (int d = 0; d < c.layout.rank(); ++d) coords.push_back(rng() % c.layout.extent(d));
    const auto p = scalar_position(coords, c.perm.order(), c.layout);
    REQUIRE(coords_from_position(p, c.perm.order(), c.layout) == coords);
  }
}

TEST_CASE("transpose_position examples", "[index]") {
  const auto L = T({2, 3});
  CHECK(transpose_position(1, P({2, 1}), L) == 3);
  for (std::uint64_t p = 0; p < 6; ++p) CHECK(transpose_position(p, P({1, 2}), L) == p);
  CHECK_THROWS_AS(transpose_position(6, P({2, 1}), L), InputError);

  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const auto c = random_case(rng, CaseSpec{2, 6, 1 << 12});
    std::vector<std::uint64_t> out_ext;
    for (Dim d : c.perm.order()) out_ext.push_back(c.layout.extent(d));
    const TensorLayout out(out_ext, c.layout.element_size());
    const Permutation inv = c.perm.inverse();
    for (std::uint64_t p = 0; p < c.layout.volume(); ++p)
      REQUIRE(transpose_position(transpose_position(p, c.perm, c.layout), inv, out) == p);
  }
}

TEST_CASE("major positions against full enumeration", "[index]") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto c = random_case(rng, CaseSpec{5, 5, 1 << 14, 4, 0.0});
    const auto part = build_partition(c.layout, c.perm, 1 + static_cast<int>(rng() % 2), 1 + static_cast<int>(rng() % 2));
    const auto in_order = Permutation::identity(5).order();
    // Oracle: expand b into full coordinates (staged coordinates zero) and
    // evaluate scalar positions in each ordering.
    for (std::uint64_t b = 0; b < part.mbar_in.volume(); ++b) {
      std::vector<std::uint64_t> x(5, 0);
      std::uint64_t r = b;
      for (Dim d : part.mbar_in.dims) {
        x[static_cast<std::size_t>(d)] = r % c.layout.extent(d);
        r /= c.layout.extent(d);
      }
      REQUIRE(p_major_in(b, part.mbar_in, c.layout) == scalar_position(x, in_order, c.layout));
      REQUIRE(p_major_out_paired(b, part.mbar_in, c.layout, c.perm) == scalar_position(x, c.perm.order(), c.layout));
      std::vector<std::uint64_t> y(5, 0);
      r = b;
      for (Dim d : part.mbar_out.dims) {
        y[static_cast<std::size_t>(d)] = r % c.layout.extent(d);
        r /= c.layout.extent(d);
      }
      REQUIRE(p_major_out(b, part.mbar_out, c.layout, c.perm) == scalar_position(y, c.perm.order(), c.layout));
    }
    CHECK(p_major_in(0, part.mbar_in, c.layout) == 0);
    CHECK_THROWS_AS(p_major_in(part.mbar_in.volume(), part.mbar_in, c.layout), InputError);
  }
}

TEST_CASE("major position with a single remaining dimension", "[index]") {
  const auto L = T({4, 5, 6});
  const auto perm = P({2, 1, 3});
  const auto part = build_partition(L, perm, 1, 1);
  REQUIRE(part.mbar_in.dims == std::vector<Dim>{2});
  for (std::uint64_t b = 0; b < 6; ++b) {
    CHECK(p_major_in(b, part.mbar_in, L) == b * 20);
    CHECK(p_major_out(b, part.mbar_out, L, perm) == b * 20);
  }
}

TEST_CASE("minor positions and the tiled specializations", "[index]") {
  const auto L = T({7, 5});
  const auto perm = P({2, 1});
  const auto part = build_partition(L, perm, 1, 1);
  CHECK(p_minor_in(0, part.mmk_in, L) == 0);
  CHECK(p_minor_out(0, part.mmk_out, L, perm) == 0);
  CHECK(p_shared(0, part.mmk_out, part.mmk_in) == 0);
  for (std::uint64_t y = 0; y < 5; ++y)
    for (std::uint64_t x = 0; x < 7; ++x) CHECK(p_minor_in(x + y * 7, part.mmk_in, L) == x + y * 7);
  CHECK_THROWS_AS(p_minor_in(35, part.mmk_in, L), InputError);

  // Padded L x (L+1) staging buffer: input dim 1 carries the padded extent.
  constexpr std::uint64_t Lw = 32;
  const auto pad = T({Lw + 1, Lw});
  const auto pp = build_partition(pad, perm, 1, 1);
  for (std::uint64_t tx = 0; tx < Lw; ++tx)
    for (std::uint64_t ty = 0; ty < Lw; ++ty)
      REQUIRE(p_shared(tx + ty * Lw, pp.mmk_out, pp.mmk_in) == ty + tx * (Lw + 1));
}

TEST_CASE("lane-parallel position", "[index]") {
  const std::vector<std::uint64_t> empty;
  CHECK(lane_parallel_position(123, empty, empty, empty, 0).value == 0);
  const std::vector<std::uint64_t> one{1}, ext{4}, st{3};
  CHECK_THROWS_AS(lane_parallel_position(1, one, ext, st, 2, 1), InputError);
  CHECK_THROWS_AS(lane_parallel_position(1, one, ext, st, 1, 3), InputError);

  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const auto c = random_case(rng, CaseSpec{2, 12, 1 << 16});
    const auto part = build_partition(c.layout, c.perm, 1, 1);
    std::vector<std::uint64_t> cl, dl, ctl;
    const auto in_order = Permutation::identity(c.layout.rank()).order();
    for (Dim d : part.mbar_in.dims) {
      cl.push_back(cumulative_volume(d, part.mbar_in));
      dl.push_back(c.layout.extent(d));
      ctl.push_back(cumulative_volume(d, in_order, c.layout));
    }
    const std::uint64_t b = rng() % part.mbar_in.volume();
    const auto r = lane_parallel_position(b, cl, dl, ctl, part.mbar_in.size());
    REQUIRE(r.value == p_major_in(b, part.mbar_in, c.layout));
    REQUIRE(r.replicated);
    std::uint64_t seq = 0;
    for (std::size_t t = 0; t < cl.size(); ++t) seq += ((b / cl[t]) % dl[t]) * ctl[t];
    REQUIRE(r.value == seq);
  }
}

TEST_CASE("bijection, decomposition and scatter consistency", "[index][property]") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 200; ++i) {
    const auto c = random_case(rng, CaseSpec{1, 12, 1 << 16});
    const int n = c.layout.rank();
    const int m = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    const int k = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    INFO("m=" << m << " k=" << k);
    REQUIRE(ttplan::testing::check_index_identities(c.layout, c.perm, m, k) == "");
  }
}

TEST_CASE("extents of one do not change positions", "[index]") {
  const auto L = T({3, 1, 4});
  const auto perm = P({3, 2, 1});
  for (std::uint64_t p = 0; p < 12; ++p) {
    const auto q = transpose_position(p, perm, L);
    CHECK(q == (p % 3) * 4 + p / 3);
  }
}
