#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <set>
#include <tuple>

#include "support/random_cases.hpp"
#include "ttplan/cost_model.hpp"
#include "ttplan/plan.hpp"

using namespace ttplan;
using ttplan::testing::CaseSpec;
using ttplan::testing::random_case;

namespace {

Permutation P(std::initializer_list<int> one_based) { return Permutation::from_one_based(std::vector<int>(one_based)); }
TensorLayout T(std::vector<std::uint64_t> e, unsigned elem = 4) { return TensorLayout(std::move(e), elem); }
const DeviceProfile& kepler() {
  static const DeviceProfile p = builtin_profile("kepler-k20x");
  return p;
}

std::vector<Dim> sorted(std::vector<Dim> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("partition examples", "[plan]") {
  const auto L = T({4, 5, 6, 7});
  auto p = build_partition(L, P({3, 1, 2, 4}), 1, 1);
  CHECK(p.mmk_in.dims == std::vector<Dim>{0, 2});
  CHECK(p.mmk_out.dims == std::vector<Dim>{2, 0});
  CHECK(p.mbar_in.dims == std::vector<Dim>{1, 3});
  CHECK(p.mbar_out.dims == std::vector<Dim>{1, 3});
  CHECK(p.mmk_in.volume() == 24);

  // Overlapping leading dims: w_1 = 1 stages only dim 1.
  p = build_partition(L, P({1, 3, 2, 4}), 1, 1);
  CHECK(p.mmk_in.dims == std::vector<Dim>{0});
  CHECK(p.mbar_in.volume() == 5 * 6 * 7);

  p = build_partition(L, P({3, 4, 1, 2}), 2, 2);
  CHECK(p.mmk_in.volume() == L.volume());
  CHECK(p.mbar_in.dims.empty());
  CHECK(p.mbar_in.volume() == 1);

  CHECK_THROWS_AS(build_partition(L, P({3, 4, 1, 2}), 0, 1), InputError);
  CHECK_THROWS_AS(build_partition(L, P({3, 4, 1, 2}), 1, 5), InputError);
  CHECK_THROWS_AS(build_partition(L, P({2, 1}), 1, 1), InputError);
}

TEST_CASE("tiled plan geometry", "[plan]") {
  const auto t = plan_tiled(T({65, 33}), P({2, 1}), kepler());
  CHECK(t.kind == AlgorithmKind::Tiled);
  CHECK(t.tiles_m == 3);
  CHECK(t.tiles_k == 2);
  CHECK(t.units_per_slice() == 6);
  CHECK(t.shmem_elems == 32 * 33);
  CHECK(t.n_thread == 256);
  CHECK(t.n_reg == 4);

  const auto c = plan_tiled(T({40, 3, 2}), P({1, 3, 2}), kepler());
  CHECK(c.kind == AlgorithmKind::TiledCopy);
  CHECK(c.shmem_elems == 0);
  CHECK(c.tile_y_dim == 2);
  CHECK(c.vol_m == 40);
  CHECK(c.vol_k == 2);
  CHECK(c.mbar_volume() == 3);

  // Tiled work units: one per tile per slice.
  const auto big = plan_tiled(T({64, 7, 64}), P({3, 2, 1}), kepler());
  CHECK(big.work_units == 7 * 4);
  CHECK(big.grid_blocks == 28);
  CHECK(big.n_iter == 1);
}

TEST_CASE("grid is capped and iterations cover all units", "[plan]") {
  const auto t = plan_tiled(T({1024, 1024}), P({2, 1}), kepler());
  CHECK(t.work_units == 1024);
  CHECK(t.grid_blocks == grid_cap(kepler()));
  CHECK(t.n_iter == (1024 + t.grid_blocks - 1) / t.grid_blocks);
}

TEST_CASE("packed register count boundaries", "[plan]") {
  // 4-byte elements: capacity 12288, so only n_reg decides.
  auto at = packed_candidate(T({64, 64}), P({2, 1}), kepler(), 1, 1, 512);
  REQUIRE(at.has_value());
  CHECK(at->n_reg == 8);
  CHECK_FALSE(packed_candidate(T({4097, 1}), P({2, 1}), kepler(), 1, 1, 512).has_value());
  CHECK_FALSE(packed_candidate(T({64, 64}), P({2, 1}), kepler(), 1, 1, 256).has_value());
  auto small = packed_candidate(T({5, 7}), P({2, 1}), kepler(), 1, 1, 128);
  REQUIRE(small.has_value());
  CHECK(small->n_reg == 1);
  CHECK(small->shmem_elems == 35);
  CHECK_THROWS_AS(packed_candidate(T({5, 7}), P({2, 1}), kepler(), 1, 1, 100), InputError);

  // 8-byte elements: capacity 6144 elements.
  CHECK_FALSE(packed_candidate(T({80, 80}, 8), P({2, 1}), kepler(), 1, 1, 512).has_value());
}

TEST_CASE("packed enumeration de-duplicates staged sets", "[plan]") {
  const auto plans = enumerate_packed(T({4, 4, 4}, 8), P({3, 2, 1}), kepler());
  std::set<std::pair<std::vector<Dim>, int>> seen;
  for (const auto& p : plans) {
    CHECK(p.kind == AlgorithmKind::Packed);
    CHECK(seen.insert({sorted(p.part.mmk_in.dims), p.n_thread}).second);
  }
  // Staged sets: {1,3}, {1,2,3}; each with 3 thread counts.
  CHECK(plans.size() == 6);
}

TEST_CASE("minimal split", "[plan]") {
  CHECK(minimal_split(32, 1000, 4096, 512) == 8u);
  CHECK_FALSE(minimal_split(5000, 10, 4096, 512).has_value());
  CHECK_FALSE(minimal_split(32, 1, 4096, 512).has_value());
  CHECK(minimal_split(3, 100, 12288, 128) == 2u);
  // 3 * ceil(4000 / n) <= 1024 first holds at n = 12.
  CHECK(minimal_split(3, 4000, 12288, 128) == 12u);
}

TEST_CASE("packed-split plans", "[plan]") {
  const auto L = T({100000, 2});
  const auto perm = P({2, 1});
  const auto split = enumerate_packed_split(L, perm, kepler());
  REQUIRE_FALSE(split.empty());
  for (const auto& p : split) {
    CHECK(p.kind == AlgorithmKind::PackedSplit);
    CHECK(p.n_sp >= 2);
    CHECK(p.split_dim == 0);
    CHECK(p.chunk == (100000 + p.n_sp - 1) / p.n_sp);
    CHECK(p.n_reg <= 8);
    CHECK(p.shmem_elems <= kepler().capacity_elements(4));
    CHECK(p.work_units == p.n_sp);
  }
  const auto all = build_all_plans(L, perm, kepler());
  for (const auto& p : all) CHECK(p.kind != AlgorithmKind::Packed);

  // Split candidates appear only where plain Packed does not fit.
  for (const auto& p : enumerate_packed_split(T({16, 16}), P({2, 1}), kepler())) CHECK(p.mmk_volume() > 8 * 128);
}

TEST_CASE("split dimension ties go to the lowest label", "[plan]") {
  const auto plans = enumerate_packed_split(T({3000, 3000}), P({2, 1}), kepler());
  REQUIRE_FALSE(plans.empty());
  for (const auto& p : plans) CHECK(p.split_dim == 0);
}

TEST_CASE("rank one yields a single copy plan", "[plan]") {
  const auto plans = build_all_plans(T({1000}), P({1}), kepler());
  bool only_copy_tiled = true;
  std::size_t copies = 0;
  for (const auto& p : plans) {
    if (p.kind == AlgorithmKind::TiledCopy) ++copies;
    if (p.kind == AlgorithmKind::Tiled) only_copy_tiled = false;
  }
  CHECK(copies == 1);
  CHECK(only_copy_tiled);
  CHECK(plans.front().kind == AlgorithmKind::TiledCopy);
  CHECK(plans.front().vol_k == 1);
  CHECK(plans.front().tiles_m == 32);
}

TEST_CASE("plan list order is deterministic and sorted", "[plan]") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 50; ++i) {
    const auto c = random_case(rng, CaseSpec{1, 8, 1 << 20});
    const auto a = build_all_plans(c.layout, c.perm, kepler());
    const auto b = build_all_plans(c.layout, c.perm, kepler());
    REQUIRE(a.size() == b.size());
    for (std::size_t j = 0; j < a.size(); ++j) REQUIRE(plan_summary(a[j]) == plan_summary(b[j]));
    for (std::size_t j = 1; j < a.size(); ++j) {
      const auto ka = std::make_tuple(static_cast<int>(a[j - 1].kind), a[j - 1].m, a[j - 1].k, a[j - 1].n_sp,
                                      a[j - 1].n_thread);
      const auto kb = std::make_tuple(static_cast<int>(a[j].kind), a[j].m, a[j].k, a[j].n_sp, a[j].n_thread);
      REQUIRE(ka <= kb);
    }
  }
}

TEST_CASE("every enumerated plan satisfies its invariants", "[plan][property]") {
  std::mt19937_64 rng(123);
  for (int i = 0; i < 300; ++i) {
    const auto c = random_case(rng, CaseSpec{1, 12, 1 << 22});
    INFO(ttplan::testing::describe(c.layout, c.perm));
    const auto plans = build_all_plans(c.layout, c.perm, kepler());
    REQUIRE_FALSE(plans.empty());
    for (const auto& p : plans) {
      REQUIRE_NOTHROW(validate_plan(p, kepler()));
      REQUIRE(p.work_units == p.mbar_volume() * p.units_per_slice());
      REQUIRE(p.grid_blocks * p.n_iter >= p.work_units);
      REQUIRE(p.grid_blocks * (p.n_iter - 1) < p.work_units);
    }
  }
}

TEST_CASE("validate_plan rejects broken plans", "[plan]") {
  auto p = *packed_candidate(T({64, 64}), P({2, 1}), kepler(), 1, 1, 512);
  auto bad = p;
  bad.n_reg = 9;
  CHECK_THROWS_AS(validate_plan(bad, kepler()), InputError);
  bad = p;
  bad.n_warp = 3;
  CHECK_THROWS_AS(validate_plan(bad, kepler()), InputError);
  auto t = plan_tiled(T({8, 8}), P({1, 2}), kepler());
  t.shmem_elems = 10;
  CHECK_THROWS_AS(validate_plan(t, kepler()), InputError);
}

TEST_CASE("heuristic selection is the argmin of modeled cycles", "[plan][select]") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto c = random_case(rng, CaseSpec{2, 6, 1 << 16});
    const auto plans = build_all_plans(c.layout, c.perm, kepler());
    const auto sel = select_heuristic(plans, kepler(), 17);
    REQUIRE(sel.scores.size() == plans.size());
    for (std::size_t j = 0; j < plans.size(); ++j) {
      REQUIRE(sel.scores[j] == estimate_cycles(plans[j], kepler(), 17).total_cycles);
      REQUIRE(sel.scores[sel.index] <= sel.scores[j]);
    }
    for (std::size_t j = 0; j < sel.index; ++j) REQUIRE(sel.scores[j] > sel.scores[sel.index]);
    REQUIRE(select_heuristic(plans, kepler(), 17).index == sel.index);
  }
  const auto one = build_all_plans(T({1000}), P({1}), kepler());
  if (one.size() == 1) CHECK(select_heuristic(one, kepler(), 1).index == 0);
  CHECK_THROWS_AS(select_heuristic({}, kepler(), 1), InputError);
}

TEST_CASE("simulated selection prefers the conflict-free tile", "[plan][select]") {
  const auto plans = build_all_plans(T({64, 64}), P({2, 1}), kepler());
  bool has_packed = false;
  for (const auto& p : plans) has_packed |= p.kind == AlgorithmKind::Packed;
  REQUIRE(has_packed);
  const auto sel = select_simulated(plans, kepler());
  CHECK(plans[sel.index].kind == AlgorithmKind::Tiled);
  CHECK_THROWS_AS(select_simulated(plans, kepler(), 100), SizeError);
}

TEST_CASE("plan dumps", "[plan]") {
  const auto p = plan_tiled(T({65, 33}), P({2, 1}), kepler());
  const auto json = plan_to_json(p);
  for (const char* key : {"\"kind\"", "\"Tiled\"", "\"n_thread\"", "\"grid_blocks\"", "\"perm\""})
    CHECK(json.find(key) != std::string::npos);
  CHECK(plan_summary(p).find('\n') == std::string::npos);
  CHECK(plan_to_text(p).find("Tiled") != std::string::npos);
  CHECK(parse_kind("PackedSplit") == AlgorithmKind::PackedSplit);
  CHECK_THROWS_AS(parse_kind("Nope"), InputError);
}
