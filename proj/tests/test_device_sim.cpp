#include <catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "support/random_cases.hpp"
#include "ttplan/device_sim.hpp"
#include "ttplan/schedule.hpp"

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

WarpAccess strided(std::uint64_t base, std::uint64_t stride, unsigned bytes = 4, int lanes = 32) {
  WarpAccess a;
  a.bytes_per_lane = bytes;
  for (int l = 0; l < lanes; ++l) {
    a.lane_addresses[static_cast<std::size_t>(l)] = base + static_cast<std::uint64_t>(l) * stride;
    a.active |= 1u << l;
  }
  return a;
}

// Byte-level oracle for one warp-store: every touched 32-byte line is full
// when all of its bytes are written.
std::pair<std::uint64_t, std::uint64_t> line_oracle(const WarpAccess& a, unsigned line) {
  std::map<std::uint64_t, std::set<std::uint64_t>> bytes;
  for (int l = 0; l < 32; ++l) {
    if (!(a.active >> l & 1u)) continue;
    for (unsigned b = 0; b < a.bytes_per_lane; ++b) {
      const std::uint64_t addr = a.lane_addresses[static_cast<std::size_t>(l)] + b;
      bytes[addr / line].insert(addr);
    }
  }
  std::uint64_t full = 0, part = 0;
  for (const auto& [ln, s] : bytes) (s.size() == line ? full : part) += 1;
  return {full, part};
}

struct Recorder {
  unsigned elem;
  std::vector<WarpAccess> loads, stores;
  WarpAccess make(const LaneSet& s) const {
    WarpAccess a;
    a.active = s.mask;
    a.bytes_per_lane = elem;
    for (int l = 0; l < 32; ++l)
      if (s.mask >> l & 1u) a.lane_addresses[static_cast<std::size_t>(l)] = s.idx[static_cast<std::size_t>(l)] * elem;
    return a;
  }
  void global_load(const LaneSet& s) { loads.push_back(make(s)); }
  void global_store(const LaneSet& s) { stores.push_back(make(s)); }
  void shared_store(const LaneSet&) {}
  void shared_load(const LaneSet&) {}
};

Recorder record(const TransposePlan& plan) {
  Recorder r{plan.layout.element_size(), {}, {}};
  const Schedule s = make_schedule(plan);
  for (std::uint64_t u = 0; u < plan.work_units; ++u) walk_unit(s, u, kPaddedPitch, r);
  return r;
}

}  // namespace

TEST_CASE("coalescing counts distinct segments", "[sim]") {
  const SimConfig cfg;
  CHECK(coalesce(strided(0, 4), cfg) == 1);
  CHECK(coalesce(strided(4, 4), cfg) == 2);
  CHECK(coalesce(strided(0, 128), cfg) == 32);
  CHECK(coalesce(strided(0, 8, 8), cfg) == 2);
  CHECK(coalesce(strided(0, 0), cfg) == 1);
  CHECK(coalesce(strided(0, 4, 4, 0), cfg) == 0);

  // Lane order does not matter.
  auto a = strided(256, 4);
  std::mt19937_64 rng(1);
  std::shuffle(a.lane_addresses.begin(), a.lane_addresses.end(), rng);
  CHECK(coalesce(a, cfg) == 1);

  // Inactive lanes are ignored.
  auto b = strided(0, 128);
  b.active = 0x3;
  CHECK(coalesce(b, cfg) == 2);
  CHECK(b.active_lanes() == 2);
}

TEST_CASE("store line classification", "[sim]") {
  const SimConfig cfg;
  CHECK(classify_store_lines(strided(0, 4, 4, 8), cfg) == std::pair<std::uint64_t, std::uint64_t>{1, 0});
  CHECK(classify_store_lines(strided(0, 4, 4, 1), cfg) == std::pair<std::uint64_t, std::uint64_t>{0, 1});
  CHECK(classify_store_lines(strided(0, 4), cfg) == std::pair<std::uint64_t, std::uint64_t>{4, 0});
  CHECK(classify_store_lines(strided(4, 4), cfg) == std::pair<std::uint64_t, std::uint64_t>{3, 2});
  CHECK(classify_store_lines(strided(0, 8, 8), cfg) == std::pair<std::uint64_t, std::uint64_t>{8, 0});

  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const unsigned bytes = rng() % 2 ? 4 : 8;
    WarpAccess a;
    a.bytes_per_lane = bytes;
    a.active = static_cast<std::uint32_t>(rng());
    const std::uint64_t base = (rng() % 64) * bytes;
    for (auto& x : a.lane_addresses) x = base + (rng() % 48) * bytes;
    REQUIRE(classify_store_lines(a, cfg) == line_oracle(a, cfg.l2_line));
  }
}

TEST_CASE("store lines of cut tiles match the byte oracle", "[sim]") {
  for (const auto& L : {T({40, 39}), T({39, 41}, 8), T({7, 70}), T({33, 5, 9})}) {
    std::vector<int> order;
    for (int i = L.rank(); i >= 1; --i) order.push_back(i);
    const auto plan = plan_tiled(L, Permutation::from_one_based(order), kepler());
    const auto rec = record(plan);
    std::uint64_t full = 0, part = 0, bytes = 0;
    for (const auto& a : rec.stores) {
      const auto got = classify_store_lines(a, SimConfig{});
      REQUIRE(got == line_oracle(a, 32));
      full += got.first;
      part += got.second;
      bytes += static_cast<std::uint64_t>(a.active_lanes()) * a.bytes_per_lane;
    }
    CHECK(full * 32 <= bytes);
    CHECK(part > 0);
    const auto r = simulate_plan(plan, SimConfig{});
    CHECK(r.cl_full == static_cast<double>(full));
    CHECK(r.cl_part == static_cast<double>(part));
  }
}

TEST_CASE("bank conflicts", "[sim]") {
  const SimConfig cfg;
  CHECK(bank_transactions(strided(0, 4), cfg) == 1);
  CHECK(bank_transactions(strided(0, 4 * 32), cfg) == 32);  // unpadded column
  CHECK(bank_transactions(strided(0, 4 * 33), cfg) == 1);   // padded column
  CHECK(bank_transactions(strided(0, 0), cfg) == 1);        // broadcast
  CHECK(bank_transactions(strided(0, 4 * 2), cfg) == 2);
  CHECK(bank_transactions(strided(0, 8, 8), cfg) == 2);
  CHECK(bank_ideal_transactions(strided(0, 8, 8), cfg) == 2);
  CHECK(bank_ideal_transactions(strided(0, 4 * 32), cfg) == 1);
  CHECK(bank_ideal_transactions(strided(0, 0), cfg) == 1);
  CHECK(bank_transactions(strided(0, 4, 4, 0), cfg) == 0);
}

TEST_CASE("square tile traffic", "[sim]") {
  const auto plan = plan_tiled(T({32, 32}), P({2, 1}), kepler());
  const auto r = simulate_plan(plan, SimConfig::from_profile(kepler()));
  CHECK(r.ld_req == 32);
  CHECK(r.st_req == 32);
  CHECK(r.ld_tran == 32);
  CHECK(r.st_tran == 32);
  CHECK(r.cl_part == 0);
  CHECK(r.cl_full == 128);
  CHECK(r.shmem_read_tran == r.shmem_read_req);
  CHECK(r.verified);
  CHECK(r.exact);

  SimConfig unpadded = SimConfig::from_profile(kepler());
  unpadded.tiled_pitch = kTileWidth;
  const auto u = simulate_plan(plan, unpadded);
  CHECK(u.shmem_read_tran == 32 * u.shmem_read_req);
  CHECK(u.verified);
  unpadded.tiled_pitch = 31;
  CHECK_THROWS_AS(simulate_plan(plan, unpadded), InputError);
}

TEST_CASE("copy plans store what they load", "[sim]") {
  for (const auto& L : {T({64, 3, 5}), T({50, 2, 7}, 8)}) {
    const auto plan = plan_tiled(L, P({1, 3, 2}), kepler());
    REQUIRE(plan.kind == AlgorithmKind::TiledCopy);
    const auto rec = record(plan);
    REQUIRE(rec.loads.size() == rec.stores.size());
    for (std::size_t i = 0; i < rec.loads.size(); ++i) CHECK(rec.loads[i].active == rec.stores[i].active);
    const auto r = simulate_plan(plan, SimConfig{});
    CHECK(r.shmem_req == 0);
    CHECK(r.verified);
    if (L.extent(0) * L.element_size() % 32 == 0) CHECK(r.cl_part == 0);
  }
  // Identity permutation: the address streams are equal.
  const auto id = plan_tiled(T({96, 5}), P({1, 2}), kepler());
  const auto rec = record(id);
  for (std::size_t i = 0; i < rec.loads.size(); ++i)
    REQUIRE(rec.loads[i].lane_addresses == rec.stores[i].lane_addresses);
  CHECK(simulate_plan(id, SimConfig{}).cl_part == 0);
}

TEST_CASE("every plan of random cases moves data correctly", "[sim][property]") {
  std::mt19937_64 rng(77);
  SimConfig cfg = SimConfig::from_profile(kepler());
  int simulated = 0;
  for (int i = 0; i < 200; ++i) {
    const auto c = random_case(rng, CaseSpec{1, 9, 1 << 15});
    const auto plans = build_all_plans(c.layout, c.perm, kepler());
    for (const auto& p : plans) {
      INFO(ttplan::testing::describe(c.layout, c.perm) << " " << plan_summary(p));
      const auto r = simulate_plan(p, cfg);
      REQUIRE(r.verified);
      REQUIRE(r.errors == 0);
      REQUIRE(r.ld_tran >= r.ld_req);
      REQUIRE(r.st_tran >= r.st_req);
      ++simulated;
    }
  }
  CHECK(simulated > 200);
}

TEST_CASE("split plans move data correctly", "[sim]") {
  for (const auto& L : {T({5000, 7}), T({3001, 3, 5}, 8), T({9, 4099})}) {
    std::vector<int> order;
    for (int i = L.rank(); i >= 1; --i) order.push_back(i);
    const auto plans = build_all_plans(L, Permutation::from_one_based(order), kepler());
    int splits = 0;
    for (const auto& p : plans) {
      if (p.kind != AlgorithmKind::PackedSplit) continue;
      ++splits;
      INFO(plan_summary(p));
      REQUIRE(simulate_plan(p, SimConfig{}).verified);
    }
    CHECK(splits > 0);
  }
}

TEST_CASE("scoped simulation sums to the full run", "[sim]") {
  const auto plans = build_all_plans(T({37, 6, 41}), P({3, 1, 2}), kepler());
  SimConfig cfg;
  for (const auto& p : plans) {
    const auto full = simulate_plan(p, cfg);
    TrafficReport by_slice, by_unit;
    for (std::uint64_t b = 0; b < p.mbar_volume(); ++b) by_slice += simulate_plan(p, cfg, SimScope::slice(b));
    for (std::uint64_t u = 0; u < p.work_units; ++u) by_unit += simulate_plan(p, cfg, SimScope::unit(u));
    CHECK(by_slice.ld_tran == full.ld_tran);
    CHECK(by_slice.st_tran == full.st_tran);
    CHECK(by_unit.shmem_tran == full.shmem_tran);
    CHECK(by_unit.cl_part == full.cl_part);
    CHECK(by_slice.verified);
  }
  CHECK_THROWS_AS(simulate_plan(plans.front(), cfg, SimScope::slice(plans.front().mbar_volume())), InputError);
  CHECK_THROWS_AS(simulate_plan(plans.front(), cfg, SimScope::unit(plans.front().work_units)), InputError);
}

TEST_CASE("simulation is deterministic and capped", "[sim]") {
  const auto plan = plan_tiled(T({100, 100}), P({2, 1}), kepler());
  const auto a = simulate_plan(plan, SimConfig{});
  const auto b = simulate_plan(plan, SimConfig{});
  CHECK(a.ld_tran == b.ld_tran);
  CHECK(a.st_tran == b.st_tran);
  CHECK(a.shmem_tran == b.shmem_tran);
  SimConfig capped;
  capped.volume_cap = 9999;
  CHECK_THROWS_AS(simulate_plan(plan, capped), SizeError);
  CHECK_NOTHROW(simulate_plan(plan, capped, SimScope::slice(0)));
}

TEST_CASE("trace output", "[sim]") {
  const auto plan = plan_tiled(T({32, 32}), P({2, 1}), kepler());
  std::ostringstream os;
  SimConfig cfg;
  cfg.trace = &os;
  simulate_plan(plan, cfg, SimScope::unit(0));
  const std::string s = os.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == 4 * 32);
  CHECK(s.find("global load") != std::string::npos);
  CHECK(s.find("shared store") != std::string::npos);
}
