#pragma once

#include <cstdint>
#include <tuple>
#include <vector>

#include "ttplan/device_sim.hpp"
#include "ttplan/plan.hpp"

namespace ttplan {

// Plans with equal keys produce identical memory traffic.
using TrafficKey = std::tuple<int, std::vector<Dim>, std::uint64_t>;

TrafficKey traffic_key(const TransposePlan& plan);

// Weighted traffic score used by simulated selection.
double simulated_score(const TrafficReport& traffic);

}  // namespace ttplan
