#pragma once

#include <json.hpp>

#include "ttplan/plan.hpp"

namespace ttplan {

nlohmann::json plan_json(const TransposePlan& plan);

}  // namespace ttplan
