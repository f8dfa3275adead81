#pragma once

#include <string>

#include "pedflow/gridworld.hpp"

namespace pedflow::grid::tasks {

/// Built-in map texts (identical to the files shipped under maps/).
const std::string& task1_map_text();
const std::string& task2_map_text();

/// Task 1: periodic road forking into a 2-cell direct lane and a broader
/// detour that dips below it; 192 walkable cells.
MapSpec task1_map();

/// Task 2: fully walkable 8x20 periodic corridor (160 cells).
MapSpec task2_map();

/// All agents target right, checkerboarded over the unforked road segment.
PlacementPlan task1_plan(int n_agent);

/// Two opposing groups: right-proceeding agents fill checkerboard columns
/// from the left corridor edge, left-proceeding agents mirror from the right.
PlacementPlan task2_plan(int n_agent);

}  // namespace pedflow::grid::tasks
