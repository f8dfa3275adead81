#include "pedflow/tasks.hpp"

namespace pedflow::grid::tasks {

namespace {

// 39x8 fork: rows 0-1 run the full width (road + narrow direct lane),
// rows 2-3 are road until the fork, a 3-wide shaft at x 21-23 and x 36-38
// connects down to the 3-wide bottom corridor (rows 5-7). 192 walkable cells.
const std::string kTask1Text =
    "periodic_x=true\n"
    ".......................................\n"
    ".......................................\n"
    "........................############...\n"
    "........................############...\n"
    "#####################...############...\n"
    "#####################..................\n"
    "#####################..................\n"
    "#####################..................\n";

const std::string kTask2Text =
    "periodic_x=true\n"
    "....................\n"
    "....................\n"
    "....................\n"
    "....................\n"
    "....................\n"
    "....................\n"
    "....................\n"
    "....................\n";

}  // namespace

const std::string& task1_map_text() { return kTask1Text; }
const std::string& task2_map_text() { return kTask2Text; }

MapSpec task1_map() { return load_map(kTask1Text, "task1_fork"); }
MapSpec task2_map() { return load_map(kTask2Text, "task2_corridor"); }

PlacementPlan task1_plan(int n_agent) {
  PlacementPlan plan;
  GroupPlacement group;
  group.count = n_agent;
  group.group_id = 0;
  group.target = TargetDirection::kRight;
  group.region = PlacementRegion{0, 0, 20, 3, false};  // unforked road segment
  plan.groups.push_back(group);
  return plan;
}

PlacementPlan task2_plan(int n_agent) {
  PlacementPlan plan;
  GroupPlacement right;
  right.count = (n_agent + 1) / 2;
  right.group_id = 0;
  right.target = TargetDirection::kRight;
  right.region = PlacementRegion{0, 0, 19, 7, false};
  plan.groups.push_back(right);

  GroupPlacement left;
  left.count = n_agent / 2;
  left.group_id = 1;
  left.target = TargetDirection::kLeft;
  left.region = PlacementRegion{0, 0, 19, 7, true};
  plan.groups.push_back(left);
  return plan;
}

}  // namespace pedflow::grid::tasks
