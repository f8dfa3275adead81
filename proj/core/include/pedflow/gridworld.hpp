#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pedflow/esn.hpp"

namespace pedflow::grid {

enum class Cell : std::uint8_t { kWalkable, kWall };

/// Static geometry. The x axis wraps when periodic_x is set; the y axis
/// never wraps and everything beyond the top/bottom edge behaves as wall.
struct MapSpec {
  int width = 0;
  int height = 0;
  std::vector<Cell> cells;  // row-major
  bool periodic_x = true;
  std::string name;

  Cell at(int x, int y) const { return cells[static_cast<std::size_t>(y) * width + x]; }
  bool in_bounds_y(int y) const { return y >= 0 && y < height; }
  int wrap_x(int x) const {
    const int m = x % width;
    return m < 0 ? m + width : m;
  }

  /// True for an existing walkable cell; x is wrapped when periodic.
  bool walkable(int x, int y) const;

  int walkable_count() const;

  /// Grid text without the periodic_x header, '.'/'#' rows.
  std::string to_text() const;
};

/// Parse an ASCII grid: optional first line `periodic_x=true|false`,
/// then equal-length rows of '.' (walkable) and '#' (wall).
/// Throws ParseError carrying the 1-based line/column of the defect.
MapSpec load_map(std::string_view text, std::string name = "");
MapSpec load_map_file(const std::string& path);

enum class Action : int { kUp = 0, kDown = 1, kRight = 2, kLeft = 3 };
enum class TargetDirection : int { kRight = 0, kLeft = 1 };

/// Signed x step an action attempts (+1 right, -1 left, 0 vertical).
int action_dx(Action a);
int action_dy(Action a);

struct AgentState {
  int id = 0;
  int x = 0;
  int y = 0;
  int group_id = 0;
  TargetDirection target = TargetDirection::kRight;
  long long cumulative_reward = 0;
  long long net_dx = 0;  // unwrapped displacement along +x (counts seam crossings)
};

/// Inclusive cell rectangle; filled column by column from the left edge,
/// or from the right edge when fill_from_right is set.
struct PlacementRegion {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool fill_from_right = false;
};

struct GroupPlacement {
  int count = 0;
  int group_id = 0;
  TargetDirection target = TargetDirection::kRight;
  PlacementRegion region;
};

struct PlacementPlan {
  std::vector<GroupPlacement> groups;
};

/// Walkable checkerboard slots ((x + y) even) of a region.
int checkerboard_capacity(const MapSpec& map, const PlacementRegion& region);

/// Place agents on checkerboard cells ((x + y) even), column by column in
/// the region's fill order, y ascending within a column. Agent ids are
/// assigned sequentially in plan order. Throws CapacityError when a group
/// does not fit.
std::vector<AgentState> place_agents_checkerboard(const MapSpec& map,
                                                  const PlacementPlan& plan);

/// 11x11x2 local view, laid out as esn::obs_index. Channel 0 marks agents
/// (the observer sees itself at the center), channel 1 marks walls and
/// anything beyond the vertical map edge; vacant cells are (0,0).
struct Observation {
  Eigen::VectorXd bits;
};

/// occupancy is a row-major grid of agent ids (-1 = empty).
Observation observe_from_grid(const MapSpec& map, const std::vector<int>& occupancy,
                              int ax, int ay);

/// Convenience form building the occupancy grid from an agent list.
Observation observe(const MapSpec& map, const std::vector<AgentState>& agents,
                    int observer_id);

/// Outcome of one simultaneous move resolution.
struct Resolution {
  std::vector<int> new_x;
  std::vector<int> new_y;
  std::vector<int> rewards;  // -1 / 0 / +1 per agent
  std::vector<bool> moved;
};

/// Pure simultaneous-move resolution against the pre-move occupancy.
/// An intent succeeds iff its target cell exists, is walkable, held no agent
/// before the step, and is targeted by no other intent. Everything else
/// (conflicts, swaps, moves into cells being vacated) fails and leaves the
/// agent in place. Reward: +1 for a successful step toward the agent's
/// target direction, -1 away from it, 0 otherwise.
Resolution resolve_step(const MapSpec& map, const std::vector<AgentState>& agents,
                        const std::vector<Action>& intents);

/// Owns the mutable world state: agent positions and the occupancy grid.
class Environment {
 public:
  Environment(MapSpec map, PlacementPlan plan);

  /// Re-place agents from the plan and zero the reward/displacement counters.
  void reset();

  const MapSpec& map() const { return map_; }
  const std::vector<AgentState>& agents() const { return agents_; }
  int n_agents() const { return static_cast<int>(agents_.size()); }

  Observation observe(int agent_id) const;

  struct StepResult {
    std::vector<int> rewards;
    std::vector<bool> moved;
  };
  StepResult step(const std::vector<Action>& intents);

 private:
  MapSpec map_;
  PlacementPlan plan_;
  std::vector<AgentState> agents_;
  std::vector<int> occupancy_;

  void rebuild_occupancy();
};

}  // namespace pedflow::grid
