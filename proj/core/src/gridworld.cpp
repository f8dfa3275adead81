#include "pedflow/gridworld.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "pedflow/errors.hpp"

namespace pedflow::grid {

bool MapSpec::walkable(int x, int y) const {
  if (!in_bounds_y(y)) return false;
  if (periodic_x) {
    x = wrap_x(x);
  } else if (x < 0 || x >= width) {
    return false;
  }
  return at(x, y) == Cell::kWalkable;
}

int MapSpec::walkable_count() const {
  int count = 0;
  for (Cell c : cells)
    if (c == Cell::kWalkable) ++count;
  return count;
}

std::string MapSpec::to_text() const {
  std::string text;
  text.reserve(static_cast<std::size_t>(height) * (width + 1));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x)
      text.push_back(at(x, y) == Cell::kWalkable ? '.' : '#');
    text.push_back('\n');
  }
  return text;
}

MapSpec load_map(std::string_view text, std::string name) {
  MapSpec map;
  map.name = std::move(name);

  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line =
        nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();

  int first_row_line = 1;
  if (!lines.empty() && lines.front().rfind("periodic_x=", 0) == 0) {
    const std::string_view value = lines.front().substr(11);
    if (value == "true") {
      map.periodic_x = true;
    } else if (value == "false") {
      map.periodic_x = false;
    } else {
      throw ParseError("map: periodic_x must be true or false", 1, 12);
    }
    lines.erase(lines.begin());
    first_row_line = 2;
  }

  if (lines.empty()) throw ParseError("map: no grid rows", first_row_line, 1);

  map.height = static_cast<int>(lines.size());
  map.width = static_cast<int>(lines[0].size());
  if (map.width == 0) throw ParseError("map: empty row", first_row_line, 1);
  map.cells.reserve(static_cast<std::size_t>(map.width) * map.height);

  for (int y = 0; y < map.height; ++y) {
    const int line_no = first_row_line + y;
    if (static_cast<int>(lines[y].size()) != map.width)
      throw ParseError("map: ragged row (expected width " + std::to_string(map.width) +
                           ")",
                       line_no, static_cast<int>(lines[y].size()) + 1);
    for (int x = 0; x < map.width; ++x) {
      const char c = lines[y][x];
      if (c == '.') {
        map.cells.push_back(Cell::kWalkable);
      } else if (c == '#') {
        map.cells.push_back(Cell::kWall);
      } else {
        throw ParseError(std::string("map: unknown character '") + c + "'", line_no,
                         x + 1);
      }
    }
  }
  return map;
}

MapSpec load_map_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open map file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_map(buffer.str(), path);
}

int action_dx(Action a) {
  switch (a) {
    case Action::kRight: return 1;
    case Action::kLeft: return -1;
    default: return 0;
  }
}

int action_dy(Action a) {
  switch (a) {
    case Action::kUp: return -1;
    case Action::kDown: return 1;
    default: return 0;
  }
}

int checkerboard_capacity(const MapSpec& map, const PlacementRegion& region) {
  int slots = 0;
  for (int x = region.x0; x <= region.x1; ++x)
    for (int y = region.y0; y <= region.y1; ++y)
      if ((x + y) % 2 == 0 && map.walkable(x, y)) ++slots;
  return slots;
}

std::vector<AgentState> place_agents_checkerboard(const MapSpec& map,
                                                  const PlacementPlan& plan) {
  std::vector<AgentState> agents;
  std::vector<char> taken(map.cells.size(), 0);
  int next_id = 0;

  for (const GroupPlacement& group : plan.groups) {
    const PlacementRegion& r = group.region;
    if (r.x0 < 0 || r.y0 < 0 || r.x1 >= map.width || r.y1 >= map.height ||
        r.x0 > r.x1 || r.y0 > r.y1)
      throw std::invalid_argument("placement region out of map bounds");
    if (group.count < 0) throw std::invalid_argument("placement count negative");

    int placed = 0;
    const int step = r.fill_from_right ? -1 : 1;
    for (int x = r.fill_from_right ? r.x1 : r.x0;
         placed < group.count && x >= r.x0 && x <= r.x1; x += step) {
      for (int y = r.y0; placed < group.count && y <= r.y1; ++y) {
        if ((x + y) % 2 != 0) continue;
        if (!map.walkable(x, y)) continue;
        const std::size_t idx = static_cast<std::size_t>(y) * map.width + x;
        if (taken[idx]) continue;
        taken[idx] = 1;
        AgentState agent;
        agent.id = next_id++;
        agent.x = x;
        agent.y = y;
        agent.group_id = group.group_id;
        agent.target = group.target;
        agents.push_back(agent);
        ++placed;
      }
    }
    if (placed < group.count)
      throw CapacityError("placement: group " + std::to_string(group.group_id) +
                          " needs " + std::to_string(group.count) + " slots, found " +
                          std::to_string(placed));
  }
  return agents;
}

Observation observe_from_grid(const MapSpec& map, const std::vector<int>& occupancy,
                              int ax, int ay) {
  Observation obs;
  obs.bits = Eigen::VectorXd::Zero(esn::kObsDim);
  const int half = esn::kWindow / 2;
  for (int wr = 0; wr < esn::kWindow; ++wr) {
    const int y = ay + wr - half;
    for (int wc = 0; wc < esn::kWindow; ++wc) {
      int x = ax + wc - half;
      bool wall;
      bool occupied = false;
      if (!map.in_bounds_y(y)) {
        wall = true;  // beyond the top/bottom edge reads as wall
      } else {
        if (map.periodic_x) {
          x = map.wrap_x(x);
        } else if (x < 0 || x >= map.width) {
          obs.bits(esn::obs_index(wr, wc, 1)) = 1.0;
          continue;
        }
        wall = map.at(x, y) == Cell::kWall;
        occupied = !wall && occupancy[static_cast<std::size_t>(y) * map.width + x] >= 0;
      }
      if (wall) {
        obs.bits(esn::obs_index(wr, wc, 1)) = 1.0;
      } else if (occupied) {
        obs.bits(esn::obs_index(wr, wc, 0)) = 1.0;
      }
    }
  }
  return obs;
}

Observation observe(const MapSpec& map, const std::vector<AgentState>& agents,
                    int observer_id) {
  std::vector<int> occupancy(map.cells.size(), -1);
  const AgentState* observer = nullptr;
  for (const AgentState& agent : agents) {
    occupancy[static_cast<std::size_t>(agent.y) * map.width + agent.x] = agent.id;
    if (agent.id == observer_id) observer = &agent;
  }
  if (observer == nullptr) throw std::invalid_argument("observe: unknown observer id");
  return observe_from_grid(map, occupancy, observer->x, observer->y);
}

Resolution resolve_step(const MapSpec& map, const std::vector<AgentState>& agents,
                        const std::vector<Action>& intents) {
  const int n = static_cast<int>(agents.size());
  if (static_cast<int>(intents.size()) != n)
    throw std::invalid_argument("resolve_step: one intent per agent required");

  {
    std::unordered_set<int> ids;
    for (const AgentState& agent : agents)
      if (!ids.insert(agent.id).second)
        throw std::logic_error("resolve_step: duplicate agent ids");
  }

  std::vector<int> occupancy(map.cells.size(), -1);
  for (int i = 0; i < n; ++i) {
    const std::size_t idx =
        static_cast<std::size_t>(agents[i].y) * map.width + agents[i].x;
    if (occupancy[idx] >= 0)
      throw std::logic_error("resolve_step: agents share a cell");
    occupancy[idx] = i;
  }

  // target cell per agent (-1 when the move leaves the map), and how many
  // intents aim at each cell; every attempt counts, valid or not
  std::vector<long long> target(n, -1);
  std::vector<int> attempts(map.cells.size(), 0);
  for (int i = 0; i < n; ++i) {
    int tx = agents[i].x + action_dx(intents[i]);
    const int ty = agents[i].y + action_dy(intents[i]);
    if (!map.in_bounds_y(ty)) continue;
    if (map.periodic_x) {
      tx = map.wrap_x(tx);
    } else if (tx < 0 || tx >= map.width) {
      continue;
    }
    target[i] = static_cast<long long>(ty) * map.width + tx;
    ++attempts[target[i]];
  }

  Resolution result;
  result.new_x.resize(n);
  result.new_y.resize(n);
  result.rewards.assign(n, 0);
  result.moved.assign(n, false);

  for (int i = 0; i < n; ++i) {
    result.new_x[i] = agents[i].x;
    result.new_y[i] = agents[i].y;
    const long long cell = target[i];
    if (cell < 0) continue;
    if (map.cells[cell] != Cell::kWalkable) continue;
    if (occupancy[cell] >= 0) continue;  // occupied before the step, even if vacating
    if (attempts[cell] != 1) continue;   // contested cell, everyone stays

    result.moved[i] = true;
    result.new_x[i] = static_cast<int>(cell % map.width);
    result.new_y[i] = static_cast<int>(cell / map.width);
    const int dx = action_dx(intents[i]);
    if (dx != 0) {
      const int toward = agents[i].target == TargetDirection::kRight ? dx : -dx;
      result.rewards[i] = toward;
    }
  }
  return result;
}

Environment::Environment(MapSpec map, PlacementPlan plan)
    : map_(std::move(map)), plan_(std::move(plan)) {
  reset();
}

void Environment::reset() {
  agents_ = place_agents_checkerboard(map_, plan_);
  rebuild_occupancy();
}

void Environment::rebuild_occupancy() {
  occupancy_.assign(map_.cells.size(), -1);
  for (int i = 0; i < n_agents(); ++i) {
    const std::size_t idx =
        static_cast<std::size_t>(agents_[i].y) * map_.width + agents_[i].x;
    if (occupancy_[idx] >= 0)
      throw std::logic_error("Environment: agents share a cell");
    occupancy_[idx] = agents_[i].id;
  }
}

Observation Environment::observe(int agent_id) const {
  const AgentState& agent = agents_.at(agent_id);
  return observe_from_grid(map_, occupancy_, agent.x, agent.y);
}

Environment::StepResult Environment::step(const std::vector<Action>& intents) {
  const Resolution res = resolve_step(map_, agents_, intents);
  for (int i = 0; i < n_agents(); ++i) {
    if (!res.moved[i]) continue;
    AgentState& agent = agents_[i];
    occupancy_[static_cast<std::size_t>(agent.y) * map_.width + agent.x] = -1;
    agent.net_dx += action_dx(intents[i]);
    agent.x = res.new_x[i];
    agent.y = res.new_y[i];
    occupancy_[static_cast<std::size_t>(agent.y) * map_.width + agent.x] = agent.id;
  }
  for (int i = 0; i < n_agents(); ++i) agents_[i].cumulative_reward += res.rewards[i];
  return StepResult{res.rewards, res.moved};
}

}  // namespace pedflow::grid
