#include "hawkdove/gridworld.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace hawkdove::gridworld {

namespace {

constexpr Cell kOffGrid{-1, -1};

Cell shifted(Cell c, Action a) {
  switch (a) {
    case Action::kUp: return {c.x, c.y - 1};
    case Action::kDown: return {c.x, c.y + 1};
    case Action::kLeft: return {c.x - 1, c.y};
    case Action::kRight: return {c.x + 1, c.y};
    case Action::kStay: return c;
  }
  return c;
}

bool in_grid(Cell c, const ScenarioConfig& cfg) {
  return c.x >= 0 && c.x < cfg.width && c.y >= 0 && c.y < cfg.height;
}

// Which edge a single-axis move crossed; only valid for off-grid cells one
// step outside the boundary.
Edge crossed_edge(Cell c, const ScenarioConfig& cfg) {
  if (c.x < 0) return Edge::kWest;
  if (c.x >= cfg.width) return Edge::kEast;
  if (c.y < 0) return Edge::kNorth;
  return Edge::kSouth;
}

int midpoint(int n) { return (n - 1) / 2; }

Edge opposite(Edge e) {
  switch (e) {
    case Edge::kNorth: return Edge::kSouth;
    case Edge::kSouth: return Edge::kNorth;
    case Edge::kEast: return Edge::kWest;
    case Edge::kWest: return Edge::kEast;
  }
  return e;
}

// The edge a spawn must sit on: opposite its target.
bool on_edge(Cell c, Edge e, const ScenarioConfig& cfg) {
  switch (e) {
    case Edge::kNorth: return c.y == 0;
    case Edge::kSouth: return c.y == cfg.height - 1;
    case Edge::kWest: return c.x == 0;
    case Edge::kEast: return c.x == cfg.width - 1;
  }
  return false;
}

bool is_midpoint_of_edge(Cell c, Edge e, const ScenarioConfig& cfg) {
  switch (e) {
    case Edge::kNorth:
    case Edge::kSouth: return c.x == midpoint(cfg.width);
    case Edge::kEast:
    case Edge::kWest: return c.y == midpoint(cfg.height);
  }
  return false;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected number, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected unsigned integer, got '" + value + "'");
  }
}

}  // namespace

const char* to_string(Scenario s) {
  return s == Scenario::kParallel ? "parallel" : "perpendicular";
}

const char* to_string(Edge e) {
  switch (e) {
    case Edge::kNorth: return "north";
    case Edge::kSouth: return "south";
    case Edge::kEast: return "east";
    case Edge::kWest: return "west";
  }
  return "?";
}

const char* to_string(Action a) {
  switch (a) {
    case Action::kUp: return "up";
    case Action::kDown: return "down";
    case Action::kLeft: return "left";
    case Action::kRight: return "right";
    case Action::kStay: return "stay";
  }
  return "?";
}

const char* to_string(AgentStatus s) {
  switch (s) {
    case AgentStatus::kActive: return "active";
    case AgentStatus::kReachedGoal: return "reached_goal";
    case AgentStatus::kWrongExit: return "wrong_exit";
    case AgentStatus::kCollided: return "collided";
    case AgentStatus::kTimedOut: return "timed_out";
  }
  return "?";
}

const char* to_string(Event e) {
  switch (e) {
    case Event::kNone: return "none";
    case Event::kGoal: return "goal";
    case Event::kCollision: return "collision";
    case Event::kWrongExit: return "wrong_exit";
    case Event::kTimeout: return "timeout";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "parallel") return Scenario::kParallel;
  if (s == "perpendicular") return Scenario::kPerpendicular;
  throw ConfigError("unknown scenario '" + s + "' (expected parallel|perpendicular)");
}

Edge edge_from_string(const std::string& s) {
  if (s == "north") return Edge::kNorth;
  if (s == "south") return Edge::kSouth;
  if (s == "east") return Edge::kEast;
  if (s == "west") return Edge::kWest;
  throw ConfigError("unknown edge '" + s + "' (expected north|south|east|west)");
}

MirrorKind mirror_kind(const ScenarioConfig& cfg) {
  const Edge a = cfg.target_edge[0];
  const Edge b = cfg.target_edge[1];
  auto pair_is = [&](Edge x, Edge y) { return (a == x && b == y) || (a == y && b == x); };
  if (pair_is(Edge::kEast, Edge::kWest)) return MirrorKind::kReflectX;
  if (pair_is(Edge::kNorth, Edge::kSouth)) return MirrorKind::kReflectY;
  if (pair_is(Edge::kEast, Edge::kSouth) || pair_is(Edge::kWest, Edge::kNorth))
    return MirrorKind::kTranspose;
  if (pair_is(Edge::kEast, Edge::kNorth) || pair_is(Edge::kWest, Edge::kSouth))
    return MirrorKind::kAntiTranspose;
  throw ConfigError("target edges " + std::string(to_string(a)) + "/" + to_string(b) +
                    " admit no role-exchange isometry");
}

Cell mirror_cell(Cell c, const ScenarioConfig& cfg) {
  if (c == kOffGrid) return c;
  switch (mirror_kind(cfg)) {
    case MirrorKind::kReflectX: return {cfg.width - 1 - c.x, c.y};
    case MirrorKind::kReflectY: return {c.x, cfg.height - 1 - c.y};
    case MirrorKind::kTranspose: return {c.y, c.x};
    case MirrorKind::kAntiTranspose: return {cfg.width - 1 - c.y, cfg.height - 1 - c.x};
  }
  return c;
}

Action mirror_action(Action a, const ScenarioConfig& cfg) {
  switch (mirror_kind(cfg)) {
    case MirrorKind::kReflectX:
      if (a == Action::kLeft) return Action::kRight;
      if (a == Action::kRight) return Action::kLeft;
      return a;
    case MirrorKind::kReflectY:
      if (a == Action::kUp) return Action::kDown;
      if (a == Action::kDown) return Action::kUp;
      return a;
    case MirrorKind::kTranspose:
      switch (a) {
        case Action::kRight: return Action::kDown;
        case Action::kDown: return Action::kRight;
        case Action::kLeft: return Action::kUp;
        case Action::kUp: return Action::kLeft;
        case Action::kStay: return a;
      }
      return a;
    case MirrorKind::kAntiTranspose:
      switch (a) {
        case Action::kRight: return Action::kUp;
        case Action::kUp: return Action::kRight;
        case Action::kLeft: return Action::kDown;
        case Action::kDown: return Action::kLeft;
        case Action::kStay: return a;
      }
      return a;
  }
  return a;
}

Edge mirror_edge(Edge e, const ScenarioConfig& cfg) {
  switch (mirror_kind(cfg)) {
    case MirrorKind::kReflectX:
      if (e == Edge::kEast) return Edge::kWest;
      if (e == Edge::kWest) return Edge::kEast;
      return e;
    case MirrorKind::kReflectY:
      if (e == Edge::kNorth) return Edge::kSouth;
      if (e == Edge::kSouth) return Edge::kNorth;
      return e;
    case MirrorKind::kTranspose:
      switch (e) {
        case Edge::kEast: return Edge::kSouth;
        case Edge::kSouth: return Edge::kEast;
        case Edge::kWest: return Edge::kNorth;
        case Edge::kNorth: return Edge::kWest;
      }
      return e;
    case MirrorKind::kAntiTranspose:
      switch (e) {
        case Edge::kEast: return Edge::kNorth;
        case Edge::kNorth: return Edge::kEast;
        case Edge::kWest: return Edge::kSouth;
        case Edge::kSouth: return Edge::kWest;
      }
      return e;
  }
  return e;
}

void ScenarioConfig::validate() const {
  if (width < 5) throw ConfigError("width must be >= 5, got " + std::to_string(width));
  if (height < 5) throw ConfigError("height must be >= 5, got " + std::to_string(height));
  if (frame_stack < 1)
    throw ConfigError("frame_stack must be >= 1, got " + std::to_string(frame_stack));
  if (max_steps < 2 * (width + height))
    throw ConfigError("max_steps must be >= 2*(width+height) = " +
                      std::to_string(2 * (width + height)) + ", got " + std::to_string(max_steps));
  if (!(reward.r_goal > 0)) throw ConfigError("r_goal must be positive");
  if (!(reward.r_collide < 0)) throw ConfigError("r_collide must be negative");
  if (!(reward.r_wrong < 0)) throw ConfigError("r_wrong must be negative");
  if (!(reward.r_step < 0)) throw ConfigError("r_step must be negative");
  if (!(reward.gamma > 0.0 && reward.gamma < 1.0)) throw ConfigError("gamma must be in (0,1)");
  if (-reward.r_step * max_steps >= reward.r_goal)
    throw ConfigError("|r_step|*max_steps must stay below r_goal");

  for (int i = 0; i < 2; ++i) {
    if (!in_grid(spawn[i], *this))
      throw ConfigError("spawn of agent " + std::to_string(i) + " is outside the grid");
    if (!on_edge(spawn[i], opposite(target_edge[i]), *this))
      throw ConfigError("spawn of agent " + std::to_string(i) +
                        " must lie on the edge opposite its target edge");
  }
  if (spawn[0] == spawn[1]) throw ConfigError("spawns must be distinct cells");

  const MirrorKind kind = mirror_kind(*this);  // throws if the edge pair is unusable
  const bool diagonal = kind == MirrorKind::kTranspose || kind == MirrorKind::kAntiTranspose;
  if (scenario == Scenario::kParallel && diagonal)
    throw ConfigError("parallel scenario requires opposite target edges");
  if (scenario == Scenario::kPerpendicular && !diagonal)
    throw ConfigError("perpendicular scenario requires adjacent target edges");
  if (diagonal && width != height)
    throw ConfigError("perpendicular scenario requires a square grid");

  for (int i = 0; i < 2; ++i) {
    if (!is_midpoint_of_edge(spawn[i], opposite(target_edge[i]), *this))
      throw ConfigError("spawn of agent " + std::to_string(i) + " must sit at its edge midpoint");
  }
  if (!(mirror_cell(spawn[0], *this) == spawn[1]))
    throw ConfigError("spawns are not exchanged by the role-exchange isometry");
  if (mirror_edge(target_edge[0], *this) != target_edge[1])
    throw ConfigError("target edges are not exchanged by the role-exchange isometry");
}

ScenarioConfig make_scenario(Scenario scenario, int width, int height) {
  ScenarioConfig cfg;
  cfg.width = width;
  cfg.height = height;
  cfg.scenario = scenario;
  cfg.max_steps = 2 * (width + height);
  if (scenario == Scenario::kParallel) {
    const int m = midpoint(height);
    cfg.spawn = {Cell{0, m}, Cell{width - 1, m}};
    cfg.target_edge = {Edge::kEast, Edge::kWest};
  } else {
    const int m = midpoint(height);
    cfg.spawn = {Cell{0, m}, Cell{midpoint(width), 0}};
    cfg.target_edge = {Edge::kEast, Edge::kSouth};
  }
  cfg.validate();
  return cfg;
}

JointState reset(const ScenarioConfig& cfg) {
  cfg.validate();
  JointState s;
  s.pos = cfg.spawn;
  s.status = {AgentStatus::kActive, AgentStatus::kActive};
  s.t = 0;
  return s;
}

StepOutcome step(const JointState& state, const std::array<Action, 2>& actions,
                 const ScenarioConfig& cfg) {
  if (state.terminal()) throw UsageError("step called on a terminal state");
  if (state.t >= cfg.max_steps) throw UsageError("step called past max_steps");

  std::array<Cell, 2> tentative = state.pos;
  std::array<bool, 2> exits{false, false};
  std::array<bool, 2> reached_goal{false, false};
  for (int i = 0; i < 2; ++i) {
    if (!state.active(i)) continue;
    tentative[i] = shifted(state.pos[i], actions[i]);
    if (!in_grid(tentative[i], cfg)) {
      exits[i] = true;
      reached_goal[i] = crossed_edge(tentative[i], cfg) == cfg.target_edge[i];
    }
  }

  // An exiting agent's tentative cell is outside the grid, so it can never
  // satisfy either collision predicate; exits and collisions are disjoint.
  bool collision = false;
  if (state.active(0) && state.active(1)) {
    const bool same_cell = tentative[0] == tentative[1];
    const bool swapped = tentative[0] == state.pos[1] && tentative[1] == state.pos[0];
    collision = same_cell || swapped;
  }

  StepOutcome out;
  out.next = state;
  out.next.t = state.t + 1;

  if (collision) {
    for (int i = 0; i < 2; ++i) {
      out.next.pos[i] = tentative[i];
      out.next.status[i] = AgentStatus::kCollided;
      out.reward[i] = cfg.reward.r_collide + cfg.reward.r_step;
      out.events[i] = Event::kCollision;
    }
  } else {
    for (int i = 0; i < 2; ++i) {
      if (!state.active(i)) continue;  // exited agents earn nothing further
      if (exits[i]) {
        out.next.pos[i] = kOffGrid;
        if (reached_goal[i]) {
          out.next.status[i] = AgentStatus::kReachedGoal;
          out.reward[i] = cfg.reward.r_goal;
          out.events[i] = Event::kGoal;
        } else {
          out.next.status[i] = AgentStatus::kWrongExit;
          out.reward[i] = cfg.reward.r_wrong;
          out.events[i] = Event::kWrongExit;
        }
      } else {
        out.next.pos[i] = tentative[i];
        out.reward[i] = cfg.reward.r_step;
        if (out.next.t >= cfg.max_steps) {
          out.next.status[i] = AgentStatus::kTimedOut;
          out.events[i] = Event::kTimeout;
        }
      }
    }
  }

  out.terminal = out.next.terminal();
  return out;
}

int shortest_path_len(Cell from, Edge target, const ScenarioConfig& cfg) {
  switch (target) {
    case Edge::kEast: return cfg.width - from.x;
    case Edge::kWest: return from.x + 1;
    case Edge::kSouth: return cfg.height - from.y;
    case Edge::kNorth: return from.y + 1;
  }
  return 0;
}

JointState mirror(const JointState& s, const ScenarioConfig& cfg) {
  JointState m;
  m.t = s.t;
  for (int i = 0; i < 2; ++i) {
    const int j = 1 - i;
    m.status[i] = s.status[j];
    m.pos[i] = s.on_grid(j) ? mirror_cell(s.pos[j], cfg) : kOffGrid;
  }
  return m;
}

std::array<Action, 2> mirror(const std::array<Action, 2>& actions, const ScenarioConfig& cfg) {
  return {mirror_action(actions[1], cfg), mirror_action(actions[0], cfg)};
}

// --- Observations -----------------------------------------------------------

namespace {

ObsFrame frame_from(const std::array<Cell, 2>& pos, const std::array<bool, 2>& active, int agent) {
  ObsFrame f;
  const int other = 1 - agent;
  if (active[agent]) {
    f.self_x = static_cast<std::int16_t>(pos[agent].x);
    f.self_y = static_cast<std::int16_t>(pos[agent].y);
  }
  if (active[other]) {
    f.other_x = static_cast<std::int16_t>(pos[other].x);
    f.other_y = static_cast<std::int16_t>(pos[other].y);
  }
  return f;
}

}  // namespace

CompactObs compact_observe(const JointState& s, const FrameHistory& history, int agent,
                           const ScenarioConfig& cfg) {
  if (agent != 0 && agent != 1) throw UsageError("agent index must be 0 or 1");
  CompactObs obs;
  obs.frames.reserve(cfg.frame_stack);
  obs.frames.push_back(frame_from(s.pos, {s.active(0), s.active(1)}, agent));
  for (int i = 0; i < history.size() && static_cast<int>(obs.frames.size()) < cfg.frame_stack; ++i) {
    const auto& snap = history.at(i);
    obs.frames.push_back(frame_from(snap.pos, snap.active, agent));
  }
  // Short histories (episode start) repeat the oldest known frame.
  while (static_cast<int>(obs.frames.size()) < cfg.frame_stack)
    obs.frames.push_back(obs.frames.back());
  return obs;
}

void materialize(const CompactObs& obs, int agent, const ScenarioConfig& cfg, float* out) {
  const int h = cfg.height;
  const int w = cfg.width;
  const int plane = h * w;
  const int k = static_cast<int>(obs.frames.size());
  std::fill(out, out + static_cast<std::size_t>(3) * k * plane, 0.0f);
  for (int f = 0; f < k; ++f) {
    const ObsFrame& fr = obs.frames[f];
    float* self_plane = out + static_cast<std::size_t>(3 * f) * plane;
    float* other_plane = self_plane + plane;
    float* boundary_plane = other_plane + plane;
    if (fr.self_x >= 0) self_plane[fr.self_y * w + fr.self_x] = 1.0f;
    if (fr.other_x >= 0) other_plane[fr.other_y * w + fr.other_x] = 1.0f;
    switch (cfg.target_edge[agent]) {
      case Edge::kEast:
        for (int y = 0; y < h; ++y) boundary_plane[y * w + (w - 1)] = 1.0f;
        break;
      case Edge::kWest:
        for (int y = 0; y < h; ++y) boundary_plane[y * w] = 1.0f;
        break;
      case Edge::kSouth:
        for (int x = 0; x < w; ++x) boundary_plane[(h - 1) * w + x] = 1.0f;
        break;
      case Edge::kNorth:
        for (int x = 0; x < w; ++x) boundary_plane[x] = 1.0f;
        break;
    }
  }
}

Observation observe(const JointState& s, const FrameHistory& history, int agent,
                    const ScenarioConfig& cfg) {
  Observation o;
  o.frame_stack = cfg.frame_stack;
  o.height = cfg.height;
  o.width = cfg.width;
  o.data.resize(static_cast<std::size_t>(3) * cfg.frame_stack * cfg.height * cfg.width);
  materialize(compact_observe(s, history, agent, cfg), agent, cfg, o.data.data());
  return o;
}

// --- Config files -----------------------------------------------------------

bool ScenarioConfigBuilder::apply(const std::string& key, const std::string& value) {
  if (key == "width") cfg_.width = parse_int(key, value);
  else if (key == "height") cfg_.height = parse_int(key, value);
  else if (key == "scenario") cfg_.scenario = scenario_from_string(value);
  else if (key == "spawn_ax") { cfg_.spawn[0].x = parse_int(key, value); spawn_x_set_[0] = true; any_layout_key_ = true; }
  else if (key == "spawn_ay") { cfg_.spawn[0].y = parse_int(key, value); spawn_y_set_[0] = true; any_layout_key_ = true; }
  else if (key == "spawn_bx") { cfg_.spawn[1].x = parse_int(key, value); spawn_x_set_[1] = true; any_layout_key_ = true; }
  else if (key == "spawn_by") { cfg_.spawn[1].y = parse_int(key, value); spawn_y_set_[1] = true; any_layout_key_ = true; }
  else if (key == "target_a") { cfg_.target_edge[0] = edge_from_string(value); target_set_[0] = true; any_layout_key_ = true; }
  else if (key == "target_b") { cfg_.target_edge[1] = edge_from_string(value); target_set_[1] = true; any_layout_key_ = true; }
  else if (key == "r_goal") cfg_.reward.r_goal = parse_double(key, value);
  else if (key == "r_collide") cfg_.reward.r_collide = parse_double(key, value);
  else if (key == "r_wrong") cfg_.reward.r_wrong = parse_double(key, value);
  else if (key == "r_step") cfg_.reward.r_step = parse_double(key, value);
  else if (key == "gamma") cfg_.reward.gamma = parse_double(key, value);
  else if (key == "max_steps") { cfg_.max_steps = parse_int(key, value); max_steps_set_ = true; }
  else if (key == "frame_stack") cfg_.frame_stack = parse_int(key, value);
  else if (key == "seed") cfg_.seed = parse_u64(key, value);
  else return false;
  return true;
}

ScenarioConfig ScenarioConfigBuilder::finalize() const {
  ScenarioConfig cfg = cfg_;
  if (!any_layout_key_) {
    const ScenarioConfig canonical = make_scenario(cfg.scenario, cfg.width, cfg.height);
    cfg.spawn = canonical.spawn;
    cfg.target_edge = canonical.target_edge;
  } else {
    for (int i = 0; i < 2; ++i) {
      if (!spawn_x_set_[i] || !spawn_y_set_[i] || !target_set_[i])
        throw ConfigError(
            "spawn/target keys are all-or-nothing: specify spawn_{a,b}{x,y} and target_{a,b}");
    }
  }
  if (!max_steps_set_) cfg.max_steps = 2 * (cfg.width + cfg.height);
  cfg.validate();
  return cfg;
}

ScenarioConfig parse_scenario_config(const std::string& text) {
  ScenarioConfigBuilder builder;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (!builder.apply(key, value))
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  return builder.finalize();
}

ScenarioConfig load_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_config(buf.str());
}

std::vector<std::pair<std::string, std::string>> scenario_key_values(const ScenarioConfig& cfg) {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return std::string(buf);
  };
  return {
      {"width", std::to_string(cfg.width)},
      {"height", std::to_string(cfg.height)},
      {"scenario", to_string(cfg.scenario)},
      {"spawn_ax", std::to_string(cfg.spawn[0].x)},
      {"spawn_ay", std::to_string(cfg.spawn[0].y)},
      {"spawn_bx", std::to_string(cfg.spawn[1].x)},
      {"spawn_by", std::to_string(cfg.spawn[1].y)},
      {"target_a", to_string(cfg.target_edge[0])},
      {"target_b", to_string(cfg.target_edge[1])},
      {"r_goal", fmt(cfg.reward.r_goal)},
      {"r_collide", fmt(cfg.reward.r_collide)},
      {"r_wrong", fmt(cfg.reward.r_wrong)},
      {"r_step", fmt(cfg.reward.r_step)},
      {"gamma", fmt(cfg.reward.gamma)},
      {"max_steps", std::to_string(cfg.max_steps)},
      {"frame_stack", std::to_string(cfg.frame_stack)},
      {"seed", std::to_string(cfg.seed)},
  };
}

}  // namespace hawkdove::gridworld
