#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

namespace hawkdove::gridworld {

// Thrown when a scenario or run configuration violates an invariant.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when an operation is called outside its contract (e.g. stepping a
// terminal state).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Scenario : std::uint8_t { kParallel, kPerpendicular };
enum class Edge : std::uint8_t { kNorth, kSouth, kEast, kWest };

// The five moves of each agent. Index order is the Q-value / argmax order.
enum class Action : std::uint8_t { kUp = 0, kDown, kLeft, kRight, kStay };
inline constexpr int kNumActions = 5;

enum class AgentStatus : std::uint8_t { kActive, kReachedGoal, kWrongExit, kCollided, kTimedOut };
enum class Event : std::uint8_t { kNone, kGoal, kCollision, kWrongExit, kTimeout };

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

struct RewardSpec {
  double r_goal = 1.0;
  double r_collide = -1.0;
  double r_wrong = -1.0;
  double r_step = -0.01;
  double gamma = 0.99;
};

// Grid geometry, spawn/target layout, reward constants and episode limits.
// The two canonical layouts (Fig-style parallel / perpendicular crossings)
// come from make_scenario(); hand-built configs must pass validate().
struct ScenarioConfig {
  int width = 9;
  int height = 9;
  Scenario scenario = Scenario::kParallel;
  std::array<Cell, 2> spawn{};
  std::array<Edge, 2> target_edge{};
  RewardSpec reward;
  int max_steps = 0;
  int frame_stack = 4;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the violated constraint.
  void validate() const;
};

// Canonical symmetric scenario on a width x height grid: midpoint spawns,
// parallel = west/east facing pair, perpendicular = west/north crossing pair.
ScenarioConfig make_scenario(Scenario scenario, int width, int height);
inline ScenarioConfig make_scenario(Scenario scenario, int size) {
  return make_scenario(scenario, size, size);
}

// Flat `key = value` scenario file. Unknown keys are errors; omitted keys
// default (spawns/targets from the scenario layout). See configs/ for samples.
ScenarioConfig load_scenario_config(const std::string& path);
ScenarioConfig parse_scenario_config(const std::string& text);

// Incremental construction from key/value pairs; shared by the file loader
// and by CLI --set overrides. apply() returns false for keys it does not
// own (so callers with additional keys can keep dispatching) and throws
// ConfigError on malformed values.
class ScenarioConfigBuilder {
 public:
  bool apply(const std::string& key, const std::string& value);
  // Fills layout defaults for anything unset and validates the result.
  ScenarioConfig finalize() const;

 private:
  ScenarioConfig cfg_;
  bool any_layout_key_ = false;
  std::array<bool, 2> spawn_x_set_{}, spawn_y_set_{}, target_set_{};
  bool max_steps_set_ = false;
};

// Echo of every effective value, in file-key form.
std::vector<std::pair<std::string, std::string>> scenario_key_values(const ScenarioConfig& cfg);

const char* to_string(Scenario s);
const char* to_string(Edge e);
const char* to_string(Action a);
const char* to_string(AgentStatus s);
const char* to_string(Event e);
Scenario scenario_from_string(const std::string& s);
Edge edge_from_string(const std::string& s);

struct JointState {
  std::array<Cell, 2> pos{};  // meaningful only while the agent is on the grid
  std::array<AgentStatus, 2> status{AgentStatus::kActive, AgentStatus::kActive};
  int t = 0;

  bool active(int agent) const { return status[agent] == AgentStatus::kActive; }
  // Exited agents (goal / wrong side) leave the grid; collided and timed-out
  // agents keep their final cells.
  bool on_grid(int agent) const {
    return status[agent] == AgentStatus::kActive || status[agent] == AgentStatus::kCollided ||
           status[agent] == AgentStatus::kTimedOut;
  }
  bool terminal() const { return !active(0) && !active(1); }
};

struct StepOutcome {
  JointState next;
  std::array<double, 2> reward{0.0, 0.0};
  bool terminal = false;
  std::array<Event, 2> events{Event::kNone, Event::kNone};
};

// Initial state: both agents Active at their spawns, t = 0.
JointState reset(const ScenarioConfig& cfg);

// Simultaneous-move transition. Reward attribution:
//   - crossing the target edge: r_goal, agent removed from the grid;
//   - crossing any other edge: r_wrong, agent removed;
//   - collision (tentative cells equal or swapped while both Active):
//     r_collide + r_step each, episode terminal;
//   - otherwise r_step; reaching max_steps times out the remaining agents.
// Transitions that leave the grid carry no step penalty; every transition
// that keeps the agent on the grid does.
StepOutcome step(const JointState& state, const std::array<Action, 2>& actions,
                 const ScenarioConfig& cfg);

// Manhattan step count from `from` to across `target`, ignoring the other
// agent (the final boundary-crossing move counts).
int shortest_path_len(Cell from, Edge target, const ScenarioConfig& cfg);

// --- Role-exchange symmetry -------------------------------------------------

// The grid isometry that maps agent 0's (spawn, target) onto agent 1's.
enum class MirrorKind : std::uint8_t { kReflectX, kReflectY, kTranspose, kAntiTranspose };
MirrorKind mirror_kind(const ScenarioConfig& cfg);

Cell mirror_cell(Cell c, const ScenarioConfig& cfg);
Action mirror_action(Action a, const ScenarioConfig& cfg);
Edge mirror_edge(Edge e, const ScenarioConfig& cfg);

// Applies the isometry and swaps the agent roles. Involutions: double
// application is the identity.
JointState mirror(const JointState& s, const ScenarioConfig& cfg);
std::array<Action, 2> mirror(const std::array<Action, 2>& actions, const ScenarioConfig& cfg);

// --- Observations -----------------------------------------------------------

// One encoded frame of the joint state as seen by one agent: grid cells of
// self and other, or {-1,-1} when off the grid.
struct ObsFrame {
  std::int16_t self_x = -1, self_y = -1;
  std::int16_t other_x = -1, other_y = -1;
  bool operator==(const ObsFrame&) const = default;
};

// Compact lossless stack of the frame_stack most recent frames, newest first.
// Materializes to the (3*frame_stack, H, W) plane tensor; kept compact so
// replay buffers stay small on large grids.
struct CompactObs {
  std::vector<ObsFrame> frames;
  bool operator==(const CompactObs&) const = default;
};

// Rolling buffer of past joint-position snapshots (one per elapsed frame).
// Hold one per episode; push the pre-step state after each env transition.
class FrameHistory {
 public:
  explicit FrameHistory(int frame_stack) : capacity_(frame_stack > 1 ? frame_stack - 1 : 0) {}

  void push(const JointState& s) {
    snapshots_.push_front(snapshot_of(s));
    if (static_cast<int>(snapshots_.size()) > capacity_) snapshots_.pop_back();
  }
  void clear() { snapshots_.clear(); }
  int size() const { return static_cast<int>(snapshots_.size()); }

  struct Snapshot {
    std::array<Cell, 2> pos;
    std::array<bool, 2> active;
  };
  const Snapshot& at(int i) const { return snapshots_[i]; }  // 0 = most recent

  static Snapshot snapshot_of(const JointState& s) {
    return Snapshot{s.pos, {s.active(0), s.active(1)}};
  }

 private:
  int capacity_;
  std::deque<Snapshot> snapshots_;
};

// Binary plane tensor of shape (3*frame_stack, height, width); channel order
// [self, other, boundary] per frame, newest frame first.
struct Observation {
  int frame_stack = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  float at(int channel, int y, int x) const { return data[(channel * height + y) * width + x]; }
};

CompactObs compact_observe(const JointState& s, const FrameHistory& history, int agent,
                           const ScenarioConfig& cfg);
// Fills `out` (size 3*frame_stack*H*W, row-major) with the planes of `obs`.
void materialize(const CompactObs& obs, int agent, const ScenarioConfig& cfg, float* out);
Observation observe(const JointState& s, const FrameHistory& history, int agent,
                    const ScenarioConfig& cfg);

}  // namespace hawkdove::gridworld
