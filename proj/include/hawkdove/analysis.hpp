#pragma once

#include <array>
#include <optional>
#include <vector>

#include "hawkdove/agents.hpp"
#include "hawkdove/gridworld.hpp"

namespace hawkdove::analysis {

using agents::Trajectory;
using gridworld::Action;
using gridworld::Cell;
using gridworld::JointState;
using gridworld::ScenarioConfig;

enum class Strategy : std::uint8_t { kStraight, kAvoid };
enum class Label : std::uint8_t { kStraight, kAvoid, kCollide, kFail };

const char* to_string(Strategy s);
const char* to_string(Label l);
Label label_from_string(const std::string& s);

struct StrategyLabel {
  Label label = Label::kFail;
  int extra_steps = 0;  // path length minus shortest_path_len
  bool waited = false;  // played Stay while active
};

// Straight: reached the goal in exactly shortest_path_len moves, no waits,
// no moves off a shortest path. Avoid: reached the goal any other way.
// Collide / Fail from the terminal event.
StrategyLabel classify(const Trajectory& traj, int agent, const ScenarioConfig& cfg);

// Deterministic reference implementations of the two converged strategies.
// Straight walks the shortest path ignoring the opponent. Avoid yields:
// in the parallel scenario one lateral sidestep out and back around the
// oncoming agent; in the perpendicular scenario it waits in place until the
// crossing cell is safe. Policies may keep per-episode memory; call reset()
// between episodes.
class ScriptedStrategy {
 public:
  ScriptedStrategy(Strategy kind, int agent, const ScenarioConfig& cfg);

  Action act(const JointState& s);
  void reset() { last_opponent_pos_.reset(); }
  Strategy kind() const { return kind_; }

 private:
  Action avoid_parallel(const JointState& s);
  Action avoid_perpendicular(const JointState& s);

  Strategy kind_;
  int agent_;
  ScenarioConfig cfg_;
  std::optional<Cell> last_opponent_pos_;
};

// Rolls out one episode of two scripted strategies.
Trajectory run_scripted_episode(const ScenarioConfig& cfg, Strategy strategy_a,
                                Strategy strategy_b);

// Mean undiscounted episode returns of all four scripted strategy pairs.
// payoff[row][col][player]: row = agent 0's strategy, col = agent 1's,
// index order (Straight, Avoid).
struct PayoffMatrix {
  std::array<std::array<std::array<double, 2>, 2>, 2> payoff{};
  int episodes_per_cell = 0;
};

PayoffMatrix empirical_payoff(const ScenarioConfig& cfg, int episodes_per_cell);

// Exact best-response enumeration over the four pure profiles.
struct NashResult {
  std::vector<std::pair<Strategy, Strategy>> pure_equilibria;
  // improvement[player][row][col]: +1 if unilaterally switching strictly
  // improves that player at the profile, -1 if strictly worse, 0 if tied
  // (Fig-style best-response arrows).
  std::array<std::array<std::array<int, 2>, 2>, 2> improvement{};
  bool ties = false;  // some equilibrium is weak / some comparison tied
};

NashResult pure_nash(const PayoffMatrix& m);

// Cross-seed summary of which roles emerged.
struct AsymmetryReport {
  int seeds = 0;
  int asymmetric = 0;  // joint label {Straight, Avoid} in either order
  double asymmetric_fraction = 0.0;
  int straight_first = 0;   // converged seeds where agent 0 took Straight
  int straight_second = 0;  // ... agent 1
  int collided = 0;
  std::vector<std::array<Label, 2>> per_seed;
};

AsymmetryReport asymmetry_report(const std::vector<std::array<Label, 2>>& final_labels);

}  // namespace hawkdove::analysis
