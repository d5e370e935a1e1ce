#include "hawkdove/analysis.hpp"

#include <cmath>
#include <cstdlib>

namespace hawkdove::analysis {

using gridworld::AgentStatus;
using gridworld::ConfigError;
using gridworld::Edge;
using gridworld::UsageError;

const char* to_string(Strategy s) { return s == Strategy::kStraight ? "straight" : "avoid"; }

const char* to_string(Label l) {
  switch (l) {
    case Label::kStraight: return "straight";
    case Label::kAvoid: return "avoid";
    case Label::kCollide: return "collide";
    case Label::kFail: return "fail";
  }
  return "?";
}

Label label_from_string(const std::string& s) {
  if (s == "straight") return Label::kStraight;
  if (s == "avoid") return Label::kAvoid;
  if (s == "collide") return Label::kCollide;
  if (s == "fail") return Label::kFail;
  throw ConfigError("unknown strategy label '" + s + "'");
}

namespace {

Action toward(Edge target) {
  switch (target) {
    case Edge::kEast: return Action::kRight;
    case Edge::kWest: return Action::kLeft;
    case Edge::kSouth: return Action::kDown;
    case Edge::kNorth: return Action::kUp;
  }
  return Action::kStay;
}

bool travels_horizontally(Edge target) { return target == Edge::kEast || target == Edge::kWest; }

// Coordinate along the travel axis, increasing toward the target edge.
int progress(Cell c, Edge target, const ScenarioConfig& cfg) {
  switch (target) {
    case Edge::kEast: return c.x;
    case Edge::kWest: return cfg.width - 1 - c.x;
    case Edge::kSouth: return c.y;
    case Edge::kNorth: return cfg.height - 1 - c.y;
  }
  return 0;
}

// The lane (orthogonal coordinate) an agent travels in.
int lane_of(Cell c, Edge target) { return travels_horizontally(target) ? c.y : c.x; }

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

int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

}  // namespace

StrategyLabel classify(const Trajectory& traj, int agent, const ScenarioConfig& cfg) {
  if (agent != 0 && agent != 1) throw UsageError("agent index must be 0 or 1");
  if (traj.final_state.active(agent)) throw UsageError("trajectory is not completed");

  const Edge target = cfg.target_edge[agent];
  const int spl = gridworld::shortest_path_len(cfg.spawn[agent], target, cfg);
  const int path_len = traj.path_lengths()[agent];

  StrategyLabel out;
  out.waited = traj.waited()[agent];
  out.extra_steps = path_len - spl;

  switch (traj.final_state.status[agent]) {
    case AgentStatus::kCollided: out.label = Label::kCollide; return out;
    case AgentStatus::kWrongExit:
    case AgentStatus::kTimedOut: out.label = Label::kFail; return out;
    default: break;
  }

  bool all_toward = true;
  for (const auto& step : traj.steps)
    if (step.state.active(agent) && step.actions[agent] != toward(target)) all_toward = false;

  out.label = (path_len == spl && !out.waited && all_toward) ? Label::kStraight : Label::kAvoid;
  return out;
}

// --- Scripted strategies -------------------------------------------------------

ScriptedStrategy::ScriptedStrategy(Strategy kind, int agent, const ScenarioConfig& cfg)
    : kind_(kind), agent_(agent), cfg_(cfg) {
  if (agent != 0 && agent != 1) throw UsageError("agent index must be 0 or 1");
  cfg.validate();
}

Action ScriptedStrategy::act(const JointState& s) {
  if (!s.active(agent_)) return Action::kStay;
  if (kind_ == Strategy::kStraight) return toward(cfg_.target_edge[agent_]);
  return cfg_.scenario == gridworld::Scenario::kParallel ? avoid_parallel(s)
                                                         : avoid_perpendicular(s);
}

// One lateral sidestep around the oncoming agent, then back to the home lane.
// Agent 0 steps to the negative lane, agent 1 to the positive one, so two
// avoiders pass on opposite sides.
Action ScriptedStrategy::avoid_parallel(const JointState& s) {
  const Edge target = cfg_.target_edge[agent_];
  const Cell me = s.pos[agent_];
  const int home = lane_of(cfg_.spawn[agent_], target);
  const bool opp_active = s.active(1 - agent_);
  const Cell opp = s.pos[1 - agent_];
  const bool horizontal = travels_horizontally(target);

  if (lane_of(me, target) != home) {
    const bool opp_passed =
        !opp_active || progress(opp, target, cfg_) < progress(me, target, cfg_);
    if (!opp_passed) return toward(target);  // keep advancing in the displaced lane
    const int delta = home - lane_of(me, target);
    if (horizontal) return delta > 0 ? Action::kDown : Action::kUp;
    return delta > 0 ? Action::kRight : Action::kLeft;
  }

  if (opp_active && lane_of(opp, target) == home) {
    const int gap = progress(opp, target, cfg_) - progress(me, target, cfg_);
    if (gap > 0 && gap <= 2) {
      if (horizontal) return agent_ == 0 ? Action::kUp : Action::kDown;
      return agent_ == 0 ? Action::kLeft : Action::kRight;
    }
  }
  return toward(target);
}

// Wait in place until the crossing cell is safe, then resume. Two waiting
// avoiders break the stalemate by agent index: agent 0 proceeds once the
// opponent stalls short of the crossing.
Action ScriptedStrategy::avoid_perpendicular(const JointState& s) {
  const Edge target = cfg_.target_edge[agent_];
  const Cell me = s.pos[agent_];
  const bool opp_active = s.active(1 - agent_);
  const Cell opp = s.pos[1 - agent_];
  // Intersection of the two straight paths.
  const Cell crossing = travels_horizontally(cfg_.target_edge[0])
                            ? Cell{cfg_.spawn[1].x, cfg_.spawn[0].y}
                            : Cell{cfg_.spawn[0].x, cfg_.spawn[1].y};

  Action out = toward(target);
  if (opp_active && shifted(me, out) == crossing) {
    const Edge opp_target = cfg_.target_edge[1 - agent_];
    const bool opp_passed =
        progress(opp, opp_target, cfg_) > progress(crossing, opp_target, cfg_);
    if (!opp_passed) {
      const bool opp_at_crossing = opp == crossing;
      if (opp_at_crossing || manhattan(opp, crossing) == 1) {
        const bool opp_stalled = last_opponent_pos_ && *last_opponent_pos_ == opp;
        const bool break_stalemate = opp_stalled && agent_ == 0 && !opp_at_crossing;
        if (!break_stalemate) out = Action::kStay;
      }
    }
  }
  last_opponent_pos_ = opp_active ? std::optional<Cell>(opp) : std::nullopt;
  return out;
}

Trajectory run_scripted_episode(const ScenarioConfig& cfg, Strategy strategy_a,
                                Strategy strategy_b) {
  ScriptedStrategy a(strategy_a, 0, cfg);
  ScriptedStrategy b(strategy_b, 1, cfg);
  Trajectory traj;
  JointState s = gridworld::reset(cfg);
  while (!s.terminal()) {
    const std::array<Action, 2> actions{a.act(s), b.act(s)};
    const auto out = gridworld::step(s, actions, cfg);
    traj.steps.push_back({s, actions, out.reward, out.events});
    s = out.next;
  }
  traj.final_state = s;
  return traj;
}

PayoffMatrix empirical_payoff(const ScenarioConfig& cfg, int episodes_per_cell) {
  if (episodes_per_cell < 1) throw UsageError("episodes_per_cell must be >= 1");
  PayoffMatrix m;
  m.episodes_per_cell = episodes_per_cell;
  const std::array<Strategy, 2> strategies{Strategy::kStraight, Strategy::kAvoid};
  for (int row = 0; row < 2; ++row) {
    for (int col = 0; col < 2; ++col) {
      std::array<double, 2> mean{0.0, 0.0};
      for (int e = 0; e < episodes_per_cell; ++e) {
        const auto traj = run_scripted_episode(cfg, strategies[row], strategies[col]);
        const auto ret = traj.undiscounted_returns();
        mean[0] += ret[0];
        mean[1] += ret[1];
      }
      m.payoff[row][col] = {mean[0] / episodes_per_cell, mean[1] / episodes_per_cell};
    }
  }
  return m;
}

NashResult pure_nash(const PayoffMatrix& m) {
  NashResult result;
  const std::array<Strategy, 2> strategies{Strategy::kStraight, Strategy::kAvoid};
  for (int row = 0; row < 2; ++row) {
    for (int col = 0; col < 2; ++col) {
      const double row_here = m.payoff[row][col][0];
      const double row_there = m.payoff[1 - row][col][0];
      const double col_here = m.payoff[row][col][1];
      const double col_there = m.payoff[row][1 - col][1];
      result.improvement[0][row][col] = row_there > row_here ? 1 : (row_there < row_here ? -1 : 0);
      result.improvement[1][row][col] = col_there > col_here ? 1 : (col_there < col_here ? -1 : 0);
      if (row_there == row_here || col_there == col_here) result.ties = true;
      if (result.improvement[0][row][col] <= 0 && result.improvement[1][row][col] <= 0)
        result.pure_equilibria.emplace_back(strategies[row], strategies[col]);
    }
  }
  return result;
}

AsymmetryReport asymmetry_report(const std::vector<std::array<Label, 2>>& final_labels) {
  if (final_labels.empty()) throw UsageError("asymmetry report needs at least one seed");
  AsymmetryReport report;
  report.seeds = static_cast<int>(final_labels.size());
  report.per_seed = final_labels;
  for (const auto& pair : final_labels) {
    if (pair[0] == Label::kStraight && pair[1] == Label::kAvoid) {
      ++report.asymmetric;
      ++report.straight_first;
    } else if (pair[0] == Label::kAvoid && pair[1] == Label::kStraight) {
      ++report.asymmetric;
      ++report.straight_second;
    }
    if (pair[0] == Label::kCollide || pair[1] == Label::kCollide) ++report.collided;
  }
  report.asymmetric_fraction = static_cast<double>(report.asymmetric) / report.seeds;
  return report;
}

}  // namespace hawkdove::analysis
