#pragma once

// Value-iteration oracle for the single-agent reduction of the grid world
// (opponent absent, no episode cap). Independent of the Q-learning path it
// is used to check: transitions are rebuilt here from the movement rules.

#include <algorithm>
#include <vector>

#include "hawkdove/gridworld.hpp"

namespace hawkdove::testutil {

using gridworld::Action;
using gridworld::Cell;
using gridworld::Edge;
using gridworld::ScenarioConfig;

struct SingleAgentOutcome {
  double reward = 0.0;
  bool terminal = false;
  Cell next{};
};

inline SingleAgentOutcome single_agent_transition(Cell from, Action a, Edge target,
                                                  const ScenarioConfig& cfg) {
  Cell to = from;
  switch (a) {
    case Action::kUp: to.y -= 1; break;
    case Action::kDown: to.y += 1; break;
    case Action::kLeft: to.x -= 1; break;
    case Action::kRight: to.x += 1; break;
    case Action::kStay: break;
  }
  SingleAgentOutcome out;
  if (to.x >= 0 && to.x < cfg.width && to.y >= 0 && to.y < cfg.height) {
    out.reward = cfg.reward.r_step;
    out.next = to;
    return out;
  }
  Edge crossed;
  if (to.x < 0) crossed = Edge::kWest;
  else if (to.x >= cfg.width) crossed = Edge::kEast;
  else if (to.y < 0) crossed = Edge::kNorth;
  else crossed = Edge::kSouth;
  out.terminal = true;
  out.reward = crossed == target ? cfg.reward.r_goal : cfg.reward.r_wrong;
  return out;
}

// Q*(cell, action) flattened as cell_index * 5 + action, cell_index = y*W + x.
inline std::vector<double> value_iteration_q(const ScenarioConfig& cfg, Edge target,
                                             double tol = 1e-12) {
  const int cells = cfg.width * cfg.height;
  std::vector<double> value(cells, 0.0);
  std::vector<double> next_value(cells, 0.0);
  for (int iter = 0; iter < 100000; ++iter) {
    double delta = 0.0;
    for (int s = 0; s < cells; ++s) {
      const Cell c{s % cfg.width, s / cfg.width};
      double best = -1e99;
      for (int a = 0; a < gridworld::kNumActions; ++a) {
        const auto out = single_agent_transition(c, static_cast<Action>(a), target, cfg);
        const double q =
            out.reward +
            (out.terminal ? 0.0
                          : cfg.reward.gamma * value[out.next.y * cfg.width + out.next.x]);
        best = std::max(best, q);
      }
      next_value[s] = best;
      delta = std::max(delta, std::abs(next_value[s] - value[s]));
    }
    value.swap(next_value);
    if (delta < tol) break;
  }
  std::vector<double> q(static_cast<std::size_t>(cells) * gridworld::kNumActions, 0.0);
  for (int s = 0; s < cells; ++s) {
    const Cell c{s % cfg.width, s / cfg.width};
    for (int a = 0; a < gridworld::kNumActions; ++a) {
      const auto out = single_agent_transition(c, static_cast<Action>(a), target, cfg);
      q[static_cast<std::size_t>(s) * gridworld::kNumActions + a] =
          out.reward +
          (out.terminal ? 0.0 : cfg.reward.gamma * value[out.next.y * cfg.width + out.next.x]);
    }
  }
  return q;
}

}  // namespace hawkdove::testutil
