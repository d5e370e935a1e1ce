#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "hawkdove/gridworld.hpp"
#include "hawkdove/rng.hpp"
#include "support/test_util.hpp"

using namespace hawkdove;
using namespace hawkdove::gridworld;
using testutil::mirror_outcome;
using testutil::outcomes_equal;
using testutil::run_scripted;
using testutil::states_equal;

namespace {

const testutil::Policy kStraightEast = [](const JointState& s, int i) {
  (void)s;
  (void)i;
  return Action::kRight;
};
const testutil::Policy kStraightWest = [](const JointState& s, int i) {
  (void)s;
  (void)i;
  return Action::kLeft;
};

JointState state_at(const ScenarioConfig& cfg, Cell a, Cell b, int t = 0) {
  JointState s = reset(cfg);
  s.pos = {a, b};
  s.t = t;
  return s;
}

}  // namespace

TEST_CASE("reset produces the canonical symmetric layouts") {
  const auto par = make_scenario(Scenario::kParallel, 9);
  const JointState sp = reset(par);
  CHECK(sp.pos[0] == Cell{0, 4});
  CHECK(sp.pos[1] == Cell{8, 4});
  CHECK(par.target_edge[0] == Edge::kEast);
  CHECK(par.target_edge[1] == Edge::kWest);
  CHECK(sp.t == 0);
  CHECK(sp.active(0));
  CHECK(sp.active(1));

  const auto perp = make_scenario(Scenario::kPerpendicular, 9);
  const JointState sq = reset(perp);
  CHECK(sq.pos[0] == Cell{0, 4});
  CHECK(sq.pos[1] == Cell{4, 0});
  CHECK(perp.target_edge[0] == Edge::kEast);
  CHECK(perp.target_edge[1] == Edge::kSouth);
}

TEST_CASE("undersized grids are configuration errors") {
  CHECK_THROWS_AS(make_scenario(Scenario::kParallel, 3), ConfigError);
  CHECK_THROWS_AS(make_scenario(Scenario::kParallel, 4, 9), ConfigError);
}

TEST_CASE("invalid hand-built configs name the violated constraint") {
  auto cfg = make_scenario(Scenario::kParallel, 9);
  cfg.spawn[0] = {1, 4};  // off its edge
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("edge opposite"), ConfigError);

  cfg = make_scenario(Scenario::kParallel, 9);
  cfg.max_steps = 10;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("max_steps"), ConfigError);

  cfg = make_scenario(Scenario::kParallel, 9);
  cfg.spawn[0] = {0, 2};
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("midpoint"), ConfigError);

  cfg = make_scenario(Scenario::kParallel, 9);
  cfg.reward.r_step = -0.2;  // 0.2 * 36 >= 1
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("r_goal"), ConfigError);
}

TEST_CASE("straight-vs-straight parallel rollout collides at the grid center") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  const auto r = run_scripted(cfg, kStraightEast, kStraightWest);

  // Both advance 3 times, then the tentative cells coincide at (4,4).
  REQUIRE(r.states.size() == 4);
  CHECK(r.final_state.t == 4);
  CHECK(r.events.back() == std::array<Event, 2>{Event::kCollision, Event::kCollision});
  CHECK(r.final_state.status[0] == AgentStatus::kCollided);
  CHECK(r.final_state.status[1] == AgentStatus::kCollided);
  CHECK(r.final_state.pos[0] == Cell{4, 4});
  CHECK(r.final_state.pos[1] == Cell{4, 4});

  // Collision transition pays r_collide plus the on-grid step penalty.
  const double rs = cfg.reward.r_step;
  CHECK(r.rewards.back()[0] == doctest::Approx(cfg.reward.r_collide + rs));
  CHECK(r.returns[0] == doctest::Approx(cfg.reward.r_collide + 4 * rs));
  CHECK(r.returns[1] == doctest::Approx(cfg.reward.r_collide + 4 * rs));
}

TEST_CASE("goal and wrong-side crossings") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);

  SUBCASE("crossing the target edge earns r_goal and removes the agent") {
    JointState s = state_at(cfg, {8, 4}, {8, 0});
    const auto out = step(s, {Action::kRight, Action::kStay}, cfg);
    CHECK(out.events[0] == Event::kGoal);
    CHECK(out.reward[0] == doctest::Approx(cfg.reward.r_goal));
    CHECK(out.next.status[0] == AgentStatus::kReachedGoal);
    CHECK_FALSE(out.next.on_grid(0));
    CHECK_FALSE(out.terminal);  // agent 1 still active
  }

  SUBCASE("crossing any other edge earns r_wrong") {
    JointState s = state_at(cfg, {0, 4}, {8, 0});
    const auto out = step(s, {Action::kLeft, Action::kStay}, cfg);
    CHECK(out.events[0] == Event::kWrongExit);
    CHECK(out.reward[0] == doctest::Approx(cfg.reward.r_wrong));
    CHECK(out.next.status[0] == AgentStatus::kWrongExit);
  }

  SUBCASE("corner cell exits classify by the crossed edge") {
    JointState s = state_at(cfg, {8, 0}, {0, 0});
    auto out = step(s, {Action::kUp, Action::kStay}, cfg);  // crosses north, target east
    CHECK(out.events[0] == Event::kWrongExit);
    out = step(s, {Action::kRight, Action::kStay}, cfg);
    CHECK(out.events[0] == Event::kGoal);
  }
}

TEST_CASE("swap-through moves are collisions") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  JointState s = state_at(cfg, {3, 4}, {4, 4});
  const auto out = step(s, {Action::kRight, Action::kLeft}, cfg);
  CHECK(out.events[0] == Event::kCollision);
  CHECK(out.events[1] == Event::kCollision);
  CHECK(out.terminal);
}

TEST_CASE("exited agents cast no rewards or events afterwards") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  JointState s = state_at(cfg, {8, 4}, {8, 0});
  auto out = step(s, {Action::kRight, Action::kStay}, cfg);
  REQUIRE(out.next.status[0] == AgentStatus::kReachedGoal);
  out = step(out.next, {Action::kStay, Action::kDown}, cfg);
  CHECK(out.reward[0] == 0.0);
  CHECK(out.events[0] == Event::kNone);
  CHECK(out.reward[1] == doctest::Approx(cfg.reward.r_step));
}

TEST_CASE("both agents may reach their goals on the same transition") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  JointState s = state_at(cfg, {8, 4}, {0, 4});
  const auto out = step(s, {Action::kRight, Action::kLeft}, cfg);
  CHECK(out.events[0] == Event::kGoal);
  CHECK(out.events[1] == Event::kGoal);
  CHECK(out.terminal);
}

TEST_CASE("running out of frames times the remaining agents out") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  JointState s = state_at(cfg, {4, 4}, {6, 6}, cfg.max_steps - 1);
  const auto out = step(s, {Action::kStay, Action::kStay}, cfg);
  CHECK(out.next.t == cfg.max_steps);
  CHECK(out.events[0] == Event::kTimeout);
  CHECK(out.events[1] == Event::kTimeout);
  CHECK(out.reward[0] == doctest::Approx(cfg.reward.r_step));
  CHECK(out.next.status[0] == AgentStatus::kTimedOut);
  CHECK(out.terminal);
}

TEST_CASE("stepping a terminal state is a usage error") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  JointState s = state_at(cfg, {3, 4}, {4, 4});
  const auto out = step(s, {Action::kRight, Action::kLeft}, cfg);
  REQUIRE(out.terminal);
  CHECK_THROWS_AS(step(out.next, {Action::kStay, Action::kStay}, cfg), UsageError);
}

TEST_CASE("shortest_path_len counts the boundary-crossing move") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  CHECK(shortest_path_len({0, 4}, Edge::kEast, cfg) == 9);
  CHECK(shortest_path_len({4, 0}, Edge::kSouth, cfg) == 9);
  CHECK(shortest_path_len({8, 4}, Edge::kEast, cfg) == 1);
  CHECK(shortest_path_len({4, 4}, Edge::kNorth, cfg) == 5);
  CHECK(shortest_path_len({4, 4}, Edge::kWest, cfg) == 5);
}

TEST_CASE("mirror is an involution and exchanges the spawns") {
  for (const auto scenario : {Scenario::kParallel, Scenario::kPerpendicular}) {
    const auto cfg = make_scenario(scenario, 9);
    const JointState s0 = reset(cfg);
    CHECK(states_equal(mirror(mirror(s0, cfg), cfg), s0));
    const JointState m = mirror(s0, cfg);
    CHECK(states_equal(m, s0));  // spawns map onto each other

    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
      JointState s = s0;
      s.pos[0] = {rng.uniform_int(9), rng.uniform_int(9)};
      do {
        s.pos[1] = {rng.uniform_int(9), rng.uniform_int(9)};
      } while (s.pos[1] == s.pos[0]);
      s.t = rng.uniform_int(cfg.max_steps);
      CHECK(states_equal(mirror(mirror(s, cfg), cfg), s));
      std::array<Action, 2> a{static_cast<Action>(rng.uniform_int(5)),
                              static_cast<Action>(rng.uniform_int(5))};
      CHECK(mirror(mirror(a, cfg), cfg) == a);
    }
  }
}

TEST_CASE("mirror of a parallel off-center pair reflects and swaps") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  JointState s = state_at(cfg, {1, 4}, {7, 4});
  const JointState m = mirror(s, cfg);
  CHECK(m.pos[0] == Cell{1, 4});
  CHECK(m.pos[1] == Cell{7, 4});

  // Off the spawn row the swap is visible.
  s = state_at(cfg, {2, 1}, {5, 6});
  const JointState m2 = mirror(s, cfg);
  CHECK(m2.pos[0] == Cell{3, 6});
  CHECK(m2.pos[1] == Cell{6, 1});
}

// The conjugation table is pinned by the equivariance property: for every
// joint action, stepping the mirrored state with the mirrored actions must
// equal the mirrored outcome with the reward vector swapped.
TEST_CASE("step commutes with mirror over all 25 joint actions") {
  for (const auto scenario : {Scenario::kParallel, Scenario::kPerpendicular}) {
    const auto cfg = make_scenario(scenario, 9);
    Rng rng(11);
    for (int trial = 0; trial < 400; ++trial) {
      JointState s = reset(cfg);
      s.pos[0] = {rng.uniform_int(9), rng.uniform_int(9)};
      do {
        s.pos[1] = {rng.uniform_int(9), rng.uniform_int(9)};
      } while (s.pos[1] == s.pos[0]);
      s.t = rng.uniform_int(cfg.max_steps - 1);
      for (int ja = 0; ja < 25; ++ja) {
        const std::array<Action, 2> a{static_cast<Action>(ja / 5), static_cast<Action>(ja % 5)};
        const auto direct = step(mirror(s, cfg), mirror(a, cfg), cfg);
        const auto mirrored = mirror_outcome(step(s, a, cfg), cfg);
        CHECK(outcomes_equal(direct, mirrored));
      }
    }
  }
}

TEST_CASE("step is a pure function of its inputs") {
  const auto cfg = make_scenario(Scenario::kPerpendicular, 9);
  const JointState s = reset(cfg);
  const std::array<Action, 2> a{Action::kRight, Action::kDown};
  const auto o1 = step(s, a, cfg);
  const auto o2 = step(s, a, cfg);
  CHECK(outcomes_equal(o1, o2));
}

TEST_CASE("episode returns decompose into step penalties plus the terminal event") {
  Rng rng(23);
  for (const auto scenario : {Scenario::kParallel, Scenario::kPerpendicular}) {
    const auto cfg = make_scenario(scenario, 9);
    for (int episode = 0; episode < 200; ++episode) {
      const testutil::Policy random_policy = [&rng](const JointState&, int) {
        return static_cast<Action>(rng.uniform_int(5));
      };
      const auto r = run_scripted(cfg, random_policy, random_policy);
      for (int i = 0; i < 2; ++i) {
        const double rs = cfg.reward.r_step;
        double expected = (r.steps_taken[i] - 1) * rs;
        switch (r.final_state.status[i]) {
          case AgentStatus::kReachedGoal: expected += cfg.reward.r_goal; break;
          case AgentStatus::kWrongExit: expected += cfg.reward.r_wrong; break;
          case AgentStatus::kCollided: expected += cfg.reward.r_collide + rs; break;
          case AgentStatus::kTimedOut: expected += rs; break;
          case AgentStatus::kActive: REQUIRE(false); break;
        }
        CHECK(r.returns[i] == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("no reachable post-step state holds two active agents on one cell") {
  Rng rng(31);
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  for (int episode = 0; episode < 300; ++episode) {
    JointState s = reset(cfg);
    while (!s.terminal()) {
      const std::array<Action, 2> a{static_cast<Action>(rng.uniform_int(5)),
                                    static_cast<Action>(rng.uniform_int(5))};
      const auto out = step(s, a, cfg);
      if (out.next.active(0) && out.next.active(1)) CHECK_FALSE(out.next.pos[0] == out.next.pos[1]);
      s = out.next;
    }
  }
}

TEST_CASE("initial observation stacks identical frames and marks the target edge") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  const JointState s = reset(cfg);
  FrameHistory hist(cfg.frame_stack);
  const Observation obs = observe(s, hist, 0, cfg);

  REQUIRE(obs.data.size() == static_cast<std::size_t>(3 * 4 * 9 * 9));
  CHECK(obs.at(0, 4, 0) == 1.0f);  // self at spawn
  CHECK(obs.at(1, 4, 8) == 1.0f);  // other at opposite spawn
  for (int y = 0; y < 9; ++y) CHECK(obs.at(2, y, 8) == 1.0f);  // east boundary column

  // All four stacked frames are copies of the initial frame.
  const int plane = 9 * 9;
  for (int f = 1; f < 4; ++f)
    for (int c = 0; c < 3; ++c)
      for (int p = 0; p < plane; ++p)
        CHECK(obs.data[(3 * f + c) * plane + p] == obs.data[c * plane + p]);
}

TEST_CASE("exited opponents leave an all-zero other-plane") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  JointState s = state_at(cfg, {2, 4}, {0, 4});
  const auto out = step(s, {Action::kStay, Action::kLeft}, cfg);  // agent 1 exits via its target
  REQUIRE(out.next.status[1] == AgentStatus::kReachedGoal);
  FrameHistory hist(cfg.frame_stack);
  const Observation obs = observe(out.next, hist, 0, cfg);
  float other_sum = 0.0f;
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) other_sum += obs.at(1, y, x);
  CHECK(other_sum == 0.0f);
}

TEST_CASE("newest planes decode back to the active agents' positions") {
  Rng rng(41);
  const auto cfg = make_scenario(Scenario::kPerpendicular, 9);
  for (int episode = 0; episode < 50; ++episode) {
    JointState s = reset(cfg);
    std::array<FrameHistory, 2> hist{FrameHistory(cfg.frame_stack), FrameHistory(cfg.frame_stack)};
    while (!s.terminal()) {
      for (int agent = 0; agent < 2; ++agent) {
        const Observation obs = observe(s, hist[agent], agent, cfg);
        float self_sum = 0.0f, other_sum = 0.0f;
        Cell self_cell{-1, -1}, other_cell{-1, -1};
        for (int y = 0; y < 9; ++y)
          for (int x = 0; x < 9; ++x) {
            if (obs.at(0, y, x) == 1.0f) self_cell = {x, y};
            if (obs.at(1, y, x) == 1.0f) other_cell = {x, y};
            self_sum += obs.at(0, y, x);
            other_sum += obs.at(1, y, x);
          }
        CHECK(self_sum == (s.active(agent) ? 1.0f : 0.0f));
        CHECK(other_sum == (s.active(1 - agent) ? 1.0f : 0.0f));
        if (s.active(agent)) CHECK(self_cell == s.pos[agent]);
        if (s.active(1 - agent)) CHECK(other_cell == s.pos[1 - agent]);
      }
      const std::array<Action, 2> a{static_cast<Action>(rng.uniform_int(5)),
                                    static_cast<Action>(rng.uniform_int(5))};
      const auto out = step(s, a, cfg);
      hist[0].push(s);
      hist[1].push(s);
      s = out.next;
    }
  }
}

TEST_CASE("frame history keeps exactly frame_stack-1 snapshots") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  FrameHistory hist(cfg.frame_stack);
  JointState s = reset(cfg);
  for (int i = 0; i < 10; ++i) hist.push(s);
  CHECK(hist.size() == cfg.frame_stack - 1);
}

TEST_CASE("scenario config files round-trip and reject unknown keys") {
  const auto cfg = make_scenario(Scenario::kPerpendicular, 13);
  std::string text;
  for (const auto& [k, v] : scenario_key_values(cfg)) text += k + " = " + v + "\n";
  const auto parsed = parse_scenario_config(text);
  CHECK(parsed.width == 13);
  CHECK(parsed.scenario == Scenario::kPerpendicular);
  CHECK(parsed.spawn[0] == cfg.spawn[0]);
  CHECK(parsed.spawn[1] == cfg.spawn[1]);
  CHECK(parsed.max_steps == cfg.max_steps);

  CHECK_THROWS_WITH_AS(parse_scenario_config("widht = 9\n"), doctest::Contains("unknown key"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_scenario_config("width = 3\nheight = 9\n"),
                       doctest::Contains("width"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_scenario_config("spawn_ax = 0\n"), doctest::Contains("all-or-nothing"),
                       ConfigError);
  CHECK_THROWS_AS(load_scenario_config("/nonexistent/path.cfg"), ConfigError);

  // Minimal file: layout defaults to the canonical scenario.
  const auto minimal = parse_scenario_config("scenario = parallel\nwidth = 9\nheight = 9\n");
  CHECK(minimal.spawn[0] == Cell{0, 4});
  CHECK(minimal.target_edge[1] == Edge::kWest);
}
