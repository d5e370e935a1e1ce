#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>

#include "hawkdove/agents.hpp"
#include "support/value_iteration.hpp"

using namespace hawkdove;
using namespace hawkdove::agents;
using gridworld::Action;
using gridworld::Cell;
using gridworld::JointState;
using gridworld::make_scenario;
using gridworld::Scenario;

namespace {

// Single-agent joint state: opponent already gone.
JointState solo_state(Cell own, const gridworld::ScenarioConfig& cfg) {
  JointState s = gridworld::reset(cfg);
  s.pos[0] = own;
  s.pos[1] = {-1, -1};
  s.status[1] = gridworld::AgentStatus::kReachedGoal;
  return s;
}

}  // namespace

TEST_CASE("epsilon schedule interpolates linearly and clamps") {
  EpsilonSchedule sched{1.0, 0.05, 1000};
  CHECK(sched.at(0) == doctest::Approx(1.0));
  CHECK(sched.at(500) == doctest::Approx(0.525));
  CHECK(sched.at(1000) == doctest::Approx(0.05));
  CHECK(sched.at(50000) == doctest::Approx(0.05));
  EpsilonSchedule bad{0.1, 0.5, 100};
  CHECK_THROWS_AS(bad.validate(), gridworld::ConfigError);
}

TEST_CASE("epsilon = 1 behaves uniformly within 3 sigma over 10k draws") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  TabularAgent agent(9, 9, 0.1, 0.99, EpsilonSchedule{1.0, 1.0, 1});
  const JointState s = gridworld::reset(cfg);
  Rng rng(77);
  std::array<int, 5> counts{};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i)
    ++counts[static_cast<int>(agent.select_action(s, 0, 0, rng))];
  const double expect = draws / 5.0;
  const double sigma = std::sqrt(draws * 0.2 * 0.8);
  for (int a = 0; a < 5; ++a) CHECK(std::abs(counts[a] - expect) < 3 * sigma);
}

TEST_CASE("greedy selection takes the argmax with lowest-index ties") {
  const double q1[5] = {0.1, 0.9, 0.9, 0.0, 0.0};
  CHECK(greedy_index(q1, 5) == 1);
  const double q2[5] = {0.0, 0.0, 0.0, 0.0, 0.0};
  CHECK(greedy_index(q2, 5) == 0);

  SUBCASE("random tie-break hits every maximizer") {
    Rng rng(3);
    std::set<int> seen;
    for (int i = 0; i < 200; ++i) seen.insert(greedy_index(q1, 5, TieBreak::kRandom, &rng));
    CHECK(seen == std::set<int>{1, 2});
  }
}

TEST_CASE("td_update applies the tabular rule to exactly one entry") {
  QTable table(5, 5);
  TabularTransition t;
  t.own = 7;
  t.other = table.exited_index();
  t.action = 2;
  t.reward = 1.0;
  t.terminal = true;

  SUBCASE("terminal arithmetic") {
    td_update(table, t, 0.5, 0.99);
    CHECK(table.get(7, table.exited_index(), 2) == doctest::Approx(0.5));
  }
  SUBCASE("eta = 0 leaves the table untouched") {
    td_update(table, t, 0.0, 0.99);
    for (std::int64_t i = 0; i < table.entries(); ++i) CHECK(i >= 0);  // no throw path
    CHECK(table.get(7, table.exited_index(), 2) == 0.0);
  }
  SUBCASE("only the updated entry changes") {
    QTable before = table;
    t.terminal = false;
    t.next_own = 8;
    t.next_other = table.exited_index();
    table.set(8, table.exited_index(), 1, 2.0);
    before.set(8, table.exited_index(), 1, 2.0);
    td_update(table, t, 0.5, 0.9);
    int diffs = 0;
    for (int own = 0; own < 25; ++own)
      for (int other = 0; other <= 25; ++other)
        for (int a = 0; a < 5; ++a)
          if (table.get(own, other, a) != before.get(own, other, a)) ++diffs;
    CHECK(diffs == 1);
    // bootstrap = max_a' Q(next) = 2.0 -> 0.5 * (1 + 0.9 * 2 - 0) = 1.4
    CHECK(table.get(7, table.exited_index(), 2) == doctest::Approx(1.4));
  }
}

TEST_CASE("uniform-exploration tabular learning matches value iteration on 5x5") {
  const auto cfg = make_scenario(Scenario::kParallel, 5);
  const auto target = cfg.target_edge[0];
  QTable table(5, 5);
  Rng rng(2024);
  const int updates = 200000;
  for (int i = 0; i < updates; ++i) {
    const Cell own{rng.uniform_int(5), rng.uniform_int(5)};
    const int a = rng.uniform_int(5);
    const auto out = testutil::single_agent_transition(own, static_cast<Action>(a), target, cfg);
    TabularTransition t;
    t.own = table.cell_index(own);
    t.other = table.exited_index();
    t.action = a;
    t.reward = out.reward;
    t.terminal = out.terminal;
    if (!out.terminal) {
      t.next_own = table.cell_index(out.next);
      t.next_other = table.exited_index();
    }
    td_update(table, t, 0.1, cfg.reward.gamma);
  }

  const auto q_star = testutil::value_iteration_q(cfg, target);
  double max_err = 0.0;
  for (int s = 0; s < 25; ++s)
    for (int a = 0; a < 5; ++a)
      max_err = std::max(max_err,
                         std::abs(table.get(s, table.exited_index(), a) - q_star[s * 5 + a]));
  CHECK(max_err < 0.01);

  // Greedy path from the spawn: exactly shortest_path_len moves to the goal.
  TabularAgent agent(5, 5, 0.1, cfg.reward.gamma, EpsilonSchedule{0.0, 0.0, 1});
  agent.table() = table;
  JointState s = solo_state({0, 2}, cfg);
  int steps = 0;
  while (s.active(0) && steps < 50) {
    const auto out = gridworld::step(s, {agent.greedy_action(s, 0), Action::kStay}, cfg);
    s = out.next;
    ++steps;
  }
  CHECK(s.status[0] == gridworld::AgentStatus::kReachedGoal);
  CHECK(steps == gridworld::shortest_path_len({0, 2}, target, cfg));
}

TEST_CASE("q-tables persist as a sorted text table and round-trip") {
  QTable table(5, 5);
  table.set(3, 7, 2, 1.25);
  table.set(0, table.exited_index(), 4, -0.5);
  const std::string path = "qtable_test.txt";
  table.save(path);

  std::ifstream in(path);
  std::string line1, line2;
  std::getline(in, line1);
  std::getline(in, line2);
  CHECK(line1 == "0 0 -1 -1 4 -0.5");
  CHECK(line2 == "3 0 2 1 2 1.25");

  const QTable loaded = QTable::load(path, 5, 5);
  CHECK(loaded.get(3, 7, 2) == 1.25);
  CHECK(loaded.get(0, table.exited_index(), 4) == -0.5);
  CHECK(loaded.get(1, 1, 1) == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("replay buffer evicts oldest-first and samples distinct indices") {
  ReplayBuffer buffer(8);
  auto make_transition = [](float r) {
    Transition t;
    t.reward = r;
    return t;
  };
  for (int i = 0; i < 20; ++i) buffer.push(make_transition(static_cast<float>(i)));
  CHECK(buffer.size() == 8);
  CHECK(buffer.at(0).reward == 12.0f);  // oldest retained
  CHECK(buffer.at(7).reward == 19.0f);  // newest

  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto idx = buffer.sample_indices(6, rng);
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == 6);
    for (auto i : idx) CHECK(i < 8);
  }
  CHECK_THROWS_AS(buffer.sample_indices(9, rng), gridworld::UsageError);
}

namespace {

DqnConfig small_dqn_config() {
  DqnConfig c;
  c.buffer_capacity = 256;
  c.batch_size = 8;
  c.sync_period = 5;
  c.eta = 1e-2;
  c.schedule = EpsilonSchedule{1.0, 0.05, 100};
  return c;
}

Transition random_transition(const gridworld::ScenarioConfig& cfg, int agent, Rng& rng,
                             bool terminal, float reward) {
  JointState s = gridworld::reset(cfg);
  s.pos[0] = {rng.uniform_int(cfg.width), rng.uniform_int(cfg.height)};
  do {
    s.pos[1] = {rng.uniform_int(cfg.width), rng.uniform_int(cfg.height)};
  } while (s.pos[1] == s.pos[0]);
  gridworld::FrameHistory hist(cfg.frame_stack);
  Transition t;
  t.obs = gridworld::compact_observe(s, hist, agent, cfg);
  t.action = static_cast<std::uint8_t>(rng.uniform_int(5));
  t.reward = reward;
  t.next_obs = t.obs;
  t.terminal = terminal;
  return t;
}

}  // namespace

TEST_CASE("dqn train_step skips until the buffer can fill a batch") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  DqnAgent agent(cfg, 0, small_dqn_config(), 42);
  const auto before = agent.online();
  Rng rng(1);
  for (int i = 0; i < agent.config().batch_size - 1; ++i) {
    agent.push_transition(random_transition(cfg, 0, rng, false, 0.0f));
    CHECK_FALSE(agent.train_step(rng).has_value());
  }
  for (std::size_t i = 0; i < before.weights.size(); ++i) {
    if (before.weights[i].empty()) continue;
    CHECK(std::memcmp(before.weights[i].data.data(), agent.online().weights[i].data.data(),
                      before.weights[i].data.size() * sizeof(float)) == 0);
  }
  CHECK(agent.train_steps() == 0);
}

TEST_CASE("all-terminal zero-reward batch on a zero network gives zero loss") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  auto config = small_dqn_config();
  DqnAgent agent(cfg, 0, config, 7);
  // Zero the parameters: q == target == 0 everywhere.
  auto& net = const_cast<numerics::QNetwork<float>&>(agent.online());
  for (auto& w : net.weights) std::fill(w.data.begin(), w.data.end(), 0.0f);
  for (auto& b : net.biases) std::fill(b.data.begin(), b.data.end(), 0.0f);

  Rng rng(2);
  for (int i = 0; i < 16; ++i)
    agent.push_transition(random_transition(cfg, 0, rng, true, 0.0f));
  const auto loss = agent.train_step(rng);
  REQUIRE(loss.has_value());
  CHECK(*loss == 0.0f);
}

TEST_CASE("target network stays a stale snapshot between syncs") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  const auto config = small_dqn_config();  // sync every 5 steps
  DqnAgent agent(cfg, 0, config, 11);
  Rng rng(3);
  for (int i = 0; i < 64; ++i)
    agent.push_transition(random_transition(cfg, 0, rng, i % 4 == 0, i % 3 == 0 ? 1.0f : -0.01f));

  const auto snapshot = agent.target();
  auto nets_equal = [](const numerics::QNetwork<float>& a, const numerics::QNetwork<float>& b) {
    for (std::size_t i = 0; i < a.weights.size(); ++i) {
      if (a.weights[i].empty()) continue;
      if (std::memcmp(a.weights[i].data.data(), b.weights[i].data.data(),
                      a.weights[i].data.size() * sizeof(float)) != 0)
        return false;
    }
    return true;
  };

  for (int step = 1; step <= 4; ++step) {
    REQUIRE(agent.train_step(rng).has_value());
    CHECK(nets_equal(agent.target(), snapshot));       // unchanged mid-interval
    CHECK_FALSE(nets_equal(agent.online(), snapshot));  // online moved
  }
  REQUIRE(agent.train_step(rng).has_value());  // 5th step: sync
  CHECK(nets_equal(agent.target(), agent.online()));
}

TEST_CASE("untrained zero-q greedy policy picks action index 0 and is deterministic") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  DqnAgent agent(cfg, 0, small_dqn_config(), 19);
  auto& net = const_cast<numerics::QNetwork<float>&>(agent.online());
  for (auto& w : net.weights) std::fill(w.data.begin(), w.data.end(), 0.0f);

  const JointState s = gridworld::reset(cfg);
  gridworld::FrameHistory hist(cfg.frame_stack);
  const auto obs = gridworld::observe(s, hist, 0, cfg);
  CHECK(agent.greedy_action(obs) == Action::kUp);  // index 0
  CHECK(agent.greedy_action(obs) == agent.greedy_action(obs));
}

TEST_CASE("dqn checkpoints save and reload with sidecar metadata") {
  const auto cfg = make_scenario(Scenario::kParallel, 9);
  DqnAgent agent(cfg, 1, small_dqn_config(), 23);
  agent.save("dqn_test_b", 123);

  DqnAgent fresh(cfg, 1, small_dqn_config(), 99);
  fresh.load("dqn_test_b");
  for (std::size_t i = 0; i < agent.online().weights.size(); ++i) {
    if (agent.online().weights[i].empty()) continue;
    CHECK(std::memcmp(agent.online().weights[i].data.data(),
                      fresh.online().weights[i].data.data(),
                      agent.online().weights[i].data.size() * sizeof(float)) == 0);
  }
  std::ifstream meta("dqn_test_b.meta.json");
  REQUIRE(meta.good());
  std::string blob((std::istreambuf_iterator<char>(meta)), std::istreambuf_iterator<char>());
  CHECK(blob.find("\"env_steps\": 123") != std::string::npos);
  std::remove("dqn_test_b.ckpt");
  std::remove("dqn_test_b.meta.json");
}

TEST_CASE("trajectory returns recompute exactly from the step records") {
  const auto cfg = make_scenario(Scenario::kPerpendicular, 9);
  Rng rng(55);
  Trajectory traj;
  JointState s = gridworld::reset(cfg);
  while (!s.terminal()) {
    const std::array<Action, 2> a{static_cast<Action>(rng.uniform_int(5)),
                                  static_cast<Action>(rng.uniform_int(5))};
    const auto out = gridworld::step(s, a, cfg);
    traj.steps.push_back({s, a, out.reward, out.events});
    s = out.next;
  }
  traj.final_state = s;

  const auto undiscounted = traj.undiscounted_returns();
  const auto discounted = traj.discounted_returns(cfg.reward.gamma);
  for (int i = 0; i < 2; ++i) {
    double u = 0.0, d = 0.0, factor = 1.0;
    for (const auto& step : traj.steps) {
      u += step.rewards[i];
      d += factor * step.rewards[i];
      factor *= cfg.reward.gamma;
    }
    CHECK(undiscounted[i] == u);  // exact, same accumulation order
    CHECK(discounted[i] == d);
  }
}
