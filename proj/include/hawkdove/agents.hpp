#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hawkdove/gridworld.hpp"
#include "hawkdove/numerics.hpp"
#include "hawkdove/rng.hpp"

namespace hawkdove::agents {

using gridworld::Action;
using gridworld::JointState;

// Linear exploration decay, clamped at eps_end.
struct EpsilonSchedule {
  double eps_start = 1.0;
  double eps_end = 0.05;
  std::int64_t decay_steps = 30000;

  double at(std::int64_t step) const;
  void validate() const;
};

enum class TieBreak : std::uint8_t { kLowestIndex, kRandom };

// Argmax over q[0..n); ties go to the lowest index, or uniformly among the
// maximizers when tie == kRandom (rng required then).
int greedy_index(const double* q, int n, TieBreak tie = TieBreak::kLowestIndex,
                 Rng* rng = nullptr);

// --- Exact tabular representation -------------------------------------------

// Dense Q-table over (own cell, other cell-or-exited) x action, default 0.
class QTable {
 public:
  QTable(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  int exited_index() const { return cells_; }  // "other agent gone" slot

  int cell_index(gridworld::Cell c) const { return c.y * width_ + c.x; }
  // State key of `agent` in a joint state (other agent may be off the grid).
  std::pair<int, int> state_key(const JointState& s, int agent) const;

  double get(int own, int other, int action) const { return q_[flat(own, other, action)]; }
  void set(int own, int other, int action, double v) { q_[flat(own, other, action)] = v; }
  const double* row(int own, int other) const { return &q_[flat(own, other, 0)]; }

  std::int64_t entries() const { return static_cast<std::int64_t>(q_.size()); }

  // Sorted text table `x1 y1 x2 y2 action q`; zero (default) entries omitted,
  // exited-other rows use -1 -1.
  void save(const std::string& path) const;
  static QTable load(const std::string& path, int width, int height);

 private:
  std::size_t flat(int own, int other, int action) const {
    return (static_cast<std::size_t>(own) * (cells_ + 1) + other) * gridworld::kNumActions +
           action;
  }
  int width_, height_, cells_;
  std::vector<double> q_;
};

struct TabularTransition {
  int own = 0, other = 0;
  int action = 0;
  double reward = 0.0;
  int next_own = 0, next_other = 0;
  bool terminal = false;  // this agent's episode is over after the transition
};

// Q(s,a) += eta * (r + gamma * max_a' Q(s',a') * (1-terminal) - Q(s,a));
// touches exactly that one entry.
void td_update(QTable& table, const TabularTransition& t, double eta, double gamma);

class TabularAgent {
 public:
  TabularAgent(int width, int height, double eta, double gamma, EpsilonSchedule schedule,
               TieBreak tie = TieBreak::kLowestIndex);

  Action select_action(const JointState& s, int agent, std::int64_t step, Rng& rng) const;
  // The eps=0 evaluation policy; deterministic (lowest-index ties) and
  // side-effect free regardless of the training tie-break mode.
  Action greedy_action(const JointState& s, int agent) const;

  void learn(const JointState& s, int agent, Action a, double reward, const JointState& next);

  QTable& table() { return table_; }
  const QTable& table() const { return table_; }
  double eta() const { return eta_; }
  double gamma() const { return gamma_; }
  const EpsilonSchedule& schedule() const { return schedule_; }

 private:
  QTable table_;
  double eta_, gamma_;
  EpsilonSchedule schedule_;
  TieBreak tie_;
};

// --- Replay and DQN ----------------------------------------------------------

// One agent-side transition; observations kept in the compact encoding and
// materialized to planes only inside training batches.
struct Transition {
  gridworld::CompactObs obs;
  std::uint8_t action = 0;
  float reward = 0.0f;
  gridworld::CompactObs next_obs;
  bool terminal = false;
};

// Fixed-capacity ring, FIFO eviction, uniform sampling without replacement
// within a batch.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return full_ ? capacity_ : next_; }
  std::size_t capacity() const { return capacity_; }
  // Logical index 0 = oldest retained transition.
  const Transition& at(std::size_t i) const;
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  bool full_ = false;
  std::vector<Transition> ring_;
};

struct DqnConfig {
  std::size_t buffer_capacity = 50000;
  int batch_size = 32;
  int sync_period = 500;
  double eta = 1e-3;
  double momentum = 0.0;  // > 0 switches SGD to the momentum variant
  double gamma = 0.99;
  EpsilonSchedule schedule;
  TieBreak tie = TieBreak::kLowestIndex;

  void validate() const;
};

// Independent deep Q-learner for one agent: online and target networks,
// replay buffer, epsilon-greedy behavior policy.
class DqnAgent {
 public:
  DqnAgent(const gridworld::ScenarioConfig& scenario, int agent_index, const DqnConfig& config,
           std::uint64_t init_seed);

  Action select_action(const gridworld::Observation& obs, std::int64_t step, Rng& rng) const;
  Action greedy_action(const gridworld::Observation& obs) const;

  void push_transition(Transition t) { buffer_.push(std::move(t)); }

  // One sampled minibatch update; returns the loss, or nullopt (skip) while
  // the buffer holds fewer than batch_size transitions. Copies online to
  // target every sync_period calls.
  std::optional<float> train_step(Rng& rng);

  const numerics::QNetwork<float>& online() const { return online_; }
  const numerics::QNetwork<float>& target() const { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const DqnConfig& config() const { return config_; }
  std::int64_t train_steps() const { return train_steps_; }
  int agent_index() const { return agent_index_; }

  // prefix.ckpt (binary parameters) + prefix.meta.json (seed, step counts,
  // schedule position; the buffer is not persisted).
  void save(const std::string& prefix, std::int64_t env_steps) const;
  void load(const std::string& prefix);

 private:
  std::vector<double> q_values(const gridworld::Observation& obs) const;

  gridworld::ScenarioConfig scenario_;
  int agent_index_;
  DqnConfig config_;
  std::uint64_t init_seed_;
  numerics::QNetwork<float> online_;
  numerics::QNetwork<float> target_;
  numerics::Optimizer<float> optimizer_;
  ReplayBuffer buffer_;
  std::int64_t train_steps_ = 0;
};

// --- Episode records ----------------------------------------------------------

struct TrajectoryStep {
  JointState state;  // before the transition
  std::array<Action, 2> actions;
  std::array<double, 2> rewards;
  std::array<gridworld::Event, 2> events;
};

// Full rollout record; returns are always recomputed from the step records.
struct Trajectory {
  std::vector<TrajectoryStep> steps;
  JointState final_state;

  std::array<double, 2> undiscounted_returns() const;
  std::array<double, 2> discounted_returns(double gamma) const;
  // Number of transitions each agent was active at the start of.
  std::array<int, 2> path_lengths() const;
  // Whether the agent played Stay while active.
  std::array<bool, 2> waited() const;
  std::array<gridworld::AgentStatus, 2> final_status() const {
    return {final_state.status[0], final_state.status[1]};
  }
};

}  // namespace hawkdove::agents
