#include "hawkdove/agents.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hawkdove::agents {

using gridworld::ConfigError;
using gridworld::UsageError;

double EpsilonSchedule::at(std::int64_t step) const {
  if (step <= 0) return eps_start;
  if (step >= decay_steps) return eps_end;
  return eps_start + (eps_end - eps_start) * (static_cast<double>(step) / decay_steps);
}

void EpsilonSchedule::validate() const {
  if (eps_start < 0.0 || eps_start > 1.0 || eps_end < 0.0 || eps_end > 1.0)
    throw ConfigError("epsilon bounds must lie in [0,1]");
  if (eps_start < eps_end) throw ConfigError("eps_start must be >= eps_end");
  if (decay_steps < 1) throw ConfigError("epsilon decay_steps must be >= 1");
}

int greedy_index(const double* q, int n, TieBreak tie, Rng* rng) {
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (q[i] > q[best]) best = i;
  if (tie == TieBreak::kLowestIndex) return best;
  if (!rng) throw UsageError("random tie-break needs an rng");
  int ties = 0;
  int pick = best;
  for (int i = 0; i < n; ++i) {
    if (q[i] != q[best]) continue;
    ++ties;
    if (rng->uniform_int(ties) == 0) pick = i;  // reservoir over the maximizers
  }
  return pick;
}

// --- QTable -------------------------------------------------------------------

QTable::QTable(int width, int height)
    : width_(width),
      height_(height),
      cells_(width * height),
      q_(static_cast<std::size_t>(cells_) * (cells_ + 1) * gridworld::kNumActions, 0.0) {}

std::pair<int, int> QTable::state_key(const JointState& s, int agent) const {
  const int own = cell_index(s.pos[agent]);
  const int other = s.active(1 - agent) ? cell_index(s.pos[1 - agent]) : exited_index();
  return {own, other};
}

void QTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write q-table '" + path + "'");
  char line[96];
  for (int own = 0; own < cells_; ++own) {
    for (int other = 0; other <= cells_; ++other) {
      for (int a = 0; a < gridworld::kNumActions; ++a) {
        const double v = get(own, other, a);
        if (v == 0.0) continue;
        const int x2 = other == cells_ ? -1 : other % width_;
        const int y2 = other == cells_ ? -1 : other / width_;
        std::snprintf(line, sizeof line, "%d %d %d %d %d %.17g\n", own % width_, own / width_, x2,
                      y2, a, v);
        out << line;
      }
    }
  }
  if (!out) throw ConfigError("short write to q-table '" + path + "'");
}

QTable QTable::load(const std::string& path, int width, int height) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open q-table '" + path + "'");
  QTable table(width, height);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    int x1, y1, x2, y2, a;
    double v;
    if (!(row >> x1 >> y1 >> x2 >> y2 >> a >> v))
      throw ConfigError("q-table '" + path + "' line " + std::to_string(lineno) + " is malformed");
    const int own = y1 * width + x1;
    const int other = (x2 < 0 || y2 < 0) ? table.exited_index() : y2 * width + x2;
    table.set(own, other, a, v);
  }
  return table;
}

void td_update(QTable& table, const TabularTransition& t, double eta, double gamma) {
  const double current = table.get(t.own, t.other, t.action);
  double bootstrap = 0.0;
  if (!t.terminal) {
    const double* next_row = table.row(t.next_own, t.next_other);
    bootstrap = *std::max_element(next_row, next_row + gridworld::kNumActions);
  }
  table.set(t.own, t.other, t.action, current + eta * (t.reward + gamma * bootstrap - current));
}

// --- TabularAgent ---------------------------------------------------------------

TabularAgent::TabularAgent(int width, int height, double eta, double gamma,
                           EpsilonSchedule schedule, TieBreak tie)
    : table_(width, height), eta_(eta), gamma_(gamma), schedule_(schedule), tie_(tie) {
  schedule_.validate();
}

Action TabularAgent::select_action(const JointState& s, int agent, std::int64_t step,
                                   Rng& rng) const {
  const double eps = schedule_.at(step);
  if (rng.uniform() < eps) return static_cast<Action>(rng.uniform_int(gridworld::kNumActions));
  const auto [own, other] = table_.state_key(s, agent);
  return static_cast<Action>(
      greedy_index(table_.row(own, other), gridworld::kNumActions, tie_, &rng));
}

Action TabularAgent::greedy_action(const JointState& s, int agent) const {
  const auto [own, other] = table_.state_key(s, agent);
  return static_cast<Action>(greedy_index(table_.row(own, other), gridworld::kNumActions));
}

void TabularAgent::learn(const JointState& s, int agent, Action a, double reward,
                         const JointState& next) {
  TabularTransition t;
  std::tie(t.own, t.other) = table_.state_key(s, agent);
  t.action = static_cast<int>(a);
  t.reward = reward;
  t.terminal = !next.active(agent);
  if (!t.terminal) std::tie(t.next_own, t.next_other) = table_.state_key(next, agent);
  td_update(table_, t, eta_, gamma_);
}

// --- ReplayBuffer ---------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("replay capacity must be positive");
  ring_.reserve(std::min<std::size_t>(capacity_, 4096));
}

void ReplayBuffer::push(Transition t) {
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
    next_ = ring_.size() % capacity_;
    full_ = ring_.size() == capacity_;
  } else {
    ring_[next_] = std::move(t);
    next_ = (next_ + 1) % capacity_;
    full_ = true;
  }
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size()) throw UsageError("replay index out of range");
  const std::size_t physical = full_ ? (next_ + i) % capacity_ : i;
  return ring_[physical];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  const std::size_t n = size();
  if (batch > n) throw UsageError("cannot sample more transitions than stored");
  std::vector<std::size_t> picked;
  picked.reserve(batch);
  if (batch * 2 >= n) {
    // Partial Fisher-Yates when the batch is a large fraction of the buffer.
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    for (std::size_t i = 0; i < batch; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n - i)));
      std::swap(all[i], all[j]);
      picked.push_back(all[i]);
    }
  } else {
    while (picked.size() < batch) {
      const std::size_t candidate = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n)));
      if (std::find(picked.begin(), picked.end(), candidate) == picked.end())
        picked.push_back(candidate);
    }
  }
  return picked;
}

// --- DqnAgent -------------------------------------------------------------------

void DqnConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (sync_period < 1) throw ConfigError("sync_period must be >= 1");
  if (eta <= 0.0) throw ConfigError("dqn learning rate must be positive");
  if (gamma <= 0.0 || gamma >= 1.0) throw ConfigError("gamma must be in (0,1)");
  schedule.validate();
}

DqnAgent::DqnAgent(const gridworld::ScenarioConfig& scenario, int agent_index,
                   const DqnConfig& config, std::uint64_t init_seed)
    : scenario_(scenario),
      agent_index_(agent_index),
      config_(config),
      init_seed_(init_seed),
      online_(numerics::make_q_network<float>(
          {3 * scenario.frame_stack, scenario.height, scenario.width}, gridworld::kNumActions)),
      optimizer_(config.momentum > 0.0 ? numerics::Optimizer<float>::Kind::kSgdMomentum
                                       : numerics::Optimizer<float>::Kind::kSgd,
                 static_cast<float>(config.eta), static_cast<float>(config.momentum)),
      buffer_(config.buffer_capacity) {
  config_.validate();
  Rng rng(init_seed);
  numerics::he_uniform_init(online_, rng);
  target_ = online_;
}

std::vector<double> DqnAgent::q_values(const gridworld::Observation& obs) const {
  numerics::Tensor<float> batch(std::vector<int>{1, 3 * scenario_.frame_stack, scenario_.height,
                                                 scenario_.width});
  if (obs.data.size() != batch.data.size())
    throw numerics::ShapeError("observation does not match the network input");
  std::copy(obs.data.begin(), obs.data.end(), batch.data.begin());
  const auto q = numerics::forward(online_, batch);
  return std::vector<double>(q.data.begin(), q.data.end());
}

Action DqnAgent::select_action(const gridworld::Observation& obs, std::int64_t step,
                               Rng& rng) const {
  const double eps = config_.schedule.at(step);
  if (rng.uniform() < eps) return static_cast<Action>(rng.uniform_int(gridworld::kNumActions));
  const auto q = q_values(obs);
  return static_cast<Action>(greedy_index(q.data(), gridworld::kNumActions, config_.tie, &rng));
}

Action DqnAgent::greedy_action(const gridworld::Observation& obs) const {
  const auto q = q_values(obs);
  return static_cast<Action>(greedy_index(q.data(), gridworld::kNumActions));
}

std::optional<float> DqnAgent::train_step(Rng& rng) {
  if (buffer_.size() < static_cast<std::size_t>(config_.batch_size)) return std::nullopt;

  const auto indices = buffer_.sample_indices(config_.batch_size, rng);
  const int n = config_.batch_size;
  const int c = 3 * scenario_.frame_stack;
  const std::size_t plane = static_cast<std::size_t>(c) * scenario_.height * scenario_.width;

  numerics::Tensor<float> obs_batch(std::vector<int>{n, c, scenario_.height, scenario_.width});
  numerics::Tensor<float> next_batch(obs_batch.shape);
  std::vector<int> actions(n);
  for (int i = 0; i < n; ++i) {
    const Transition& tr = buffer_.at(indices[i]);
    gridworld::materialize(tr.obs, agent_index_, scenario_, obs_batch.data.data() + i * plane);
    gridworld::materialize(tr.next_obs, agent_index_, scenario_,
                           next_batch.data.data() + i * plane);
    actions[i] = tr.action;
  }

  const auto next_q = numerics::forward(target_, next_batch);
  std::vector<float> targets(n);
  for (int i = 0; i < n; ++i) {
    const Transition& tr = buffer_.at(indices[i]);
    float bootstrap = 0.0f;
    if (!tr.terminal) {
      const float* row = next_q.data.data() + static_cast<std::size_t>(i) * gridworld::kNumActions;
      bootstrap = *std::max_element(row, row + gridworld::kNumActions);
    }
    targets[i] = tr.reward + static_cast<float>(config_.gamma) * bootstrap;
  }

  numerics::ForwardCache<float> cache;
  numerics::forward(online_, obs_batch, &cache);
  numerics::Gradients<float> grads;
  const float loss = numerics::backward(online_, cache, actions, targets, grads);
  optimizer_.apply(online_, grads);

  ++train_steps_;
  if (train_steps_ % config_.sync_period == 0) target_ = online_;
  return loss;
}

void DqnAgent::save(const std::string& prefix, std::int64_t env_steps) const {
  numerics::save_checkpoint(online_, prefix + ".ckpt");
  nlohmann::json meta{
      {"agent_index", agent_index_},
      {"init_seed", init_seed_},
      {"train_steps", train_steps_},
      {"env_steps", env_steps},
      {"epsilon", config_.schedule.at(env_steps)},
      {"grid", {{"width", scenario_.width}, {"height", scenario_.height}}},
      {"frame_stack", scenario_.frame_stack},
  };
  std::ofstream out(prefix + ".meta.json", std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + prefix + ".meta.json'");
  out << meta.dump(2) << "\n";
}

void DqnAgent::load(const std::string& prefix) {
  numerics::load_checkpoint(online_, prefix + ".ckpt");
  target_ = online_;
}

// --- Trajectory -----------------------------------------------------------------

std::array<double, 2> Trajectory::undiscounted_returns() const {
  std::array<double, 2> sum{0.0, 0.0};
  for (const auto& step : steps) {
    sum[0] += step.rewards[0];
    sum[1] += step.rewards[1];
  }
  return sum;
}

std::array<double, 2> Trajectory::discounted_returns(double gamma) const {
  std::array<double, 2> sum{0.0, 0.0};
  double factor = 1.0;
  for (const auto& step : steps) {
    sum[0] += factor * step.rewards[0];
    sum[1] += factor * step.rewards[1];
    factor *= gamma;
  }
  return sum;
}

std::array<int, 2> Trajectory::path_lengths() const {
  std::array<int, 2> len{0, 0};
  for (const auto& step : steps)
    for (int i = 0; i < 2; ++i)
      if (step.state.active(i)) ++len[i];
  return len;
}

std::array<bool, 2> Trajectory::waited() const {
  std::array<bool, 2> w{false, false};
  for (const auto& step : steps)
    for (int i = 0; i < 2; ++i)
      if (step.state.active(i) && step.actions[i] == Action::kStay) w[i] = true;
  return w;
}

}  // namespace hawkdove::agents
