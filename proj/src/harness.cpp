#include "hawkdove/harness.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace hawkdove::harness {

namespace fs = std::filesystem;
using gridworld::AgentStatus;
using gridworld::CompactObs;
using gridworld::ConfigError;
using gridworld::Event;
using gridworld::FrameHistory;
using gridworld::Observation;
using gridworld::UsageError;

const char* to_string(AgentKind k) { return k == AgentKind::kTabular ? "tabular" : "dqn"; }

namespace {

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("key '" + key + "': expected boolean, got '" + value + "'");
}

std::string trim(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v, const char* spec = "%.12g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// Terminal event name of a finished agent, for the metrics CSV.
const char* status_event(AgentStatus s) {
  switch (s) {
    case AgentStatus::kReachedGoal: return "goal";
    case AgentStatus::kWrongExit: return "wrong_exit";
    case AgentStatus::kCollided: return "collision";
    case AgentStatus::kTimedOut: return "timeout";
    case AgentStatus::kActive: return "none";
  }
  return "?";
}

std::string seed_prefix(const std::string& dir, std::uint64_t seed) {
  return dir + "/seed" + std::to_string(seed);
}

}  // namespace

double RunConfig::eta_for(int agent) const {
  const double v = agent == 0 ? hyper.eta_a : hyper.eta_b;
  if (v >= 0.0) return v;
  return agent_kind == AgentKind::kTabular ? 0.1 : 1e-3;
}

void RunConfig::validate() const {
  scenario.validate();
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (train_every < 1) throw ConfigError("train_every must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j)
      if (seeds[i] == seeds[j])
        throw ConfigError("seeds must be distinct (duplicate " + std::to_string(seeds[i]) + ")");
  hyper.schedule.validate();
  if (hyper.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (hyper.sync_period < 1) throw ConfigError("sync_period must be >= 1");
  if (hyper.buffer_capacity < static_cast<std::size_t>(hyper.batch_size))
    throw ConfigError("buffer_capacity must be >= batch_size");
  if (hyper.momentum < 0.0 || hyper.momentum >= 1.0)
    throw ConfigError("momentum must be in [0,1)");
  for (int agent = 0; agent < 2; ++agent)
    if (eta_for(agent) <= 0.0) throw ConfigError("learning rates must be positive");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError("empty seed list");
  std::vector<std::uint64_t> seeds;
  const std::size_t dots = t.find("..");
  if (dots != std::string::npos) {
    const std::uint64_t lo = std::strtoull(t.substr(0, dots).c_str(), nullptr, 10);
    const std::uint64_t hi = std::strtoull(t.substr(dots + 2).c_str(), nullptr, 10);
    if (hi < lo) throw ConfigError("seed range '" + text + "' is reversed");
    for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::istringstream in(t);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string v = trim(item);
    if (v.empty()) throw ConfigError("empty entry in seed list '" + text + "'");
    char* end = nullptr;
    const std::uint64_t s = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
      throw ConfigError("seed '" + v + "' is not an unsigned integer");
    seeds.push_back(s);
  }
  return seeds;
}

RunConfig parse_run_config(const std::string& text,
                           const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::vector<std::pair<std::string, std::string>> pairs;
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
    pairs.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  pairs.insert(pairs.end(), overrides.begin(), overrides.end());

  gridworld::ScenarioConfigBuilder scenario_builder;
  RunConfig run;
  for (const auto& [key, value] : pairs) {
    if (scenario_builder.apply(key, value)) continue;
    if (key == "agent") {
      if (value == "tabular") run.agent_kind = AgentKind::kTabular;
      else if (value == "dqn") run.agent_kind = AgentKind::kDqn;
      else throw ConfigError("key 'agent': expected tabular|dqn, got '" + value + "'");
    } else if (key == "episodes") run.episodes = parse_int(key, value);
    else if (key == "eval_every") run.eval_every = parse_int(key, value);
    else if (key == "eval_episodes") run.eval_episodes = parse_int(key, value);
    else if (key == "train_every") run.train_every = parse_int(key, value);
    else if (key == "eta") run.hyper.eta_a = run.hyper.eta_b = parse_double(key, value);
    else if (key == "eta_a") run.hyper.eta_a = parse_double(key, value);
    else if (key == "eta_b") run.hyper.eta_b = parse_double(key, value);
    else if (key == "eps_start") run.hyper.schedule.eps_start = parse_double(key, value);
    else if (key == "eps_end") run.hyper.schedule.eps_end = parse_double(key, value);
    else if (key == "eps_decay_steps") run.hyper.schedule.decay_steps = parse_int(key, value);
    else if (key == "batch_size") run.hyper.batch_size = parse_int(key, value);
    else if (key == "sync_period") run.hyper.sync_period = parse_int(key, value);
    else if (key == "buffer_capacity") run.hyper.buffer_capacity = parse_int(key, value);
    else if (key == "momentum") run.hyper.momentum = parse_double(key, value);
    else if (key == "tie_break") {
      if (value == "lowest") run.hyper.tie = agents::TieBreak::kLowestIndex;
      else if (value == "random") run.hyper.tie = agents::TieBreak::kRandom;
      else throw ConfigError("key 'tie_break': expected lowest|random, got '" + value + "'");
    } else if (key == "prioritized") {
      if (parse_bool(key, value))
        throw ConfigError("prioritized replay is not implemented; only uniform sampling");
    } else if (key == "seeds") run.seeds = parse_seed_list(value);
    else if (key == "output_dir") run.output_dir = value;
    else throw ConfigError("unknown key '" + key + "'");
  }
  run.scenario = scenario_builder.finalize();
  run.validate();
  return run;
}

RunConfig load_run_config(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), overrides);
}

std::vector<std::pair<std::string, std::string>> run_key_values(const RunConfig& run) {
  auto kv = gridworld::scenario_key_values(run.scenario);
  kv.emplace_back("agent", to_string(run.agent_kind));
  kv.emplace_back("episodes", std::to_string(run.episodes));
  kv.emplace_back("eval_every", std::to_string(run.eval_every));
  kv.emplace_back("eval_episodes", std::to_string(run.eval_episodes));
  kv.emplace_back("train_every", std::to_string(run.train_every));
  kv.emplace_back("eta_a", fmt_double(run.eta_for(0), "%g"));
  kv.emplace_back("eta_b", fmt_double(run.eta_for(1), "%g"));
  kv.emplace_back("eps_start", fmt_double(run.hyper.schedule.eps_start, "%g"));
  kv.emplace_back("eps_end", fmt_double(run.hyper.schedule.eps_end, "%g"));
  kv.emplace_back("eps_decay_steps", std::to_string(run.hyper.schedule.decay_steps));
  kv.emplace_back("batch_size", std::to_string(run.hyper.batch_size));
  kv.emplace_back("sync_period", std::to_string(run.hyper.sync_period));
  kv.emplace_back("buffer_capacity", std::to_string(run.hyper.buffer_capacity));
  kv.emplace_back("momentum", fmt_double(run.hyper.momentum, "%g"));
  kv.emplace_back("tie_break",
                  run.hyper.tie == agents::TieBreak::kLowestIndex ? "lowest" : "random");
  kv.emplace_back("prioritized", "false");
  std::string seeds;
  for (std::size_t i = 0; i < run.seeds.size(); ++i) {
    if (i) seeds += ",";
    seeds += std::to_string(run.seeds[i]);
  }
  kv.emplace_back("seeds", seeds);
  kv.emplace_back("output_dir", run.output_dir);
  return kv;
}

// --- Learner pairs ---------------------------------------------------------------

namespace {

class TabularPair final : public LearnerPair {
 public:
  TabularPair(const RunConfig& run)
      : agents_{agents::TabularAgent(run.scenario.width, run.scenario.height, run.eta_for(0),
                                     run.scenario.reward.gamma, run.hyper.schedule,
                                     run.hyper.tie),
                agents::TabularAgent(run.scenario.width, run.scenario.height, run.eta_for(1),
                                     run.scenario.reward.gamma, run.hyper.schedule,
                                     run.hyper.tie)},
        width_(run.scenario.width),
        height_(run.scenario.height) {}

  Action act(int agent, const JointState& s, const CompactObs&, std::int64_t step, Rng& rng,
             Mode mode) override {
    return mode == Mode::kTrain ? agents_[agent].select_action(s, agent, step, rng)
                                : agents_[agent].greedy_action(s, agent);
  }

  void learn(int agent, const JointState& before, const CompactObs&, Action action, double reward,
             const JointState& after, const CompactObs&, Rng&, bool run_train_step) override {
    if (run_train_step) agents_[agent].learn(before, agent, action, reward, after);
  }

  void save(const std::string& dir, std::uint64_t seed, std::int64_t) const override {
    agents_[0].table().save(seed_prefix(dir, seed) + "_agent_a.qtable");
    agents_[1].table().save(seed_prefix(dir, seed) + "_agent_b.qtable");
  }

  void load(const std::string& dir, std::uint64_t seed) override {
    agents_[0].table() =
        agents::QTable::load(seed_prefix(dir, seed) + "_agent_a.qtable", width_, height_);
    agents_[1].table() =
        agents::QTable::load(seed_prefix(dir, seed) + "_agent_b.qtable", width_, height_);
  }

 private:
  std::array<agents::TabularAgent, 2> agents_;
  int width_, height_;
};

class DqnPair final : public LearnerPair {
 public:
  DqnPair(const RunConfig& run, std::uint64_t seed)
      : scenario_(run.scenario),
        agents_{agents::DqnAgent(run.scenario, 0, dqn_config(run, 0),
                                 Rng::stream_seed(seed, "agent0_init")),
                agents::DqnAgent(run.scenario, 1, dqn_config(run, 1),
                                 Rng::stream_seed(seed, "agent1_init"))} {}

  Action act(int agent, const JointState&, const CompactObs& obs, std::int64_t step, Rng& rng,
             Mode mode) override {
    const Observation full = materialized(obs, agent);
    return mode == Mode::kTrain ? agents_[agent].select_action(full, step, rng)
                                : agents_[agent].greedy_action(full);
  }

  void learn(int agent, const JointState&, const CompactObs& obs, Action action, double reward,
             const JointState& after, const CompactObs& next_obs, Rng& rng,
             bool run_train_step) override {
    agents::Transition t;
    t.obs = obs;
    t.action = static_cast<std::uint8_t>(action);
    t.reward = static_cast<float>(reward);
    t.next_obs = next_obs;
    t.terminal = !after.active(agent);
    agents_[agent].push_transition(std::move(t));
    if (run_train_step) agents_[agent].train_step(rng);
  }

  void save(const std::string& dir, std::uint64_t seed, std::int64_t env_steps) const override {
    agents_[0].save(seed_prefix(dir, seed) + "_agent_a", env_steps);
    agents_[1].save(seed_prefix(dir, seed) + "_agent_b", env_steps);
  }

  void load(const std::string& dir, std::uint64_t seed) override {
    agents_[0].load(seed_prefix(dir, seed) + "_agent_a");
    agents_[1].load(seed_prefix(dir, seed) + "_agent_b");
  }

 private:
  static agents::DqnConfig dqn_config(const RunConfig& run, int agent) {
    agents::DqnConfig c;
    c.buffer_capacity = run.hyper.buffer_capacity;
    c.batch_size = run.hyper.batch_size;
    c.sync_period = run.hyper.sync_period;
    c.eta = run.eta_for(agent);
    c.momentum = run.hyper.momentum;
    c.gamma = run.scenario.reward.gamma;
    c.schedule = run.hyper.schedule;
    c.tie = run.hyper.tie;
    return c;
  }

  Observation materialized(const CompactObs& obs, int agent) const {
    Observation o;
    o.frame_stack = scenario_.frame_stack;
    o.height = scenario_.height;
    o.width = scenario_.width;
    o.data.resize(static_cast<std::size_t>(3) * scenario_.frame_stack * scenario_.height *
                  scenario_.width);
    gridworld::materialize(obs, agent, scenario_, o.data.data());
    return o;
  }

  ScenarioConfig scenario_;
  std::array<agents::DqnAgent, 2> agents_;
};

}  // namespace

std::unique_ptr<LearnerPair> make_learners(const RunConfig& run, std::uint64_t seed) {
  if (run.agent_kind == AgentKind::kTabular) return std::make_unique<TabularPair>(run);
  return std::make_unique<DqnPair>(run, seed);
}

// --- Episode loop -----------------------------------------------------------------

Trajectory run_episode(const ScenarioConfig& cfg, LearnerPair& learners, Mode mode,
                       std::array<Rng, 2>* agent_rngs, std::int64_t* step_counter,
                       int train_every) {
  if (mode == Mode::kTrain && (!agent_rngs || !step_counter))
    throw UsageError("train mode needs agent rngs and a step counter");
  Rng dummy(0);

  Trajectory traj;
  JointState s = gridworld::reset(cfg);
  FrameHistory history(cfg.frame_stack);
  while (!s.terminal()) {
    std::array<CompactObs, 2> obs;
    std::array<Action, 2> actions{Action::kStay, Action::kStay};
    for (int i = 0; i < 2; ++i) {
      if (!s.active(i)) continue;
      obs[i] = gridworld::compact_observe(s, history, i, cfg);
      Rng& rng = agent_rngs ? (*agent_rngs)[i] : dummy;
      actions[i] = learners.act(i, s, obs[i], step_counter ? *step_counter : 0, rng, mode);
    }

    const auto out = gridworld::step(s, actions, cfg);
    history.push(s);

    if (mode == Mode::kTrain) {
      ++*step_counter;
      const bool run_train_step = (*step_counter % train_every) == 0;
      for (int i = 0; i < 2; ++i) {
        if (!s.active(i)) continue;
        const CompactObs next_obs = gridworld::compact_observe(out.next, history, i, cfg);
        learners.learn(i, s, obs[i], actions[i], out.reward[i], out.next, next_obs,
                       (*agent_rngs)[i], run_train_step);
      }
    }

    traj.steps.push_back({s, actions, out.reward, out.events});
    s = out.next;
  }
  traj.final_state = s;
  return traj;
}

// --- Evaluation ----------------------------------------------------------------------

EvalSummary evaluate(LearnerPair& learners, const ScenarioConfig& cfg, int episodes) {
  if (episodes < 1) throw UsageError("evaluation needs at least one episode");
  EvalSummary summary;
  summary.episodes = episodes;
  Trajectory last;
  for (int e = 0; e < episodes; ++e) {
    last = run_episode(cfg, learners, Mode::kEval);
    const auto ret = last.undiscounted_returns();
    const auto len = last.path_lengths();
    for (int i = 0; i < 2; ++i) {
      summary.mean_return[i] += ret[i];
      summary.mean_path_length[i] += len[i];
      summary.event_counts[std::string(i == 0 ? "a:" : "b:") +
                           status_event(last.final_state.status[i])]++;
      if (last.final_state.status[i] == AgentStatus::kCollided) summary.collision_free = false;
    }
  }
  for (int i = 0; i < 2; ++i) {
    summary.mean_return[i] /= episodes;
    summary.mean_path_length[i] /= episodes;
    summary.labels[i] = analysis::classify(last, i, cfg).label;
  }
  summary.both_goals = last.final_state.status[0] == AgentStatus::kReachedGoal &&
                       last.final_state.status[1] == AgentStatus::kReachedGoal;
  return summary;
}

EvalSummary evaluate_checkpoints(const RunConfig& run, const std::string& run_dir,
                                 std::uint64_t seed, int episodes) {
  if (run_dir.empty()) throw ConfigError("checkpoint directory path is empty");
  auto learners = make_learners(run, seed);
  learners->load(run_dir, seed);
  return evaluate(*learners, run.scenario, episodes);
}

// --- Training ------------------------------------------------------------------------

SeedResult train_seed(const RunConfig& run, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  SeedResult result;
  result.seed = seed;

  fs::create_directories(run.output_dir);
  std::ofstream metrics_csv(seed_prefix(run.output_dir, seed) + "_metrics.csv", std::ios::trunc);
  std::ofstream eval_csv(seed_prefix(run.output_dir, seed) + "_eval.csv", std::ios::trunc);
  if (!metrics_csv || !eval_csv)
    throw ConfigError("cannot write metric files under '" + run.output_dir + "'");
  metrics_csv << "episode,return_a,return_b,length,event_a,event_b\n";
  eval_csv << "episode,return_a,return_b,collision,length_a,length_b,label_a,label_b\n";

  auto learners = make_learners(run, seed);
  std::array<Rng, 2> agent_rngs{Rng(Rng::stream_seed(seed, "agent0")),
                                Rng(Rng::stream_seed(seed, "agent1"))};
  std::int64_t env_steps = 0;
  const int audit_every = std::max(1, run.episodes / 8);

  for (int episode = 1; episode <= run.episodes; ++episode) {
    const Trajectory traj =
        run_episode(run.scenario, *learners, Mode::kTrain, &agent_rngs, &env_steps,
                    run.train_every);

    EpisodeRecord rec;
    rec.episode = episode;
    rec.returns = traj.undiscounted_returns();
    rec.length = static_cast<int>(traj.steps.size());
    rec.status = traj.final_status();
    result.metrics.episodes.push_back(rec);
    metrics_csv << episode << ',' << fmt_double(rec.returns[0]) << ','
                << fmt_double(rec.returns[1]) << ',' << rec.length << ','
                << status_event(rec.status[0]) << ',' << status_event(rec.status[1]) << '\n';
    if (episode % audit_every == 0) result.metrics.audit.emplace_back(episode, traj);

    if (episode % run.eval_every == 0 || episode == run.episodes) {
      const EvalSummary eval = evaluate(*learners, run.scenario, run.eval_episodes);
      EvalRecord ev;
      ev.episode = episode;
      ev.returns = eval.mean_return;
      ev.collision = !eval.collision_free;
      ev.path_lengths = {static_cast<int>(eval.mean_path_length[0]),
                         static_cast<int>(eval.mean_path_length[1])};
      ev.labels = eval.labels;
      result.metrics.evals.push_back(ev);
      eval_csv << episode << ',' << fmt_double(ev.returns[0]) << ',' << fmt_double(ev.returns[1])
               << ',' << (ev.collision ? 1 : 0) << ',' << ev.path_lengths[0] << ','
               << ev.path_lengths[1] << ',' << analysis::to_string(ev.labels[0]) << ','
               << analysis::to_string(ev.labels[1]) << '\n';
      result.final_eval = eval;
    }
  }

  learners->save(run.output_dir, seed, env_steps);
  const Trajectory greedy = run_episode(run.scenario, *learners, Mode::kEval);
  save_trajectory(greedy, run.scenario, seed_prefix(run.output_dir, seed) + "_traj.txt");

  result.ok = true;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

int worker_count() {
  if (const char* env = std::getenv("HAWKDOVE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

RunResult train(const RunConfig& run) {
  run.validate();
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(run.output_dir);

  RunResult result;
  result.seeds.resize(run.seeds.size());
  std::atomic<std::size_t> next{0};
  auto body = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= run.seeds.size()) return;
      try {
        result.seeds[i] = train_seed(run, run.seeds[i]);
      } catch (const std::exception& e) {
        result.seeds[i].seed = run.seeds[i];
        result.seeds[i].ok = false;
        result.seeds[i].error = e.what();
      }
    }
  };
  const int workers =
      std::min<int>(worker_count(), static_cast<int>(run.seeds.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();

  nlohmann::json config_echo;
  for (const auto& [k, v] : run_key_values(run)) config_echo[k] = v;
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& sr : result.seeds) {
    nlohmann::json entry{{"seed", sr.seed}, {"ok", sr.ok}};
    if (sr.ok) {
      entry["final_labels"] = {analysis::to_string(sr.final_eval.labels[0]),
                               analysis::to_string(sr.final_eval.labels[1])};
      entry["collision_free"] = sr.final_eval.collision_free;
      entry["both_goals"] = sr.final_eval.both_goals;
      entry["mean_return"] = {sr.final_eval.mean_return[0], sr.final_eval.mean_return[1]};
      entry["wall_seconds"] = sr.wall_seconds;
    } else {
      entry["error"] = sr.error;
    }
    seeds.push_back(entry);
  }
  nlohmann::json summary{
      {"config", config_echo},
      {"seeds", seeds},
      {"wall_seconds_total",
       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
  };
  result.summary_path = run.output_dir + "/summary.json";
  std::ofstream out(result.summary_path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + result.summary_path + "'");
  out << summary.dump(2) << "\n";
  return result;
}

// --- Trajectory files -------------------------------------------------------------------

void save_trajectory(const Trajectory& traj, const ScenarioConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write trajectory '" + path + "'");
  out << "# hawkdove trajectory v1\n";
  for (const auto& [k, v] : gridworld::scenario_key_values(cfg)) out << k << " = " << v << "\n";
  out << "steps = " << traj.steps.size() << "\n";
  char line[160];
  for (const auto& step : traj.steps) {
    const auto pos = [&](int i) {
      return step.state.on_grid(i) ? step.state.pos[i] : gridworld::Cell{-1, -1};
    };
    std::snprintf(line, sizeof line, "s %d %d %d %d %d %d %.17g %.17g %d %d\n", pos(0).x, pos(0).y,
                  pos(1).x, pos(1).y, static_cast<int>(step.actions[0]),
                  static_cast<int>(step.actions[1]), step.rewards[0], step.rewards[1],
                  static_cast<int>(step.events[0]), static_cast<int>(step.events[1]));
    out << line;
  }
  const auto& f = traj.final_state;
  const auto fpos = [&](int i) { return f.on_grid(i) ? f.pos[i] : gridworld::Cell{-1, -1}; };
  std::snprintf(line, sizeof line, "f %d %d %d %d %d %d\n", fpos(0).x, fpos(0).y, fpos(1).x,
                fpos(1).y, static_cast<int>(f.status[0]), static_cast<int>(f.status[1]));
  out << line;
  if (!out) throw ConfigError("short write to trajectory '" + path + "'");
}

std::pair<ScenarioConfig, Trajectory> load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory '" + path + "'");

  std::string config_text;
  std::string line;
  int lineno = 0;
  long steps = -1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.rfind("steps", 0) == 0) {
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed steps line");
      steps = std::strtol(t.substr(eq + 1).c_str(), nullptr, 10);
      break;
    }
    config_text += t + "\n";
  }
  if (steps < 0) throw ConfigError(path + ": missing 'steps =' record");
  const ScenarioConfig cfg = gridworld::parse_scenario_config(config_text);

  Trajectory traj;
  JointState state = gridworld::reset(cfg);
  for (long i = 0; i < steps; ++i) {
    if (!std::getline(in, line))
      throw ConfigError(path + ": truncated at step record " + std::to_string(i));
    ++lineno;
    std::istringstream row(line);
    char tag;
    int x0, y0, x1, y1, a0, a1, e0, e1;
    double r0, r1;
    if (!(row >> tag >> x0 >> y0 >> x1 >> y1 >> a0 >> a1 >> r0 >> r1 >> e0 >> e1) || tag != 's')
      throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed step record");
    agents::TrajectoryStep step;
    step.state = state;
    step.state.t = static_cast<int>(i);
    step.state.pos = {gridworld::Cell{x0, y0}, gridworld::Cell{x1, y1}};
    step.actions = {static_cast<Action>(a0), static_cast<Action>(a1)};
    step.rewards = {r0, r1};
    step.events = {static_cast<Event>(e0), static_cast<Event>(e1)};
    traj.steps.push_back(step);
    // Roll statuses forward from the events so active flags reconstruct.
    for (int agent = 0; agent < 2; ++agent) {
      switch (step.events[agent]) {
        case Event::kGoal: state.status[agent] = AgentStatus::kReachedGoal; break;
        case Event::kWrongExit: state.status[agent] = AgentStatus::kWrongExit; break;
        case Event::kCollision: state.status[agent] = AgentStatus::kCollided; break;
        case Event::kTimeout: state.status[agent] = AgentStatus::kTimedOut; break;
        case Event::kNone: break;
      }
    }
  }
  if (!std::getline(in, line)) throw ConfigError(path + ": missing final record");
  ++lineno;
  std::istringstream frow(line);
  char tag;
  int x0, y0, x1, y1, s0, s1;
  if (!(frow >> tag >> x0 >> y0 >> x1 >> y1 >> s0 >> s1) || tag != 'f')
    throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed final record");
  traj.final_state.pos = {gridworld::Cell{x0, y0}, gridworld::Cell{x1, y1}};
  traj.final_state.status = {static_cast<AgentStatus>(s0), static_cast<AgentStatus>(s1)};
  traj.final_state.t = static_cast<int>(steps);
  return {cfg, traj};
}

}  // namespace hawkdove::harness
