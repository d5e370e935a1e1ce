#pragma once

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hawkdove/agents.hpp"
#include "hawkdove/analysis.hpp"
#include "hawkdove/gridworld.hpp"
#include "hawkdove/rng.hpp"

namespace hawkdove::harness {

using agents::Trajectory;
using gridworld::Action;
using gridworld::JointState;
using gridworld::ScenarioConfig;

enum class AgentKind : std::uint8_t { kTabular, kDqn };
enum class Mode : std::uint8_t { kTrain, kEval };

const char* to_string(AgentKind k);

// Hyperparameters shared by a run; learning rates are per agent.
struct AgentHyper {
  double eta_a = -1.0;  // -1 = default for the agent kind (tabular 0.1, dqn 1e-3)
  double eta_b = -1.0;
  agents::EpsilonSchedule schedule;
  int batch_size = 32;
  int sync_period = 500;
  std::size_t buffer_capacity = 50000;
  double momentum = 0.0;
  agents::TieBreak tie = agents::TieBreak::kLowestIndex;
};

struct RunConfig {
  ScenarioConfig scenario;
  AgentKind agent_kind = AgentKind::kTabular;
  AgentHyper hyper;
  int episodes = 50000;
  int eval_every = 500;
  int eval_episodes = 5;
  int train_every = 1;  // env steps per gradient/tabular update
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs";

  double eta_for(int agent) const;
  void validate() const;
};

// Flat key=value run file: every scenario key plus the run keys
// (agent, episodes, eval_every, eval_episodes, train_every, eta/eta_a/eta_b,
// eps_start, eps_end, eps_decay_steps, batch_size, sync_period,
// buffer_capacity, momentum, tie_break, prioritized, seeds, output_dir).
// Unknown keys are errors.
RunConfig parse_run_config(const std::string& text,
                           const std::vector<std::pair<std::string, std::string>>& overrides = {});
RunConfig load_run_config(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& overrides = {});
// Echo of every effective value (scenario keys first).
std::vector<std::pair<std::string, std::string>> run_key_values(const RunConfig& run);

// Seed list syntax: "a..b" (inclusive), or comma-separated integers.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// --- Learners -----------------------------------------------------------------

// The two independent learners of one run, behind one interface so the
// episode loop is agnostic to the representation.
class LearnerPair {
 public:
  virtual ~LearnerPair() = default;

  virtual Action act(int agent, const JointState& s, const gridworld::CompactObs& obs,
                     std::int64_t step, Rng& rng, Mode mode) = 0;
  virtual void learn(int agent, const JointState& before, const gridworld::CompactObs& obs,
                     Action action, double reward, const JointState& after,
                     const gridworld::CompactObs& next_obs, Rng& rng, bool run_train_step) = 0;
  virtual void save(const std::string& dir, std::uint64_t seed, std::int64_t env_steps) const = 0;
  virtual void load(const std::string& dir, std::uint64_t seed) = 0;
};

std::unique_ptr<LearnerPair> make_learners(const RunConfig& run, std::uint64_t seed);

// One episode. Train mode queries the epsilon-greedy policies, advances
// *step_counter per transition and performs learning updates (every
// train_every-th step); eval mode runs the greedy policies and leaves the
// learners bit-identical.
Trajectory run_episode(const ScenarioConfig& cfg, LearnerPair& learners, Mode mode,
                       std::array<Rng, 2>* agent_rngs = nullptr,
                       std::int64_t* step_counter = nullptr, int train_every = 1);

// --- Metrics and results --------------------------------------------------------

struct EpisodeRecord {
  int episode = 0;
  std::array<double, 2> returns{};
  int length = 0;
  std::array<gridworld::AgentStatus, 2> status{};
};

struct EvalRecord {
  int episode = 0;
  std::array<double, 2> returns{};
  bool collision = false;
  std::array<int, 2> path_lengths{};
  std::array<analysis::Label, 2> labels{};
};

struct RunMetrics {
  std::vector<EpisodeRecord> episodes;
  std::vector<EvalRecord> evals;
  // Sparse audit sample of full trajectories (episode index, record).
  std::vector<std::pair<int, Trajectory>> audit;
};

struct EvalSummary {
  std::array<double, 2> mean_return{};
  std::array<double, 2> mean_path_length{};
  std::array<analysis::Label, 2> labels{};
  std::map<std::string, int> event_counts;  // "<agent>:<event>" -> count
  bool collision_free = true;
  bool both_goals = false;
  int episodes = 0;
};

// Greedy evaluation of trained learners (no mutation).
EvalSummary evaluate(LearnerPair& learners, const ScenarioConfig& cfg, int episodes);
// Loads the checkpoints train() wrote for one seed and evaluates them.
EvalSummary evaluate_checkpoints(const RunConfig& run, const std::string& run_dir,
                                 std::uint64_t seed, int episodes);

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // set when !ok; other seeds are unaffected
  RunMetrics metrics;
  EvalSummary final_eval;
  double wall_seconds = 0.0;
};

struct RunResult {
  std::vector<SeedResult> seeds;
  std::string summary_path;
};

// Full experiment: per seed, fresh agents, `episodes` training episodes with
// periodic greedy evaluations; metrics CSVs written incrementally, final
// checkpoints and one summary.json under output_dir. Deterministic per seed;
// seeds run on parallel workers (HAWKDOVE_THREADS caps the worker count).
RunResult train(const RunConfig& run);

// Trains one seed in-process (no worker pool); exposed for tests and tools.
SeedResult train_seed(const RunConfig& run, std::uint64_t seed);

int worker_count();

// --- Trajectory files ------------------------------------------------------------

// Text format: scenario key=value header, `steps = N`, one `s ...` row per
// transition (pre-move positions, actions, rewards, events) and a final `f`
// row with the end state. Consumed by the plot tool.
void save_trajectory(const Trajectory& traj, const ScenarioConfig& cfg, const std::string& path);
std::pair<ScenarioConfig, Trajectory> load_trajectory(const std::string& path);

}  // namespace hawkdove::harness
