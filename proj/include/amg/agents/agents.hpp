#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "amg/agents/mlp.hpp"
#include "amg/agents/objectives.hpp"
#include "amg/rl/env.hpp"

namespace amg::agents {

enum class Algorithm { Dqn, Pg, Ppo, Random };
const char* algorithm_name(Algorithm a);
std::optional<Algorithm> algorithm_from_name(std::string_view name);

struct AgentHyper {
  double alpha = 1e-3;  // learning rate
  double gamma = 0.99;  // discount rate
  std::vector<int> hidden = {64, 64};
  int episodes_per_iteration = 50;
  // DQN
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  int epsilon_decay_steps = 5000;
  int replay_capacity = 10000;
  int batch_size = 32;
  int learning_starts = 200;
  int target_sync = 500;  // environment steps between target-network copies
  double eval_epsilon = 0.05;
  // PPO
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 64;
  double value_coef = 0.5;
  // PG and PPO
  double entropy_coef = 0.01;

  void validate() const;  // throws std::invalid_argument
};

/// A trained (or untrained) decision maker. Q agents act greedily with a small
/// exploration rate; policy agents sample from their distribution.
class Agent {
 public:
  Agent() = default;
  Agent(Algorithm algo, int actions, Mlp<double> net, double eval_epsilon = 0.0);
  static Agent random(int actions);

  int act(const rl::Vector& obs, Rng& rng) const;
  /// Highest Q value or most probable action.
  int greedy(const rl::Vector& obs) const;
  /// Action distribution of a policy agent.
  rl::Vector probabilities(const rl::Vector& obs) const;

  Algorithm algorithm() const { return algo_; }
  int actions() const { return actions_; }
  const Mlp<double>& network() const { return net_; }
  Mlp<double>& network() { return net_; }

  // Loading throws binio::FormatError on a malformed file.
  Bytes to_bytes() const;
  static Agent from_bytes(ByteView bytes);
  void save(const std::string& path) const;
  static Agent load(const std::string& path);

 private:
  Algorithm algo_ = Algorithm::Random;
  int actions_ = 0;
  Mlp<double> net_;
  double eval_epsilon_ = 0.0;
};

struct IterationMetrics {
  int iteration = 0;
  int episodes = 0;
  double mean_episode_reward = 0.0;
  double train_evasion_rate = 0.0;
  std::optional<double> evasion_rate_on_val;
};

void write_metrics_csv(std::ostream& out, const std::vector<IterationMetrics>& metrics);

/// Scores an agent on held-out data, e.g. validation evasion rate in percent.
using Evaluator = std::function<double(const Agent&)>;

class Trainer {
 public:
  virtual ~Trainer() = default;
  /// One iteration: episodes_per_iteration episodes plus the learner updates.
  virtual IterationMetrics iterate() = 0;
  virtual const Agent& agent() const = 0;
  virtual Algorithm algorithm() const = 0;

  std::vector<IterationMetrics> run(int iterations, const Evaluator& validate = {}, int validate_every = 0);
  int iterations_done() const { return done_; }

 protected:
  int done_ = 0;
};

std::unique_ptr<Trainer> make_trainer(Algorithm algo, const rl::EnvFactory& env, const AgentHyper& hyper,
                                      std::uint64_t seed);

struct TrainOutput {
  Agent agent;
  std::vector<IterationMetrics> metrics;
};

TrainOutput dqn_train(const rl::EnvFactory& env, const AgentHyper& hyper, int iterations, std::uint64_t seed);
TrainOutput pg_train(const rl::EnvFactory& env, const AgentHyper& hyper, int iterations, std::uint64_t seed);
TrainOutput ppo_train(const rl::EnvFactory& env, const AgentHyper& hyper, int iterations, std::uint64_t seed);

struct RandomRun {
  std::vector<bool> evaded;
  std::vector<int> steps;
  std::vector<std::vector<int>> actions;
  double evasion_rate = 0.0;  // percent of episodes that evaded
};

/// Uniform random actions until evasion or max_steps, one episode per reset.
RandomRun random_agent(rl::Environment& env, int episodes, std::uint64_t seed);

/// Runs one episode with `agent`; returns the transitions.
std::vector<rl::Transition> run_episode(rl::Environment& env, const Agent& agent, Rng& rng);

}  // namespace amg::agents
