#pragma once

#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "amg/bytes.hpp"
#include "amg/detector/detector.hpp"
#include "amg/mods/actions.hpp"

namespace amg::rl {

using Vector = Eigen::VectorXd;

inline constexpr int kObservationSize = 272;
inline constexpr int kHistogramBins = 256;

/// 256-bin byte histogram of the whole file followed by 16 structural scalars.
/// Unparseable files get a zero scalar block.
Vector observe(ByteView raw);
Vector observe(const pe::PeImage& img, ByteView raw);

struct ObservationSlot {
  int first;
  int count;
  const char* meaning;
  const char* routine;  // function in the observation source that fills it
};
/// Where every observation value comes from, for audits.
const std::vector<ObservationSlot>& observation_provenance();

struct EnvConfig {
  int max_steps = 10;
  double reward_evasion = 10.0;
  double reward_step = -0.1;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

struct Transition {
  Vector state;
  int action = 0;
  double reward = 0.0;
  Vector next_state;
  bool done = false;
  bool evaded = false;
  mods::Outcome outcome = mods::Outcome::NoOp;
};

class AlreadyBenign : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class EpisodeFinished : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Discrete-action episodic environment as seen by the agents.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int observation_size() const = 0;
  virtual int action_count() const = 0;
  /// Starts the next episode.
  virtual Vector reset() = 0;
  virtual Transition step(int action) = 0;
};

using EnvFactory = std::function<std::unique_ptr<Environment>(std::uint64_t seed)>;

/// G_t = sum_k gamma^k R_{t+1+k}
double discounted_return(std::span<const double> rewards, double gamma);
/// Returns-to-go for every step of an episode.
std::vector<double> returns_to_go(std::span<const double> rewards, double gamma);

struct EpisodeRecord {
  std::size_t file_index = 0;
  std::size_t original_size = 0;
  std::size_t final_size = 0;
  int steps = 0;
  bool evaded = false;
  double total_reward = 0.0;
  std::vector<mods::ActionId> actions;
};

/// Files are edited by the ten modifications; the episode ends when the
/// detector says Benign or after max_steps.
class MalwareEnv : public Environment {
 public:
  MalwareEnv(std::shared_ptr<const detector::HardLabelDetector> target,
             std::shared_ptr<const mods::BenignContentPool> pool, EnvConfig config, std::vector<Bytes> files = {});

  int observation_size() const override { return kObservationSize; }
  int action_count() const override { return static_cast<int>(mods::kActionCount); }

  /// Next file of the list, in a seed-shuffled round-robin order.
  Vector reset() override;
  /// Starts an episode on `file`; throws AlreadyBenign if the target already misses it.
  Vector reset(const Bytes& file);
  Transition step(int action) override;

  const Bytes& current_bytes() const { return current_; }
  const EpisodeRecord& record() const { return record_; }
  std::size_t queries() const { return queries_; }
  const EnvConfig& config() const { return config_; }

 private:
  Vector begin_episode(const Bytes& file, std::size_t file_index);

  std::shared_ptr<const detector::HardLabelDetector> target_;
  std::shared_ptr<const mods::BenignContentPool> pool_;
  EnvConfig config_;
  std::vector<Bytes> files_;
  std::vector<std::size_t> order_;

  std::uint64_t episode_ = 0;
  bool active_ = false;
  pe::PeImage image_;
  Bytes current_;
  Vector observation_;
  EpisodeRecord record_;
  std::size_t queries_ = 0;
};

/// Deterministic chain used to check that the learners find an optimal policy:
/// in state s the action s % actions advances, anything else stays put; reaching
/// the last state pays reward_goal and ends the episode.
class ChainEnv : public Environment {
 public:
  explicit ChainEnv(int states = 5, int actions = 3, int max_steps = 20, double reward_goal = 10.0,
                    double reward_step = -0.1);

  int observation_size() const override { return states_; }
  int action_count() const override { return actions_; }
  Vector reset() override;
  Transition step(int action) override;

  int correct_action(int state) const { return state % actions_; }
  int state() const { return state_; }
  int states() const { return states_; }
  int max_steps() const { return max_steps_; }
  double reward_goal() const { return reward_goal_; }
  double reward_step() const { return reward_step_; }

 private:
  Vector one_hot(int s) const;

  int states_, actions_, max_steps_;
  double reward_goal_, reward_step_;
  int state_ = 0;
  int t_ = 0;
  bool done_ = true;
};

/// One JSON object per line: state, action, reward, next_state, done.
void write_trace(std::ostream& out, std::span<const Transition> transitions);

}  // namespace amg::rl
