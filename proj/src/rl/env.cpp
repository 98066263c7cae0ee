#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "amg/random.hpp"
#include "amg/rl/env.hpp"

namespace amg::rl {

void EnvConfig::validate() const {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
}

double discounted_return(std::span<const double> rewards, double gamma) {
  double g = 0.0;
  for (auto it = rewards.rbegin(); it != rewards.rend(); ++it) g = *it + gamma * g;
  return g;
}

std::vector<double> returns_to_go(std::span<const double> rewards, double gamma) {
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    g[i] = acc;
  }
  return g;
}

MalwareEnv::MalwareEnv(std::shared_ptr<const detector::HardLabelDetector> target,
                       std::shared_ptr<const mods::BenignContentPool> pool, EnvConfig config, std::vector<Bytes> files)
    : target_(std::move(target)), pool_(std::move(pool)), config_(config), files_(std::move(files)) {
  config_.validate();
  if (!target_ || !pool_) throw std::invalid_argument("environment needs a detector and a content pool");
  pool_->validate();
}

Vector MalwareEnv::reset() {
  if (files_.empty()) throw std::logic_error("environment has no files to cycle through");
  const auto n = files_.size();
  const auto pass = episode_ / n;
  if (episode_ % n == 0) {
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(derive_seed(config_.seed, {hash_tag("order"), pass}));
    std::shuffle(order_.begin(), order_.end(), rng);
  }
  const auto index = order_[episode_ % n];
  return begin_episode(files_[index], index);
}

Vector MalwareEnv::reset(const Bytes& file) { return begin_episode(file, 0); }

Vector MalwareEnv::begin_episode(const Bytes& file, std::size_t file_index) {
  ++episode_;  // counted even when rejected so cycling moves on
  ++queries_;
  if (target_->classify(file) == detector::Verdict::Benign) {
    throw AlreadyBenign("file is already classified benign");
  }
  image_ = pe::parse(file);
  current_ = file;
  observation_ = observe(image_, current_);
  record_ = {};
  record_.file_index = file_index;
  record_.original_size = file.size();
  record_.final_size = file.size();
  active_ = true;
  return observation_;
}

Transition MalwareEnv::step(int action) {
  if (!active_) throw EpisodeFinished("step after the episode ended");
  if (action < 0 || action >= action_count()) throw std::out_of_range("action id out of range");
  const auto id = mods::action_from_index(static_cast<std::size_t>(action));
  const auto seed = derive_seed(config_.seed, {episode_, static_cast<std::uint64_t>(record_.steps)});

  Transition t;
  t.state = observation_;
  t.action = action;
  auto result = mods::apply(image_, {id, seed}, *pool_);
  t.outcome = result.outcome;
  if (result.outcome == mods::Outcome::Applied) {
    image_ = std::move(result.image);
    current_ = pe::serialize(image_);
    observation_ = observe(image_, current_);
  }
  ++queries_;
  t.evaded = target_->classify(current_) == detector::Verdict::Benign;
  ++record_.steps;
  record_.actions.push_back(id);
  t.reward = t.evaded ? config_.reward_evasion : config_.reward_step;
  t.done = t.evaded || record_.steps >= config_.max_steps;
  t.next_state = observation_;
  record_.total_reward += t.reward;
  record_.evaded = t.evaded;
  record_.final_size = current_.size();
  active_ = !t.done;
  return t;
}

ChainEnv::ChainEnv(int states, int actions, int max_steps, double reward_goal, double reward_step)
    : states_(states), actions_(actions), max_steps_(max_steps), reward_goal_(reward_goal), reward_step_(reward_step) {
  if (states < 2 || actions < 1 || max_steps < 1) throw std::invalid_argument("degenerate chain");
}

Vector ChainEnv::one_hot(int s) const {
  Vector v = Vector::Zero(states_);
  v[s] = 1.0;
  return v;
}

Vector ChainEnv::reset() {
  state_ = 0;
  t_ = 0;
  done_ = false;
  return one_hot(state_);
}

Transition ChainEnv::step(int action) {
  if (done_) throw EpisodeFinished("step after the episode ended");
  if (action < 0 || action >= actions_) throw std::out_of_range("action id out of range");
  Transition t;
  t.state = one_hot(state_);
  t.action = action;
  if (action == correct_action(state_)) {
    ++state_;
    t.outcome = mods::Outcome::Applied;
  } else {
    t.outcome = mods::Outcome::NoOp;
  }
  ++t_;
  t.evaded = state_ == states_ - 1;
  t.reward = t.evaded ? reward_goal_ : reward_step_;
  t.done = t.evaded || t_ >= max_steps_;
  t.next_state = one_hot(state_);
  done_ = t.done;
  return t;
}

void write_trace(std::ostream& out, std::span<const Transition> transitions) {
  for (const auto& t : transitions) {
    nlohmann::json j;
    j["state"] = std::vector<double>(t.state.data(), t.state.data() + t.state.size());
    j["action"] = t.action;
    j["reward"] = t.reward;
    j["next_state"] = std::vector<double>(t.next_state.data(), t.next_state.data() + t.next_state.size());
    j["done"] = t.done;
    out << j.dump() << '\n';
  }
}

}  // namespace amg::rl
