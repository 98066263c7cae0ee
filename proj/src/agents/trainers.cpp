#include <algorithm>
#include <numeric>

#include "amg/agents/agents.hpp"

namespace amg::agents {

namespace {

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

/// Zero mean, unit variance; a constant batch maps to zeros.
void normalize(std::vector<double>& v) {
  if (v.empty()) return;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / v.size());
  for (double& x : v) x = sd > 1e-8 ? (x - mean) / sd : 0.0;
}

struct EpisodeStats {
  double reward_sum = 0.0;
  int episodes = 0;
  int evaded = 0;

  void add(double total, bool evaded_flag) {
    reward_sum += total;
    ++episodes;
    evaded += evaded_flag;
  }
  IterationMetrics finish(int iteration) const {
    IterationMetrics m;
    m.iteration = iteration;
    m.episodes = episodes;
    m.mean_episode_reward = episodes ? reward_sum / episodes : 0.0;
    m.train_evasion_rate = episodes ? 100.0 * evaded / episodes : 0.0;
    return m;
  }
};

class TrainerBase : public Trainer {
 public:
  TrainerBase(const rl::EnvFactory& factory, const AgentHyper& hyper, std::uint64_t seed)
      : env_(factory(derive_seed(seed, {hash_tag("env")}))), hyper_(hyper), rng_(derive_seed(seed, {hash_tag("agent")})) {
    hyper_.validate();
    if (!env_) throw std::invalid_argument("environment factory returned nothing");
  }
  const Agent& agent() const override { return agent_; }

 protected:
  std::unique_ptr<rl::Environment> env_;
  AgentHyper hyper_;
  Rng rng_;
  Agent agent_;
};

// --- DQN ---------------------------------------------------------------------

class DqnTrainer final : public TrainerBase {
 public:
  DqnTrainer(const rl::EnvFactory& factory, const AgentHyper& hyper, std::uint64_t seed)
      : TrainerBase(factory, hyper, seed),
        net_(layer_sizes(env_->observation_size(), hyper_.hidden, env_->action_count())) {
    net_.init(rng_);
    target_ = net_;
    adam_ = Adam<double>(net_.parameter_count(), hyper_.alpha);
    snapshot();
  }

  Algorithm algorithm() const override { return Algorithm::Dqn; }

  IterationMetrics iterate() override {
    EpisodeStats stats;
    for (int e = 0; e < hyper_.episodes_per_iteration; ++e) {
      auto obs = env_->reset();
      double total = 0.0;
      for (;;) {
        const int a = bernoulli(rng_, epsilon()) ? random_action() : greedy(obs);
        auto t = env_->step(a);
        total += t.reward;
        remember({obs, a, t.reward, t.next_state, t.done});
        obs = t.next_state;
        ++steps_;
        if (static_cast<int>(replay_.size()) >= std::max(hyper_.learning_starts, hyper_.batch_size)) learn();
        if (steps_ % hyper_.target_sync == 0) target_ = net_;
        if (t.done) {
          stats.add(total, t.evaded);
          break;
        }
      }
    }
    snapshot();
    return stats.finish(++done_);
  }

 private:
  struct Stored {
    rl::Vector state;
    int action;
    double reward;
    rl::Vector next_state;
    bool done;
  };

  double epsilon() const {
    const double frac = std::min(1.0, static_cast<double>(steps_) / std::max(1, hyper_.epsilon_decay_steps));
    return hyper_.epsilon_start + frac * (hyper_.epsilon_end - hyper_.epsilon_start);
  }
  int random_action() { return static_cast<int>(uniform_int(rng_, 0, env_->action_count() - 1)); }
  int greedy(const rl::Vector& obs) const {
    Eigen::Index best = 0;
    net_.forward(obs).maxCoeff(&best);
    return static_cast<int>(best);
  }

  void remember(Stored s) {
    if (static_cast<int>(replay_.size()) < hyper_.replay_capacity) {
      replay_.push_back(std::move(s));
    } else {
      replay_[next_slot_] = std::move(s);
    }
    next_slot_ = (next_slot_ + 1) % static_cast<std::size_t>(hyper_.replay_capacity);
  }

  void learn() {
    std::vector<QSample<double>> batch;
    batch.reserve(static_cast<std::size_t>(hyper_.batch_size));
    for (int i = 0; i < hyper_.batch_size; ++i) {
      const auto& s = replay_[uniform_int(rng_, 0, replay_.size() - 1)];
      const double next = s.done ? 0.0 : target_.forward(s.next_state).maxCoeff();
      batch.push_back({s.state, s.action, s.reward + hyper_.gamma * next});
    }
    VectorX<double> grad = VectorX<double>::Zero(net_.parameter_count());
    q_loss<double>(net_, batch, &grad);
    adam_.step(net_.params(), grad);
  }

  void snapshot() { agent_ = Agent(Algorithm::Dqn, env_->action_count(), net_, hyper_.eval_epsilon); }

  Mlp<double> net_;
  Mlp<double> target_;
  Adam<double> adam_;
  std::vector<Stored> replay_;
  std::size_t next_slot_ = 0;
  long steps_ = 0;
};

// --- policy gradient -----------------------------------------------------------

class PgTrainer final : public TrainerBase {
 public:
  PgTrainer(const rl::EnvFactory& factory, const AgentHyper& hyper, std::uint64_t seed)
      : TrainerBase(factory, hyper, seed),
        net_(layer_sizes(env_->observation_size(), hyper_.hidden, env_->action_count())) {
    net_.init(rng_);
    adam_ = Adam<double>(net_.parameter_count(), hyper_.alpha);
    snapshot();
  }

  Algorithm algorithm() const override { return Algorithm::Pg; }

  IterationMetrics iterate() override {
    EpisodeStats stats;
    std::vector<PgSample<double>> batch;
    std::vector<double> weights;
    for (int e = 0; e < hyper_.episodes_per_iteration; ++e) {
      const auto ts = run_episode(*env_, agent_, rng_);
      std::vector<double> rewards;
      double total = 0.0;
      for (const auto& t : ts) {
        rewards.push_back(t.reward);
        total += t.reward;
        batch.push_back({t.state, t.action, 0.0});
      }
      const auto g = rl::returns_to_go(rewards, hyper_.gamma);
      weights.insert(weights.end(), g.begin(), g.end());
      stats.add(total, ts.back().evaded);
    }
    normalize(weights);
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i].weight = weights[i];
    VectorX<double> grad = VectorX<double>::Zero(net_.parameter_count());
    pg_loss<double>(net_, batch, hyper_.entropy_coef, &grad);
    adam_.step(net_.params(), grad);
    snapshot();
    return stats.finish(++done_);
  }

 private:
  void snapshot() { agent_ = Agent(Algorithm::Pg, env_->action_count(), net_); }

  Mlp<double> net_;
  Adam<double> adam_;
};

// --- PPO -----------------------------------------------------------------------

class PpoTrainer final : public TrainerBase {
 public:
  PpoTrainer(const rl::EnvFactory& factory, const AgentHyper& hyper, std::uint64_t seed)
      : TrainerBase(factory, hyper, seed),
        net_(layer_sizes(env_->observation_size(), hyper_.hidden, env_->action_count() + 1)) {
    net_.init(rng_);
    adam_ = Adam<double>(net_.parameter_count(), hyper_.alpha);
    snapshot();
  }

  Algorithm algorithm() const override { return Algorithm::Ppo; }

  IterationMetrics iterate() override {
    const int actions = env_->action_count();
    EpisodeStats stats;
    std::vector<PpoSample<double>> batch;
    std::vector<double> values;
    std::vector<double> returns;
    for (int e = 0; e < hyper_.episodes_per_iteration; ++e) {
      const auto ts = run_episode(*env_, agent_, rng_);
      std::vector<double> rewards;
      double total = 0.0;
      for (const auto& t : ts) {
        const auto out = net_.forward(t.state);
        const auto logp = log_softmax<double>(out.head(actions));
        batch.push_back({t.state, t.action, logp[t.action], 0.0, 0.0});
        values.push_back(out[actions]);
        rewards.push_back(t.reward);
        total += t.reward;
      }
      const auto g = rl::returns_to_go(rewards, hyper_.gamma);
      returns.insert(returns.end(), g.begin(), g.end());
      stats.add(total, ts.back().evaded);
    }
    normalize(returns);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      batch[i].return_target = returns[i];
      batch[i].advantage = returns[i] - values[i];
    }

    const PpoCoefficients coef{hyper_.clip, hyper_.value_coef, hyper_.entropy_coef};
    std::vector<std::size_t> order(batch.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int epoch = 0; epoch < hyper_.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng_);
      for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(hyper_.minibatch)) {
        const auto end = std::min(order.size(), at + static_cast<std::size_t>(hyper_.minibatch));
        std::vector<PpoSample<double>> mb;
        for (std::size_t k = at; k < end; ++k) mb.push_back(batch[order[k]]);
        VectorX<double> grad = VectorX<double>::Zero(net_.parameter_count());
        ppo_loss<double>(net_, mb, actions, coef, &grad);
        adam_.step(net_.params(), grad);
      }
    }
    snapshot();
    return stats.finish(++done_);
  }

 private:
  void snapshot() { agent_ = Agent(Algorithm::Ppo, env_->action_count(), net_); }

  Mlp<double> net_;
  Adam<double> adam_;
};

// --- random ----------------------------------------------------------------------

class RandomTrainer final : public TrainerBase {
 public:
  RandomTrainer(const rl::EnvFactory& factory, const AgentHyper& hyper, std::uint64_t seed)
      : TrainerBase(factory, hyper, seed) {
    agent_ = Agent::random(env_->action_count());
  }

  Algorithm algorithm() const override { return Algorithm::Random; }

  IterationMetrics iterate() override {
    EpisodeStats stats;
    for (int e = 0; e < hyper_.episodes_per_iteration; ++e) {
      const auto ts = run_episode(*env_, agent_, rng_);
      double total = 0.0;
      for (const auto& t : ts) total += t.reward;
      stats.add(total, ts.back().evaded);
    }
    return stats.finish(++done_);
  }
};

}  // namespace

std::unique_ptr<Trainer> make_trainer(Algorithm algo, const rl::EnvFactory& env, const AgentHyper& hyper,
                                      std::uint64_t seed) {
  switch (algo) {
    case Algorithm::Dqn: return std::make_unique<DqnTrainer>(env, hyper, seed);
    case Algorithm::Pg: return std::make_unique<PgTrainer>(env, hyper, seed);
    case Algorithm::Ppo: return std::make_unique<PpoTrainer>(env, hyper, seed);
    case Algorithm::Random: return std::make_unique<RandomTrainer>(env, hyper, seed);
  }
  throw std::invalid_argument("unknown algorithm");
}

}  // namespace amg::agents
