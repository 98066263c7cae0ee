#include <iomanip>

#include "amg/agents/agents.hpp"
#include "amg/binio.hpp"

namespace amg::agents {

namespace {

constexpr std::string_view kMagic = "AMGAGNT\x01";
constexpr std::uint32_t kVersion = 1;

}  // namespace

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Dqn: return "dqn";
    case Algorithm::Pg: return "pg";
    case Algorithm::Ppo: return "ppo";
    case Algorithm::Random: return "random";
  }
  return "?";
}

std::optional<Algorithm> algorithm_from_name(std::string_view name) {
  for (auto a : {Algorithm::Dqn, Algorithm::Pg, Algorithm::Ppo, Algorithm::Random}) {
    if (name == algorithm_name(a)) return a;
  }
  return std::nullopt;
}

void AgentHyper::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in [0,1]");
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  if (!(clip > 0.0 && clip < 1.0)) throw std::invalid_argument("clip must be in (0,1)");
  if (episodes_per_iteration < 1 || batch_size < 1 || minibatch < 1 || epochs < 1 || replay_capacity < 1 ||
      target_sync < 1) {
    throw std::invalid_argument("counts in agent hyperparameters must be positive");
  }
  if (hidden.empty()) throw std::invalid_argument("network needs at least one hidden layer");
}

Agent::Agent(Algorithm algo, int actions, Mlp<double> net, double eval_epsilon)
    : algo_(algo), actions_(actions), net_(std::move(net)), eval_epsilon_(eval_epsilon) {
  const int expected = algo == Algorithm::Ppo ? actions + 1 : actions;
  if (algo != Algorithm::Random && net_.output_size() != expected) {
    throw std::invalid_argument("network output does not match the action count");
  }
}

Agent Agent::random(int actions) { return Agent(Algorithm::Random, actions, Mlp<double>{}); }

rl::Vector Agent::probabilities(const rl::Vector& obs) const {
  switch (algo_) {
    case Algorithm::Pg: return softmax<double>(net_.forward(obs));
    case Algorithm::Ppo: return softmax<double>(net_.forward(obs).head(actions_));
    default: return rl::Vector::Constant(actions_, 1.0 / actions_);
  }
}

int Agent::greedy(const rl::Vector& obs) const {
  Eigen::Index best = 0;
  if (algo_ == Algorithm::Dqn) {
    net_.forward(obs).maxCoeff(&best);
  } else {
    probabilities(obs).maxCoeff(&best);
  }
  return static_cast<int>(best);
}

int Agent::act(const rl::Vector& obs, Rng& rng) const {
  switch (algo_) {
    case Algorithm::Random: return static_cast<int>(uniform_int(rng, 0, static_cast<std::uint64_t>(actions_ - 1)));
    case Algorithm::Dqn:
      if (bernoulli(rng, eval_epsilon_)) return static_cast<int>(uniform_int(rng, 0, static_cast<std::uint64_t>(actions_ - 1)));
      return greedy(obs);
    default: {
      const auto p = probabilities(obs);
      return static_cast<int>(std::discrete_distribution<int>(p.data(), p.data() + p.size())(rng));
    }
  }
}

Bytes Agent::to_bytes() const {
  binio::Writer w;
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(algo_));
  w.u32(static_cast<std::uint32_t>(actions_));
  w.f64(eval_epsilon_);
  w.u32(static_cast<std::uint32_t>(net_.sizes().size()));
  for (int s : net_.sizes()) w.u32(static_cast<std::uint32_t>(s));
  w.f64s(net_.params());
  return w.take();
}

Agent Agent::from_bytes(ByteView bytes) {
  binio::Reader r(bytes);
  r.expect_magic(kMagic);
  if (r.u32() != kVersion) throw binio::FormatError("unsupported checkpoint version");
  const auto algo = r.u32();
  if (algo > static_cast<std::uint32_t>(Algorithm::Random)) throw binio::FormatError("unknown algorithm");
  const auto actions = static_cast<int>(r.u32());
  const double eps = r.f64();
  const auto depth = r.u32();
  if (depth > 64) throw binio::FormatError("implausible layer count");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < depth; ++i) {
    const auto s = r.u32();
    if (s == 0 || s > (1u << 20)) throw binio::FormatError("implausible layer size");
    sizes.push_back(static_cast<int>(s));
  }
  Mlp<double> net;
  if (!sizes.empty()) {
    net = Mlp<double>(sizes);
    for (Eigen::Index i = 0; i < net.parameter_count(); ++i) net.params()[i] = r.f64();
  }
  if (!r.at_end()) throw binio::FormatError("trailing bytes in checkpoint");
  try {
    return Agent(static_cast<Algorithm>(algo), actions, std::move(net), eps);
  } catch (const std::invalid_argument& e) {
    throw binio::FormatError(e.what());
  }
}

void Agent::save(const std::string& path) const { write_file(path, to_bytes()); }
Agent Agent::load(const std::string& path) { return from_bytes(read_file(path)); }

void write_metrics_csv(std::ostream& out, const std::vector<IterationMetrics>& metrics) {
  out << "iteration,mean_episode_reward,evasion_rate_on_val\n";
  out << std::setprecision(10);
  for (const auto& m : metrics) {
    out << m.iteration << ',' << m.mean_episode_reward << ',';
    if (m.evasion_rate_on_val) out << *m.evasion_rate_on_val;
    out << '\n';
  }
}

std::vector<IterationMetrics> Trainer::run(int iterations, const Evaluator& validate, int validate_every) {
  std::vector<IterationMetrics> out;
  for (int i = 0; i < iterations; ++i) {
    auto m = iterate();
    if (validate && validate_every > 0 && (m.iteration % validate_every == 0 || i + 1 == iterations)) {
      m.evasion_rate_on_val = validate(agent());
    }
    out.push_back(m);
  }
  return out;
}

std::vector<rl::Transition> run_episode(rl::Environment& env, const Agent& agent, Rng& rng) {
  std::vector<rl::Transition> out;
  auto obs = env.reset();
  for (;;) {
    auto t = env.step(agent.act(obs, rng));
    obs = t.next_state;
    const bool done = t.done;
    out.push_back(std::move(t));
    if (done) break;
  }
  return out;
}

RandomRun random_agent(rl::Environment& env, int episodes, std::uint64_t seed) {
  RandomRun run;
  Rng rng(seed);
  const auto agent = Agent::random(env.action_count());
  int evaded = 0;
  for (int e = 0; e < episodes; ++e) {
    const auto ts = run_episode(env, agent, rng);
    std::vector<int> acts;
    for (const auto& t : ts) acts.push_back(t.action);
    run.actions.push_back(std::move(acts));
    run.steps.push_back(static_cast<int>(ts.size()));
    run.evaded.push_back(ts.back().evaded);
    evaded += ts.back().evaded;
  }
  run.evasion_rate = episodes ? 100.0 * evaded / episodes : 0.0;
  return run;
}

TrainOutput dqn_train(const rl::EnvFactory& env, const AgentHyper& hyper, int iterations, std::uint64_t seed) {
  auto t = make_trainer(Algorithm::Dqn, env, hyper, seed);
  auto metrics = t->run(iterations);
  return {t->agent(), std::move(metrics)};
}

TrainOutput pg_train(const rl::EnvFactory& env, const AgentHyper& hyper, int iterations, std::uint64_t seed) {
  auto t = make_trainer(Algorithm::Pg, env, hyper, seed);
  auto metrics = t->run(iterations);
  return {t->agent(), std::move(metrics)};
}

TrainOutput ppo_train(const rl::EnvFactory& env, const AgentHyper& hyper, int iterations, std::uint64_t seed) {
  auto t = make_trainer(Algorithm::Ppo, env, hyper, seed);
  auto metrics = t->run(iterations);
  return {t->agent(), std::move(metrics)};
}

}  // namespace amg::agents
