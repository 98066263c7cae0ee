#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "amg/agents/agents.hpp"
#include "amg/binio.hpp"
#include "amg/corpus/corpus.hpp"
#include "oracles.hpp"

using namespace amg;
using namespace amg::agents;
using detector::Verdict;
using namespace amg::oracle;

namespace {

// Malicious on the reset query of each episode, Benign on every step query.
struct BenignAfterReset final : detector::HardLabelDetector {
  Verdict classify(ByteView) const override { return calls++ % 2 == 0 ? Verdict::Malicious : Verdict::Benign; }
  mutable long calls = 0;
};

struct Fixed final : detector::HardLabelDetector {
  explicit Fixed(Verdict v) : v(v) {}
  Verdict classify(ByteView) const override { return v; }
  Verdict v;
};

std::vector<Bytes> malicious_files(std::size_t n) {
  corpus::CorpusSpec spec;
  spec.malicious_count = n;
  spec.benign_count = 1;
  spec.seed = 21;
  std::vector<Bytes> out;
  for (auto& f : corpus::generate(spec)) {
    if (f.label == corpus::Label::Malicious) out.push_back(std::move(f.bytes));
  }
  return out;
}

rl::MalwareEnv malware_env(std::shared_ptr<const detector::HardLabelDetector> det, int max_steps) {
  rl::EnvConfig c;
  c.max_steps = max_steps;
  c.seed = 8;
  return rl::MalwareEnv(std::move(det), std::make_shared<mods::BenignContentPool>(mods::BenignContentPool::builtin()),
                        c, malicious_files(12));
}

}  // namespace

TEST_CASE("q_update arithmetic") {
  CHECK(q_update(0.0, 1.0, 0.0, 1.0, 0.5) == 1.0);
  CHECK(q_update(2.0, 1.0, 4.0, 0.1, 0.5) == doctest::Approx(2.1).epsilon(1e-15));
  CHECK(q_update(2.0, 1.0, 4.0, 0.1, 0.5) == 2.0 + 0.1 * (1.0 + 2.0 - 2.0));
  CHECK(q_update(-3.5, 7.0, 1.0, 0.0, 0.9) == -3.5);
}

TEST_CASE("q_update contracts toward the target") {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double q = uniform_real(rng, -10, 10), r = uniform_real(rng, -10, 10), next = uniform_real(rng, -10, 10);
    const double alpha = uniform_real(rng, 1e-6, 1.0), gamma = uniform_real(rng);
    const double target = r + gamma * next;
    const double updated = q_update(q, r, next, alpha, gamma);
    CHECK(std::abs(updated - target) == doctest::Approx((1 - alpha) * std::abs(q - target)).epsilon(1e-9));
  }
}

TEST_CASE("softmax is a strictly positive distribution") {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const Vec logits = random_vec(rng, 10, i < 250 ? 5.0 : 2000.0);
    const Vec p = softmax(logits);
    CHECK(std::abs(p.sum() - 1.0) <= 1e-9);
    CHECK(p.minCoeff() > 0.0);
    const Vec lp = log_softmax(logits);
    CHECK(std::abs(lp.array().exp().sum() - 1.0) <= 1e-9);
  }
  Net net({4, 8, 10});
  Rng init(6);
  for (int i = 0; i < 50; ++i) {
    net.init(init);
    net.params() *= 50.0;
    const Vec p = softmax<double>(net.forward(random_vec(init, 4)));
    CHECK(std::abs(p.sum() - 1.0) <= 1e-9);
    CHECK(p.minCoeff() > 0.0);
  }
}

TEST_CASE("network shapes") {
  Net q({272, 64, 64, 10});
  CHECK(q.parameter_count() == 64 * 273 + 64 * 65 + 10 * 65);
  CHECK(q.forward(Vec::Zero(272)).size() == 10);
  CHECK_THROWS_AS(Net({5}), std::invalid_argument);
}

TEST_CASE("Q loss gradient matches finite differences") {
  const auto t = oracle::q_gradient_trials(100);
  CHECK(Net({3, 3, 2}).parameter_count() == 20);
  CHECK(t.passed == 100);
}


TEST_CASE("policy gradient objective matches finite differences") {
  const auto t = oracle::pg_gradient_trials(200);
  CHECK(t.passed == 100);
}


TEST_CASE("clipped surrogate matches finite differences") {
  const auto t = oracle::ppo_gradient_trials(300);
  CHECK(Net({3, 2, 4}).parameter_count() == 20);
  CHECK(t.passed == 100);
  CHECK(t.clipped > 0);  // both branches were exercised
}


TEST_CASE("clipped branch contributes no policy gradient") {
  Rng rng(7);
  Net net({3, 4, 4});
  net.init(rng);
  const PpoCoefficients no_extras{0.2, 0.0, 0.0};
  for (int i = 0; i < 200; ++i) {
    PpoSample<double> s;
    s.state = random_vec(rng, 3);
    s.action = static_cast<int>(uniform_int(rng, 0, 2));
    const double logp = log_softmax<double>(net.forward(s.state).head(3))[s.action];
    const bool upward = i % 2 == 0;
    // ratio already past the bound in the direction the advantage pushes
    s.old_log_prob = logp + (upward ? -uniform_real(rng, 0.3, 2.0) : uniform_real(rng, 0.3, 2.0));
    s.advantage = upward ? uniform_real(rng, 0.1, 3.0) : -uniform_real(rng, 0.1, 3.0);
    Vec g = Vec::Zero(net.parameter_count());
    ppo_loss<double>(net, std::span(&s, 1), 3, no_extras, &g);
    CHECK(g.isZero(0.0));

    // the opposite sign is inside the unclipped branch and does move
    s.advantage = -s.advantage;
    g.setZero();
    ppo_loss<double>(net, std::span(&s, 1), 3, no_extras, &g);
    CHECK(g.norm() > 0.0);
  }
}

TEST_CASE("ratios are one before the first update") {
  Rng rng(8);
  Net net({5, 8, 4});
  net.init(rng);
  std::vector<PpoSample<double>> batch;
  for (int i = 0; i < 16; ++i) {
    PpoSample<double> s;
    s.state = random_vec(rng, 5);
    s.action = static_cast<int>(uniform_int(rng, 0, 2));
    s.old_log_prob = log_softmax<double>(net.forward(s.state).head(3))[s.action];
    s.advantage = uniform_real(rng, -1, 1);
    batch.push_back(s);
  }
  std::vector<double> ratios;
  ppo_loss<double>(net, batch, 3, {}, nullptr, &ratios);
  for (double r : ratios) CHECK(r == 1.0);
}

TEST_CASE("learners recover the optimal chain policy") {
  const rl::ChainEnv probe(5, 3, 20);
  const auto hyper = chain_hyper();
  const auto optimal = chain_optimal_actions(probe, 3, hyper.gamma);
  CHECK(optimal == std::vector<int>{0, 1, 2, 0});
  for (auto algo : {Algorithm::Dqn, Algorithm::Pg, Algorithm::Ppo}) {
    for (std::uint64_t seed : {1, 2, 3}) {
      int first = -1;
      const bool ok = learns_chain(algo, seed, &first);
      INFO(algorithm_name(algo), " seed ", seed, " first optimal after ", first);
      CHECK(ok);
    }
  }
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  auto hyper = chain_hyper();
  hyper.alpha = 0.0;
  for (auto algo : {Algorithm::Dqn, Algorithm::Pg, Algorithm::Ppo}) {
    auto trainer = make_trainer(algo, chain_factory(), hyper, 11);
    const Vec before = trainer->agent().network().params();
    trainer->run(15);
    CHECK(trainer->agent().network().params() == before);
  }
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
  const auto hyper = chain_hyper();
  for (auto algo : {Algorithm::Dqn, Algorithm::Pg, Algorithm::Ppo}) {
    auto a = make_trainer(algo, chain_factory(), hyper, 5);
    auto b = make_trainer(algo, chain_factory(), hyper, 5);
    const auto ma = a->run(8), mb = b->run(8);
    for (std::size_t i = 0; i < ma.size(); ++i) {
      CHECK(ma[i].mean_episode_reward == mb[i].mean_episode_reward);
      CHECK(ma[i].train_evasion_rate == mb[i].train_evasion_rate);
    }
    CHECK(a->agent().network().params() == b->agent().network().params());
    auto c = make_trainer(algo, chain_factory(), hyper, 6);
    c->run(8);
    CHECK(c->agent().network().params() != a->agent().network().params());
  }
}

TEST_CASE("hyperparameter validation") {
  AgentHyper h;
  CHECK_NOTHROW(h.validate());
  h.gamma = 1.5;
  CHECK_THROWS_AS(h.validate(), std::invalid_argument);
  h = {};
  h.clip = 1.0;
  CHECK_THROWS_AS(h.validate(), std::invalid_argument);
  h = {};
  h.alpha = -1e-3;
  CHECK_THROWS_AS(h.validate(), std::invalid_argument);
}

TEST_CASE("random agent against degenerate detectors") {
  auto evade = malware_env(std::make_shared<BenignAfterReset>(), 10);
  const auto yes = random_agent(evade, 12, 3);
  CHECK(yes.evasion_rate == 100.0);
  for (int s : yes.steps) CHECK(s == 1);

  auto never = malware_env(std::make_shared<Fixed>(Verdict::Malicious), 7);
  const auto no = random_agent(never, 12, 3);
  CHECK(no.evasion_rate == 0.0);
  for (int s : no.steps) CHECK(s == 7);

  auto again = malware_env(std::make_shared<Fixed>(Verdict::Malicious), 7);
  CHECK(random_agent(again, 12, 3).actions == no.actions);
  auto other = malware_env(std::make_shared<Fixed>(Verdict::Malicious), 7);
  CHECK(random_agent(other, 12, 4).actions != no.actions);
}

TEST_CASE("checkpoints round-trip") {
  const auto hyper = chain_hyper();
  for (auto algo : {Algorithm::Dqn, Algorithm::Pg, Algorithm::Ppo}) {
    auto trainer = make_trainer(algo, chain_factory(), hyper, 9);
    trainer->run(2);
    const auto& agent = trainer->agent();
    const auto path = std::filesystem::temp_directory_path() / "amg_agent_roundtrip.bin";
    agent.save(path.string());
    const auto loaded = Agent::load(path.string());
    std::filesystem::remove(path);
    CHECK(loaded.algorithm() == algo);
    CHECK(loaded.network().sizes() == agent.network().sizes());
    CHECK(loaded.network().params() == agent.network().params());
    CHECK(loaded.to_bytes() == agent.to_bytes());

    auto bytes = agent.to_bytes();
    bytes[0] ^= 0xFF;
    CHECK_THROWS_AS(Agent::from_bytes(bytes), binio::FormatError);
    bytes = agent.to_bytes();
    bytes.resize(bytes.size() - 3);
    CHECK_THROWS_AS(Agent::from_bytes(bytes), binio::FormatError);
  }
}

TEST_CASE("metrics CSV") {
  std::vector<IterationMetrics> m(2);
  m[0].iteration = 1;
  m[0].mean_episode_reward = 1.5;
  m[1].iteration = 2;
  m[1].mean_episode_reward = -0.25;
  m[1].evasion_rate_on_val = 40.0;
  std::ostringstream out;
  write_metrics_csv(out, m);
  CHECK(out.str() == "iteration,mean_episode_reward,evasion_rate_on_val\n1,1.5,\n2,-0.25,40\n");
}

TEST_CASE("algorithm names") {
  for (auto a : {Algorithm::Dqn, Algorithm::Pg, Algorithm::Ppo, Algorithm::Random}) {
    CHECK(algorithm_from_name(algorithm_name(a)) == a);
  }
  CHECK_FALSE(algorithm_from_name("a2c").has_value());
}
