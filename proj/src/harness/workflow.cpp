#include <algorithm>
#include <numeric>

#include <spdlog/spdlog.h>

#include "amg/corpus/corpus.hpp"
#include "amg/harness/harness.hpp"
#include "amg/random.hpp"

namespace amg::harness {

void ExperimentPlan::validate() const {
  if (max_steps_grid.empty() || alpha_grid.empty() || gamma_grid.empty()) {
    throw std::invalid_argument("experiment grids must be non-empty");
  }
  for (int t : max_steps_grid) {
    if (t < 1) throw std::invalid_argument("max_steps values must be positive");
  }
  if (short_iters < 1 || long_iters < 0 || top_k < 1) throw std::invalid_argument("iteration counts out of range");
  for (double a : alpha_grid) {
    auto h = hyper;
    h.alpha = a;
    h.validate();
  }
  for (double g : gamma_grid) {
    auto h = hyper;
    h.gamma = g;
    h.validate();
  }
  hyper.validate();
}

void to_json(nlohmann::json& j, const ExperimentPlan& p) {
  const auto& h = p.hyper;
  j = {{"algorithm", agents::algorithm_name(p.algorithm)},
       {"max_steps_grid", p.max_steps_grid},
       {"alpha_grid", p.alpha_grid},
       {"gamma_grid", p.gamma_grid},
       {"short_iters", p.short_iters},
       {"long_iters", p.long_iters},
       {"top_k", p.top_k},
       {"reward_evasion", p.reward_evasion},
       {"reward_step", p.reward_step},
       {"seed", p.seed},
       {"hyper",
        {{"alpha", h.alpha},
         {"gamma", h.gamma},
         {"hidden", h.hidden},
         {"episodes_per_iteration", h.episodes_per_iteration},
         {"epsilon_start", h.epsilon_start},
         {"epsilon_end", h.epsilon_end},
         {"epsilon_decay_steps", h.epsilon_decay_steps},
         {"replay_capacity", h.replay_capacity},
         {"batch_size", h.batch_size},
         {"learning_starts", h.learning_starts},
         {"target_sync", h.target_sync},
         {"eval_epsilon", h.eval_epsilon},
         {"clip", h.clip},
         {"epochs", h.epochs},
         {"minibatch", h.minibatch},
         {"value_coef", h.value_coef},
         {"entropy_coef", h.entropy_coef}}}};
}

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

void from_json(const nlohmann::json& j, ExperimentPlan& p) {
  if (j.contains("algorithm")) {
    const auto name = j.at("algorithm").get<std::string>();
    const auto algo = agents::algorithm_from_name(name);
    if (!algo) throw std::invalid_argument("unknown algorithm: " + name);
    p.algorithm = *algo;
  }
  maybe(j, "max_steps_grid", p.max_steps_grid);
  maybe(j, "alpha_grid", p.alpha_grid);
  maybe(j, "gamma_grid", p.gamma_grid);
  maybe(j, "short_iters", p.short_iters);
  maybe(j, "long_iters", p.long_iters);
  maybe(j, "top_k", p.top_k);
  maybe(j, "reward_evasion", p.reward_evasion);
  maybe(j, "reward_step", p.reward_step);
  maybe(j, "seed", p.seed);
  if (j.contains("hyper")) {
    const auto& hj = j.at("hyper");
    auto& h = p.hyper;
    maybe(hj, "alpha", h.alpha);
    maybe(hj, "gamma", h.gamma);
    maybe(hj, "hidden", h.hidden);
    maybe(hj, "episodes_per_iteration", h.episodes_per_iteration);
    maybe(hj, "epsilon_start", h.epsilon_start);
    maybe(hj, "epsilon_end", h.epsilon_end);
    maybe(hj, "epsilon_decay_steps", h.epsilon_decay_steps);
    maybe(hj, "replay_capacity", h.replay_capacity);
    maybe(hj, "batch_size", h.batch_size);
    maybe(hj, "learning_starts", h.learning_starts);
    maybe(hj, "target_sync", h.target_sync);
    maybe(hj, "eval_epsilon", h.eval_epsilon);
    maybe(hj, "clip", h.clip);
    maybe(hj, "epochs", h.epochs);
    maybe(hj, "minibatch", h.minibatch);
    maybe(hj, "value_coef", h.value_coef);
    maybe(hj, "entropy_coef", h.entropy_coef);
  }
}

namespace {

struct Cell {
  double alpha;
  double gamma;
  std::uint64_t seed;
  std::unique_ptr<agents::Trainer> trainer;
  std::vector<agents::IterationMetrics> metrics;
  double best_reward = 0.0;
};

// Higher evasion first, then the smaller size increase.
bool better(double ev_a, double size_a, double ev_b, double size_b) {
  if (ev_a != ev_b) return ev_a > ev_b;
  return size_a < size_b;
}

}  // namespace

WorkflowReport run_workflow(const ExperimentPlan& plan, const Workbench& bench, const Progress& progress) {
  plan.validate();
  if (!bench.target || !bench.pool) throw std::invalid_argument("workbench needs a target detector and a pool");
  auto say = [&](const std::string& msg) {
    spdlog::info("{}", msg);
    if (progress) progress(msg);
  };

  std::vector<Bytes> train;
  for (const auto& f : bench.splits.train) {
    if (bench.target->classify(f.bytes) == detector::Verdict::Malicious) train.push_back(f.bytes);
  }
  const bool learns = plan.algorithm != agents::Algorithm::Random;
  if (learns && train.empty()) throw std::invalid_argument("no training file is flagged by the target");

  auto env_config = [&](int max_steps, std::uint64_t seed) {
    rl::EnvConfig c;
    c.max_steps = max_steps;
    c.reward_evasion = plan.reward_evasion;
    c.reward_step = plan.reward_step;
    c.seed = seed;
    return c;
  };
  auto factory = [&](int max_steps) -> rl::EnvFactory {
    return [&, max_steps](std::uint64_t seed) {
      return std::make_unique<rl::MalwareEnv>(bench.target, bench.pool, env_config(max_steps, seed), train);
    };
  };
  const auto val_seed = derive_seed(plan.seed, {hash_tag("validation")});
  const auto test_seed = derive_seed(plan.seed, {hash_tag("test")});
  auto evaluate = [&](const agents::Agent& agent, const std::vector<LabeledFile>& files, int max_steps,
                      std::uint64_t seed) {
    return evaluate_agent(agent, bench.target, bench.pool, files, env_config(max_steps, seed), seed);
  };

  WorkflowReport report;
  report.algorithm = plan.algorithm;
  const auto random_agent = agents::Agent::random(static_cast<int>(mods::kActionCount));

  // 1. episode horizon
  auto grid_steps = plan.max_steps_grid;
  std::sort(grid_steps.begin(), grid_steps.end());
  grid_steps.erase(std::unique(grid_steps.begin(), grid_steps.end()), grid_steps.end());
  int chosen_steps = grid_steps.front();
  if (grid_steps.size() > 1) {
    std::size_t best = 0;
    for (int t : grid_steps) {
      agents::Agent agent = random_agent;
      if (learns) {
        auto trainer = agents::make_trainer(plan.algorithm, factory(t), plan.hyper,
                                            derive_seed(plan.seed, {hash_tag("steps"), static_cast<std::uint64_t>(t)}));
        trainer->run(plan.short_iters);
        agent = trainer->agent();
      }
      const auto r = evaluate(agent, bench.splits.validation, t, val_seed);
      report.steps.push_back({t, r.evasion_rate, r.size_increase, false});
      say(fmt::format("max_steps {}: validation evasion {:.2f}% size +{:.2f}%", t, r.evasion_rate, r.size_increase));
      const auto& b = report.steps[best];
      if (better(r.evasion_rate, r.size_increase, b.evasion_rate, b.size_increase)) best = report.steps.size() - 1;
    }
    report.steps[best].chosen = true;
    chosen_steps = report.steps[best].max_steps;
  }
  report.max_steps = chosen_steps;

  if (!learns) {
    report.agent = random_agent;
    report.test = evaluate(random_agent, bench.splits.test, chosen_steps, test_seed);
    report.random_test = report.test;
    say(fmt::format("random agent test evasion {:.2f}%", report.test.evasion_rate));
    return report;
  }

  // 2. grid search on short training
  std::vector<Cell> cells;
  for (std::size_t ai = 0; ai < plan.alpha_grid.size(); ++ai) {
    for (std::size_t gi = 0; gi < plan.gamma_grid.size(); ++gi) {
      Cell c{plan.alpha_grid[ai], plan.gamma_grid[gi], derive_seed(plan.seed, {hash_tag("grid"), ai, gi}), {}, {}, 0.0};
      auto hyper = plan.hyper;
      hyper.alpha = c.alpha;
      hyper.gamma = c.gamma;
      c.trainer = agents::make_trainer(plan.algorithm, factory(chosen_steps), hyper, c.seed);
      c.metrics = c.trainer->run(plan.short_iters);
      c.best_reward = c.metrics.front().mean_episode_reward;
      for (const auto& m : c.metrics) c.best_reward = std::max(c.best_reward, m.mean_episode_reward);
      say(fmt::format("alpha {} gamma {}: best mean episode reward {:.4f}", c.alpha, c.gamma, c.best_reward));
      cells.push_back(std::move(c));
    }
  }
  std::vector<std::size_t> rank(cells.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t x, std::size_t y) {
    if (cells[x].best_reward != cells[y].best_reward) return cells[x].best_reward > cells[y].best_reward;
    if (cells[x].alpha != cells[y].alpha) return cells[x].alpha < cells[y].alpha;
    return cells[x].gamma < cells[y].gamma;
  });
  rank.resize(std::min<std::size_t>(rank.size(), static_cast<std::size_t>(plan.top_k)));
  for (const auto& c : cells) report.grid.push_back({c.alpha, c.gamma, c.best_reward, false});
  for (auto i : rank) report.grid[i].kept = true;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!report.grid[i].kept) cells[i].trainer.reset();
  }

  // 3. long training and validation pick
  std::size_t chosen = rank.front();
  EvalResult chosen_val;
  bool first = true;
  for (auto i : rank) {
    auto& c = cells[i];
    auto more = c.trainer->run(plan.long_iters);
    for (auto& m : more) c.metrics.push_back(m);
    const auto r = evaluate(c.trainer->agent(), bench.splits.validation, chosen_steps, val_seed);
    if (!c.metrics.empty()) c.metrics.back().evasion_rate_on_val = r.evasion_rate;
    report.validation.push_back({c.alpha, c.gamma, r.evasion_rate, r.size_increase, false});
    say(fmt::format("alpha {} gamma {}: validation evasion {:.2f}% size +{:.2f}%", c.alpha, c.gamma, r.evasion_rate,
                    r.size_increase));
    if (first || better(r.evasion_rate, r.size_increase, chosen_val.evasion_rate, chosen_val.size_increase) ||
        (r.evasion_rate == chosen_val.evasion_rate && r.size_increase == chosen_val.size_increase &&
         c.alpha < cells[chosen].alpha)) {
      chosen = i;
      chosen_val = r;
      first = false;
    }
  }
  for (auto& row : report.validation) {
    row.chosen = row.alpha == cells[chosen].alpha && row.gamma == cells[chosen].gamma;
  }

  // 4. test and random baseline
  const auto& winner = cells[chosen];
  report.alpha = winner.alpha;
  report.gamma = winner.gamma;
  report.metrics = winner.metrics;
  report.agent = winner.trainer->agent();
  report.test = evaluate(report.agent, bench.splits.test, chosen_steps, test_seed);
  report.random_test = evaluate(random_agent, bench.splits.test, chosen_steps, test_seed);
  say(fmt::format("test evasion {:.2f}% (random {:.2f}%)", report.test.evasion_rate,
                  report.random_test.evasion_rate));
  return report;
}

void to_json(nlohmann::json& j, const DeskSetup& s) {
  j = {{"seed", s.seed},
       {"detector_malicious", s.detector_malicious},
       {"detector_benign", s.detector_benign},
       {"attack_malicious", s.attack_malicious},
       {"pool_sources", s.pool_sources}};
}

void from_json(const nlohmann::json& j, DeskSetup& s) {
  maybe(j, "seed", s.seed);
  maybe(j, "detector_malicious", s.detector_malicious);
  maybe(j, "detector_benign", s.detector_benign);
  maybe(j, "attack_malicious", s.attack_malicious);
  maybe(j, "pool_sources", s.pool_sources);
}

Workbench DeskBench::against(detector::DetectorKind kind) const {
  return {kind == detector::DetectorKind::A ? std::static_pointer_cast<const detector::HardLabelDetector>(detector_a)
                                            : std::static_pointer_cast<const detector::HardLabelDetector>(detector_b),
          pool, splits};
}

DeskBench build_desk_bench(const DeskSetup& setup, bool train_detectors) {
  corpus::CorpusSpec det_spec;
  det_spec.malicious_count = setup.detector_malicious;
  det_spec.benign_count = setup.detector_benign;
  det_spec.seed = derive_seed(setup.seed, {hash_tag("detector-corpus")});
  const auto det_files = corpus::generate(det_spec);

  DeskBench bench;
  if (train_detectors) {
    bench.detector_a = std::make_shared<detector::Detector>(detector::train_detector(
        det_files, detector::DetectorKind::A, setup.detector_params, derive_seed(setup.seed, {hash_tag("detector-a")})));
    bench.detector_b = std::make_shared<detector::Detector>(detector::train_detector(
        det_files, detector::DetectorKind::B, setup.detector_params, derive_seed(setup.seed, {hash_tag("detector-b")})));
  }

  std::vector<pe::PeImage> benign;
  for (const auto& f : det_files) {
    if (f.label == corpus::Label::Benign && benign.size() < setup.pool_sources) benign.push_back(pe::parse(f.bytes));
  }
  bench.pool = std::make_shared<mods::BenignContentPool>(mods::BenignContentPool::harvest(benign));

  corpus::CorpusSpec attack;
  attack.malicious_count = setup.attack_malicious;
  attack.benign_count = 0;
  attack.seed = derive_seed(setup.seed, {hash_tag("attack-corpus")});
  std::vector<LabeledFile> files;
  for (auto& f : corpus::generate(attack)) files.push_back({f.id, std::move(f.bytes)});
  bench.splits = split_files(std::move(files), derive_seed(setup.seed, {hash_tag("split")}));
  return bench;
}

}  // namespace amg::harness
