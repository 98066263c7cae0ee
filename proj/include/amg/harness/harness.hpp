#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "amg/agents/agents.hpp"
#include "amg/detector/detector.hpp"
#include "amg/mods/actions.hpp"
#include "amg/rl/env.hpp"

namespace amg::harness {

class EmptyDenominator : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// 100 * evaded / (files - pre_excluded), cut (not rounded) to two decimals,
/// so 7 of 13 reads 53.84.
double evasion_rate(std::size_t evaded, std::size_t files, std::size_t pre_excluded = 0);

/// (final - original) / original * 100
double size_increase(std::size_t original_size, std::size_t final_size);

struct LabeledFile {
  std::string id;
  Bytes bytes;
};

struct AdversarialExample {
  std::string id;
  Bytes original;
  Bytes modified;
};

struct FileOutcome {
  std::string id;
  bool excluded = false;  // the target already missed the unmodified file
  bool evaded = false;
  int steps = 0;
  std::size_t original_size = 0;
  std::int64_t delta_bytes = 0;
  std::vector<mods::ActionId> actions;
};

struct EvalResult {
  double evasion_rate = 0.0;
  double size_increase = 0.0;  // mean over evasive files, percent
  std::size_t evaded = 0;
  std::size_t total = 0;  // after exclusion
  std::size_t excluded = 0;
  std::vector<FileOutcome> per_file;
  std::vector<AdversarialExample> aes;
};

/// One episode per file; files the target already calls Benign are excluded.
/// Agent randomness for file i comes from derive_seed(seed, {i}).
EvalResult evaluate_agent(const agents::Agent& agent, std::shared_ptr<const detector::HardLabelDetector> target,
                          std::shared_ptr<const mods::BenignContentPool> pool, const std::vector<LabeledFile>& files,
                          const rl::EnvConfig& env, std::uint64_t seed);

/// Share of `aes` the target labels Benign; examples whose original the
/// target already missed are excluded. Throws EmptyDenominator when none remain.
EvalResult transferability_eval(std::span<const AdversarialExample> aes, const detector::HardLabelDetector& target);

/// Rates of one attack against two detectors over a shared denominator: test
/// files both detectors flag before modification.
struct TransferPair {
  std::size_t files = 0;
  std::size_t evaded_a = 0;
  std::size_t evaded_b = 0;
  double rate_a = 0.0;
  double rate_b = 0.0;
};
TransferPair transfer_rates(const std::vector<LabeledFile>& files, const EvalResult& on_a,
                            const detector::HardLabelDetector& a, const detector::HardLabelDetector& b);

struct Splits {
  std::vector<LabeledFile> train;
  std::vector<LabeledFile> validation;
  std::vector<LabeledFile> test;
};

/// Seeded shuffle, then cut in proportion 4:1:2.
Splits split_files(std::vector<LabeledFile> files, std::uint64_t seed);

struct ExperimentPlan {
  agents::Algorithm algorithm = agents::Algorithm::Ppo;
  std::vector<int> max_steps_grid = {5, 10, 20, 50, 100, 200};
  std::vector<double> alpha_grid = {0.01, 0.001, 0.0001};
  std::vector<double> gamma_grid = {0.5, 0.75, 0.9, 0.99};
  int short_iters = 100;
  int long_iters = 900;
  int top_k = 4;
  agents::AgentHyper hyper;  // defaults for the step sweep and everything not searched
  double reward_evasion = 10.0;
  double reward_step = -0.1;
  std::uint64_t seed = 1;

  void validate() const;  // throws std::invalid_argument
};

void to_json(nlohmann::json& j, const ExperimentPlan& p);
void from_json(const nlohmann::json& j, ExperimentPlan& p);  // missing keys keep defaults

struct Workbench {
  std::shared_ptr<const detector::HardLabelDetector> target;
  std::shared_ptr<const mods::BenignContentPool> pool;
  Splits splits;
};

struct StepsRow {
  int max_steps = 0;
  double evasion_rate = 0.0;
  double size_increase = 0.0;
  bool chosen = false;
};

struct GridRow {
  double alpha = 0.0;
  double gamma = 0.0;
  double best_mean_reward = 0.0;  // highest per-iteration mean episode reward
  bool kept = false;
};

struct ValidationRow {
  double alpha = 0.0;
  double gamma = 0.0;
  double evasion_rate = 0.0;
  double size_increase = 0.0;
  bool chosen = false;
};

struct WorkflowReport {
  agents::Algorithm algorithm = agents::Algorithm::Ppo;
  int max_steps = 0;
  double alpha = 0.0;
  double gamma = 0.0;
  std::vector<StepsRow> steps;
  std::vector<GridRow> grid;
  std::vector<ValidationRow> validation;
  std::vector<agents::IterationMetrics> metrics;  // training curve of the chosen agent
  agents::Agent agent;
  EvalResult test;
  EvalResult random_test;  // uniform random actions at the same max_steps
};

using Progress = std::function<void(const std::string&)>;

/// Step sweep, grid search, top-k long training, validation pick, test and
/// random baseline. A Random plan skips every training stage.
WorkflowReport run_workflow(const ExperimentPlan& plan, const Workbench& bench, const Progress& progress = {});

nlohmann::json report_to_json(const WorkflowReport& r);
nlohmann::json eval_to_json(const EvalResult& r);
/// Aligned text tables: agent, max steps, alpha, gamma, evasion rate, size increase.
std::string report_tables(const WorkflowReport& r);
std::string transfer_table(const std::string& agent, const TransferPair& t);

/// Everything a desk-scale run needs, grown from one seed.
struct DeskSetup {
  std::uint64_t seed = 1;
  std::size_t detector_malicious = 400;
  std::size_t detector_benign = 400;
  std::size_t attack_malicious = 700;
  std::size_t pool_sources = 40;  // benign files harvested into the content pool
  detector::TrainParams detector_params;
};

void to_json(nlohmann::json& j, const DeskSetup& s);
void from_json(const nlohmann::json& j, DeskSetup& s);

struct DeskBench {
  std::shared_ptr<const detector::Detector> detector_a;
  std::shared_ptr<const detector::Detector> detector_b;
  std::shared_ptr<const mods::BenignContentPool> pool;
  Splits splits;

  Workbench against(detector::DetectorKind kind) const;
};

/// Without `train_detectors` both detector pointers stay null; the caller loads saved ones.
DeskBench build_desk_bench(const DeskSetup& setup, bool train_detectors = true);

}  // namespace amg::harness
