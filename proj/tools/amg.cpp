#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "amg/agents/agents.hpp"
#include "amg/corpus/corpus.hpp"
#include "amg/detector/detector.hpp"
#include "amg/harness/harness.hpp"
#include "amg/mods/actions.hpp"
#include "amg/pe/image.hpp"
#include "amg/random.hpp"
#include "amg/validity/validity.hpp"

using namespace amg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalConfig {
  std::string workspace;
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string log_level = "info";
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return json::parse(in);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

fs::path workspace_dir(const GlobalConfig& g) {
  fs::path dir = g.workspace;
  fs::create_directories(dir);
  const auto probe = dir / ".amg-write-probe";
  {
    std::ofstream out(probe);
    if (!out) throw std::runtime_error("workspace is not writable: " + dir.string());
  }
  fs::remove(probe);
  return dir;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

corpus::CorpusSpec corpus_spec_from_json(const json& j, const GlobalConfig& g) {
  corpus::CorpusSpec s;
  maybe(j, "malicious_count", s.malicious_count);
  maybe(j, "benign_count", s.benign_count);
  maybe(j, "seed", s.seed);
  if (g.seed_given) s.seed = g.seed;
  maybe(j, "min_sections", s.min_sections);
  maybe(j, "max_sections", s.max_sections);
  maybe(j, "motifs_per_malicious", s.motifs_per_malicious);
  maybe(j, "p_tight_slack", s.p_tight_slack);
  auto profile = [&](const char* key, corpus::LabelProfile& p) {
    if (!j.contains(key)) return;
    const auto& pj = j.at(key);
    maybe(pj, "p_imports", p.p_imports);
    maybe(pj, "p_debug", p.p_debug);
    maybe(pj, "p_certificate", p.p_certificate);
    maybe(pj, "p_overlay", p.p_overlay);
  };
  profile("benign", s.benign);
  profile("malicious", s.malicious);
  s.validate();
  return s;
}

detector::DetectorKind parse_kind(const std::string& s) {
  if (s == "A" || s == "a") return detector::DetectorKind::A;
  if (s == "B" || s == "b") return detector::DetectorKind::B;
  throw CLI::ValidationError("--kind", "expected A or B, got " + s);
}

mods::ActionId parse_action(const std::string& s) {
  const auto id = mods::action_from_name(s);
  if (!id) throw CLI::ValidationError("--action", "unknown action " + s);
  return *id;
}

/// Files of a directory: the manifest when present, otherwise every regular file.
std::vector<std::pair<std::string, Bytes>> read_files(const std::string& dir) {
  std::vector<std::pair<std::string, Bytes>> out;
  if (fs::exists(fs::path(dir) / "manifest.jsonl")) {
    for (auto& f : corpus::read_corpus(dir)) out.emplace_back(f.id, std::move(f.bytes));
    return out;
  }
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) out.emplace_back(p.stem().string(), read_file(p.string()));
  return out;
}

harness::DeskSetup load_setup(const fs::path& ws) {
  const auto path = ws / "setup.json";
  if (!fs::exists(path)) throw std::runtime_error("no setup.json in workspace " + ws.string() + "; run `amg train` first");
  return read_json(path.string()).get<harness::DeskSetup>();
}

std::shared_ptr<const detector::Detector> load_detector(const fs::path& ws, detector::DetectorKind kind) {
  const auto path = ws / (kind == detector::DetectorKind::A ? "detector_a.bin" : "detector_b.bin");
  return std::make_shared<detector::Detector>(detector::Detector::load(path.string()));
}

int cmd_corpus(const GlobalConfig& g, const std::string& spec_path, const std::string& out) {
  const auto spec = corpus_spec_from_json(read_json(spec_path), g);
  const auto files = corpus::generate(spec);
  corpus::write_corpus(files, out);
  std::cout << json{{"files", files.size()}, {"out", out}, {"seed", spec.seed}}.dump() << '\n';
  return 0;
}

int cmd_detector_train(const GlobalConfig& g, const std::string& corpus_dir, const std::string& kind,
                       const std::string& out) {
  const auto files = corpus::read_corpus(corpus_dir);
  const auto k = parse_kind(kind);
  const auto d = detector::train_detector(files, k, {}, derive_seed(g.seed, {hash_tag("detector"), hash_tag(kind)}));
  d.save(out);
  std::cout << json{{"kind", detector::kind_name(k)}, {"held_out_accuracy", d.held_out_accuracy()}, {"out", out}}.dump()
            << '\n';
  return 0;
}

int cmd_detector_classify(const std::string& model, const std::vector<std::string>& files) {
  const auto d = detector::Detector::load(model);
  for (const auto& f : files) std::cout << f << '\t' << detector::verdict_name(d.classify(read_file(f))) << '\n';
  return 0;
}

int cmd_mutate(const GlobalConfig& g, const std::string& file, const std::string& action,
               std::optional<std::uint64_t> seed, const std::string& out) {
  const auto id = parse_action(action);
  const auto raw = read_file(file);
  const auto img = pe::parse(raw);
  const auto r = mods::apply(img, {id, seed.value_or(derive_seed(g.seed, {hash_tag("mutate")}))},
                             mods::BenignContentPool::builtin());
  if (!out.empty()) write_file(out, r.outcome == mods::Outcome::Applied ? pe::serialize(r.image) : raw);
  json j = {{"action", action}, {"outcome", mods::outcome_name(r.outcome)}, {"delta_bytes", r.delta_bytes}};
  if (!r.detail.empty()) j["detail"] = r.detail;
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_validate(const GlobalConfig& g, const std::string& dir, const std::vector<std::string>& actions,
                 const std::string& backend, const std::string& fixtures) {
  std::unique_ptr<validity::BehaviorBackend> be;
  if (backend == "structural") {
    be = std::make_unique<validity::StructuralBackend>();
  } else {
    if (fixtures.empty()) throw CLI::ValidationError("--fixtures", "the fixture backend needs --fixtures");
    be = std::make_unique<validity::FixtureBackend>(fixtures);
  }
  std::vector<validity::SuiteFile> files;
  for (auto& [id, bytes] : read_files(dir)) files.push_back({id, pe::parse(bytes)});
  std::vector<mods::ActionId> ids;
  if (actions.empty()) {
    ids.assign(mods::kAllActions.begin(), mods::kAllActions.end());
  } else {
    for (const auto& a : actions) ids.push_back(parse_action(a));
  }
  const auto& pool = mods::BenignContentPool::builtin();
  json rows = json::array();
  std::string text;
  for (const auto id : ids) {
    const auto row = validity::run_validity_suite(
        files, {id, derive_seed(g.seed, {hash_tag("validate"), mods::action_index(id)})}, pool, *be);
    rows.push_back(validity::row_to_json(row));
    text += validity::row_to_text(row);
    if (text.back() != '\n') text += '\n';
  }
  std::cout << rows.dump() << '\n' << text;
  return 0;
}

int cmd_train(const GlobalConfig& g, const std::string& algo, const std::string& plan_path) {
  const auto ws = workspace_dir(g);
  const auto pj = plan_path.empty() ? json::object() : read_json(plan_path);
  auto plan = pj.get<harness::ExperimentPlan>();
  harness::DeskSetup setup;
  if (pj.contains("setup")) setup = pj.at("setup").get<harness::DeskSetup>();
  if (g.seed_given) {
    plan.seed = g.seed;
    setup.seed = g.seed;
  }
  if (!algo.empty()) {
    const auto a = agents::algorithm_from_name(algo);
    if (!a) throw CLI::ValidationError("--algo", "unknown algorithm " + algo);
    plan.algorithm = *a;
  }
  plan.validate();

  spdlog::info("building desk bench (seed {})", setup.seed);
  const auto bench = harness::build_desk_bench(setup);
  spdlog::info("detector A held-out accuracy {:.4f}, detector B {:.4f}", bench.detector_a->held_out_accuracy(),
               bench.detector_b->held_out_accuracy());
  write_text(ws / "setup.json", json(setup).dump(2) + '\n');
  json pjson = plan;
  write_text(ws / "plan.json", pjson.dump(2) + '\n');
  bench.detector_a->save((ws / "detector_a.bin").string());
  bench.detector_b->save((ws / "detector_b.bin").string());

  const auto report = harness::run_workflow(plan, bench.against(detector::DetectorKind::A));
  report.agent.save((ws / "agent.bin").string());
  {
    std::ofstream csv(ws / "metrics.csv", std::ios::trunc);
    agents::write_metrics_csv(csv, report.metrics);
  }
  const auto transfer =
      harness::transfer_rates(bench.splits.test, report.test, *bench.detector_a, *bench.detector_b);
  auto rj = harness::report_to_json(report);
  rj["transfer"] = {{"files", transfer.files},
                    {"evaded_a", transfer.evaded_a},
                    {"evaded_b", transfer.evaded_b},
                    {"rate_a", transfer.rate_a},
                    {"rate_b", transfer.rate_b}};
  write_text(ws / "report.json", rj.dump(2) + '\n');
  const auto text =
      harness::report_tables(report) + '\n' + harness::transfer_table(agents::algorithm_name(plan.algorithm), transfer);
  write_text(ws / "report.txt", text);
  std::cout << text;
  return 0;
}

int cmd_evaluate(const GlobalConfig& g, const std::string& agent_path, const std::string& split,
                 const std::string& kind, std::optional<int> max_steps) {
  const auto ws = workspace_dir(g);
  const auto setup = load_setup(ws);
  const auto k = parse_kind(kind);
  const auto agent = agents::Agent::load(agent_path);
  auto bench = harness::build_desk_bench(setup, false);
  bench.detector_a = load_detector(ws, detector::DetectorKind::A);
  bench.detector_b = load_detector(ws, detector::DetectorKind::B);
  const auto& files = split == "train" ? bench.splits.train
                      : split == "validation" ? bench.splits.validation
                      : split == "test" ? bench.splits.test
                      : throw CLI::ValidationError("--split", "expected train, validation or test");

  rl::EnvConfig env;
  if (max_steps) {
    env.max_steps = *max_steps;
  } else if (fs::exists(ws / "report.json")) {
    env.max_steps = read_json((ws / "report.json").string()).at("max_steps").get<int>();
  } else {
    throw CLI::ValidationError("--max-steps", "no report.json in workspace; pass --max-steps");
  }
  const auto wb = bench.against(k);
  const auto r = harness::evaluate_agent(agent, wb.target, wb.pool, files, env, derive_seed(g.seed, {hash_tag("evaluate")}));

  const auto aes = ws / "aes";
  fs::create_directories(aes);
  for (const auto& ae : r.aes) {
    write_file((aes / (ae.id + ".exe")).string(), ae.modified);
    write_file((aes / (ae.id + ".orig")).string(), ae.original);
  }
  auto j = harness::eval_to_json(r);
  j["detector"] = detector::kind_name(k);
  j["split"] = split;
  j["max_steps"] = env.max_steps;
  write_text(ws / "eval.json", j.dump(2) + '\n');
  std::cout << json{{"evasion_rate", r.evasion_rate}, {"size_increase", r.size_increase}, {"evaded", r.evaded},
                    {"total", r.total},           {"excluded", r.excluded},           {"aes", aes.string()}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_transfer(const GlobalConfig& g, const std::string& aes_dir, const std::string& kind, const std::string& model) {
  const auto k = parse_kind(kind);
  const auto d = model.empty() ? load_detector(workspace_dir(g), k)
                               : std::make_shared<const detector::Detector>(detector::Detector::load(model));
  std::vector<harness::AdversarialExample> aes;
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(aes_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".exe") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) {
    auto orig = p;
    orig.replace_extension(".orig");
    if (!fs::exists(orig)) throw std::runtime_error("missing original for " + p.string());
    aes.push_back({p.stem().string(), read_file(orig.string()), read_file(p.string())});
  }
  const auto r = harness::transferability_eval(aes, *d);
  std::cout << json{{"detector", detector::kind_name(k)}, {"evasion_rate", r.evasion_rate}, {"evaded", r.evaded},
                    {"total", r.total},                    {"excluded", r.excluded}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_report(const GlobalConfig& g) {
  const auto ws = fs::path(g.workspace);
  const auto txt = ws / "report.txt";
  if (!fs::exists(txt)) throw std::runtime_error("no report.txt in workspace " + ws.string());
  std::ifstream in(txt);
  std::cout << in.rdbuf();
  const auto eval = ws / "eval.json";
  if (fs::exists(eval)) {
    const auto j = read_json(eval.string());
    std::cout << "\nlast evaluate: detector " << j.value("detector", "?") << ", split " << j.value("split", "?")
              << ", evasion rate " << j.value("evasion_rate", 0.0) << "%, size increase "
              << j.value("size_increase", 0.0) << "%\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial malware generation workbench"};
  app.require_subcommand(1);
  GlobalConfig g;
  const char* env_ws = std::getenv("AMG_WORKSPACE");
  g.workspace = env_ws ? env_ws : ".";
  app.add_option("--workspace", g.workspace, "workspace directory (default $AMG_WORKSPACE or .)");
  auto* seed_opt = app.add_option("--seed", g.seed, "global seed");
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::function<int()> run;

  std::string spec_path, out;
  auto* c_corpus = app.add_subcommand("corpus", "generate a synthetic labeled corpus");
  c_corpus->add_option("--spec", spec_path, "corpus spec JSON")->required()->check(CLI::ExistingFile);
  c_corpus->add_option("--out", out, "output directory")->required();
  c_corpus->callback([&] { run = [&] { return cmd_corpus(g, spec_path, out); }; });

  auto* c_det = app.add_subcommand("detector", "train or query a detector");
  c_det->require_subcommand(1);
  std::string corpus_dir, kind = "A", model;
  auto* c_dtrain = c_det->add_subcommand("train", "train a detector on a corpus directory");
  c_dtrain->add_option("--corpus", corpus_dir, "corpus directory")->required();
  c_dtrain->add_option("--kind", kind, "A or B")->required();
  c_dtrain->add_option("--out", out, "model file")->required();
  c_dtrain->callback([&] { run = [&] { return cmd_detector_train(g, corpus_dir, kind, out); }; });
  std::vector<std::string> classify_files;
  auto* c_dclass = c_det->add_subcommand("classify", "print the verdict for each file");
  c_dclass->add_option("--model", model, "model file")->required();
  c_dclass->add_option("files", classify_files, "files to classify")->required();
  c_dclass->callback([&] { run = [&] { return cmd_detector_classify(model, classify_files); }; });

  std::string file, action;
  std::uint64_t mutate_seed = 0;
  auto* c_mut = app.add_subcommand("mutate", "apply one modification action");
  c_mut->add_option("file", file, "input PE file")->required();
  c_mut->add_option("--action", action, "action name, e.g. break_checksum")->required();
  auto* mseed = c_mut->add_option("--seed", mutate_seed, "action seed");
  c_mut->add_option("--out", out, "write the modified file here");
  c_mut->callback([&] {
    run = [&] {
      return cmd_mutate(g, file, action, mseed->count() ? std::optional(mutate_seed) : std::nullopt, out);
    };
  });

  std::string files_dir, backend = "structural", fixtures;
  std::vector<std::string> actions;
  auto* c_val = app.add_subcommand("validate", "check functionality preservation per action");
  c_val->add_option("--files,--corpus", files_dir, "directory of PE files")->required();
  c_val->add_option("--action", actions, "action name (repeatable; default all)");
  c_val->add_option("--backend", backend, "structural or fixture")->check(CLI::IsMember({"structural", "fixture"}));
  c_val->add_option("--fixtures", fixtures, "fixture report root");
  c_val->callback([&] { run = [&] { return cmd_validate(g, files_dir, actions, backend, fixtures); }; });

  std::string algo, plan_path;
  auto* c_train = app.add_subcommand("train", "run the full training workflow into the workspace");
  c_train->add_option("--algo", algo, "dqn, pg, ppo or random (overrides the plan)");
  c_train->add_option("--plan", plan_path, "experiment plan JSON")->check(CLI::ExistingFile);
  c_train->callback([&] { run = [&] { return cmd_train(g, algo, plan_path); }; });

  std::string agent_path, split = "test";
  int eval_steps = 0;
  auto* c_eval = app.add_subcommand("evaluate", "evaluate a checkpoint and write adversarial examples");
  c_eval->add_option("--agent", agent_path, "agent checkpoint")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--split", split, "train, validation or test");
  c_eval->add_option("--detector", kind, "A or B");
  auto* esteps = c_eval->add_option("--max-steps", eval_steps, "episode length (default from report.json)")
                     ->check(CLI::PositiveNumber);
  c_eval->callback([&] {
    run = [&] {
      return cmd_evaluate(g, agent_path, split, kind, esteps->count() ? std::optional(eval_steps) : std::nullopt);
    };
  });

  std::string aes_dir;
  auto* c_tr = app.add_subcommand("transfer", "score stored adversarial examples against a detector");
  c_tr->add_option("--aes", aes_dir, "directory with <id>.exe and <id>.orig pairs")->required()->check(CLI::ExistingDirectory);
  c_tr->add_option("--detector", kind, "A or B")->required();
  c_tr->add_option("--model", model, "detector file (default from workspace)");
  c_tr->callback([&] { run = [&] { return cmd_transfer(g, aes_dir, kind, model); }; });

  auto* c_rep = app.add_subcommand("report", "print the workspace report");
  c_rep->callback([&] { run = [&] { return cmd_report(g); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "amg: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  g.seed_given = seed_opt->count() > 0;
  spdlog::set_default_logger(spdlog::stderr_logger_mt("amg"));
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    return run();
  } catch (const CLI::ValidationError& e) {
    std::cerr << "amg: " << e.what() << '\n';
    return 2;
  } catch (const pe::PeError& e) {
    std::cerr << "amg: error: not a usable PE file (" << pe::to_string(e.kind()) << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "amg: error: " << e.what() << '\n';
    return 1;
  }
}
