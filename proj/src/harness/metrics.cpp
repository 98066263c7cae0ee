#include <algorithm>
#include <map>

#include "amg/harness/harness.hpp"
#include "amg/random.hpp"

namespace amg::harness {

double evasion_rate(std::size_t evaded, std::size_t files, std::size_t pre_excluded) {
  if (pre_excluded >= files) throw EmptyDenominator("no files left after exclusion");
  const std::size_t total = files - pre_excluded;
  if (evaded > total) throw std::invalid_argument("more evasive files than files");
  // integer arithmetic keeps the cut exact: 7/13 -> 5384 -> 53.84
  const auto hundredths = static_cast<std::uint64_t>(evaded) * 10000u / total;
  return static_cast<double>(hundredths) / 100.0;
}

double size_increase(std::size_t original_size, std::size_t final_size) {
  if (original_size == 0) throw EmptyDenominator("original size is zero");
  return (static_cast<double>(final_size) - static_cast<double>(original_size)) / static_cast<double>(original_size) *
         100.0;
}

namespace {

void finish(EvalResult& r) {
  r.evasion_rate = evasion_rate(r.evaded, r.total + r.excluded, r.excluded);
  double sum = 0.0;
  for (const auto& f : r.per_file) {
    if (f.evaded) sum += size_increase(f.original_size, f.original_size + static_cast<std::size_t>(f.delta_bytes));
  }
  r.size_increase = r.evaded ? sum / static_cast<double>(r.evaded) : 0.0;
}

}  // namespace

EvalResult evaluate_agent(const agents::Agent& agent, std::shared_ptr<const detector::HardLabelDetector> target,
                          std::shared_ptr<const mods::BenignContentPool> pool, const std::vector<LabeledFile>& files,
                          const rl::EnvConfig& env_config, std::uint64_t seed) {
  rl::MalwareEnv env(target, std::move(pool), env_config);
  EvalResult r;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto& file = files[i];
    FileOutcome out;
    out.id = file.id;
    out.original_size = file.bytes.size();
    if (target->classify(file.bytes) == detector::Verdict::Benign) {
      out.excluded = true;
      ++r.excluded;
      r.per_file.push_back(std::move(out));
      continue;
    }
    ++r.total;
    Rng rng(derive_seed(seed, {i}));
    auto obs = env.reset(file.bytes);
    for (;;) {
      const auto t = env.step(agent.act(obs, rng));
      obs = t.next_state;
      if (t.done) break;
    }
    const auto& rec = env.record();
    out.evaded = rec.evaded;
    out.steps = rec.steps;
    out.actions = rec.actions;
    out.delta_bytes = static_cast<std::int64_t>(rec.final_size) - static_cast<std::int64_t>(rec.original_size);
    if (out.evaded) {
      ++r.evaded;
      r.aes.push_back({file.id, file.bytes, env.current_bytes()});
    }
    r.per_file.push_back(std::move(out));
  }
  finish(r);
  return r;
}

EvalResult transferability_eval(std::span<const AdversarialExample> aes, const detector::HardLabelDetector& target) {
  EvalResult r;
  for (const auto& ae : aes) {
    FileOutcome out;
    out.id = ae.id;
    out.original_size = ae.original.size();
    out.delta_bytes = static_cast<std::int64_t>(ae.modified.size()) - static_cast<std::int64_t>(ae.original.size());
    if (target.classify(ae.original) == detector::Verdict::Benign) {
      out.excluded = true;
      ++r.excluded;
    } else {
      ++r.total;
      out.evaded = target.classify(ae.modified) == detector::Verdict::Benign;
      if (out.evaded) {
        ++r.evaded;
        r.aes.push_back(ae);
      }
    }
    r.per_file.push_back(std::move(out));
  }
  if (r.total == 0) throw EmptyDenominator("no adversarial examples to evaluate");
  finish(r);
  return r;
}

TransferPair transfer_rates(const std::vector<LabeledFile>& files, const EvalResult& on_a,
                            const detector::HardLabelDetector& a, const detector::HardLabelDetector& b) {
  std::map<std::string, const Bytes*> modified;
  for (const auto& ae : on_a.aes) modified[ae.id] = &ae.modified;
  TransferPair t;
  for (const auto& f : files) {
    if (a.classify(f.bytes) == detector::Verdict::Benign || b.classify(f.bytes) == detector::Verdict::Benign) continue;
    ++t.files;
    const auto it = modified.find(f.id);
    if (it == modified.end()) continue;
    ++t.evaded_a;
    if (b.classify(*it->second) == detector::Verdict::Benign) ++t.evaded_b;
  }
  t.rate_a = evasion_rate(t.evaded_a, t.files);
  t.rate_b = evasion_rate(t.evaded_b, t.files);
  return t;
}

Splits split_files(std::vector<LabeledFile> files, std::uint64_t seed) {
  Rng rng(seed);
  std::shuffle(files.begin(), files.end(), rng);
  const std::size_t n = files.size();
  const std::size_t train = (n * 4 + 3) / 7;
  const std::size_t val = (n + 3) / 7;
  Splits s;
  auto at = std::make_move_iterator(files.begin());
  s.train.assign(at, at + static_cast<std::ptrdiff_t>(train));
  s.validation.assign(at + static_cast<std::ptrdiff_t>(train), at + static_cast<std::ptrdiff_t>(train + val));
  s.test.assign(at + static_cast<std::ptrdiff_t>(train + val), std::make_move_iterator(files.end()));
  return s;
}

}  // namespace amg::harness
