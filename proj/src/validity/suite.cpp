#include <sstream>

#include "amg/random.hpp"
#include "amg/validity/validity.hpp"

namespace amg::validity {

SuiteRow run_validity_suite(const std::vector<SuiteFile>& files, const std::string& label, const Mutator& mutate,
                            const BehaviorBackend& backend) {
  SuiteRow row;
  row.action = label;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto& file = files[i];
    if (pe::has_errors(pe::check_invariants(file.image))) {
      throw std::invalid_argument("suite input " + file.id + " violates structural invariants");
    }
    ++row.total;
    ValidityVerdict verdict;
    try {
      const auto original = pe::serialize(file.image);
      Bytes modified;
      try {
        modified = mutate(file, i);
      } catch (const std::exception& e) {
        // A modification that cannot even produce bytes behaves like a file that does not run.
        row.errors.push_back(file.id + ": " + e.what());
        modified.clear();
      }
      const auto controls = backend.observe(file.id, original, Role::Control);
      const auto tests = backend.observe(file.id, modified, Role::Test);
      verdict = evaluate_validity(controls, tests);
    } catch (const BackendError& e) {
      row.errors.push_back(file.id + ": " + e.what());
      verdict = {};
    }
    if (verdict.decision == Decision::Success) ++row.valid;
    row.verdicts.emplace_back(file.id, std::move(verdict));
  }
  return row;
}

SuiteRow run_validity_suite(const std::vector<SuiteFile>& files, const mods::ModificationAction& action,
                            const mods::BenignContentPool& pool, const BehaviorBackend& backend) {
  const Mutator mutate = [&](const SuiteFile& file, std::size_t index) {
    const mods::ModificationAction per_file{action.id, derive_seed(action.rng_seed, {index})};
    return pe::serialize(mods::apply(file.image, per_file, pool).image);
  };
  return run_validity_suite(files, std::string(mods::action_name(action.id)), mutate, backend);
}

nlohmann::json row_to_json(const SuiteRow& row) {
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& [id, v] : row.verdicts) {
    verdicts.push_back({{"file", id}, {"decision", decision_name(v.decision)}, {"matched_features", v.matched_features}});
  }
  return {{"action", row.action}, {"valid", row.valid}, {"total", row.total}, {"errors", row.errors},
          {"verdicts", verdicts}};
}

std::string row_to_text(const SuiteRow& row) {
  std::ostringstream out;
  out << row.action << "  " << row.valid << "/" << row.total;
  return out.str();
}

}  // namespace amg::validity
