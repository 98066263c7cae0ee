#include <algorithm>
#include <fstream>

#include "amg/validity/validity.hpp"

namespace amg::validity {

const char* feature_name(Feature f) {
  switch (f) {
    case Feature::Signatures: return "signatures";
    case Feature::ApiCalls: return "api_calls";
    case Feature::Processes: return "processes";
  }
  return "?";
}

const char* decision_name(Decision d) { return d == Decision::Success ? "success" : "failure"; }

const StringSet& feature_set(const BehaviorReport& r, Feature f) {
  switch (f) {
    case Feature::Signatures: return r.signatures;
    case Feature::ApiCalls: return r.api_calls;
    case Feature::Processes: break;
  }
  return r.processes;
}

namespace {

std::size_t intersection_size(const StringSet& a, const StringSet& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n, ++i, ++j;
    }
  }
  return n;
}

}  // namespace

double agreement(const StringSet& a, const StringSet& b) {
  const auto larger = std::max(a.size(), b.size());
  if (larger == 0) return 1.0;
  return static_cast<double>(intersection_size(a, b)) / static_cast<double>(larger);
}

bool feature_matches(const StringSet& a, const StringSet& b, double threshold) {
  const auto larger = std::max(a.size(), b.size());
  if (larger == 0) return true;
  const auto shared = static_cast<double>(intersection_size(a, b));
  return shared >= threshold * static_cast<double>(larger) - 1e-9;
}

ValidityVerdict evaluate_validity(std::span<const BehaviorReport> controls, std::span<const BehaviorReport> tests,
                                  double threshold) {
  if (controls.size() != static_cast<std::size_t>(kRounds) || tests.size() != static_cast<std::size_t>(kRounds)) {
    throw ArityError("validity needs exactly 3 control and 3 test reports, got " + std::to_string(controls.size()) +
                     " and " + std::to_string(tests.size()));
  }
  ValidityVerdict v;
  for (std::size_t t = 0; t < tests.size(); ++t) {
    const auto& test = tests[t];
    if (test.failed) {
      v.decision = Decision::Failure;
      return v;
    }
    for (auto f : kFeatures) {
      double best = 0.0;
      bool matched = false;
      for (const auto& control : controls) {
        best = std::max(best, agreement(feature_set(test, f), feature_set(control, f)));
        if (feature_matches(feature_set(test, f), feature_set(control, f), threshold)) {
          matched = true;
          break;
        }
      }
      if (matched) ++v.matched_features;
      v.per_feature_detail.push_back({static_cast<int>(t), f, best});
    }
  }
  v.decision = v.matched_features >= 2 ? Decision::Success : Decision::Failure;
  return v;
}

void to_json(nlohmann::json& j, const BehaviorReport& r) {
  j = nlohmann::json{{"signatures", r.signatures},
                     {"api_calls", r.api_calls},
                     {"processes", r.processes},
                     {"failed", r.failed}};
}

void from_json(const nlohmann::json& j, BehaviorReport& r) {
  r.signatures = j.at("signatures").get<StringSet>();
  r.api_calls = j.at("api_calls").get<StringSet>();
  r.processes = j.at("processes").get<StringSet>();
  r.failed = j.at("failed").get<bool>();
  if (r.failed && (!r.signatures.empty() || !r.api_calls.empty() || !r.processes.empty())) {
    throw std::invalid_argument("failed report must not carry behavior");
  }
}

BehaviorReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BackendError("cannot open report " + path);
  try {
    return nlohmann::json::parse(in).get<BehaviorReport>();
  } catch (const std::exception& e) {
    throw BackendError("bad report " + path + ": " + e.what());
  }
}

void save_report(const BehaviorReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw BackendError("cannot write report " + path);
  out << nlohmann::json(r).dump(2) << '\n';
}

}  // namespace amg::validity
