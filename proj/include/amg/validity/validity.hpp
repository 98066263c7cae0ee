#pragma once

#include <array>
#include <functional>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "amg/bytes.hpp"
#include "amg/mods/actions.hpp"
#include "amg/pe/image.hpp"

namespace amg::validity {

using StringSet = std::set<std::string>;

struct BehaviorReport {
  StringSet signatures;
  StringSet api_calls;
  StringSet processes;
  bool failed = false;  // the run itself did not complete

  static BehaviorReport failure() { return {{}, {}, {}, true}; }
  bool operator==(const BehaviorReport&) const = default;
};

enum class Feature { Signatures, ApiCalls, Processes };
inline constexpr std::array<Feature, 3> kFeatures = {Feature::Signatures, Feature::ApiCalls, Feature::Processes};

const char* feature_name(Feature f);
const StringSet& feature_set(const BehaviorReport& r, Feature f);

/// |a ∩ b| / max(|a|, |b|); two empty sets agree fully.
double agreement(const StringSet& a, const StringSet& b);

inline constexpr double kAgreementThreshold = 0.95;

/// True when agreement(a, b) >= threshold, decided on the integer counts so a
/// ratio sitting exactly on the threshold always matches.
bool feature_matches(const StringSet& a, const StringSet& b, double threshold = kAgreementThreshold);

enum class Decision { Success, Failure };
const char* decision_name(Decision d);

struct FeatureMatch {
  int test_report = 0;
  Feature feature = Feature::Signatures;
  double best_agreement = 0.0;
};

struct ValidityVerdict {
  int matched_features = 0;
  Decision decision = Decision::Failure;
  std::vector<FeatureMatch> per_feature_detail;
};

class ArityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Matches every test report's features against the controls; a failed test
/// report ends the evaluation with Failure, otherwise two matches suffice.
ValidityVerdict evaluate_validity(std::span<const BehaviorReport> controls, std::span<const BehaviorReport> tests,
                                  double threshold = kAgreementThreshold);

void to_json(nlohmann::json& j, const BehaviorReport& r);
void from_json(const nlohmann::json& j, BehaviorReport& r);

BehaviorReport load_report(const std::string& path);
void save_report(const BehaviorReport& r, const std::string& path);

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BackendKind { Structural, Fixture };
enum class Role { Control, Test };

inline constexpr int kRounds = 3;
using ReportTriple = std::array<BehaviorReport, kRounds>;

class BehaviorBackend {
 public:
  virtual ~BehaviorBackend() = default;
  virtual BackendKind kind() const = 0;
  /// Three rounds of observation for one file; throws BackendError on I/O trouble.
  virtual ReportTriple observe(const std::string& file_id, ByteView bytes, Role role) const = 0;
};

/// Pseudo-behavior derived from static structure. Deterministic, so its three
/// rounds are identical.
class StructuralBackend : public BehaviorBackend {
 public:
  BackendKind kind() const override { return BackendKind::Structural; }
  ReportTriple observe(const std::string& file_id, ByteView bytes, Role role) const override;

  static BehaviorReport report_for(ByteView bytes);
};

/// Replays stored reports from `<root>/<file_id>/{control,test}_{1,2,3}.json`.
class FixtureBackend : public BehaviorBackend {
 public:
  explicit FixtureBackend(std::string root) : root_(std::move(root)) {}
  BackendKind kind() const override { return BackendKind::Fixture; }
  ReportTriple observe(const std::string& file_id, ByteView bytes, Role role) const override;

  const std::string& root() const { return root_; }

 private:
  std::string root_;
};

struct SuiteFile {
  std::string id;
  pe::PeImage image;
};

struct SuiteRow {
  std::string action;
  int valid = 0;
  int total = 0;
  std::vector<std::pair<std::string, ValidityVerdict>> verdicts;
  std::vector<std::string> errors;  // per-file backend or modification trouble
};

/// Produces the bytes of the modified file; may throw, which counts as Failure.
using Mutator = std::function<Bytes(const SuiteFile& file, std::size_t index)>;

SuiteRow run_validity_suite(const std::vector<SuiteFile>& files, const std::string& label, const Mutator& mutate,
                            const BehaviorBackend& backend);

/// One modification per file, each with its own seed derived from the action's.
SuiteRow run_validity_suite(const std::vector<SuiteFile>& files, const mods::ModificationAction& action,
                            const mods::BenignContentPool& pool, const BehaviorBackend& backend);

nlohmann::json row_to_json(const SuiteRow& row);
std::string row_to_text(const SuiteRow& row);

}  // namespace amg::validity
