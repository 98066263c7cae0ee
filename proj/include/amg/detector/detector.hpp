#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "amg/bytes.hpp"
#include "amg/corpus/corpus.hpp"
#include "amg/pe/image.hpp"

namespace amg::detector {

inline constexpr int kFeaturesA = 128;
inline constexpr int kFeaturesB = 1024;
inline constexpr std::size_t kByteWindow = 65536;

using FeatureVectorA = Eigen::Matrix<double, kFeaturesA, 1>;
using FeatureVectorB = Eigen::VectorXd;

/// Structural features; throws pe::PeError when `raw` does not parse.
FeatureVectorA extract_features_a(const pe::PeImage& img);
FeatureVectorA extract_features_a(ByteView raw);

/// Hashed byte-bigram histogram over the first kByteWindow bytes, L1-normalized.
FeatureVectorB extract_features_b(ByteView raw);

/// Named slots of FeatureVectorA, for tests and reports.
namespace slot {
inline constexpr int kTimestamp = 0;
inline constexpr int kChecksumZero = 1;
inline constexpr int kChecksumValid = 2;
inline constexpr int kEntryRatio = 3;
inline constexpr int kSectionCount = 4;
inline constexpr int kImageSizeLog = 5;
inline constexpr int kFileSizeLog = 6;
inline constexpr int kEntropyMin = 7;
inline constexpr int kEntropyMean = 8;
inline constexpr int kEntropyMax = 9;
inline constexpr int kOverlayRatio = 10;
inline constexpr int kDebug = 11;
inline constexpr int kCertificate = 12;
inline constexpr int kImportDlls = 13;
inline constexpr int kImportFunctions = 14;
inline constexpr int kSuspiciousImportFraction = 15;
inline constexpr int kSuspiciousNameCount = 16;
inline constexpr int kSuspiciousNameFirst = 17;  // 16 one-hot slots
inline constexpr int kMotifDensityFirst = 33;    // one per motif
inline constexpr int kMotifDensityTotal = 45;
inline constexpr int kBenignNameFraction = 46;
inline constexpr int kMeanRawSizeLog = 47;
inline constexpr int kSectionDataRatio = 48;
inline constexpr int kHasImports = 49;
inline constexpr int kUsed = 50;  // the rest are reserved zeros
}  // namespace slot

enum class Verdict { Malicious, Benign };
const char* verdict_name(Verdict v);

/// What agents and environments see: one bit per query.
class HardLabelDetector {
 public:
  virtual ~HardLabelDetector() = default;
  virtual Verdict classify(ByteView raw) const = 0;
};

struct Stump {
  int feature = 0;
  double threshold = 0.0;  // x <= threshold goes left
  double left = 0.0;
  double right = 0.0;
  bool operator==(const Stump&) const = default;
};

struct StumpEnsemble {
  double bias = 0.0;
  double learning_rate = 0.1;
  std::vector<Stump> stumps;  // leaf values already include the shrinkage

  double logit(const FeatureVectorA& x) const;
};

/// Logistic regression over standardized square-rooted histogram entries.
struct LogisticModel {
  Eigen::VectorXd mean;
  Eigen::VectorXd inv_scale;
  Eigen::VectorXd weights;
  double bias = 0.0;

  double logit(const FeatureVectorB& x) const;
};

enum class DetectorKind { A, B };
const char* kind_name(DetectorKind k);

struct TrainParams {
  double held_out_fraction = 0.2;
  // stumps
  int rounds = 300;
  double learning_rate = 0.1;
  int max_bins = 64;
  double l2 = 1.0;
  // logistic regression
  int epochs = 400;
  double step = 0.05;
  double weight_decay = 1e-3;
};

class DegenerateCorpus : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Detector final : public HardLabelDetector {
 public:
  Detector(DetectorKind kind, std::variant<StumpEnsemble, LogisticModel> model, double held_out_accuracy);

  /// Unparseable input is Malicious.
  Verdict classify(ByteView raw) const override;

  DetectorKind kind() const { return kind_; }
  double held_out_accuracy() const { return held_out_accuracy_; }
  const StumpEnsemble* stumps() const { return std::get_if<StumpEnsemble>(&model_); }
  const LogisticModel* logistic() const { return std::get_if<LogisticModel>(&model_); }

  // Loading throws binio::FormatError on a malformed file.
  void save(const std::string& path) const;
  static Detector load(const std::string& path);
  Bytes to_bytes() const;
  static Detector from_bytes(ByteView bytes);

 private:
  DetectorKind kind_;
  std::variant<StumpEnsemble, LogisticModel> model_;
  double held_out_accuracy_;
};

/// Fits on a seed-determined split of `files` and reports accuracy on the held-out part.
Detector train_detector(const std::vector<corpus::CorpusFile>& files, DetectorKind which, const TrainParams& hyper,
                        std::uint64_t seed);

/// Fraction of `files` whose verdict matches the label.
double accuracy(const HardLabelDetector& d, const std::vector<corpus::CorpusFile>& files);

}  // namespace amg::detector
