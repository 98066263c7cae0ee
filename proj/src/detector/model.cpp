#include <spdlog/spdlog.h>

#include "amg/binio.hpp"
#include "amg/detector/detector.hpp"

namespace amg::detector {

namespace {

constexpr std::string_view kMagic = "AMGDETR\x01";
constexpr std::uint32_t kVersion = 1;

}  // namespace

const char* verdict_name(Verdict v) { return v == Verdict::Malicious ? "malicious" : "benign"; }
const char* kind_name(DetectorKind k) { return k == DetectorKind::A ? "A" : "B"; }

double StumpEnsemble::logit(const FeatureVectorA& x) const {
  double s = bias;
  for (const auto& st : stumps) s += x[st.feature] <= st.threshold ? st.left : st.right;
  return s;
}

double LogisticModel::logit(const FeatureVectorB& x) const {
  return bias + weights.dot((x.cwiseSqrt() - mean).cwiseProduct(inv_scale));
}

Detector::Detector(DetectorKind kind, std::variant<StumpEnsemble, LogisticModel> model, double held_out_accuracy)
    : kind_(kind), model_(std::move(model)), held_out_accuracy_(held_out_accuracy) {
  if ((kind == DetectorKind::A) != std::holds_alternative<StumpEnsemble>(model_)) {
    throw std::invalid_argument("detector kind does not match its model");
  }
}

Verdict Detector::classify(ByteView raw) const {
  pe::PeImage img;
  try {
    img = pe::parse(raw);
  } catch (const pe::PeError& e) {
    spdlog::debug("detector {}: unparseable input treated as malicious ({})", kind_name(kind_), e.what());
    return Verdict::Malicious;
  }
  double logit = 0.0;
  if (const auto* s = stumps()) {
    logit = s->logit(extract_features_a(raw));
  } else {
    logit = logistic()->logit(extract_features_b(raw));
  }
  return logit > 0.0 ? Verdict::Malicious : Verdict::Benign;
}

Bytes Detector::to_bytes() const {
  binio::Writer w;
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(kind_ == DetectorKind::A ? 0 : 1);
  w.f64(held_out_accuracy_);
  if (const auto* s = stumps()) {
    w.f64(s->bias);
    w.f64(s->learning_rate);
    w.u32(static_cast<std::uint32_t>(s->stumps.size()));
    for (const auto& st : s->stumps) {
      w.u32(static_cast<std::uint32_t>(st.feature));
      w.f64(st.threshold);
      w.f64(st.left);
      w.f64(st.right);
    }
  } else {
    const auto& m = *logistic();
    w.u32(static_cast<std::uint32_t>(m.weights.size()));
    w.f64s(m.mean);
    w.f64s(m.inv_scale);
    w.f64s(m.weights);
    w.f64(m.bias);
  }
  return w.take();
}

Detector Detector::from_bytes(ByteView bytes) {
  binio::Reader r(bytes);
  r.expect_magic(kMagic);
  if (r.u32() != kVersion) throw binio::FormatError("unsupported detector format version");
  const auto kind = r.u32();
  if (kind > 1) throw binio::FormatError("unknown detector kind");
  const double acc = r.f64();
  if (kind == 0) {
    StumpEnsemble s;
    s.bias = r.f64();
    s.learning_rate = r.f64();
    const auto n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
      Stump st;
      st.feature = static_cast<int>(r.u32());
      if (st.feature >= kFeaturesA) throw binio::FormatError("stump feature out of range");
      st.threshold = r.f64();
      st.left = r.f64();
      st.right = r.f64();
      s.stumps.push_back(st);
    }
    if (!r.at_end()) throw binio::FormatError("trailing bytes in detector file");
    return Detector(DetectorKind::A, std::move(s), acc);
  }
  const auto dim = r.u32();
  if (dim != kFeaturesB) throw binio::FormatError("unexpected feature dimension");
  LogisticModel m;
  for (auto* v : {&m.mean, &m.inv_scale, &m.weights}) {
    v->resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i) (*v)[i] = r.f64();
  }
  m.bias = r.f64();
  if (!r.at_end()) throw binio::FormatError("trailing bytes in detector file");
  return Detector(DetectorKind::B, std::move(m), acc);
}

void Detector::save(const std::string& path) const { write_file(path, to_bytes()); }

Detector Detector::load(const std::string& path) { return from_bytes(read_file(path)); }

double accuracy(const HardLabelDetector& d, const std::vector<corpus::CorpusFile>& files) {
  if (files.empty()) return 0.0;
  std::size_t right = 0;
  for (const auto& f : files) {
    const bool malicious = d.classify(f.bytes) == Verdict::Malicious;
    right += malicious == (f.label == corpus::Label::Malicious);
  }
  return static_cast<double>(right) / static_cast<double>(files.size());
}

}  // namespace amg::detector
