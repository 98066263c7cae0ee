#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <type_traits>

#include "amg/corpus/corpus.hpp"
#include "amg/binio.hpp"
#include "amg/detector/detector.hpp"

using namespace amg;
using namespace amg::detector;

namespace {

// No member of the agent-facing interface may return a score.
template <typename T>
concept ExposesScore = requires(const T& t, ByteView b) { t.score(b); } || requires(const T& t, ByteView b) {
  t.logit(b);
} || requires(const T& t, ByteView b) { t.probability(b); };

static_assert(!ExposesScore<HardLabelDetector>);
static_assert(std::is_same_v<decltype(std::declval<const HardLabelDetector&>().classify(ByteView{})), Verdict>);

std::vector<corpus::CorpusFile> corpus_of(std::size_t mal, std::size_t ben, std::uint64_t seed) {
  corpus::CorpusSpec spec;
  spec.malicious_count = mal;
  spec.benign_count = ben;
  spec.seed = seed;
  return corpus::generate(spec);
}

const std::vector<corpus::CorpusFile>& default_corpus() {
  static const auto files = corpus_of(400, 400, 7);
  return files;
}

}  // namespace

TEST_CASE("feature A reflects parsed header fields") {
  for (const auto& f : corpus_of(10, 10, 3)) {
    const auto img = pe::parse(f.bytes);
    const auto x = extract_features_a(f.bytes);
    CHECK(x.size() == 128);
    CHECK(x.allFinite());
    CHECK(x[slot::kChecksumZero] == (img.optional.checksum == 0 ? 1.0 : 0.0));
    CHECK(x[slot::kSectionCount] == static_cast<double>(img.sections.size()));
    CHECK(x[slot::kDebug] == (f.record.debug ? 1.0 : 0.0));
    CHECK(x[slot::kCertificate] == (f.record.certificate ? 1.0 : 0.0));
    CHECK(x.tail(128 - slot::kUsed).isZero());
    CHECK(extract_features_a(img) == x);
  }
}

TEST_CASE("feature A entropy is zero for single-byte sections") {
  auto img = pe::parse(corpus_of(1, 0, 5).front().bytes);
  for (auto& s : img.sections) std::fill(s.data.begin(), s.data.end(), 0x90);
  const auto x = extract_features_a(img);
  CHECK(x[slot::kEntropyMin] == 0.0);
  CHECK(x[slot::kEntropyMean] == 0.0);
  CHECK(x[slot::kEntropyMax] == 0.0);
}

TEST_CASE("feature B is a normalized histogram") {
  const auto f = corpus_of(1, 0, 9).front();
  const auto x = extract_features_b(f.bytes);
  CHECK(x.size() == 1024);
  CHECK(x.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((x.array() >= 0).all());
  CHECK(extract_features_b(f.bytes) == x);

  const Bytes flat(5000, 0x41);
  const auto y = extract_features_b(flat);
  CHECK(y.sum() == doctest::Approx(1.0));
  CHECK((y.array() > 0).count() == 2);  // (A,A) and the trailing (A,0)
  CHECK(extract_features_b(Bytes{}).isZero());
  CHECK(extract_features_b(Bytes{7}).sum() == doctest::Approx(1.0));

  // Bytes past the window do not count.
  Bytes big(kByteWindow + 100, 0x11);
  Bytes changed = big;
  for (std::size_t i = kByteWindow + 1; i < changed.size(); ++i) changed[i] = 0xEE;
  CHECK(extract_features_b(big) == extract_features_b(changed));
}

TEST_CASE("training reaches held-out accuracy and is seed deterministic") {
  const auto a = train_detector(default_corpus(), DetectorKind::A, {}, 3);
  CHECK(a.held_out_accuracy() >= 0.95);
  const auto a2 = train_detector(default_corpus(), DetectorKind::A, {}, 3);
  REQUIRE(a.stumps() != nullptr);
  CHECK(a.stumps()->stumps == a2.stumps()->stumps);
  CHECK(a.stumps()->bias == a2.stumps()->bias);
  CHECK(a.to_bytes() == a2.to_bytes());

  const auto b = train_detector(default_corpus(), DetectorKind::B, {}, 3);
  CHECK(b.held_out_accuracy() >= 0.95);
  CHECK(b.to_bytes() == train_detector(default_corpus(), DetectorKind::B, {}, 3).to_bytes());

  // fresh files from another seed
  const auto fresh = corpus_of(100, 100, 1001);
  CHECK(accuracy(a, fresh) >= 0.95);
  CHECK(accuracy(b, fresh) >= 0.9);
}

TEST_CASE("held-out accuracy holds across corpus seeds") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto files = corpus_of(400, 400, seed);
    INFO("seed ", seed);
    CHECK(train_detector(files, DetectorKind::A, {}, seed).held_out_accuracy() >= 0.95);
    CHECK(train_detector(files, DetectorKind::B, {}, seed).held_out_accuracy() >= 0.95);
  }
}

TEST_CASE("single-label corpus is degenerate") {
  const auto only_bad = corpus_of(50, 0, 1);
  CHECK_THROWS_AS(train_detector(only_bad, DetectorKind::A, {}, 1), DegenerateCorpus);
  CHECK_THROWS_AS(train_detector(corpus_of(0, 50, 1), DetectorKind::B, {}, 1), DegenerateCorpus);
}

TEST_CASE("classify verdicts") {
  const auto a = train_detector(default_corpus(), DetectorKind::A, {}, 3);
  int checked = 0;
  for (const auto& f : corpus_of(20, 20, 2024)) {
    const auto expected = f.label == corpus::Label::Malicious ? Verdict::Malicious : Verdict::Benign;
    if (f.label == corpus::Label::Malicious && f.record.motifs_planted == 0) continue;
    INFO(f.id);
    CHECK(a.classify(f.bytes) == expected);
    CHECK(a.classify(f.bytes) == a.classify(f.bytes));
    ++checked;
  }
  CHECK(checked > 30);
  const Bytes junk = {'M', 'Z', 1, 2, 3};
  CHECK(a.classify(junk) == Verdict::Malicious);
  CHECK(a.classify(Bytes{}) == Verdict::Malicious);
}

TEST_CASE("model files round trip and reject corruption") {
  const auto a = train_detector(default_corpus(), DetectorKind::A, {}, 4);
  const auto b = train_detector(default_corpus(), DetectorKind::B, {}, 4);
  const auto dir = std::filesystem::temp_directory_path() / "amg_detector_test";
  std::filesystem::create_directories(dir);
  for (const auto* d : {&a, &b}) {
    const auto path = (dir / (std::string(kind_name(d->kind())) + ".bin")).string();
    d->save(path);
    const auto back = Detector::load(path);
    CHECK(back.to_bytes() == d->to_bytes());
    CHECK(back.held_out_accuracy() == d->held_out_accuracy());
    for (const auto& f : corpus_of(5, 5, 77)) CHECK(back.classify(f.bytes) == d->classify(f.bytes));

    auto bytes = d->to_bytes();
    bytes[0] ^= 0xFF;
    CHECK_THROWS_AS(Detector::from_bytes(bytes), binio::FormatError);
    auto cut = d->to_bytes();
    cut.resize(cut.size() - 3);
    CHECK_THROWS_AS(Detector::from_bytes(cut), binio::FormatError);
  }
  std::filesystem::remove_all(dir);
}
