#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "amg/corpus/corpus.hpp"
#include "amg/random.hpp"
#include "amg/validity/validity.hpp"

using namespace amg;
using namespace amg::validity;
namespace fs = std::filesystem;

namespace {

StringSet range_set(const std::string& prefix, int lo, int hi) {
  StringSet s;
  for (int i = lo; i <= hi; ++i) s.insert(prefix + std::to_string(i));
  return s;
}

std::vector<SuiteFile> suite_files(std::size_t n, std::uint64_t seed) {
  corpus::CorpusSpec spec;
  spec.malicious_count = n / 2;
  spec.benign_count = n - n / 2;
  spec.seed = seed;
  std::vector<SuiteFile> out;
  for (auto& f : corpus::generate(spec)) out.push_back({f.id, pe::parse(f.bytes)});
  return out;
}

StringSet random_set(Rng& rng, int universe) {
  StringSet s;
  const auto n = uniform_int(rng, 0, static_cast<std::uint64_t>(universe));
  for (std::uint64_t i = 0; i < n; ++i) s.insert("e" + std::to_string(uniform_int(rng, 0, universe)));
  return s;
}

}  // namespace

TEST_CASE("agreement examples") {
  const auto a = range_set("s", 1, 20);
  CHECK(agreement(a, a) == 1.0);
  auto b = range_set("s", 2, 20);
  b.insert("other");
  CHECK(agreement(a, b) == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(feature_matches(a, b));
  CHECK(agreement({}, {}) == 1.0);
  CHECK(agreement(a, {}) == 0.0);
}

TEST_CASE("agreement properties") {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    auto a = random_set(rng, 30);
    auto b = random_set(rng, 30);
    CHECK(agreement(a, b) == agreement(b, a));
    const double before = agreement(a, b);
    a.insert("shared_new");
    b.insert("shared_new");
    CHECK(agreement(a, b) >= before);
    CHECK(agreement(a, b) <= 1.0);
  }
}

TEST_CASE("evaluate_validity decisions") {
  const BehaviorReport base{range_set("s", 1, 20), range_set("a", 1, 20), range_set("p", 1, 3), false};
  const std::array<BehaviorReport, 3> controls{base, base, base};

  const auto same = evaluate_validity(controls, controls);
  CHECK(same.matched_features == 9);
  CHECK(same.decision == Decision::Success);
  CHECK(same.per_feature_detail.size() == 9);

  std::array<BehaviorReport, 3> tests{base, BehaviorReport::failure(), base};
  CHECK(evaluate_validity(controls, tests).decision == Decision::Failure);

  // Each test loses one distinct signature: 19/20 on signatures, exact elsewhere.
  for (int i = 0; i < 3; ++i) {
    tests[i] = base;
    tests[i].signatures.erase("s" + std::to_string(i + 1));
  }
  const auto boundary = evaluate_validity(controls, tests);
  CHECK(boundary.matched_features == 9);
  CHECK(boundary.decision == Decision::Success);

  const BehaviorReport alien{range_set("x", 1, 5), range_set("y", 1, 5), range_set("z", 1, 5), false};
  auto with_matches = [&](int n) {
    std::array<BehaviorReport, 3> t{alien, alien, alien};
    // n processes-matches spread over the reports
    for (int i = 0; i < n; ++i) t[i].processes = base.processes;
    return evaluate_validity(controls, t);
  };
  CHECK(with_matches(2).matched_features == 2);
  CHECK(with_matches(2).decision == Decision::Success);
  CHECK(with_matches(1).matched_features == 1);
  CHECK(with_matches(1).decision == Decision::Failure);
  CHECK(with_matches(0).decision == Decision::Failure);

  const std::vector<BehaviorReport> two(2, base);
  CHECK_THROWS_AS(evaluate_validity(two, controls), ArityError);
  CHECK_THROWS_AS(evaluate_validity(controls, std::vector<BehaviorReport>(4, base)), ArityError);
}

TEST_CASE("report json round trip and failed-report invariant") {
  const BehaviorReport r{{"b", "a"}, {"k32!f"}, {}, false};
  CHECK(nlohmann::json(r).get<BehaviorReport>() == r);
  CHECK(nlohmann::json(BehaviorReport::failure()).get<BehaviorReport>() == BehaviorReport::failure());
  auto bad = nlohmann::json(r);
  bad["failed"] = true;
  CHECK_THROWS(bad.get<BehaviorReport>());
}

TEST_CASE("fixture cases reproduce their hand-derived verdicts") {
  const fs::path root = AMG_FIXTURE_DIR "/validity";
  const FixtureBackend backend(root.string());
  int cases = 0;
  int expected_valid = 0;
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const auto id = entry.path().filename().string();
    std::ifstream in(entry.path() / "expected.json");
    const auto expected = nlohmann::json::parse(in);
    const auto v = evaluate_validity(backend.observe(id, {}, Role::Control), backend.observe(id, {}, Role::Test));
    INFO(id);
    CHECK(decision_name(v.decision) == expected.at("decision").get<std::string>());
    CHECK(v.matched_features == expected.at("matched_features").get<int>());
    ++cases;
    if (v.decision == Decision::Success) ++expected_valid;
    ids.push_back(id);
  }
  CHECK(cases == 30);

  // The suite tallies the same verdicts when replaying the fixtures by id.
  const auto image = suite_files(1, 3).front().image;
  std::vector<SuiteFile> files;
  for (const auto& id : ids) files.push_back({id, image});
  const auto row = run_validity_suite(files, "fixture", [](const SuiteFile& f, std::size_t) { return pe::serialize(f.image); },
                                      backend);
  CHECK(row.total == 30);
  CHECK(row.valid == expected_valid);

  files.push_back({"no_such_case", image});
  const auto with_missing = run_validity_suite(
      files, "fixture", [](const SuiteFile& f, std::size_t) { return pe::serialize(f.image); }, backend);
  CHECK(with_missing.total == 31);
  CHECK(with_missing.valid == expected_valid);
  CHECK(with_missing.errors.size() == 1);
}

TEST_CASE("structural backend") {
  const auto files = suite_files(100, 71);
  const auto& pool = mods::BenignContentPool::builtin();
  const StructuralBackend backend;

  SUBCASE("break_checksum keeps every file valid") {
    const auto row = run_validity_suite(files, {mods::ActionId::BreakChecksum, 9}, pool, backend);
    CHECK(row.total == 100);
    CHECK(row.valid == 100);
    CHECK(row.action == "break_checksum");
  }
  SUBCASE("every action keeps files valid") {
    for (auto id : mods::kAllActions) {
      const auto row = run_validity_suite(files, {id, 13}, pool, backend);
      INFO(mods::action_name(id));
      CHECK(row.valid == row.total);
    }
  }
  SUBCASE("a corrupting modification is never valid") {
    const auto row = run_validity_suite(
        files, "corrupt",
        [](const SuiteFile& f, std::size_t) {
          auto bytes = pe::serialize(f.image);
          bytes[f.image.dos_header.e_lfanew] = 'X';  // destroy the PE signature
          return bytes;
        },
        backend);
    CHECK(row.valid == 0);
  }
  SUBCASE("three identical rounds") {
    const auto bytes = pe::serialize(files[0].image);
    const auto triple = backend.observe(files[0].id, bytes, Role::Control);
    CHECK(triple[0] == triple[1]);
    CHECK(triple[1] == triple[2]);
    CHECK_FALSE(triple[0].failed);
    CHECK_FALSE(triple[0].processes.empty());
  }
}
