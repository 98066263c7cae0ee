#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "amg/corpus/corpus.hpp"
#include "amg/pe/image.hpp"
#include "amg/random.hpp"

using namespace amg;
using namespace amg::pe;

namespace {

corpus::CorpusSpec small_spec(std::size_t mal, std::size_t ben, std::uint64_t seed) {
  corpus::CorpusSpec spec;
  spec.malicious_count = mal;
  spec.benign_count = ben;
  spec.seed = seed;
  return spec;
}

ErrorKind parse_error_kind(ByteView bytes) {
  try {
    parse(bytes);
  } catch (const PeError& e) {
    return e.kind();
  }
  FAIL("expected a parse error");
  return ErrorKind::InvariantViolation;
}

}  // namespace

TEST_CASE("two-section corpus file parses with matching section count") {
  auto spec = small_spec(0, 1, 11);
  spec.min_sections = spec.max_sections = 2;
  const auto files = corpus::generate(spec);
  const auto img = parse(files.front().bytes);
  CHECK(img.coff.number_of_sections == 2);
  CHECK(img.sections.size() == 2);
  CHECK(img.coff.time_date_stamp == files.front().record.time_date_stamp);
  CHECK((img.optional.checksum == 0) == files.front().record.checksum_zero);
  CHECK(img.source_len == files.front().bytes.size());
}

TEST_CASE("bad magic is NotPe") {
  auto bytes = corpus::generate(small_spec(1, 0, 3)).front().bytes;
  bytes[0] = 0;
  bytes[1] = 0;
  CHECK(parse_error_kind(bytes) == ErrorKind::NotPe);

  auto no_sig = corpus::generate(small_spec(1, 0, 3)).front().bytes;
  const auto lfanew = load_le<std::uint32_t>(no_sig, 60);
  no_sig[lfanew] = 'X';
  CHECK(parse_error_kind(no_sig) == ErrorKind::NotPe);
}

TEST_CASE("file cut inside the section table is Truncated") {
  const auto bytes = corpus::generate(small_spec(1, 0, 5)).front().bytes;
  const auto img = parse(bytes);
  const auto cut = static_cast<std::size_t>(img.section_table_end() - 20);
  CHECK(parse_error_kind(ByteView(bytes).first(cut)) == ErrorKind::Truncated);
  CHECK(parse_error_kind(ByteView(bytes).first(10)) == ErrorKind::Truncated);
}

TEST_CASE("overlapping raw ranges are MalformedSectionTable") {
  auto spec = small_spec(0, 1, 8);
  spec.min_sections = spec.max_sections = 3;
  auto bytes = corpus::generate(spec).front().bytes;
  auto img = parse(bytes);
  // Point section 1 at section 0's data by patching the raw header bytes.
  const std::size_t table = img.section_table_end() - kSectionHeaderSize * img.sections.size();
  store_le<std::uint32_t>(bytes, table + kSectionHeaderSize + 20, img.sections[0].header.pointer_to_raw_data);
  CHECK(parse_error_kind(bytes) == ErrorKind::MalformedSectionTable);
}

TEST_CASE("round trip is byte exact and corpus files are invariant clean") {
  const auto files = corpus::generate(small_spec(60, 60, 21));
  for (const auto& f : files) {
    const auto img = parse(f.bytes);
    const auto diags = check_invariants(img);
    INFO(f.id);
    for (const auto& d : diags) INFO(d.render());
    CHECK(diags.empty());
    CHECK(serialize(img) == f.bytes);
    CHECK(parse(serialize(img)) == img);
  }
}

TEST_CASE("serialize rejects raw size that is not a file-alignment multiple") {
  auto img = parse(corpus::generate(small_spec(1, 0, 4)).front().bytes);
  img.sections[0].header.size_of_raw_data += 1;
  img.sections[0].data.push_back(0);
  try {
    serialize(img);
    FAIL("expected InvariantViolation");
  } catch (const PeError& e) {
    CHECK(e.kind() == ErrorKind::InvariantViolation);
    CHECK(std::string(e.what()).find("size_of_raw_data") != std::string::npos);
  }
}

TEST_CASE("image without overlay ends at the last section") {
  auto spec = small_spec(0, 4, 17);
  spec.benign.p_overlay = 0.0;
  spec.benign.p_certificate = 0.0;
  for (const auto& f : corpus::generate(spec)) {
    const auto img = parse(f.bytes);
    CHECK(img.overlay.empty());
    std::uint64_t last_end = 0;
    for (const auto& s : img.sections) last_end = std::max(last_end, s.raw_end());
    CHECK(serialize(img).size() == last_end);
  }
}

TEST_CASE("check_invariants names the broken rule") {
  auto spec = small_spec(0, 1, 29);
  spec.min_sections = spec.max_sections = 3;
  const auto base = parse(corpus::generate(spec).front().bytes);
  REQUIRE(check_invariants(base).empty());

  SUBCASE("sections out of VA order") {
    auto img = base;
    std::swap(img.sections[0], img.sections[1]);
    const auto diags = check_invariants(img);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].rule.find("ascending order") != std::string::npos);
    CHECK(diags[0].render().rfind("error sections[1].virtual_address:", 0) == 0);
  }
  SUBCASE("size_of_image under-rounded") {
    auto img = base;
    img.optional.size_of_image -= 0x10;
    const auto diags = check_invariants(img);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].field_path == "optional.size_of_image");
    CHECK(diags[0].rule.find("rounded up") != std::string::npos);
  }
  SUBCASE("section count mismatch") {
    auto img = base;
    img.coff.number_of_sections = 7;
    const auto diags = check_invariants(img);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].field_path == "coff.number_of_sections");
  }
  SUBCASE("directory with size but no address") {
    auto img = base;
    img.optional.data_directories[3] = {0, 16};
    const auto diags = check_invariants(img);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].rule == "rva==0 implies size==0");
  }
}

TEST_CASE("imports resolve and ILT matches IAT") {
  auto spec = small_spec(10, 10, 41);
  spec.benign.p_imports = spec.malicious.p_imports = 1.0;
  for (const auto& f : corpus::generate(spec)) {
    const auto img = parse(f.bytes);
    const auto imports = parse_imports(img);
    REQUIRE_FALSE(imports.empty());
    CHECK(imports.front().dll_name == "KERNEL32.dll");
    for (const auto& d : imports) CHECK_FALSE(d.function_names.empty());
  }
}

TEST_CASE("parse is total over mutated and random bytes") {
  const auto files = corpus::generate(small_spec(10, 10, 55));
  Rng rng(99);
  int parsed = 0;
  int rejected = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    Bytes bytes;
    if (trial % 5 == 0) {
      bytes.resize(uniform_int(rng, 0, 2048));
      for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
      if (bytes.size() >= 2 && trial % 10 == 0) {
        bytes[0] = 'M';
        bytes[1] = 'Z';
      }
    } else {
      bytes = files[uniform_int(rng, 0, files.size() - 1)].bytes;
      const auto flips = uniform_int(rng, 1, 8);
      for (std::uint64_t k = 0; k < flips; ++k) {
        // bias mutations toward the headers where structure lives
        const auto limit = std::min<std::size_t>(bytes.size() - 1, trial % 2 ? 1024 : bytes.size() - 1);
        bytes[uniform_int(rng, 0, limit)] = static_cast<std::uint8_t>(rng());
      }
      if (trial % 7 == 0) bytes.resize(uniform_int(rng, 0, bytes.size()));
    }
    try {
      const auto img = parse(bytes);
      (void)check_invariants(img);
      (void)parse_imports(img);
      ++parsed;
    } catch (const PeError&) {
      ++rejected;
    }
  }
  CHECK(parsed + rejected == 3000);
  CHECK(parsed > 0);
  CHECK(rejected > 0);
}

TEST_CASE("checksum routine matches a known fold") {
  const Bytes data = {0x01, 0x00, 0x02, 0x00, 0xAA, 0xAA, 0xBB, 0xBB, 0xFF, 0xFF, 0x03};
  // 0x0001 + 0x0002 + 0xFFFF + 0x0003 = 0x10005 -> folded 0x0006, plus the length 11
  CHECK(compute_checksum(data, 4) == 0x0006 + 11);
}
