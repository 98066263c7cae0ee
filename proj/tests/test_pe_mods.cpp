#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "amg/corpus/corpus.hpp"
#include "amg/mods/actions.hpp"
#include "amg/random.hpp"

using namespace amg;
using namespace amg::mods;
using pe::PeImage;

namespace {

std::vector<corpus::CorpusFile> make_corpus(std::size_t mal, std::size_t ben, std::uint64_t seed) {
  corpus::CorpusSpec spec;
  spec.malicious_count = mal;
  spec.benign_count = ben;
  spec.seed = seed;
  return corpus::generate(spec);
}

const std::vector<PeImage>& sweep_images() {
  static const std::vector<PeImage> images = [] {
    std::vector<PeImage> out;
    for (const auto& f : make_corpus(40, 40, 1234)) out.push_back(pe::parse(f.bytes));
    return out;
  }();
  return images;
}

const BenignContentPool& pool() { return BenignContentPool::builtin(); }

PeImage first_matching(auto pred) {
  for (const auto& img : sweep_images()) {
    if (pred(img)) return img;
  }
  FAIL("no corpus image matches");
  return {};
}

}  // namespace

TEST_CASE("action table has ten members with round-trip names") {
  CHECK(kAllActions.size() == 10);
  for (std::size_t i = 0; i < kActionCount; ++i) {
    CHECK(action_index(kAllActions[i]) == i);
    CHECK(action_from_name(action_name(kAllActions[i])) == kAllActions[i]);
  }
  CHECK_FALSE(action_from_name("upx_pack").has_value());
}

TEST_CASE("builtin pool is valid") {
  CHECK_NOTHROW(pool().validate());
  BenignContentPool empty;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}

TEST_CASE("break_checksum zeroes the field only") {
  auto img = sweep_images().front();
  img.optional.checksum = 0x0001ABCD;
  const auto r = break_checksum(img);
  CHECK(r.outcome == Outcome::Applied);
  CHECK(r.image.optional.checksum == 0);
  CHECK(r.delta_bytes == 0);
  auto expect = img;
  expect.optional.checksum = 0;
  CHECK(r.image == expect);

  const auto again = break_checksum(r.image);
  CHECK(again.outcome == Outcome::Applied);
  CHECK(pe::serialize(again.image) == pe::serialize(r.image));
}

TEST_CASE("append_overlay concatenates one blob") {
  BenignContentPool one = pool();
  one.blobs = {Bytes(256, 0x41)};
  const auto& img = sweep_images()[3];
  const auto before = pe::serialize(img);
  const auto r = append_overlay(img, one, 5);
  const auto after = pe::serialize(r.image);
  CHECK(after.size() == before.size() + 256);
  CHECK(std::equal(before.begin(), before.end(), after.begin()));
  CHECK(r.delta_bytes == 256);
  CHECK(pe::serialize(append_overlay(img, pool(), 77).image) == pe::serialize(append_overlay(img, pool(), 77).image));
}

TEST_CASE("remove_debug clears the directory in place") {
  const auto img = first_matching([](const PeImage& i) { return i.optional.directory(pe::kDebugDirectory).present(); });
  const auto r = remove_debug(img);
  CHECK(r.outcome == Outcome::Applied);
  CHECK_FALSE(r.image.optional.directory(pe::kDebugDirectory).present());
  CHECK(r.delta_bytes == 0);
  CHECK(pe::serialize(r.image).size() == pe::serialize(img).size());
  // Non-debug fields are untouched.
  CHECK(r.image.coff == img.coff);
  CHECK(r.image.overlay == img.overlay);
  for (std::size_t i = 0; i < img.sections.size(); ++i) CHECK(r.image.sections[i].header == img.sections[i].header);
  for (std::size_t d = 0; d < img.optional.data_directories.size(); ++d) {
    if (d != pe::kDebugDirectory) CHECK(r.image.optional.data_directories[d] == img.optional.data_directories[d]);
  }
  CHECK(pe::check_invariants(r.image).empty());

  const auto no_debug = first_matching([](const PeImage& i) { return !i.optional.directory(pe::kDebugDirectory).present(); });
  const auto noop = remove_debug(no_debug);
  CHECK(noop.outcome == Outcome::NoOp);
  CHECK(noop.image == no_debug);
}

TEST_CASE("remove_certificate shrinks the file by the certificate size") {
  auto img = first_matching([](const PeImage& i) { return !i.optional.directory(pe::kSecurityDirectory).present(); });
  const auto offset = img.serialized_size();
  Bytes cert(512, 0x5A);
  img.overlay.insert(img.overlay.end(), cert.begin(), cert.end());
  img.optional.data_directories[pe::kSecurityDirectory] = {static_cast<std::uint32_t>(offset), 512};
  REQUIRE(pe::check_invariants(img).empty());
  const auto r = remove_certificate(img);
  CHECK(r.outcome == Outcome::Applied);
  CHECK(r.delta_bytes == -512);
  CHECK_FALSE(r.image.optional.directory(pe::kSecurityDirectory).present());

  const auto noop = remove_certificate(r.image);
  CHECK(noop.outcome == Outcome::NoOp);
  CHECK(noop.delta_bytes == 0);
}

TEST_CASE("add_new_section uses header slack and relocates the overlay") {
  const auto img = first_matching([](const PeImage& i) {
    return i.header_slack() >= 40 && i.optional.directory(pe::kSecurityDirectory).present() && i.overlay.size() > 0;
  });
  const auto r = add_new_section(img, pool(), 9);
  REQUIRE(r.outcome == Outcome::Applied);
  CHECK(r.image.sections.size() == img.sections.size() + 1);
  CHECK(r.image.coff.number_of_sections == img.coff.number_of_sections + 1);
  CHECK(pe::check_invariants(r.image).empty());
  CHECK(r.image.overlay == img.overlay);
  const auto old_sec = img.optional.directory(pe::kSecurityDirectory);
  const auto new_sec = r.image.optional.directory(pe::kSecurityDirectory);
  CHECK(new_sec.size == old_sec.size);
  CHECK(new_sec.rva - old_sec.rva == r.image.data_end() - img.data_end());
  // The certificate bytes sit at the re-pointed offset.
  const auto before = pe::serialize(img);
  const auto after = pe::serialize(r.image);
  CHECK(std::equal(before.begin() + old_sec.rva, before.begin() + old_sec.rva + old_sec.size, after.begin() + new_sec.rva));
  CHECK(r.delta_bytes == static_cast<std::int64_t>(after.size() - before.size()));

  const auto tight = first_matching([](const PeImage& i) { return i.header_slack() < 40; });
  const auto failed = add_new_section(tight, pool(), 9);
  CHECK(failed.outcome == Outcome::Failed);
  CHECK(failed.image == tight);
  CHECK(failed.delta_bytes == 0);
}

TEST_CASE("append_to_section fills the virtual tail") {
  auto img = first_matching([](const PeImage& i) {
    return std::all_of(i.sections.begin(), i.sections.end(),
                       [](const pe::Section& s) { return s.header.virtual_size <= s.header.size_of_raw_data; });
  });
  CHECK(append_to_section(img, pool(), 1).outcome == Outcome::Failed);

  // Last section: virtual 0x1200 over raw 0x1000 grows by exactly 0x200.
  auto& last = img.sections.back();
  last.data.resize(0x1000, 0x11);
  last.header.size_of_raw_data = 0x1000;
  last.header.virtual_size = 0x1200;
  img.optional.size_of_image = static_cast<std::uint32_t>(
      align_up(last.header.virtual_address + 0x1200, img.optional.section_alignment));
  if (img.optional.directory(pe::kSecurityDirectory).present()) img.optional.data_directories[pe::kSecurityDirectory] = {};
  img.overlay.clear();
  REQUIRE(pe::check_invariants(img).empty());
  const auto r = append_to_section(img, pool(), 3);
  REQUIRE(r.outcome == Outcome::Applied);
  CHECK(r.image.sections.back().header.size_of_raw_data == 0x1200);
  CHECK(r.delta_bytes == 0x200);
  CHECK(r.detail.rfind("extend", 0) == 0);
  CHECK(r.image.optional.address_of_entry_point == img.optional.address_of_entry_point);
  CHECK(pe::check_invariants(r.image).empty());
}

TEST_CASE("append_to_section gap-fill keeps the file length") {
  const auto img = first_matching([](const PeImage& i) {
    for (std::size_t k = 0; k + 1 < i.sections.size(); ++k) {
      const auto& h = i.sections[k].header;
      if (h.virtual_size > h.size_of_raw_data && i.sections[k + 1].header.pointer_to_raw_data > i.sections[k].raw_end()) {
        return std::count_if(i.sections.begin(), i.sections.end(), [](const pe::Section& s) {
                 return s.header.virtual_size > s.header.size_of_raw_data;
               }) == 1;
      }
    }
    return false;
  });
  const auto r = append_to_section(img, pool(), 8);
  REQUIRE(r.outcome == Outcome::Applied);
  CHECK(r.detail.rfind("gap-fill", 0) == 0);
  CHECK(r.delta_bytes == 0);
  CHECK(pe::serialize(r.image).size() == pe::serialize(img).size());
  CHECK(pe::check_invariants(r.image).empty());
}

TEST_CASE("rename_section rewrites only the eight name bytes") {
  auto img = sweep_images()[5];
  img.sections[0].header.set_name(".xyz");
  BenignContentPool text_only = pool();
  text_only.section_names = {".text"};
  const auto r = rename_section(img, text_only, 4);
  REQUIRE(r.outcome == Outcome::Applied);
  bool renamed = false;
  for (const auto& s : r.image.sections) renamed |= s.header.name_string() == ".text";
  CHECK(renamed);

  for (const auto& base : sweep_images()) {
    const auto out = rename_section(base, pool(), 21);
    const auto a = pe::serialize(base);
    const auto b = pe::serialize(out.image);
    REQUIRE(a.size() == b.size());
    const auto table = base.section_table_end() - pe::kSectionHeaderSize * base.sections.size();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == b[i]) continue;
      const bool in_name = i >= table && i < base.section_table_end() && (i - table) % pe::kSectionHeaderSize < 8;
      CHECK(in_name);
    }
  }

  PeImage single = sweep_images()[0];
  for (auto& s : single.sections) s.header.set_name(".text");
  const auto same = rename_section(single, text_only, 2);
  CHECK(same.outcome == Outcome::Applied);
  CHECK(same.image == single);
}

TEST_CASE("timestamp shifts by 500 days and saturates") {
  auto img = sweep_images()[0];
  img.coff.time_date_stamp = 100'000'000;
  CHECK(increase_timestamp(img).image.coff.time_date_stamp == 143'200'000u);
  CHECK(decrease_timestamp(increase_timestamp(img).image).image.coff.time_date_stamp == 100'000'000u);
  img.coff.time_date_stamp = 10;
  CHECK(decrease_timestamp(img).image.coff.time_date_stamp == 0u);
  img.coff.time_date_stamp = 0xFFFFFFF0u;
  CHECK(increase_timestamp(img).image.coff.time_date_stamp == 0xFFFFFFFFu);
  CHECK(kTimestampShift == 43'200'000u);
}

TEST_CASE("append_new_import rebuilds the descriptor table") {
  const auto two = first_matching([](const PeImage& i) {
    return i.header_slack() >= 40 && i.optional.directory(pe::kImportDirectory).present() && pe::parse_imports(i).size() == 2;
  });
  const auto r = append_new_import(two, pool(), 6);
  REQUIRE(r.outcome == Outcome::Applied);
  const auto imports = pe::parse_imports(r.image);
  CHECK(imports.size() == 3);
  CHECK(r.image.optional.directory(pe::kImportDirectory).size == 4 * pe::kImportDescriptorSize);
  CHECK(pe::check_invariants(r.image).empty());
  // Original import bytes are untouched.
  for (std::size_t i = 0; i < two.sections.size(); ++i) CHECK(r.image.sections[i].data == two.sections[i].data);

  auto none = two;
  none.optional.data_directories[pe::kImportDirectory] = {};
  none.optional.data_directories[pe::kIatDirectory] = {};
  const auto fresh = append_new_import(none, pool(), 6);
  REQUIRE(fresh.outcome == Outcome::Applied);
  CHECK(pe::parse_imports(fresh.image).size() == 1);
  CHECK(fresh.image.optional.directory(pe::kImportDirectory).size == 2 * pe::kImportDescriptorSize);

  const auto tight = first_matching([](const PeImage& i) { return i.header_slack() < 40; });
  CHECK(append_new_import(tight, pool(), 6).outcome == Outcome::Failed);
}

TEST_CASE("every action is total, structurally safe, deterministic and size-monotone") {
  Rng rng(2024);
  for (const auto& img : sweep_images()) {
    const auto diags_before = pe::check_invariants(img);
    REQUIRE(diags_before.empty());
    for (auto id : kAllActions) {
      const ModificationAction action{id, rng()};
      const auto r = apply(img, action, pool());
      INFO(action_name(id), " ", r.detail);
      if (r.outcome == Outcome::Applied) {
        CHECK(pe::check_invariants(r.image).empty());
        const auto bytes = pe::serialize(r.image);
        CHECK(pe::parse(bytes) == r.image);
        CHECK(static_cast<std::int64_t>(bytes.size()) - static_cast<std::int64_t>(img.serialized_size()) == r.delta_bytes);
      } else {
        CHECK(r.image == img);
        CHECK(r.delta_bytes == 0);
      }
      if (id != ActionId::RemoveCertificate) CHECK(r.delta_bytes >= 0);
      const auto again = apply(img, action, pool());
      CHECK(again.outcome == r.outcome);
      CHECK(again.image == r.image);
      if (id == ActionId::AddNewSection || id == ActionId::AppendNewImport) {
        CHECK((r.outcome == Outcome::Failed) == (img.header_slack() < 40));
      }
      if (id == ActionId::AppendToSection) {
        const bool candidate = std::any_of(img.sections.begin(), img.sections.end(), [](const pe::Section& s) {
          return s.header.virtual_size > s.header.size_of_raw_data && s.has_raw_data();
        });
        CHECK((r.outcome == Outcome::Failed) == !candidate);
      }
      if (r.outcome == Outcome::Failed) {
        CHECK((id == ActionId::AddNewSection || id == ActionId::AppendNewImport || id == ActionId::AppendToSection));
      }
    }
  }
}

TEST_CASE("declared idempotent actions") {
  for (const auto& img : sweep_images()) {
    for (auto fn : {&break_checksum, &remove_debug, &remove_certificate}) {
      const auto once = fn(img).image;
      CHECK(fn(once).image == once);
    }
  }
}

TEST_CASE("chained actions keep images valid") {
  Rng rng(77);
  for (std::size_t f = 0; f < 20; ++f) {
    auto img = sweep_images()[f];
    for (int step = 0; step < 30; ++step) {
      const auto id = kAllActions[uniform_int(rng, 0, kActionCount - 1)];
      const auto r = apply(img, {id, rng()}, pool());
      INFO(action_name(id), " ", r.detail);
      REQUIRE(pe::check_invariants(r.image).empty());
      img = pe::parse(pe::serialize(r.image));
    }
  }
}
