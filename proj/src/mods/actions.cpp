#include "amg/mods/actions.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

#include "amg/pe/import_builder.hpp"
#include "amg/random.hpp"

namespace amg::mods {

namespace {

using pe::PeImage;

constexpr std::uint32_t kNewSectionCharacteristics = 0x40000040;  // initialized data, readable
constexpr std::uint32_t kImportSectionCharacteristics = 0xC0000040;

ModResult unchanged(const PeImage& img, Outcome outcome, std::string detail) {
  return {outcome, img, 0, std::move(detail)};
}

ModResult applied(const PeImage& before, PeImage after, std::string detail = {}) {
  const auto delta = static_cast<std::int64_t>(after.serialized_size()) -
                     static_cast<std::int64_t>(before.serialized_size());
  return {Outcome::Applied, std::move(after), delta, std::move(detail)};
}

const Bytes& pick_blob(const BenignContentPool& pool, Rng& rng) {
  return pool.blobs[uniform_int(rng, 0, pool.blobs.size() - 1)];
}

/// `len` bytes of benign content: consecutive blobs starting at a random one.
Bytes benign_fill(const BenignContentPool& pool, Rng& rng, std::size_t len) {
  Bytes out;
  out.reserve(len);
  std::size_t at = uniform_int(rng, 0, pool.blobs.size() - 1);
  while (out.size() < len) {
    const auto& blob = pool.blobs[at];
    const auto take = std::min(blob.size(), len - out.size());
    out.insert(out.end(), blob.begin(), blob.begin() + static_cast<std::ptrdiff_t>(take));
    at = (at + 1) % pool.blobs.size();
  }
  return out;
}

/// Re-points structures that address the overlay by raw file offset after the
/// overlay moved by `delta` bytes.
void shift_overlay_references(PeImage& img, std::uint64_t old_overlay_start, std::int64_t delta) {
  auto& dirs = img.optional.data_directories;
  if (pe::kSecurityDirectory < dirs.size()) {
    auto& sec = dirs[pe::kSecurityDirectory];
    if (sec.present() && sec.rva >= old_overlay_start) {
      sec.rva = static_cast<std::uint32_t>(static_cast<std::int64_t>(sec.rva) + delta);
    }
  }
  const auto debug = img.optional.directory(pe::kDebugDirectory);
  if (!debug.present()) return;
  for (std::size_t i = 0; i < debug.size / pe::kDebugDirectoryEntrySize; ++i) {
    const auto off = pe::rva_to_offset(img, static_cast<std::uint32_t>(debug.rva + i * pe::kDebugDirectoryEntrySize));
    if (!off) continue;
    auto entry = pe::mutable_range(img, *off, pe::kDebugDirectoryEntrySize);
    if (!entry) continue;
    const auto ptr = load_le<std::uint32_t>(*entry, 24);
    if (ptr >= old_overlay_start) {
      store_le<std::uint32_t>(*entry, 24, static_cast<std::uint32_t>(static_cast<std::int64_t>(ptr) + delta));
    }
  }
}

std::uint64_t virtual_end(const PeImage& img) {
  // Headers may grow by one table slot before the new section is placed.
  std::uint64_t end = std::max<std::uint64_t>(
      img.optional.size_of_headers,
      align_up(img.section_table_end() + pe::kSectionHeaderSize, img.optional.file_alignment));
  for (const auto& s : img.sections) {
    const auto& h = s.header;
    end = std::max<std::uint64_t>(end, std::uint64_t{h.virtual_address} + std::max(h.virtual_size, h.size_of_raw_data));
  }
  return end;
}

std::uint32_t next_section_rva(const PeImage& img) {
  return static_cast<std::uint32_t>(align_up(virtual_end(img), img.optional.section_alignment));
}

/// Writes one more section header into the header slack and appends its data
/// after the last section, moving the overlay behind it. Caller checks slack.
void append_section(PeImage& img, const std::string& name, Bytes content, std::uint32_t characteristics) {
  auto& opt = img.optional;
  const auto table_end = img.section_table_end();
  const auto new_table_end = table_end + pe::kSectionHeaderSize;
  for (auto it = img.gaps.begin(); it != img.gaps.end(); ++it) {
    if (it->offset != table_end) continue;
    const auto take = std::min<std::size_t>(it->bytes.size(), pe::kSectionHeaderSize);
    it->bytes.erase(it->bytes.begin(), it->bytes.begin() + static_cast<std::ptrdiff_t>(take));
    it->offset += static_cast<std::uint32_t>(take);
    if (it->bytes.empty()) img.gaps.erase(it);
    break;
  }
  if (new_table_end > opt.size_of_headers) {
    opt.size_of_headers = static_cast<std::uint32_t>(align_up(new_table_end, opt.file_alignment));
  }

  const auto old_data_end = img.data_end();
  const auto pointer = align_up(old_data_end, opt.file_alignment);
  if (pointer > old_data_end) {
    img.gaps.push_back({static_cast<std::uint32_t>(old_data_end), Bytes(pointer - old_data_end, 0)});
  }
  pe::Section s;
  s.header.set_name(name);
  s.header.virtual_address = next_section_rva(img);
  s.header.virtual_size = static_cast<std::uint32_t>(content.size());
  s.header.size_of_raw_data = static_cast<std::uint32_t>(align_up(content.size(), opt.file_alignment));
  s.header.pointer_to_raw_data = static_cast<std::uint32_t>(pointer);
  s.header.characteristics = characteristics;
  content.resize(s.header.size_of_raw_data, 0);
  s.data = std::move(content);
  const auto image_end = align_up(std::uint64_t{s.header.virtual_address} + s.header.virtual_size, opt.section_alignment);
  img.sections.push_back(std::move(s));
  img.coff.number_of_sections = static_cast<std::uint16_t>(img.sections.size());
  opt.size_of_image = static_cast<std::uint32_t>(std::max<std::uint64_t>(opt.size_of_image, image_end));
  shift_overlay_references(img, old_data_end, static_cast<std::int64_t>(img.data_end() - old_data_end));
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string_view action_name(ActionId id) {
  switch (id) {
    case ActionId::BreakChecksum: return "break_checksum";
    case ActionId::AppendOverlay: return "append_overlay";
    case ActionId::RemoveDebug: return "remove_debug";
    case ActionId::RemoveCertificate: return "remove_certificate";
    case ActionId::AddNewSection: return "add_new_section";
    case ActionId::AppendToSection: return "append_to_section";
    case ActionId::RenameSection: return "rename_section";
    case ActionId::IncreaseTimestamp: return "increase_timestamp";
    case ActionId::DecreaseTimestamp: return "decrease_timestamp";
    case ActionId::AppendNewImport: return "append_new_import";
  }
  return "unknown";
}

std::optional<ActionId> action_from_name(std::string_view name) {
  for (auto id : kAllActions) {
    if (action_name(id) == name) return id;
  }
  return std::nullopt;
}

std::string_view outcome_name(Outcome outcome) {
  switch (outcome) {
    case Outcome::Applied: return "applied";
    case Outcome::NoOp: return "noop";
    case Outcome::Failed: return "failed";
  }
  return "unknown";
}

ModResult break_checksum(const PeImage& img) {
  PeImage out = img;
  out.optional.checksum = 0;
  return applied(img, std::move(out));
}

ModResult append_overlay(const PeImage& img, const BenignContentPool& pool, std::uint64_t seed) {
  Rng rng(seed);
  const auto& blob = pick_blob(pool, rng);
  PeImage out = img;
  out.overlay.insert(out.overlay.end(), blob.begin(), blob.end());
  return applied(img, std::move(out));
}

ModResult remove_debug(const PeImage& img) {
  const auto dir = img.optional.directory(pe::kDebugDirectory);
  if (!dir.present()) return unchanged(img, Outcome::NoOp, "no debug directory");
  PeImage out = img;
  for (const auto& entry : pe::parse_debug_entries(img)) {
    if (entry.size_of_data == 0) continue;
    if (auto data = pe::mutable_range(out, entry.pointer_to_raw_data, entry.size_of_data)) {
      std::fill(data->begin(), data->end(), 0);
    }
  }
  if (const auto off = pe::rva_to_offset(img, dir.rva)) {
    if (auto table = pe::mutable_range(out, *off, dir.size)) std::fill(table->begin(), table->end(), 0);
  }
  out.optional.data_directories[pe::kDebugDirectory] = {};
  return applied(img, std::move(out));
}

ModResult remove_certificate(const PeImage& img) {
  const auto dir = img.optional.directory(pe::kSecurityDirectory);
  if (!dir.present()) return unchanged(img, Outcome::NoOp, "no certificate");
  const auto overlay_start = img.data_end();
  if (dir.rva < overlay_start || std::uint64_t{dir.rva} + dir.size > overlay_start + img.overlay.size()) {
    return unchanged(img, Outcome::Failed, "certificate table outside the overlay");
  }
  PeImage out = img;
  const auto begin = out.overlay.begin() + static_cast<std::ptrdiff_t>(dir.rva - overlay_start);
  out.overlay.erase(begin, begin + dir.size);
  out.optional.data_directories[pe::kSecurityDirectory] = {};
  return applied(img, std::move(out));
}

ModResult add_new_section(const PeImage& img, const BenignContentPool& pool, std::uint64_t seed) {
  if (img.header_slack() < kSectionHeaderSlack) {
    return unchanged(img, Outcome::Failed, "header slack below 40 bytes");
  }
  Rng rng(seed);
  const auto name = pool.section_names[uniform_int(rng, 0, pool.section_names.size() - 1)];
  Bytes content = pick_blob(pool, rng);
  PeImage out = img;
  append_section(out, name, std::move(content), kNewSectionCharacteristics);
  return applied(img, std::move(out));
}

ModResult append_to_section(const PeImage& img, const BenignContentPool& pool, std::uint64_t seed) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < img.sections.size(); ++i) {
    const auto& h = img.sections[i].header;
    if (h.virtual_size > h.size_of_raw_data && img.sections[i].has_raw_data()) candidates.push_back(i);
  }
  if (candidates.empty()) return unchanged(img, Outcome::Failed, "no section with virtual_size > size_of_raw_data");
  Rng rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  const auto fa = img.optional.file_alignment;

  for (auto idx : candidates) {
    const auto& s = img.sections[idx];
    const auto raw_end = s.raw_end();
    std::optional<std::uint64_t> next_start;
    for (const auto& other : img.sections) {
      if (other.has_raw_data() && other.header.pointer_to_raw_data >= raw_end &&
          (!next_start || other.header.pointer_to_raw_data < *next_start)) {
        next_start = other.header.pointer_to_raw_data;
      }
    }
    const std::uint64_t wanted = align_up(s.header.virtual_size, fa) - s.header.size_of_raw_data;
    const std::uint64_t room = next_start ? *next_start - raw_end : std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t grow = std::min(wanted, room) / fa * fa;
    if (grow == 0) continue;

    PeImage out = img;
    auto& target = out.sections[idx];
    const auto fill = benign_fill(pool, rng, grow);
    target.data.insert(target.data.end(), fill.begin(), fill.end());
    target.header.size_of_raw_data += static_cast<std::uint32_t>(grow);
    if (next_start) {
      // Gap-fill: the section absorbs unused file bytes; nothing moves.
      for (auto it = out.gaps.begin(); it != out.gaps.end(); ++it) {
        if (it->offset != raw_end) continue;
        it->bytes.erase(it->bytes.begin(), it->bytes.begin() + static_cast<std::ptrdiff_t>(grow));
        it->offset += static_cast<std::uint32_t>(grow);
        if (it->bytes.empty()) out.gaps.erase(it);
        break;
      }
      return applied(img, std::move(out), "gap-fill " + std::to_string(grow) + " bytes in section " + std::to_string(idx));
    }
    // Extend: the last section grows and the overlay moves behind it.
    shift_overlay_references(out, raw_end, static_cast<std::int64_t>(grow));
    return applied(img, std::move(out), "extend " + std::to_string(grow) + " bytes in section " + std::to_string(idx));
  }
  return unchanged(img, Outcome::NoOp, "no candidate section has room to grow");
}

ModResult rename_section(const PeImage& img, const BenignContentPool& pool, std::uint64_t seed) {
  if (img.sections.empty()) return unchanged(img, Outcome::Failed, "no sections");
  Rng rng(seed);
  const auto idx = uniform_int(rng, 0, img.sections.size() - 1);
  const auto& name = pool.section_names[uniform_int(rng, 0, pool.section_names.size() - 1)];
  PeImage out = img;
  out.sections[idx].header.set_name(name);
  return applied(img, std::move(out), "section " + std::to_string(idx) + " -> " + name);
}

ModResult increase_timestamp(const PeImage& img) {
  PeImage out = img;
  const std::uint64_t stamp = std::uint64_t{img.coff.time_date_stamp} + kTimestampShift;
  out.coff.time_date_stamp = static_cast<std::uint32_t>(std::min<std::uint64_t>(stamp, 0xFFFFFFFFu));
  return applied(img, std::move(out));
}

ModResult decrease_timestamp(const PeImage& img) {
  PeImage out = img;
  const auto stamp = img.coff.time_date_stamp;
  out.coff.time_date_stamp = stamp > kTimestampShift ? stamp - kTimestampShift : 0;
  return applied(img, std::move(out));
}

ModResult append_new_import(const PeImage& img, const BenignContentPool& pool, std::uint64_t seed) {
  if (img.header_slack() < kSectionHeaderSlack) {
    return unchanged(img, Outcome::Failed, "header slack below 40 bytes");
  }
  std::vector<Bytes> existing;
  std::vector<std::string> imported;
  if (img.optional.directory(pe::kImportDirectory).present()) {
    try {
      for (const auto& d : pe::parse_imports(img)) imported.push_back(d.dll_name);
    } catch (const pe::PeError&) {
      return unchanged(img, Outcome::Failed, "existing import table unresolvable");
    }
    const auto idt = img.optional.directory(pe::kImportDirectory).rva;
    for (std::size_t i = 0; i < imported.size(); ++i) {
      existing.push_back(*pe::read_rva(img, static_cast<std::uint32_t>(idt + i * pe::kImportDescriptorSize),
                                       pe::kImportDescriptorSize));
    }
  }

  Rng rng(seed);
  std::vector<std::string> fresh;
  for (const auto& [dll, fns] : pool.dll_catalog) {
    const bool already = std::any_of(imported.begin(), imported.end(), [&](const std::string& d) { return iequals(d, dll); });
    if (!already) fresh.push_back(dll);
  }
  std::vector<std::string> choices = fresh;
  if (choices.empty()) {
    for (const auto& [dll, fns] : pool.dll_catalog) choices.push_back(dll);
  }
  const auto& dll = choices[uniform_int(rng, 0, choices.size() - 1)];
  auto fns = pool.dll_catalog.at(dll);
  std::shuffle(fns.begin(), fns.end(), rng);
  fns.resize(std::min<std::size_t>(fns.size(), uniform_int(rng, 1, 3)));

  PeImage out = img;
  const auto rva = next_section_rva(out);
  const auto blob = pe::build_import_table(rva, existing, {{dll, fns}}, out.optional.is_pe32_plus());
  append_section(out, ".idata", blob.bytes, kImportSectionCharacteristics);
  out.optional.data_directories[pe::kImportDirectory] = {blob.idt_rva, blob.idt_size};
  return applied(img, std::move(out), "import " + dll);
}

ModResult apply(const PeImage& img, const ModificationAction& action, const BenignContentPool& pool) {
  switch (action.id) {
    case ActionId::BreakChecksum: return break_checksum(img);
    case ActionId::AppendOverlay: return append_overlay(img, pool, action.rng_seed);
    case ActionId::RemoveDebug: return remove_debug(img);
    case ActionId::RemoveCertificate: return remove_certificate(img);
    case ActionId::AddNewSection: return add_new_section(img, pool, action.rng_seed);
    case ActionId::AppendToSection: return append_to_section(img, pool, action.rng_seed);
    case ActionId::RenameSection: return rename_section(img, pool, action.rng_seed);
    case ActionId::IncreaseTimestamp: return increase_timestamp(img);
    case ActionId::DecreaseTimestamp: return decrease_timestamp(img);
    case ActionId::AppendNewImport: return append_new_import(img, pool, action.rng_seed);
  }
  return unchanged(img, Outcome::Failed, "unknown action");
}

}  // namespace amg::mods
