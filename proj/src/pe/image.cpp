#include "amg/pe/image.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

namespace amg {

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, ByteView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

}  // namespace amg

namespace amg::pe {

namespace {

// Offsets of modeled fields inside the fixed optional header.
constexpr std::size_t kOptSizeOfCode = 4;
constexpr std::size_t kOptEntryPoint = 16;
constexpr std::size_t kOptSectionAlignment = 32;
constexpr std::size_t kOptFileAlignment = 36;
constexpr std::size_t kOptSizeOfImage = 56;
constexpr std::size_t kOptSizeOfHeaders = 60;
constexpr std::size_t kOptCheckSum = 64;
constexpr std::size_t kOptRvaCount32 = 92;
constexpr std::size_t kOptRvaCount64 = 108;

std::size_t rva_count_offset(std::uint16_t magic) {
  return magic == kPe32PlusMagic ? kOptRvaCount64 : kOptRvaCount32;
}

void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) throw PeError(kind, what);
}

}  // namespace

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotPe: return "NotPe";
    case ErrorKind::Truncated: return "Truncated";
    case ErrorKind::MalformedSectionTable: return "MalformedSectionTable";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

PeError::PeError(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

std::size_t optional_fixed_size(std::uint16_t magic) { return magic == kPe32PlusMagic ? 112 : 96; }

std::string SectionHeader::name_string() const {
  std::string out;
  for (auto c : name) {
    if (c == 0) break;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

void SectionHeader::set_name(const std::string& value) {
  name.fill(0);
  std::copy_n(value.begin(), std::min<std::size_t>(value.size(), name.size()), name.begin());
}

std::uint64_t PeImage::section_table_end() const {
  return std::uint64_t{dos_header.e_lfanew} + 4 + kCoffHeaderSize + coff.size_of_optional_header +
         kSectionHeaderSize * sections.size();
}

std::uint64_t PeImage::data_end() const {
  std::uint64_t end = section_table_end();
  for (const auto& s : sections) {
    if (s.has_raw_data()) end = std::max(end, s.raw_end());
  }
  for (const auto& g : gaps) end = std::max<std::uint64_t>(end, g.offset + g.bytes.size());
  return end;
}

std::uint64_t PeImage::first_data_offset() const {
  std::optional<std::uint64_t> first;
  for (const auto& s : sections) {
    if (!s.has_raw_data()) continue;
    if (!first || s.header.pointer_to_raw_data < *first) first = s.header.pointer_to_raw_data;
  }
  return first.value_or(optional.size_of_headers);
}

std::uint64_t PeImage::header_slack() const {
  const auto end = section_table_end();
  const auto first = first_data_offset();
  return first > end ? first - end : 0;
}

bool PeImage::operator==(const PeImage& other) const {
  return dos_header == other.dos_header && dos_stub == other.dos_stub && coff == other.coff &&
         optional == other.optional && sections == other.sections && gaps == other.gaps &&
         overlay == other.overlay;
}

PeImage parse(ByteView raw) {
  require(raw.size() >= kDosHeaderSize, ErrorKind::Truncated, "file shorter than the DOS header");
  PeImage img;
  img.source_len = raw.size();
  img.dos_header.e_magic = load_le<std::uint16_t>(raw, 0);
  require(img.dos_header.e_magic == kDosMagic, ErrorKind::NotPe, "bad e_magic");
  std::copy_n(raw.begin() + 2, img.dos_header.reserved_fields.size(),
              img.dos_header.reserved_fields.begin());
  img.dos_header.e_lfanew = load_le<std::uint32_t>(raw, 60);
  const std::uint64_t pe_off = img.dos_header.e_lfanew;
  require(pe_off >= kDosHeaderSize, ErrorKind::NotPe, "e_lfanew points inside the DOS header");
  require(pe_off + 4 <= raw.size(), ErrorKind::Truncated, "e_lfanew beyond end of file");
  require(load_le<std::uint32_t>(raw, pe_off) == kPeSignature, ErrorKind::NotPe,
          "missing PE signature");
  img.dos_stub.assign(raw.begin() + kDosHeaderSize, raw.begin() + static_cast<std::ptrdiff_t>(pe_off));

  const std::uint64_t coff_off = pe_off + 4;
  require(coff_off + kCoffHeaderSize <= raw.size(), ErrorKind::Truncated, "COFF header truncated");
  auto& coff = img.coff;
  coff.machine = load_le<std::uint16_t>(raw, coff_off);
  coff.number_of_sections = load_le<std::uint16_t>(raw, coff_off + 2);
  coff.time_date_stamp = load_le<std::uint32_t>(raw, coff_off + 4);
  coff.pointer_to_symbol_table = load_le<std::uint32_t>(raw, coff_off + 8);
  coff.number_of_symbols = load_le<std::uint32_t>(raw, coff_off + 12);
  coff.size_of_optional_header = load_le<std::uint16_t>(raw, coff_off + 16);
  coff.characteristics = load_le<std::uint16_t>(raw, coff_off + 18);

  const std::uint64_t opt_off = coff_off + kCoffHeaderSize;
  require(opt_off + coff.size_of_optional_header <= raw.size(), ErrorKind::Truncated,
          "optional header truncated");
  require(coff.size_of_optional_header >= 2, ErrorKind::NotPe, "optional header too small");
  auto& opt = img.optional;
  opt.magic = load_le<std::uint16_t>(raw, opt_off);
  require(opt.magic == kPe32Magic || opt.magic == kPe32PlusMagic, ErrorKind::NotPe,
          "unknown optional header magic");
  const std::size_t fixed = optional_fixed_size(opt.magic);
  require(coff.size_of_optional_header >= fixed, ErrorKind::NotPe,
          "optional header shorter than its fixed fields");
  auto opt_bytes = raw.subspan(opt_off, coff.size_of_optional_header);
  opt.fixed_bytes.assign(opt_bytes.begin(), opt_bytes.begin() + static_cast<std::ptrdiff_t>(fixed));
  opt.size_of_code = load_le<std::uint32_t>(opt_bytes, kOptSizeOfCode);
  opt.address_of_entry_point = load_le<std::uint32_t>(opt_bytes, kOptEntryPoint);
  opt.section_alignment = load_le<std::uint32_t>(opt_bytes, kOptSectionAlignment);
  opt.file_alignment = load_le<std::uint32_t>(opt_bytes, kOptFileAlignment);
  opt.size_of_image = load_le<std::uint32_t>(opt_bytes, kOptSizeOfImage);
  opt.size_of_headers = load_le<std::uint32_t>(opt_bytes, kOptSizeOfHeaders);
  opt.checksum = load_le<std::uint32_t>(opt_bytes, kOptCheckSum);
  opt.number_of_rva_and_sizes = load_le<std::uint32_t>(opt_bytes, rva_count_offset(opt.magic));
  // Modeled slots are blanked so the typed fields are the only source of truth.
  for (std::size_t at : {kOptSizeOfCode, kOptEntryPoint, kOptSectionAlignment, kOptFileAlignment,
                         kOptSizeOfImage, kOptSizeOfHeaders, kOptCheckSum, rva_count_offset(opt.magic)}) {
    store_le<std::uint32_t>(opt.fixed_bytes, at, 0);
  }
  store_le<std::uint16_t>(opt.fixed_bytes, 0, 0);
  const std::size_t dir_room = (opt_bytes.size() - fixed) / kDataDirectorySize;
  const std::size_t dir_count = std::min<std::size_t>(opt.number_of_rva_and_sizes, dir_room);
  for (std::size_t i = 0; i < dir_count; ++i) {
    const std::size_t at = fixed + i * kDataDirectorySize;
    opt.data_directories.push_back(
        {load_le<std::uint32_t>(opt_bytes, at), load_le<std::uint32_t>(opt_bytes, at + 4)});
  }
  const std::size_t trailing_at = fixed + dir_count * kDataDirectorySize;
  opt.trailing_bytes.assign(opt_bytes.begin() + static_cast<std::ptrdiff_t>(trailing_at), opt_bytes.end());

  const std::uint64_t table_off = opt_off + coff.size_of_optional_header;
  const std::uint64_t table_end = table_off + kSectionHeaderSize * coff.number_of_sections;
  require(table_end <= raw.size(), ErrorKind::Truncated, "section table truncated");
  for (std::size_t i = 0; i < coff.number_of_sections; ++i) {
    const std::uint64_t at = table_off + i * kSectionHeaderSize;
    Section s;
    auto& h = s.header;
    std::copy_n(raw.begin() + static_cast<std::ptrdiff_t>(at), 8, h.name.begin());
    h.virtual_size = load_le<std::uint32_t>(raw, at + 8);
    h.virtual_address = load_le<std::uint32_t>(raw, at + 12);
    h.size_of_raw_data = load_le<std::uint32_t>(raw, at + 16);
    h.pointer_to_raw_data = load_le<std::uint32_t>(raw, at + 20);
    std::copy_n(raw.begin() + static_cast<std::ptrdiff_t>(at + 24), 12, h.relocation_fields.begin());
    h.characteristics = load_le<std::uint32_t>(raw, at + 36);
    if (s.has_raw_data()) {
      require(s.raw_end() <= raw.size(), ErrorKind::Truncated,
              "section " + std::to_string(i) + " raw data beyond end of file");
      require(h.pointer_to_raw_data >= table_end, ErrorKind::MalformedSectionTable,
              "section " + std::to_string(i) + " raw data overlaps the headers");
      s.data.assign(raw.begin() + h.pointer_to_raw_data,
                    raw.begin() + static_cast<std::ptrdiff_t>(s.raw_end()));
    }
    img.sections.push_back(std::move(s));
  }

  // Raw ranges in file order; distinct sections must not overlap.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
  for (const auto& s : img.sections) {
    if (s.has_raw_data()) ranges.emplace_back(s.header.pointer_to_raw_data, s.raw_end());
  }
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    require(ranges[i].first >= ranges[i - 1].second, ErrorKind::MalformedSectionTable,
            "overlapping section raw ranges");
  }

  std::uint64_t cursor = table_end;
  for (const auto& [begin, end] : ranges) {
    if (begin > cursor) {
      img.gaps.push_back({static_cast<std::uint32_t>(cursor),
                          Bytes(raw.begin() + static_cast<std::ptrdiff_t>(cursor),
                                raw.begin() + static_cast<std::ptrdiff_t>(begin))});
    }
    cursor = end;
  }
  img.overlay.assign(raw.begin() + static_cast<std::ptrdiff_t>(cursor), raw.end());
  return img;
}

Bytes serialize(const PeImage& img) {
  const auto diags = check_invariants(img);
  for (const auto& d : diags) {
    if (d.severity == Diagnostic::Severity::Error) {
      throw PeError(ErrorKind::InvariantViolation, d.field_path + ": " + d.rule);
    }
  }

  Bytes out(img.data_end(), 0);
  std::span<std::uint8_t> buf(out);
  store_le<std::uint16_t>(buf, 0, img.dos_header.e_magic);
  std::copy(img.dos_header.reserved_fields.begin(), img.dos_header.reserved_fields.end(), out.begin() + 2);
  store_le<std::uint32_t>(buf, 60, img.dos_header.e_lfanew);
  std::copy(img.dos_stub.begin(), img.dos_stub.end(), out.begin() + kDosHeaderSize);

  const std::size_t pe_off = img.dos_header.e_lfanew;
  store_le<std::uint32_t>(buf, pe_off, kPeSignature);
  const std::size_t coff_off = pe_off + 4;
  const auto& coff = img.coff;
  store_le<std::uint16_t>(buf, coff_off, coff.machine);
  store_le<std::uint16_t>(buf, coff_off + 2, coff.number_of_sections);
  store_le<std::uint32_t>(buf, coff_off + 4, coff.time_date_stamp);
  store_le<std::uint32_t>(buf, coff_off + 8, coff.pointer_to_symbol_table);
  store_le<std::uint32_t>(buf, coff_off + 12, coff.number_of_symbols);
  store_le<std::uint16_t>(buf, coff_off + 16, coff.size_of_optional_header);
  store_le<std::uint16_t>(buf, coff_off + 18, coff.characteristics);

  const std::size_t opt_off = coff_off + kCoffHeaderSize;
  const auto& opt = img.optional;
  auto opt_buf = buf.subspan(opt_off, opt.serialized_size());
  std::copy(opt.fixed_bytes.begin(), opt.fixed_bytes.end(), opt_buf.begin());
  store_le<std::uint16_t>(opt_buf, 0, opt.magic);
  store_le<std::uint32_t>(opt_buf, kOptSizeOfCode, opt.size_of_code);
  store_le<std::uint32_t>(opt_buf, kOptEntryPoint, opt.address_of_entry_point);
  store_le<std::uint32_t>(opt_buf, kOptSectionAlignment, opt.section_alignment);
  store_le<std::uint32_t>(opt_buf, kOptFileAlignment, opt.file_alignment);
  store_le<std::uint32_t>(opt_buf, kOptSizeOfImage, opt.size_of_image);
  store_le<std::uint32_t>(opt_buf, kOptSizeOfHeaders, opt.size_of_headers);
  store_le<std::uint32_t>(opt_buf, kOptCheckSum, opt.checksum);
  store_le<std::uint32_t>(opt_buf, rva_count_offset(opt.magic), opt.number_of_rva_and_sizes);
  std::size_t at = opt.fixed_bytes.size();
  for (const auto& dir : opt.data_directories) {
    store_le<std::uint32_t>(opt_buf, at, dir.rva);
    store_le<std::uint32_t>(opt_buf, at + 4, dir.size);
    at += kDataDirectorySize;
  }
  std::copy(opt.trailing_bytes.begin(), opt.trailing_bytes.end(), opt_buf.begin() + static_cast<std::ptrdiff_t>(at));

  std::size_t table_at = opt_off + opt.serialized_size();
  for (const auto& s : img.sections) {
    const auto& h = s.header;
    std::copy(h.name.begin(), h.name.end(), out.begin() + static_cast<std::ptrdiff_t>(table_at));
    store_le<std::uint32_t>(buf, table_at + 8, h.virtual_size);
    store_le<std::uint32_t>(buf, table_at + 12, h.virtual_address);
    store_le<std::uint32_t>(buf, table_at + 16, h.size_of_raw_data);
    store_le<std::uint32_t>(buf, table_at + 20, h.pointer_to_raw_data);
    std::copy(h.relocation_fields.begin(), h.relocation_fields.end(),
              out.begin() + static_cast<std::ptrdiff_t>(table_at + 24));
    store_le<std::uint32_t>(buf, table_at + 36, h.characteristics);
    table_at += kSectionHeaderSize;
  }

  for (const auto& g : img.gaps) {
    std::copy(g.bytes.begin(), g.bytes.end(), out.begin() + g.offset);
  }
  for (const auto& s : img.sections) {
    if (s.has_raw_data()) {
      std::copy(s.data.begin(), s.data.end(), out.begin() + s.header.pointer_to_raw_data);
    }
  }
  out.insert(out.end(), img.overlay.begin(), img.overlay.end());
  return out;
}

std::optional<std::size_t> section_index_for_rva(const PeImage& img, std::uint32_t rva) {
  for (std::size_t i = 0; i < img.sections.size(); ++i) {
    const auto& h = img.sections[i].header;
    const std::uint64_t span = std::max(h.virtual_size, h.size_of_raw_data);
    if (rva >= h.virtual_address && rva < std::uint64_t{h.virtual_address} + span) return i;
  }
  return std::nullopt;
}

std::optional<std::uint64_t> rva_to_offset(const PeImage& img, std::uint32_t rva) {
  const auto idx = section_index_for_rva(img, rva);
  if (!idx) return std::nullopt;
  const auto& h = img.sections[*idx].header;
  const std::uint32_t delta = rva - h.virtual_address;
  if (delta >= h.size_of_raw_data) return std::nullopt;
  return std::uint64_t{h.pointer_to_raw_data} + delta;
}

std::optional<Location> locate(const PeImage& img, std::uint64_t file_offset, std::uint64_t len) {
  const std::uint64_t end = file_offset + len;
  if (end <= img.section_table_end()) {
    return Location{Location::Region::Headers, 0, static_cast<std::size_t>(file_offset)};
  }
  for (std::size_t i = 0; i < img.sections.size(); ++i) {
    const auto& s = img.sections[i];
    if (s.has_raw_data() && file_offset >= s.header.pointer_to_raw_data && end <= s.raw_end()) {
      return Location{Location::Region::Section, i,
                      static_cast<std::size_t>(file_offset - s.header.pointer_to_raw_data)};
    }
  }
  for (std::size_t i = 0; i < img.gaps.size(); ++i) {
    const auto& g = img.gaps[i];
    if (file_offset >= g.offset && end <= g.offset + g.bytes.size()) {
      return Location{Location::Region::Gap, i, static_cast<std::size_t>(file_offset - g.offset)};
    }
  }
  const std::uint64_t overlay_start = img.data_end();
  if (file_offset >= overlay_start && end <= overlay_start + img.overlay.size()) {
    return Location{Location::Region::Overlay, 0, static_cast<std::size_t>(file_offset - overlay_start)};
  }
  return std::nullopt;
}

std::optional<std::span<std::uint8_t>> mutable_range(PeImage& img, std::uint64_t file_offset,
                                                     std::uint64_t len) {
  const auto loc = locate(img, file_offset, len);
  if (!loc) return std::nullopt;
  switch (loc->region) {
    case Location::Region::Headers: return std::nullopt;
    case Location::Region::Section:
      return std::span<std::uint8_t>(img.sections[loc->index].data).subspan(loc->offset, len);
    case Location::Region::Gap:
      return std::span<std::uint8_t>(img.gaps[loc->index].bytes).subspan(loc->offset, len);
    case Location::Region::Overlay:
      return std::span<std::uint8_t>(img.overlay).subspan(loc->offset, len);
  }
  return std::nullopt;
}

std::optional<Bytes> read_rva(const PeImage& img, std::uint32_t rva, std::size_t len) {
  const auto idx = section_index_for_rva(img, rva);
  if (!idx) return std::nullopt;
  const auto& s = img.sections[*idx];
  const std::uint64_t delta = rva - s.header.virtual_address;
  if (delta + len > s.data.size()) return std::nullopt;
  return Bytes(s.data.begin() + static_cast<std::ptrdiff_t>(delta),
               s.data.begin() + static_cast<std::ptrdiff_t>(delta + len));
}

std::optional<std::string> read_c_string_rva(const PeImage& img, std::uint32_t rva,
                                             std::size_t max_len) {
  const auto idx = section_index_for_rva(img, rva);
  if (!idx) return std::nullopt;
  const auto& s = img.sections[*idx];
  std::string out;
  for (std::uint64_t i = rva - s.header.virtual_address; i < s.data.size(); ++i) {
    if (s.data[i] == 0) return out;
    if (out.size() >= max_len) return std::nullopt;
    out.push_back(static_cast<char>(s.data[i]));
  }
  return std::nullopt;
}

std::size_t checksum_field_offset(const PeImage& img) {
  return std::size_t{img.dos_header.e_lfanew} + 4 + kCoffHeaderSize + kOptCheckSum;
}

std::uint32_t compute_checksum(ByteView file, std::size_t checksum_offset) {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < file.size(); i += 2) {
    if (i >= checksum_offset && i < checksum_offset + 4) continue;
    std::uint32_t word = file[i];
    if (i + 1 < file.size()) word |= std::uint32_t{file[i + 1]} << 8;
    sum += word;
    sum = (sum & 0xFFFF) + (sum >> 16);
  }
  sum = (sum & 0xFFFF) + (sum >> 16);
  return static_cast<std::uint32_t>(sum + file.size());
}

}  // namespace amg::pe
