#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "amg/bytes.hpp"

namespace amg::pe {

inline constexpr std::uint16_t kDosMagic = 0x5A4D;  // "MZ"
inline constexpr std::uint32_t kPeSignature = 0x00004550;  // "PE\0\0"
inline constexpr std::uint16_t kPe32Magic = 0x10B;
inline constexpr std::uint16_t kPe32PlusMagic = 0x20B;

inline constexpr std::size_t kDosHeaderSize = 64;
inline constexpr std::size_t kCoffHeaderSize = 20;
inline constexpr std::size_t kSectionHeaderSize = 40;
inline constexpr std::size_t kDataDirectorySize = 8;
inline constexpr std::size_t kImportDescriptorSize = 20;
inline constexpr std::size_t kDebugDirectoryEntrySize = 28;

// Standard data directory slots.
inline constexpr std::size_t kExportDirectory = 0;
inline constexpr std::size_t kImportDirectory = 1;
inline constexpr std::size_t kSecurityDirectory = 4;
inline constexpr std::size_t kDebugDirectory = 6;
inline constexpr std::size_t kIatDirectory = 12;

enum class ErrorKind { NotPe, Truncated, MalformedSectionTable, InvariantViolation };

const char* to_string(ErrorKind kind);

class PeError : public std::runtime_error {
 public:
  PeError(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct DosHeader {
  std::uint16_t e_magic = kDosMagic;
  std::array<std::uint8_t, 58> reserved_fields{};
  std::uint32_t e_lfanew = 0;

  bool operator==(const DosHeader&) const = default;
};

struct CoffHeader {
  std::uint16_t machine = 0;
  std::uint16_t number_of_sections = 0;
  std::uint32_t time_date_stamp = 0;
  std::uint32_t pointer_to_symbol_table = 0;
  std::uint32_t number_of_symbols = 0;
  std::uint16_t size_of_optional_header = 0;
  std::uint16_t characteristics = 0;

  bool operator==(const CoffHeader&) const = default;
};

struct DataDirectory {
  std::uint32_t rva = 0;  // raw file offset for the security directory
  std::uint32_t size = 0;

  bool present() const { return rva != 0 || size != 0; }
  bool operator==(const DataDirectory&) const = default;
};

/// Modeled optional-header fields. Everything else in the fixed part of the
/// header is carried verbatim in `fixed_bytes`; the modeled fields are written
/// over it at their standard offsets on serialization.
struct OptionalHeader {
  std::uint16_t magic = kPe32Magic;
  std::uint32_t size_of_code = 0;
  std::uint32_t address_of_entry_point = 0;
  std::uint32_t section_alignment = 0x1000;
  std::uint32_t file_alignment = 0x200;
  std::uint32_t size_of_image = 0;
  std::uint32_t size_of_headers = 0;
  std::uint32_t checksum = 0;
  std::uint32_t number_of_rva_and_sizes = 0;
  std::vector<DataDirectory> data_directories;
  Bytes fixed_bytes;     // standard + windows-specific fields
  Bytes trailing_bytes;  // past the data directories, up to SizeOfOptionalHeader

  bool is_pe32_plus() const { return magic == kPe32PlusMagic; }
  std::size_t serialized_size() const {
    return fixed_bytes.size() + data_directories.size() * kDataDirectorySize + trailing_bytes.size();
  }
  DataDirectory directory(std::size_t index) const {
    return index < data_directories.size() ? data_directories[index] : DataDirectory{};
  }

  bool operator==(const OptionalHeader&) const = default;
};

/// Length of the fixed (pre-directory) part of the optional header for a magic value.
std::size_t optional_fixed_size(std::uint16_t magic);

struct SectionHeader {
  std::array<std::uint8_t, 8> name{};
  std::uint32_t virtual_size = 0;
  std::uint32_t virtual_address = 0;
  std::uint32_t size_of_raw_data = 0;
  std::uint32_t pointer_to_raw_data = 0;
  std::array<std::uint8_t, 12> relocation_fields{};  // relocations / line numbers, opaque
  std::uint32_t characteristics = 0;

  std::string name_string() const;
  void set_name(const std::string& value);
  bool operator==(const SectionHeader&) const = default;
};

struct Section {
  SectionHeader header;
  Bytes data;  // exactly size_of_raw_data bytes

  bool has_raw_data() const { return header.size_of_raw_data != 0; }
  std::uint64_t raw_end() const {
    return std::uint64_t{header.pointer_to_raw_data} + header.size_of_raw_data;
  }
  bool operator==(const Section&) const = default;
};

/// Bytes inside the section-data region that no section claims (header slack,
/// inter-section padding). Kept so unmodified files round-trip exactly.
struct FileGap {
  std::uint32_t offset = 0;
  Bytes bytes;

  bool operator==(const FileGap&) const = default;
};

struct PeImage {
  DosHeader dos_header;
  Bytes dos_stub;  // bytes between the DOS header and the PE signature
  CoffHeader coff;
  OptionalHeader optional;
  std::vector<Section> sections;
  std::vector<FileGap> gaps;
  Bytes overlay;
  std::size_t source_len = 0;

  /// File offset one past the section header table.
  std::uint64_t section_table_end() const;
  /// One past the last byte of section data (or the header table, without sections).
  std::uint64_t data_end() const;
  std::uint64_t serialized_size() const { return data_end() + overlay.size(); }
  /// Offset of the first section's raw data, or size_of_headers without raw sections.
  std::uint64_t first_data_offset() const;
  /// Free bytes between the end of the header table and the first section data.
  std::uint64_t header_slack() const;

  bool operator==(const PeImage& other) const;
};

PeImage parse(ByteView raw);
Bytes serialize(const PeImage& img);

struct Diagnostic {
  enum class Severity { Warning, Error };
  Severity severity = Severity::Error;
  std::string field_path;
  std::string rule;

  std::string render() const;  // "<severity> <field.path>: <rule>"
};

/// Total: reports every violated rule. Error-severity entries block serialization.
std::vector<Diagnostic> check_invariants(const PeImage& img);
bool has_errors(const std::vector<Diagnostic>& diags);

// Address translation and access helpers.
struct Location {
  enum class Region { Headers, Section, Gap, Overlay };
  Region region;
  std::size_t index;   // section or gap index
  std::size_t offset;  // offset inside that region's byte buffer
};

std::optional<std::uint64_t> rva_to_offset(const PeImage& img, std::uint32_t rva);
std::optional<std::size_t> section_index_for_rva(const PeImage& img, std::uint32_t rva);
/// Resolves a file range that lies entirely inside one region; nullopt otherwise.
std::optional<Location> locate(const PeImage& img, std::uint64_t file_offset, std::uint64_t len);
/// Writable view of a file range inside a single section/gap/overlay buffer.
std::optional<std::span<std::uint8_t>> mutable_range(PeImage& img, std::uint64_t file_offset,
                                                     std::uint64_t len);
std::optional<Bytes> read_rva(const PeImage& img, std::uint32_t rva, std::size_t len);
std::optional<std::string> read_c_string_rva(const PeImage& img, std::uint32_t rva,
                                             std::size_t max_len = 256);

// Imports.
struct ImportDescriptor {
  std::string dll_name;
  std::uint32_t ilt_rva = 0;
  std::uint32_t iat_rva = 0;
  std::vector<std::string> function_names;  // ordinals rendered as "#<n>"
};

/// Walks the import directory. Throws PeError(Truncated) when tables are unresolvable.
std::vector<ImportDescriptor> parse_imports(const PeImage& img);

struct DebugEntry {
  std::uint32_t type = 0;
  std::uint32_t size_of_data = 0;
  std::uint32_t address_of_raw_data = 0;
  std::uint32_t pointer_to_raw_data = 0;
};

std::vector<DebugEntry> parse_debug_entries(const PeImage& img);

/// Standard image checksum (folded 16-bit sum plus file length), with the
/// checksum field itself treated as zero.
std::uint32_t compute_checksum(ByteView file, std::size_t checksum_offset);
std::size_t checksum_field_offset(const PeImage& img);

}  // namespace amg::pe
