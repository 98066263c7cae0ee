#include <algorithm>

#include "amg/pe/image.hpp"

namespace amg::pe {

namespace {

constexpr std::size_t kMaxDescriptors = 4096;
constexpr std::size_t kMaxThunks = 65536;

}  // namespace

std::vector<ImportDescriptor> parse_imports(const PeImage& img) {
  const auto dir = img.optional.directory(kImportDirectory);
  std::vector<ImportDescriptor> out;
  if (!dir.present()) return out;
  const bool wide = img.optional.is_pe32_plus();
  const std::size_t thunk_size = wide ? 8 : 4;

  for (std::size_t i = 0;; ++i) {
    if (i >= kMaxDescriptors) throw PeError(ErrorKind::Truncated, "import descriptor table not terminated");
    const auto raw = read_rva(img, static_cast<std::uint32_t>(dir.rva + i * kImportDescriptorSize),
                              kImportDescriptorSize);
    if (!raw) throw PeError(ErrorKind::Truncated, "import descriptor outside section data");
    if (std::all_of(raw->begin(), raw->end(), [](std::uint8_t b) { return b == 0; })) break;

    ImportDescriptor d;
    d.ilt_rva = load_le<std::uint32_t>(*raw, 0);
    const auto name_rva = load_le<std::uint32_t>(*raw, 12);
    d.iat_rva = load_le<std::uint32_t>(*raw, 16);
    const auto name = read_c_string_rva(img, name_rva);
    if (!name) throw PeError(ErrorKind::Truncated, "import DLL name unresolvable");
    d.dll_name = *name;

    const std::uint32_t thunk_rva = d.ilt_rva != 0 ? d.ilt_rva : d.iat_rva;
    for (std::size_t k = 0;; ++k) {
      if (k >= kMaxThunks) throw PeError(ErrorKind::Truncated, "import lookup table not terminated");
      const auto thunk = read_rva(img, static_cast<std::uint32_t>(thunk_rva + k * thunk_size), thunk_size);
      if (!thunk) throw PeError(ErrorKind::Truncated, "import lookup table outside section data");
      const std::uint64_t value = wide ? load_le<std::uint64_t>(*thunk, 0) : load_le<std::uint32_t>(*thunk, 0);
      if (value == 0) break;
      const std::uint64_t ordinal_flag = wide ? (std::uint64_t{1} << 63) : (std::uint64_t{1} << 31);
      if (value & ordinal_flag) {
        d.function_names.push_back("#" + std::to_string(value & 0xFFFF));
        continue;
      }
      const auto fn = read_c_string_rva(img, static_cast<std::uint32_t>((value & 0x7FFFFFFF) + 2));
      if (!fn) throw PeError(ErrorKind::Truncated, "import name entry unresolvable");
      d.function_names.push_back(*fn);
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<DebugEntry> parse_debug_entries(const PeImage& img) {
  const auto dir = img.optional.directory(kDebugDirectory);
  std::vector<DebugEntry> out;
  if (!dir.present()) return out;
  const std::size_t count = dir.size / kDebugDirectoryEntrySize;
  for (std::size_t i = 0; i < count; ++i) {
    const auto raw = read_rva(img, static_cast<std::uint32_t>(dir.rva + i * kDebugDirectoryEntrySize),
                              kDebugDirectoryEntrySize);
    if (!raw) break;
    DebugEntry e;
    e.type = load_le<std::uint32_t>(*raw, 12);
    e.size_of_data = load_le<std::uint32_t>(*raw, 16);
    e.address_of_raw_data = load_le<std::uint32_t>(*raw, 20);
    e.pointer_to_raw_data = load_le<std::uint32_t>(*raw, 24);
    out.push_back(e);
  }
  return out;
}

}  // namespace amg::pe
