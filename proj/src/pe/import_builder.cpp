#include "amg/pe/import_builder.hpp"

#include "amg/pe/image.hpp"

namespace amg::pe {

ImportTableBlob build_import_table(std::uint32_t base_rva, const std::vector<Bytes>& existing_descriptors,
                                   const std::vector<ImportRequest>& requests, bool pe32_plus) {
  const std::size_t thunk = pe32_plus ? 8 : 4;
  const std::size_t idt_count = existing_descriptors.size() + requests.size() + 1;
  const std::size_t idt_bytes = idt_count * kImportDescriptorSize;

  // Thunk tables start 8-aligned after the IDT; ILTs first, then IATs as one block.
  std::size_t cursor = align_up(idt_bytes, 8);
  std::vector<std::size_t> ilt_at;
  for (const auto& r : requests) {
    ilt_at.push_back(cursor);
    cursor += (r.functions.size() + 1) * thunk;
  }
  const std::size_t iat_block = cursor;
  std::vector<std::size_t> iat_at;
  for (const auto& r : requests) {
    iat_at.push_back(cursor);
    cursor += (r.functions.size() + 1) * thunk;
  }
  const std::size_t iat_block_end = cursor;

  std::vector<std::vector<std::size_t>> hint_at(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    for (const auto& fn : requests[i].functions) {
      hint_at[i].push_back(cursor);
      cursor += align_up(2 + fn.size() + 1, 2);
    }
  }
  std::vector<std::size_t> name_at;
  for (const auto& r : requests) {
    name_at.push_back(cursor);
    cursor += r.dll_name.size() + 1;
  }

  ImportTableBlob blob;
  blob.bytes.assign(align_up(cursor, 8), 0);
  std::span<std::uint8_t> out(blob.bytes);
  std::size_t at = 0;
  for (const auto& d : existing_descriptors) {
    std::copy_n(d.begin(), std::min(d.size(), kImportDescriptorSize), out.begin() + static_cast<std::ptrdiff_t>(at));
    at += kImportDescriptorSize;
  }
  for (std::size_t i = 0; i < requests.size(); ++i) {
    store_le<std::uint32_t>(out, at, static_cast<std::uint32_t>(base_rva + ilt_at[i]));
    store_le<std::uint32_t>(out, at + 12, static_cast<std::uint32_t>(base_rva + name_at[i]));
    store_le<std::uint32_t>(out, at + 16, static_cast<std::uint32_t>(base_rva + iat_at[i]));
    at += kImportDescriptorSize;

    for (std::size_t k = 0; k < requests[i].functions.size(); ++k) {
      const auto hint_rva = static_cast<std::uint64_t>(base_rva + hint_at[i][k]);
      if (pe32_plus) {
        store_le<std::uint64_t>(out, ilt_at[i] + k * thunk, hint_rva);
        store_le<std::uint64_t>(out, iat_at[i] + k * thunk, hint_rva);
      } else {
        store_le<std::uint32_t>(out, ilt_at[i] + k * thunk, static_cast<std::uint32_t>(hint_rva));
        store_le<std::uint32_t>(out, iat_at[i] + k * thunk, static_cast<std::uint32_t>(hint_rva));
      }
      const auto& fn = requests[i].functions[k];
      std::copy(fn.begin(), fn.end(), out.begin() + static_cast<std::ptrdiff_t>(hint_at[i][k] + 2));
    }
    const auto& dll = requests[i].dll_name;
    std::copy(dll.begin(), dll.end(), out.begin() + static_cast<std::ptrdiff_t>(name_at[i]));
  }

  blob.idt_rva = base_rva;
  blob.idt_size = static_cast<std::uint32_t>(idt_bytes);
  if (!requests.empty()) {
    blob.iat_rva = static_cast<std::uint32_t>(base_rva + iat_block);
    blob.iat_size = static_cast<std::uint32_t>(iat_block_end - iat_block);
  }
  return blob;
}

}  // namespace amg::pe
