#pragma once

#include <string>
#include <vector>

#include "amg/bytes.hpp"

namespace amg::pe {

struct ImportRequest {
  std::string dll_name;
  std::vector<std::string> functions;
};

struct ImportTableBlob {
  Bytes bytes;
  std::uint32_t idt_rva = 0;
  std::uint32_t idt_size = 0;  // includes the zero terminator
  std::uint32_t iat_rva = 0;
  std::uint32_t iat_size = 0;
};

/// Lays out a complete import table at `base_rva`: the descriptor table
/// (verbatim copies of `existing_descriptors` first, then one descriptor per
/// request, then an all-zero terminator), ILT/IAT pairs with identical content,
/// hint/name entries and DLL name strings. Offsets inside the blob equal
/// RVA - base_rva.
ImportTableBlob build_import_table(std::uint32_t base_rva, const std::vector<Bytes>& existing_descriptors,
                                   const std::vector<ImportRequest>& requests, bool pe32_plus);

}  // namespace amg::pe
