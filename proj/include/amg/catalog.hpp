#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

// Fixed name tables shared by the corpus generator, the modifications and the
// detectors' feature extractors.
namespace amg::catalog {

struct DllEntry {
  std::string_view dll;
  std::vector<std::string_view> functions;
};

/// DLLs and functions that ordinary programs import.
const std::vector<DllEntry>& benign_dlls();

/// Functions commonly associated with injection, keylogging and download-execute.
const std::vector<std::string_view>& suspicious_functions();

/// Section names frequently seen in benign files.
const std::vector<std::string_view>& benign_section_names();

/// Packer/protector section names.
const std::vector<std::string_view>& suspicious_section_names();

inline constexpr std::size_t kMotifLength = 8;
using Motif = std::array<std::uint8_t, kMotifLength>;

/// Byte patterns planted into malicious files (and, rarely, benign ones).
const std::vector<Motif>& motifs();

}  // namespace amg::catalog
