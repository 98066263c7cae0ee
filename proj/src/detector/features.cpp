#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "amg/catalog.hpp"
#include "amg/detector/detector.hpp"

namespace amg::detector {

namespace {

constexpr double kEpoch2005 = 1104537600.0;
constexpr double kSecondsPerYear = 365.25 * 86400.0;

double byte_entropy(ByteView data) {
  if (data.empty()) return 0.0;
  std::array<std::size_t, 256> counts{};
  for (auto b : data) ++counts[b];
  double h = 0.0;
  const double n = static_cast<double>(data.size());
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h / 8.0;
}

std::size_t count_occurrences(ByteView hay, const catalog::Motif& m) {
  std::size_t n = 0;
  auto it = hay.begin();
  while ((it = std::search(it, hay.end(), m.begin(), m.end())) != hay.end()) {
    ++n;
    it += static_cast<std::ptrdiff_t>(m.size());
  }
  return n;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool name_in(std::string_view name, const std::vector<std::string_view>& list) {
  const auto n = lower(name);
  return std::any_of(list.begin(), list.end(), [&](std::string_view s) { return lower(s) == n; });
}

FeatureVectorA features_from(const pe::PeImage& img, ByteView raw) {
  FeatureVectorA x = FeatureVectorA::Zero();
  const double file_size = static_cast<double>(std::max<std::size_t>(raw.size(), 1));

  x[slot::kTimestamp] = (img.coff.time_date_stamp - kEpoch2005) / kSecondsPerYear / 10.0;
  x[slot::kChecksumZero] = img.optional.checksum == 0 ? 1.0 : 0.0;
  if (!raw.empty()) {
    const auto at = pe::checksum_field_offset(img);
    x[slot::kChecksumValid] =
        at + 4 <= raw.size() && img.optional.checksum != 0 && pe::compute_checksum(raw, at) == img.optional.checksum;
  }
  x[slot::kEntryRatio] =
      img.optional.size_of_image ? double(img.optional.address_of_entry_point) / img.optional.size_of_image : 0.0;
  x[slot::kSectionCount] = static_cast<double>(img.sections.size());
  x[slot::kImageSizeLog] = std::log2(1.0 + img.optional.size_of_image);
  x[slot::kFileSizeLog] = std::log2(file_size);

  double emin = 1.0, emax = 0.0, esum = 0.0, raw_total = 0.0;
  int with_data = 0;
  int suspicious_names = 0;
  int benign_names = 0;
  const auto& sus = catalog::suspicious_section_names();
  for (const auto& s : img.sections) {
    const auto name = s.header.name_string();
    for (std::size_t k = 0; k < sus.size(); ++k) {
      if (lower(sus[k]) == lower(name)) {
        x[slot::kSuspiciousNameFirst + static_cast<int>(k)] = 1.0;
        ++suspicious_names;
      }
    }
    if (name_in(name, catalog::benign_section_names())) ++benign_names;
    if (s.data.empty()) continue;
    const double e = byte_entropy(s.data);
    emin = std::min(emin, e);
    emax = std::max(emax, e);
    esum += e;
    raw_total += static_cast<double>(s.data.size());
    ++with_data;
  }
  if (with_data > 0) {
    x[slot::kEntropyMin] = emin;
    x[slot::kEntropyMean] = esum / with_data;
    x[slot::kEntropyMax] = emax;
    x[slot::kMeanRawSizeLog] = std::log2(1.0 + raw_total / with_data);
  }
  x[slot::kSuspiciousNameCount] = suspicious_names;
  x[slot::kBenignNameFraction] = img.sections.empty() ? 0.0 : double(benign_names) / img.sections.size();
  x[slot::kOverlayRatio] = static_cast<double>(img.overlay.size()) / file_size;
  x[slot::kSectionDataRatio] = raw_total / file_size;
  x[slot::kDebug] = img.optional.directory(pe::kDebugDirectory).present();
  x[slot::kCertificate] = img.optional.directory(pe::kSecurityDirectory).present();

  std::vector<pe::ImportDescriptor> imports;
  try {
    imports = pe::parse_imports(img);
  } catch (const pe::PeError&) {
  }
  std::size_t functions = 0, suspicious = 0;
  for (const auto& d : imports) {
    for (const auto& f : d.function_names) {
      ++functions;
      if (name_in(f, catalog::suspicious_functions())) ++suspicious;
    }
  }
  x[slot::kImportDlls] = static_cast<double>(imports.size());
  x[slot::kImportFunctions] = static_cast<double>(functions);
  x[slot::kSuspiciousImportFraction] = functions ? double(suspicious) / functions : 0.0;
  x[slot::kHasImports] = imports.empty() ? 0.0 : 1.0;

  const auto& motifs = catalog::motifs();
  const double kib = std::max(raw_total, 1.0) / 1024.0;
  double total = 0.0;
  for (std::size_t m = 0; m < motifs.size(); ++m) {
    std::size_t hits = 0;
    for (const auto& s : img.sections) hits += count_occurrences(s.data, motifs[m]);
    x[slot::kMotifDensityFirst + static_cast<int>(m)] = hits / kib;
    total += hits / kib;
  }
  x[slot::kMotifDensityTotal] = total;
  return x;
}

}  // namespace

FeatureVectorA extract_features_a(const pe::PeImage& img) {
  Bytes raw;
  try {
    raw = pe::serialize(img);
  } catch (const pe::PeError&) {
  }
  return features_from(img, raw);
}

FeatureVectorA extract_features_a(ByteView raw) { return features_from(pe::parse(raw), raw); }

FeatureVectorB extract_features_b(ByteView raw) {
  FeatureVectorB x = FeatureVectorB::Zero(kFeaturesB);
  const auto n = std::min(raw.size(), kByteWindow);
  if (n == 0) return x;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t next = i + 1 < n ? raw[i + 1] : 0;
    const std::uint32_t pair = (std::uint32_t(raw[i]) << 8) | next;
    // multiplicative hash of the 16-bit pair onto 1024 buckets
    x[static_cast<Eigen::Index>((pair * 2654435761u) >> 22)] += 1.0;
  }
  return x / static_cast<double>(n);
}

}  // namespace amg::detector
