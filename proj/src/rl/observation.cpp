#include <array>
#include <cmath>

#include "amg/rl/env.hpp"

// Observation values are computed here only; nothing in this file is shared
// with the detectors' feature extraction.
namespace amg::rl {

namespace {

constexpr double kSecondsPerYear = 365.25 * 86400.0;
constexpr double kYear2005 = 1104537600.0;

void byte_histogram(ByteView raw, Eigen::Ref<Vector> out) {
  out.setZero();
  if (raw.empty()) return;
  for (auto b : raw) out[b] += 1.0;
  out /= static_cast<double>(raw.size());
}

double mean_section_entropy(const pe::PeImage& img) {
  double sum = 0.0;
  int n = 0;
  for (const auto& s : img.sections) {
    if (s.data.empty()) continue;
    std::array<double, 256> freq{};
    for (auto b : s.data) freq[b] += 1.0;
    double h = 0.0;
    for (double f : freq) {
      if (f > 0) h -= f / s.data.size() * std::log2(f / s.data.size());
    }
    sum += h / 8.0;
    ++n;
  }
  return n ? sum / n : 0.0;
}

void structural_scalars(const pe::PeImage& img, ByteView raw, Eigen::Ref<Vector> out) {
  out.setZero();
  const double size = static_cast<double>(std::max<std::size_t>(raw.size(), 1));
  out[0] = img.sections.size() / 10.0;
  out[1] = img.overlay.size() / size;
  const auto imports = img.optional.directory(pe::kImportDirectory);
  out[2] = imports.present() ? (imports.size / pe::kImportDescriptorSize) / 10.0 : 0.0;
  out[3] = static_cast<double>(img.header_slack()) / 512.0;
  out[4] = mean_section_entropy(img);
  out[5] = img.optional.checksum == 0 ? 1.0 : 0.0;
  out[6] = std::floor((img.coff.time_date_stamp - kYear2005) / kSecondsPerYear) / 20.0;
  out[7] = img.optional.directory(pe::kDebugDirectory).present() ? 1.0 : 0.0;
  out[8] = img.optional.directory(pe::kSecurityDirectory).present() ? 1.0 : 0.0;
  out[9] = std::log2(size) / 20.0;
  const auto ep = pe::section_index_for_rva(img, img.optional.address_of_entry_point);
  out[10] = ep ? (*ep + 1) / 10.0 : 0.0;
}

}  // namespace

const std::vector<ObservationSlot>& observation_provenance() {
  static const std::vector<ObservationSlot> slots = {
      {0, 256, "byte histogram of the whole file", "byte_histogram"},
      {256, 1, "section count", "structural_scalars"},
      {257, 1, "overlay ratio", "structural_scalars"},
      {258, 1, "import descriptor count", "structural_scalars"},
      {259, 1, "header slack", "structural_scalars"},
      {260, 1, "mean section entropy", "mean_section_entropy"},
      {261, 1, "checksum zero", "structural_scalars"},
      {262, 1, "timestamp year bucket", "structural_scalars"},
      {263, 1, "debug directory present", "structural_scalars"},
      {264, 1, "certificate present", "structural_scalars"},
      {265, 1, "file size log", "structural_scalars"},
      {266, 1, "entry point section", "structural_scalars"},
      {267, 5, "reserved", "structural_scalars"},
  };
  return slots;
}

Vector observe(const pe::PeImage& img, ByteView raw) {
  Vector x(kObservationSize);
  byte_histogram(raw, x.head(kHistogramBins));
  structural_scalars(img, raw, x.tail(kObservationSize - kHistogramBins));
  return x;
}

Vector observe(ByteView raw) {
  Vector x = Vector::Zero(kObservationSize);
  byte_histogram(raw, x.head(kHistogramBins));
  try {
    structural_scalars(pe::parse(raw), raw, x.tail(kObservationSize - kHistogramBins));
  } catch (const pe::PeError&) {
  }
  return x;
}

}  // namespace amg::rl
