#include <algorithm>

#include "amg/pe/image.hpp"

namespace amg::pe {

namespace {

class Collector {
 public:
  void error(std::string path, std::string rule) {
    out_.push_back({Diagnostic::Severity::Error, std::move(path), std::move(rule)});
  }
  void warning(std::string path, std::string rule) {
    out_.push_back({Diagnostic::Severity::Warning, std::move(path), std::move(rule)});
  }
  std::vector<Diagnostic> take() { return std::move(out_); }

 private:
  std::vector<Diagnostic> out_;
};

std::string section_path(std::size_t i, const char* field) {
  return "sections[" + std::to_string(i) + "]." + field;
}

std::uint64_t virtual_span(const SectionHeader& h) {
  return h.virtual_size != 0 ? h.virtual_size : h.size_of_raw_data;
}

void check_headers(const PeImage& img, Collector& c) {
  if (img.dos_header.e_magic != kDosMagic) c.error("dos_header.e_magic", "e_magic equals MZ");
  if (img.dos_header.e_lfanew != kDosHeaderSize + img.dos_stub.size()) {
    c.error("dos_header.e_lfanew", "e_lfanew points at the PE signature after the DOS stub");
  }
  const auto& opt = img.optional;
  if (img.coff.number_of_sections != img.sections.size()) {
    c.error("coff.number_of_sections", "number_of_sections equals the section table length");
  }
  if (img.coff.size_of_optional_header != opt.serialized_size()) {
    c.error("coff.size_of_optional_header", "size_of_optional_header matches the optional header length");
  }
  if (opt.magic != kPe32Magic && opt.magic != kPe32PlusMagic) {
    c.error("optional.magic", "magic is PE32 or PE32+");
  } else if (opt.fixed_bytes.size() != optional_fixed_size(opt.magic)) {
    c.error("optional.fixed_bytes", "fixed header length matches the magic");
  }
  if (opt.number_of_rva_and_sizes != opt.data_directories.size()) {
    c.error("optional.number_of_rva_and_sizes", "number_of_rva_and_sizes equals the data directory count");
  }
  if (!is_power_of_two(opt.section_alignment)) {
    c.error("optional.section_alignment", "section_alignment is a power of two");
  }
  if (!is_power_of_two(opt.file_alignment)) {
    c.error("optional.file_alignment", "file_alignment is a power of two");
  }
  const auto table_end = img.section_table_end();
  if (is_power_of_two(opt.file_alignment) &&
      (opt.size_of_headers % opt.file_alignment != 0 || opt.size_of_headers < table_end)) {
    c.error("optional.size_of_headers",
            "size_of_headers is a multiple of file_alignment and covers all headers");
  }
  if (is_power_of_two(opt.section_alignment)) {
    std::uint64_t image_end = align_up(opt.size_of_headers, opt.section_alignment);
    for (const auto& s : img.sections) {
      image_end = std::max(image_end, align_up(std::uint64_t{s.header.virtual_address} + virtual_span(s.header),
                                               opt.section_alignment));
    }
    if (opt.size_of_image % opt.section_alignment != 0 || opt.size_of_image < image_end) {
      c.error("optional.size_of_image",
              "size_of_image is rounded up to multiples of section_alignment and covers all sections");
    }
  }
  for (std::size_t i = 0; i < opt.data_directories.size(); ++i) {
    const auto& d = opt.data_directories[i];
    if (d.rva == 0 && d.size != 0) {
      c.error("optional.data_directories[" + std::to_string(i) + "]", "rva==0 implies size==0");
    }
  }
}

void check_sections(const PeImage& img, Collector& c) {
  const auto& opt = img.optional;
  const auto table_end = img.section_table_end();
  const bool fa_ok = is_power_of_two(opt.file_alignment);
  const bool sa_ok = is_power_of_two(opt.section_alignment);
  for (std::size_t i = 0; i < img.sections.size(); ++i) {
    const auto& s = img.sections[i];
    const auto& h = s.header;
    if (sa_ok && h.virtual_address % opt.section_alignment != 0) {
      c.error(section_path(i, "virtual_address"), "virtual_address is a multiple of section_alignment");
    }
    if (fa_ok && h.size_of_raw_data % opt.file_alignment != 0) {
      c.error(section_path(i, "size_of_raw_data"), "size_of_raw_data is a multiple of file_alignment");
    }
    if (s.has_raw_data() && fa_ok && h.pointer_to_raw_data % opt.file_alignment != 0) {
      c.error(section_path(i, "pointer_to_raw_data"), "pointer_to_raw_data is a multiple of file_alignment");
    }
    if (s.data.size() != h.size_of_raw_data) {
      c.error(section_path(i, "data"), "raw data length equals size_of_raw_data");
    }
    if (s.has_raw_data() && h.pointer_to_raw_data < table_end) {
      c.error(section_path(i, "pointer_to_raw_data"), "raw data starts after the header table");
    }
    if (i > 0) {
      const auto& prev = img.sections[i - 1].header;
      if (h.virtual_address <= prev.virtual_address) {
        c.error(section_path(i, "virtual_address"),
                "section headers are sorted in ascending order by virtual_address");
      } else if (sa_ok && h.virtual_address <
                              align_up(std::uint64_t{prev.virtual_address} + virtual_span(prev),
                                       opt.section_alignment)) {
        c.error(section_path(i, "virtual_address"), "virtual ranges of sections do not overlap");
      }
    }
  }

  std::vector<std::pair<std::uint64_t, std::size_t>> by_offset;
  for (std::size_t i = 0; i < img.sections.size(); ++i) {
    if (img.sections[i].has_raw_data()) by_offset.emplace_back(img.sections[i].header.pointer_to_raw_data, i);
  }
  std::sort(by_offset.begin(), by_offset.end());
  for (std::size_t k = 1; k < by_offset.size(); ++k) {
    const auto& prev = img.sections[by_offset[k - 1].second];
    if (by_offset[k].first < prev.raw_end()) {
      c.error(section_path(by_offset[k].second, "pointer_to_raw_data"),
              "raw ranges of distinct sections do not overlap");
    }
  }

  for (std::size_t g = 0; g < img.gaps.size(); ++g) {
    const auto& gap = img.gaps[g];
    const std::uint64_t begin = gap.offset;
    const std::uint64_t end = begin + gap.bytes.size();
    bool clash = begin < table_end;
    for (const auto& s : img.sections) {
      if (s.has_raw_data() && begin < s.raw_end() && s.header.pointer_to_raw_data < end) clash = true;
    }
    if (clash) c.error("gaps[" + std::to_string(g) + "]", "filler bytes do not overlap headers or sections");
  }
}

void check_directories(const PeImage& img, Collector& c) {
  const auto& opt = img.optional;
  const auto security = opt.directory(kSecurityDirectory);
  if (security.present()) {
    const auto overlay_start = img.data_end();
    if (security.rva < overlay_start ||
        std::uint64_t{security.rva} + security.size > overlay_start + img.overlay.size()) {
      c.warning("optional.data_directories[4]", "certificate table lies inside the overlay");
    }
  }
  if (opt.directory(kImportDirectory).present()) {
    try {
      const auto imports = parse_imports(img);
      for (std::size_t i = 0; i < imports.size(); ++i) {
        const auto& d = imports[i];
        const std::size_t entry = opt.is_pe32_plus() ? 8 : 4;
        const std::size_t len = (d.function_names.size() + 1) * entry;
        const auto ilt = read_rva(img, d.ilt_rva, len);
        const auto iat = read_rva(img, d.iat_rva, len);
        if (!ilt || !iat || *ilt != *iat) {
          c.warning("imports[" + std::to_string(i) + "]", "ILT and IAT have identical on-disk content");
        }
      }
    } catch (const PeError&) {
      c.warning("optional.data_directories[1]", "import tables are resolvable and zero-terminated");
    }
  }
  if (!img.sections.empty() && !section_index_for_rva(img, opt.address_of_entry_point)) {
    c.warning("optional.address_of_entry_point", "entry point lies inside a section");
  }
}

}  // namespace

std::string Diagnostic::render() const {
  return std::string(severity == Severity::Error ? "error" : "warning") + " " + field_path + ": " + rule;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(),
                     [](const Diagnostic& d) { return d.severity == Diagnostic::Severity::Error; });
}

std::vector<Diagnostic> check_invariants(const PeImage& img) {
  Collector c;
  check_headers(img, c);
  check_sections(img, c);
  check_directories(img, c);
  return c.take();
}

}  // namespace amg::pe
