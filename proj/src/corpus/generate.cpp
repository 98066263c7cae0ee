#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "amg/catalog.hpp"
#include "amg/corpus/corpus.hpp"
#include "amg/pe/image.hpp"
#include "amg/pe/import_builder.hpp"
#include "amg/random.hpp"

namespace amg::corpus {

namespace {

using pe::PeImage;

constexpr std::uint32_t kFileAlignment = 0x200;
constexpr std::uint32_t kSectionAlignment = 0x1000;
constexpr std::uint32_t kImageBase = 0x400000;
constexpr std::uint32_t kMinSlack = 40;

constexpr std::uint32_t kBenignStampLo = 1420070400;     // 2015-01-01
constexpr std::uint32_t kBenignStampHi = 1704067200;     // 2024-01-01
constexpr std::uint32_t kMaliciousStampLo = 1136073600;  // 2006-01-01
constexpr std::uint32_t kMaliciousStampHi = 1483228800;  // 2017-01-01

enum class Role { Code, ReadOnly, Data, Resource, Reloc, Packed };

struct SectionPlan {
  std::string name;
  Role role;
  std::uint32_t characteristics;
  std::size_t content_size = 0;
  std::uint32_t bss_extra = 0;  // virtual bytes beyond the raw data
  std::uint32_t gap_after = 0;  // unused file bytes after the raw data
  std::uint32_t va = 0;
  std::uint32_t pointer = 0;
};

const char* const kWords[] = {"config", "update", "window", "settings", "version", "module", "default",
                              "resource", "string", "value", "error", "warning", "license", "user",
                              "display", "network", "buffer", "locale", "options", "about"};

// `stub_rate` is the share of decoder-loop style instructions (xor, rotate,
// lods/stos, loop); high in malicious code, rare in benign code.
void fill_code(Rng& rng, std::span<std::uint8_t> out, double stub_rate) {
  static const std::vector<std::vector<std::uint8_t>> stub_ops = {
      {0x31, 0xC9}, {0x80, 0x34}, {0x30, 0x06}, {0xC1, 0xC0}, {0xE2}, {0xAC},
      {0xAA}, {0x46}, {0x47}, {0x49}, {0xD3, 0xC8}, {0xF7, 0xD0}};
  static const std::vector<std::vector<std::uint8_t>> ops = {
      {0x55}, {0x8B, 0xEC}, {0x83, 0xEC}, {0x8B, 0x45}, {0x89, 0x45}, {0xE8}, {0xC3}, {0x5D},
      {0x6A}, {0xFF, 0x15}, {0x33, 0xC0}, {0x85, 0xC0}, {0x74}, {0x75}, {0x90}, {0x50}, {0x53},
      {0x56}, {0x57}, {0x8D, 0x4D}, {0x3B, 0xC1}, {0xC7, 0x45}};
  std::size_t at = 0;
  while (at < out.size()) {
    const auto& table = bernoulli(rng, stub_rate) ? stub_ops : ops;
    const auto& op = table[uniform_int(rng, 0, table.size() - 1)];
    for (auto b : op) {
      if (at < out.size()) out[at++] = b;
    }
    // small immediate / displacement operand
    const auto operand = uniform_int(rng, 0, 2);
    for (std::uint64_t k = 0; k < operand && at < out.size(); ++k) {
      out[at++] = static_cast<std::uint8_t>(uniform_int(rng, 0, 0x40));
    }
  }
}

void fill_text(Rng& rng, std::span<std::uint8_t> out) {
  std::size_t at = 0;
  while (at < out.size()) {
    const std::string_view w = kWords[uniform_int(rng, 0, std::size(kWords) - 1)];
    for (char c : w) {
      if (at < out.size()) out[at++] = static_cast<std::uint8_t>(c);
    }
    if (at < out.size()) out[at++] = uniform_int(rng, 0, 3) == 0 ? 0 : ' ';
  }
}

void fill_data(Rng& rng, std::span<std::uint8_t> out) {
  std::size_t at = 0;
  while (at < out.size()) {
    const auto kind = uniform_int(rng, 0, 2);
    const std::size_t len = std::min<std::size_t>(uniform_int(rng, 8, 64), out.size() - at);
    auto chunk = out.subspan(at, len);
    if (kind == 0) {
      std::fill(chunk.begin(), chunk.end(), 0);
    } else if (kind == 1) {
      for (std::size_t i = 0; i < chunk.size(); i += 4) chunk[i] = static_cast<std::uint8_t>(uniform_int(rng, 0, 255));
    } else {
      fill_text(rng, chunk);
    }
    at += len;
  }
}

void fill_random(Rng& rng, std::span<std::uint8_t> out) {
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
}

void fill_reloc(Rng& rng, std::span<std::uint8_t> out) {
  for (std::size_t i = 0; i + 1 < out.size(); i += 2) {
    const std::uint16_t entry = static_cast<std::uint16_t>(0x3000 | uniform_int(rng, 0, 0xFFF));
    out[i] = static_cast<std::uint8_t>(entry);
    out[i + 1] = static_cast<std::uint8_t>(entry >> 8);
  }
}

std::string pick(Rng& rng, const std::vector<std::string_view>& names) {
  return std::string(names[uniform_int(rng, 0, names.size() - 1)]);
}

std::vector<pe::ImportRequest> plan_imports(Rng& rng, Label label, int& suspicious_count) {
  const auto& dlls = catalog::benign_dlls();
  std::vector<std::size_t> order(dlls.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin() + 1, order.end(), rng);  // KERNEL32 always first
  const bool mal = label == Label::Malicious;
  const std::size_t ndll = mal ? uniform_int(rng, 1, 3) : uniform_int(rng, 2, 6);
  std::vector<pe::ImportRequest> out;
  for (std::size_t i = 0; i < ndll; ++i) {
    const auto& entry = dlls[order[i]];
    std::vector<std::string_view> fns(entry.functions.begin(), entry.functions.end());
    std::shuffle(fns.begin(), fns.end(), rng);
    const std::size_t nf = std::min<std::size_t>(fns.size(), mal ? uniform_int(rng, 2, 6) : uniform_int(rng, 3, 10));
    pe::ImportRequest req{std::string(entry.dll), {}};
    for (std::size_t k = 0; k < nf; ++k) req.functions.emplace_back(fns[k]);
    out.push_back(std::move(req));
  }
  suspicious_count = 0;
  const auto& sus = catalog::suspicious_functions();
  std::size_t nsus = 0;
  if (mal) {
    nsus = bernoulli(rng, 0.85) ? uniform_int(rng, 2, 7) : 0;
  } else {
    nsus = bernoulli(rng, 0.25) ? uniform_int(rng, 1, 2) : 0;
  }
  std::vector<std::string_view> pool(sus.begin(), sus.end());
  std::shuffle(pool.begin(), pool.end(), rng);
  for (std::size_t k = 0; k < nsus && k < pool.size(); ++k) {
    out.front().functions.emplace_back(pool[k]);
    ++suspicious_count;
  }
  return out;
}

Bytes make_certificate(Rng& rng) {
  const std::size_t len = align_up(uniform_int(rng, 0x200, 0x800), 8);
  Bytes cert(len);
  fill_random(rng, cert);
  std::span<std::uint8_t> c(cert);
  store_le<std::uint32_t>(c, 0, static_cast<std::uint32_t>(len));
  store_le<std::uint16_t>(c, 4, 0x0200);  // WIN_CERT_REVISION_2_0
  store_le<std::uint16_t>(c, 6, 0x0002);  // WIN_CERT_TYPE_PKCS_SIGNED_DATA
  cert[8] = 0x30;
  cert[9] = 0x82;
  return cert;
}

Bytes dos_stub_program() {
  const std::uint8_t code[] = {0x0E, 0x1F, 0xBA, 0x0E, 0x00, 0xB4, 0x09, 0xCD,
                               0x21, 0xB8, 0x01, 0x4C, 0xCD, 0x21};
  const std::string msg = "This program cannot be run in DOS mode.\r\r\n$";
  Bytes stub(std::begin(code), std::end(code));
  stub.insert(stub.end(), msg.begin(), msg.end());
  return stub;
}

Bytes make_optional_fixed(Rng& rng, bool gui) {
  Bytes fixed(pe::optional_fixed_size(pe::kPe32Magic), 0);
  std::span<std::uint8_t> f(fixed);
  f[2] = static_cast<std::uint8_t>(uniform_int(rng, 8, 14));  // linker version
  f[3] = static_cast<std::uint8_t>(uniform_int(rng, 0, 30));
  store_le<std::uint32_t>(f, 28, kImageBase);
  store_le<std::uint16_t>(f, 40, 6);  // OS version
  store_le<std::uint16_t>(f, 48, 6);  // subsystem version
  store_le<std::uint16_t>(f, 68, gui ? 2 : 3);
  store_le<std::uint16_t>(f, 70, 0x8140);
  store_le<std::uint32_t>(f, 72, 0x100000);
  store_le<std::uint32_t>(f, 76, 0x1000);
  store_le<std::uint32_t>(f, 80, 0x100000);
  store_le<std::uint32_t>(f, 84, 0x1000);
  return fixed;
}

}  // namespace

const char* to_string(Label label) { return label == Label::Malicious ? "malicious" : "benign"; }

void CorpusSpec::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  for (const auto* prof : {&benign, &malicious}) {
    if (!prob(prof->p_imports) || !prob(prof->p_debug) || !prob(prof->p_certificate) || !prob(prof->p_overlay)) {
      throw std::invalid_argument("corpus spec probabilities must lie in [0,1]");
    }
  }
  if (!prob(p_tight_slack)) throw std::invalid_argument("p_tight_slack must lie in [0,1]");
  if (malicious_count == 0 && benign_count == 0) throw std::invalid_argument("corpus spec counts must be > 0");
  if (min_sections < 1 || max_sections > 5 || min_sections > max_sections) {
    throw std::invalid_argument("section count range must lie within 1..5");
  }
  if (motifs_per_malicious < 0) throw std::invalid_argument("motifs_per_malicious must be >= 0");
}

CorpusFile generate_file(const CorpusSpec& spec, Label label, std::uint64_t seed, const std::string& id) {
  Rng rng(seed);
  const bool mal = label == Label::Malicious;
  const LabelProfile& profile = mal ? spec.malicious : spec.benign;
  CorpusFile file;
  file.id = id;
  file.label = label;
  auto& rec = file.record;
  rec.seed = seed;

  // --- section plan -------------------------------------------------------
  const int lo = spec.min_sections;
  const int hi = spec.max_sections;
  int nsec = static_cast<int>(mal ? uniform_int(rng, lo, std::min(hi, 4)) : uniform_int(rng, std::max(lo, 2), hi));
  nsec = std::clamp(nsec, lo, hi);
  rec.imports = bernoulli(rng, profile.p_imports);
  rec.debug = bernoulli(rng, profile.p_debug);
  rec.certificate = bernoulli(rng, profile.p_certificate);
  rec.overlay = bernoulli(rng, profile.p_overlay);

  std::vector<Role> roles{Role::Code};
  if (mal) {
    const Role extra[] = {bernoulli(rng, 0.6) ? Role::Packed : Role::Data, Role::ReadOnly, Role::Data, Role::Resource};
    for (int i = 1; i < nsec; ++i) roles.push_back(extra[i - 1]);
  } else {
    const Role extra[] = {Role::ReadOnly, Role::Data, Role::Resource, Role::Reloc};
    for (int i = 1; i < nsec; ++i) roles.push_back(extra[i - 1]);
  }

  std::vector<SectionPlan> plans;
  int suspicious_names = 0;
  for (auto role : roles) {
    SectionPlan p{};
    p.role = role;
    switch (role) {
      case Role::Code:
        p.name = ".text";
        p.characteristics = 0x60000020;
        p.content_size = uniform_int(rng, 0x800, 0x3000);
        if (mal && bernoulli(rng, 0.3)) {
          p.name = pick(rng, catalog::suspicious_section_names());
          ++suspicious_names;
        }
        break;
      case Role::ReadOnly:
        p.name = ".rdata";
        p.characteristics = 0x40000040;
        p.content_size = uniform_int(rng, 0x200, 0xC00);
        break;
      case Role::Data:
        p.name = ".data";
        p.characteristics = 0xC0000040;
        p.content_size = uniform_int(rng, 0x200, 0xC00);
        if (bernoulli(rng, 0.7)) p.bss_extra = static_cast<std::uint32_t>(uniform_int(rng, 0x200, 0x1400));
        break;
      case Role::Resource:
        p.name = ".rsrc";
        p.characteristics = 0x40000040;
        p.content_size = uniform_int(rng, 0x400, mal ? 0x1000 : 0x2000);
        break;
      case Role::Reloc:
        p.name = ".reloc";
        p.characteristics = 0x42000040;
        p.content_size = uniform_int(rng, 0x100, 0x400);
        break;
      case Role::Packed:
        p.name = bernoulli(rng, 0.75) ? pick(rng, catalog::suspicious_section_names()) : ".data";
        if (p.name != ".data") ++suspicious_names;
        p.characteristics = 0xE0000060;
        p.content_size = uniform_int(rng, 0x1000, 0x4000);
        if (bernoulli(rng, 0.5)) p.bss_extra = static_cast<std::uint32_t>(uniform_int(rng, 0x200, 0x2000));
        break;
    }
    plans.push_back(std::move(p));
  }
  rec.suspicious_section_names = suspicious_names;

  // Import tables and debug records live in the read-only section, or the code section without one.
  const std::size_t table_home = [&] {
    for (std::size_t i = 0; i < plans.size(); ++i) {
      if (plans[i].role == Role::ReadOnly) return i;
    }
    return std::size_t{0};
  }();
  std::vector<pe::ImportRequest> imports;
  int suspicious_imports = 0;
  if (rec.imports) imports = plan_imports(rng, label, suspicious_imports);
  rec.suspicious_imports = suspicious_imports;
  const std::size_t import_size = rec.imports ? pe::build_import_table(0, {}, imports, false).bytes.size() : 0;
  const std::string pdb = std::string("C:\\build\\") + kWords[uniform_int(rng, 0, std::size(kWords) - 1)] + ".pdb";
  const std::size_t rsds_size = 24 + pdb.size() + 1;
  const std::size_t debug_size = rec.debug ? pe::kDebugDirectoryEntrySize + rsds_size : 0;
  auto& home = plans[table_home];
  const std::size_t home_prefix = home.content_size;
  home.content_size = align_up(home_prefix, 16) + align_up(import_size, 16) + debug_size;

  for (std::size_t i = 0; i < plans.size(); ++i) {
    // File gaps only follow sections with virtual room, so the gap can absorb growth.
    if (plans[i].bss_extra != 0 && i + 1 < plans.size() && bernoulli(rng, 0.6)) {
      plans[i].gap_after = static_cast<std::uint32_t>(align_up(plans[i].bss_extra, kFileAlignment));
    }
  }

  // --- header geometry ----------------------------------------------------
  const std::size_t soh = pe::optional_fixed_size(pe::kPe32Magic) + 16 * pe::kDataDirectorySize;
  const std::size_t fixed_headers = 4 + pe::kCoffHeaderSize + soh + pe::kSectionHeaderSize * plans.size();
  rec.tight_slack = bernoulli(rng, spec.p_tight_slack);
  std::uint32_t e_lfanew = 0;
  std::uint32_t size_of_headers = 0;
  if (rec.tight_slack) {
    size_of_headers = 0x400;
    const std::uint32_t slack = static_cast<std::uint32_t>(uniform_int(rng, 0, 4)) * 8;  // 0..32 bytes
    e_lfanew = static_cast<std::uint32_t>(size_of_headers - slack - fixed_headers);
  } else {
    e_lfanew = static_cast<std::uint32_t>(0x80 + 8 * uniform_int(rng, 0, 16));
    size_of_headers = static_cast<std::uint32_t>(align_up(e_lfanew + fixed_headers, kFileAlignment));
    if (size_of_headers - (e_lfanew + fixed_headers) < kMinSlack) size_of_headers += kFileAlignment;
  }

  // --- layout ---------------------------------------------------------------
  std::uint32_t va = kSectionAlignment;
  std::uint32_t ptr = size_of_headers;
  for (auto& p : plans) {
    p.va = va;
    p.pointer = ptr;
    const auto raw = static_cast<std::uint32_t>(align_up(p.content_size, kFileAlignment));
    const std::uint32_t vsize = static_cast<std::uint32_t>(p.content_size) + (p.bss_extra ? raw - static_cast<std::uint32_t>(p.content_size) + p.bss_extra : 0);
    va = static_cast<std::uint32_t>(align_up(va + vsize, kSectionAlignment));
    ptr += raw + p.gap_after;
  }

  PeImage img;
  img.dos_header.e_lfanew = e_lfanew;
  {
    auto& r = img.dos_header.reserved_fields;
    auto put16 = [&](std::size_t header_off, std::uint16_t v) {
      r[header_off - 2] = static_cast<std::uint8_t>(v);
      r[header_off - 1] = static_cast<std::uint8_t>(v >> 8);
    };
    put16(2, 0x90);
    put16(4, 3);
    put16(8, 4);
    put16(12, 0xFFFF);
    put16(16, 0xB8);
    put16(24, 0x40);
  }
  img.dos_stub = dos_stub_program();
  img.dos_stub.resize(e_lfanew - pe::kDosHeaderSize, 0);

  img.coff.machine = 0x14C;
  img.coff.number_of_sections = static_cast<std::uint16_t>(plans.size());
  const std::uint32_t stamp_lo = mal ? kMaliciousStampLo : kBenignStampLo;
  const std::uint32_t stamp_hi = mal ? kMaliciousStampHi : kBenignStampHi;
  img.coff.time_date_stamp = static_cast<std::uint32_t>(uniform_int(rng, stamp_lo, stamp_hi));
  rec.time_date_stamp = img.coff.time_date_stamp;
  img.coff.size_of_optional_header = static_cast<std::uint16_t>(soh);
  img.coff.characteristics = 0x0102;

  auto& opt = img.optional;
  opt.fixed_bytes = make_optional_fixed(rng, bernoulli(rng, 0.7));
  opt.number_of_rva_and_sizes = 16;
  opt.data_directories.assign(16, {});
  opt.size_of_headers = size_of_headers;

  // --- section contents -----------------------------------------------------
  const double stub_rate = mal ? uniform_real(rng, 0.07, 0.3) : 0.02;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& p = plans[i];
    pe::Section s;
    const auto raw = static_cast<std::uint32_t>(align_up(p.content_size, kFileAlignment));
    s.header.set_name(p.name);
    s.header.virtual_address = p.va;
    s.header.virtual_size = p.bss_extra ? raw + p.bss_extra : static_cast<std::uint32_t>(p.content_size);
    s.header.size_of_raw_data = raw;
    s.header.pointer_to_raw_data = p.pointer;
    s.header.characteristics = p.characteristics;
    s.data.assign(raw, 0);
    std::span<std::uint8_t> body(s.data.data(), i == table_home ? home_prefix : p.content_size);
    switch (p.role) {
      case Role::Code: fill_code(rng, body, stub_rate); break;
      case Role::ReadOnly: fill_text(rng, body); break;
      case Role::Data: fill_data(rng, body); break;
      case Role::Resource:
        if (bernoulli(rng, mal ? 0.3 : 0.45)) fill_random(rng, body);
        else fill_data(rng, body);
        break;
      case Role::Reloc: fill_reloc(rng, body); break;
      case Role::Packed: fill_random(rng, body); break;
    }

    if (i == table_home) {
      std::size_t at = align_up(home_prefix, 16);
      if (rec.imports) {
        const auto base = static_cast<std::uint32_t>(p.va + at);
        const auto blob = pe::build_import_table(base, {}, imports, false);
        std::copy(blob.bytes.begin(), blob.bytes.end(), s.data.begin() + static_cast<std::ptrdiff_t>(at));
        opt.data_directories[pe::kImportDirectory] = {blob.idt_rva, blob.idt_size};
        opt.data_directories[pe::kIatDirectory] = {blob.iat_rva, blob.iat_size};
        at += align_up(blob.bytes.size(), 16);
      }
      if (rec.debug) {
        std::span<std::uint8_t> d(s.data);
        const std::size_t rsds_at = at + pe::kDebugDirectoryEntrySize;
        store_le<std::uint32_t>(d, at + 4, img.coff.time_date_stamp);
        store_le<std::uint32_t>(d, at + 12, 2);  // IMAGE_DEBUG_TYPE_CODEVIEW
        store_le<std::uint32_t>(d, at + 16, static_cast<std::uint32_t>(rsds_size));
        store_le<std::uint32_t>(d, at + 20, static_cast<std::uint32_t>(p.va + rsds_at));
        store_le<std::uint32_t>(d, at + 24, static_cast<std::uint32_t>(p.pointer + rsds_at));
        const char sig[] = {'R', 'S', 'D', 'S'};
        std::copy(std::begin(sig), std::end(sig), s.data.begin() + static_cast<std::ptrdiff_t>(rsds_at));
        fill_random(rng, d.subspan(rsds_at + 4, 16));
        store_le<std::uint32_t>(d, rsds_at + 20, 1);
        std::copy(pdb.begin(), pdb.end(), s.data.begin() + static_cast<std::ptrdiff_t>(rsds_at + 24));
        opt.data_directories[pe::kDebugDirectory] = {static_cast<std::uint32_t>(p.va + at),
                                                     static_cast<std::uint32_t>(pe::kDebugDirectoryEntrySize)};
      }
    }
    if (p.role == Role::Resource) opt.data_directories[2] = {p.va, static_cast<std::uint32_t>(p.content_size)};
    if (p.role == Role::Reloc) opt.data_directories[5] = {p.va, static_cast<std::uint32_t>(p.content_size)};
    img.sections.push_back(std::move(s));
    if (p.gap_after) img.gaps.push_back({static_cast<std::uint32_t>(p.pointer + raw), Bytes(p.gap_after, 0)});
  }

  // Header slack is its own gap so the file starts its first section exactly at size_of_headers.
  const auto table_end = img.section_table_end();
  if (size_of_headers > table_end) {
    img.gaps.insert(img.gaps.begin(),
                    {static_cast<std::uint32_t>(table_end), Bytes(size_of_headers - table_end, 0)});
  }

  // --- planted motifs -------------------------------------------------------
  int planted = 0;
  int want = 0;
  if (mal) {
    want = std::max(1, static_cast<int>(spec.motifs_per_malicious + static_cast<int>(uniform_int(rng, 0, 6)) - 3));
  } else if (bernoulli(rng, 0.3)) {
    want = static_cast<int>(uniform_int(rng, 1, 2));
  }
  std::vector<std::size_t> hosts;
  std::vector<std::size_t> plantable(plans.size());
  for (std::size_t i = 0; i < plans.size(); ++i) {
    plantable[i] = i == table_home ? home_prefix : plans[i].content_size;
    if (plantable[i] >= 64) hosts.push_back(i);
  }
  for (int k = 0; k < want && !hosts.empty(); ++k) {
    const auto host = hosts[uniform_int(rng, 0, hosts.size() - 1)];
    const auto& motif = catalog::motifs()[uniform_int(rng, 0, catalog::motifs().size() - 1)];
    const auto at = uniform_int(rng, 0, plantable[host] - catalog::kMotifLength);
    std::copy(motif.begin(), motif.end(), img.sections[host].data.begin() + static_cast<std::ptrdiff_t>(at));
    ++planted;
  }
  rec.motifs_planted = planted;

  // --- optional header totals ---------------------------------------------
  const auto& code = img.sections.front();
  opt.size_of_code = code.header.size_of_raw_data;
  opt.address_of_entry_point =
      code.header.virtual_address + static_cast<std::uint32_t>(uniform_int(rng, 0, plans.front().content_size / 2));
  const auto& last = img.sections.back().header;
  opt.size_of_image = static_cast<std::uint32_t>(align_up(last.virtual_address + last.virtual_size, kSectionAlignment));

  // --- overlay + certificate -----------------------------------------------
  if (rec.overlay) {
    img.overlay.resize(align_up(uniform_int(rng, 0x200, mal ? 0x3000 : 0x1000), 8));
    if (bernoulli(rng, mal ? 0.8 : 0.4)) fill_random(rng, img.overlay);
    else fill_data(rng, img.overlay);
  }
  if (rec.certificate) {
    const auto cert = make_certificate(rng);
    const auto offset = img.data_end() + img.overlay.size();
    img.overlay.insert(img.overlay.end(), cert.begin(), cert.end());
    opt.data_directories[pe::kSecurityDirectory] = {static_cast<std::uint32_t>(offset),
                                                    static_cast<std::uint32_t>(cert.size())};
  }
  img.source_len = img.serialized_size();

  // --- checksum -------------------------------------------------------------
  const bool valid_checksum = mal ? bernoulli(rng, 0.35) : bernoulli(rng, 0.65);
  if (valid_checksum) {
    const auto bytes = pe::serialize(img);
    opt.checksum = pe::compute_checksum(bytes, pe::checksum_field_offset(img));
  } else if (mal && bernoulli(rng, 0.1)) {
    opt.checksum = static_cast<std::uint32_t>(rng() | 1);
  }
  rec.checksum_zero = opt.checksum == 0;
  rec.sections = static_cast<int>(img.sections.size());
  file.bytes = pe::serialize(img);
  return file;
}

std::vector<CorpusFile> generate(const CorpusSpec& spec) {
  spec.validate();
  std::vector<CorpusFile> out;
  out.reserve(spec.malicious_count + spec.benign_count);
  for (std::size_t i = 0; i < spec.malicious_count; ++i) {
    const auto seed = derive_seed(spec.seed, {hash_tag("malicious"), i});
    out.push_back(generate_file(spec, Label::Malicious, seed, "mal_" + std::to_string(i)));
  }
  for (std::size_t i = 0; i < spec.benign_count; ++i) {
    const auto seed = derive_seed(spec.seed, {hash_tag("benign"), i});
    out.push_back(generate_file(spec, Label::Benign, seed, "ben_" + std::to_string(i)));
  }
  return out;
}

}  // namespace amg::corpus
