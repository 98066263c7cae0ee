#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <string_view>

#include "amg/catalog.hpp"
#include "amg/random.hpp"
#include "amg/validity/validity.hpp"

namespace amg::validity {

namespace {

constexpr std::size_t kEntryWindow = 64;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::uint64_t hash_bytes(ByteView bytes) {
  return hash_tag(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace

BehaviorReport StructuralBackend::report_for(ByteView bytes) {
  pe::PeImage img;
  try {
    img = pe::parse(bytes);
  } catch (const pe::PeError&) {
    return BehaviorReport::failure();
  }
  const auto diags = pe::check_invariants(img);
  if (pe::has_errors(diags)) return BehaviorReport::failure();

  std::vector<pe::ImportDescriptor> imports;
  try {
    imports = pe::parse_imports(img);
  } catch (const pe::PeError&) {
    return BehaviorReport::failure();  // the loader would refuse the import table
  }

  const auto ep = pe::section_index_for_rva(img, img.optional.address_of_entry_point);
  if (!ep) return BehaviorReport::failure();
  const auto& code = img.sections[*ep];
  const auto ep_off = img.optional.address_of_entry_point - code.header.virtual_address;
  if (ep_off >= code.data.size()) return BehaviorReport::failure();

  BehaviorReport r;
  const auto window = ByteView(code.data).subspan(ep_off, std::min(kEntryWindow, code.data.size() - ep_off));
  r.processes.insert("image");
  r.processes.insert("entry:" + hex64(hash_bytes(window)));
  r.processes.insert("entry_section:" + std::to_string(*ep));

  for (const auto& d : imports) {
    for (const auto& f : d.function_names) r.api_calls.insert(lower(d.dll_name) + "!" + f);
  }

  for (const auto& d : diags) r.signatures.insert("warn:" + d.field_path);
  const auto& motifs = catalog::motifs();
  for (std::size_t m = 0; m < motifs.size(); ++m) {
    for (const auto& s : img.sections) {
      if (std::search(s.data.begin(), s.data.end(), motifs[m].begin(), motifs[m].end()) != s.data.end()) {
        r.signatures.insert("pattern:" + std::to_string(m));
        break;
      }
    }
  }
  return r;
}

ReportTriple StructuralBackend::observe(const std::string&, ByteView bytes, Role) const {
  const auto r = report_for(bytes);
  return {r, r, r};
}

ReportTriple FixtureBackend::observe(const std::string& file_id, ByteView, Role role) const {
  namespace fs = std::filesystem;
  const auto dir = fs::path(root_) / file_id;
  if (!fs::is_directory(dir)) throw BackendError("no fixture directory for " + file_id);
  ReportTriple out;
  const char* prefix = role == Role::Control ? "control_" : "test_";
  for (int i = 0; i < kRounds; ++i) {
    out[static_cast<std::size_t>(i)] = load_report((dir / (prefix + std::to_string(i + 1) + ".json")).string());
  }
  return out;
}

}  // namespace amg::validity
