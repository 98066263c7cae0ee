#include <algorithm>
#include <stdexcept>

#include "amg/catalog.hpp"
#include "amg/corpus/corpus.hpp"
#include "amg/mods/actions.hpp"

namespace amg::mods {

namespace {

constexpr std::size_t kBlobMax = 1024;
constexpr std::size_t kBlobMin = 16;

}  // namespace

BenignContentPool BenignContentPool::harvest(const std::vector<pe::PeImage>& benign_images) {
  BenignContentPool pool;
  for (const auto& img : benign_images) {
    for (const auto& s : img.sections) {
      auto end = s.data.end();
      while (end != s.data.begin() && *(end - 1) == 0) --end;  // drop alignment padding
      for (auto at = s.data.begin(); at < end; at += static_cast<std::ptrdiff_t>(kBlobMax)) {
        const auto stop = std::min(end, at + static_cast<std::ptrdiff_t>(kBlobMax));
        if (static_cast<std::size_t>(stop - at) >= kBlobMin) pool.blobs.emplace_back(at, stop);
      }
    }
  }
  for (auto name : catalog::benign_section_names()) pool.section_names.emplace_back(name);
  for (const auto& entry : catalog::benign_dlls()) {
    auto& fns = pool.dll_catalog[std::string(entry.dll)];
    for (auto f : entry.functions) fns.emplace_back(f);
  }
  return pool;
}

const BenignContentPool& BenignContentPool::builtin() {
  static const BenignContentPool pool = [] {
    corpus::CorpusSpec spec;
    spec.malicious_count = 0;
    spec.benign_count = 24;
    spec.seed = 0xB5;
    std::vector<pe::PeImage> images;
    for (const auto& f : corpus::generate(spec)) images.push_back(pe::parse(f.bytes));
    return harvest(images);
  }();
  return pool;
}

void BenignContentPool::validate() const {
  if (blobs.empty() || section_names.empty() || dll_catalog.empty()) {
    throw std::invalid_argument("benign content pool must be non-empty");
  }
  for (const auto& b : blobs) {
    if (b.size() < kBlobMin) throw std::invalid_argument("benign blob shorter than 16 bytes");
  }
  for (const auto& [dll, fns] : dll_catalog) {
    if (fns.empty()) throw std::invalid_argument("DLL catalog entry without functions: " + dll);
  }
}

}  // namespace amg::mods
