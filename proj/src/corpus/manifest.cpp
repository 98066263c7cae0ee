#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "amg/corpus/corpus.hpp"

namespace amg::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

std::string manifest_line(const CorpusFile& file, const std::string& path) {
  const auto& r = file.record;
  json j = {{"path", path},
            {"id", file.id},
            {"label", to_string(file.label)},
            {"seed", r.seed},
            {"features_planted",
             {{"sections", r.sections},
              {"imports", r.imports},
              {"debug", r.debug},
              {"certificate", r.certificate},
              {"overlay", r.overlay},
              {"tight_slack", r.tight_slack},
              {"motifs", r.motifs_planted},
              {"suspicious_imports", r.suspicious_imports},
              {"suspicious_section_names", r.suspicious_section_names},
              {"time_date_stamp", r.time_date_stamp},
              {"checksum_zero", r.checksum_zero}}}};
  return j.dump();
}

void write_corpus(const std::vector<CorpusFile>& files, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.jsonl", std::ios::trunc);
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir);
  for (const auto& f : files) {
    const std::string name = f.id + ".exe";
    write_file((fs::path(dir) / name).string(), f.bytes);
    manifest << manifest_line(f, name) << '\n';
  }
}

std::vector<CorpusFile> read_corpus(const std::string& dir) {
  std::ifstream manifest(fs::path(dir) / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("no manifest.jsonl in " + dir);
  std::vector<CorpusFile> out;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    CorpusFile f;
    f.id = j.at("id").get<std::string>();
    f.label = j.at("label").get<std::string>() == "malicious" ? Label::Malicious : Label::Benign;
    f.record.seed = j.at("seed").get<std::uint64_t>();
    const auto& p = j.at("features_planted");
    f.record.sections = p.value("sections", 0);
    f.record.imports = p.value("imports", false);
    f.record.debug = p.value("debug", false);
    f.record.certificate = p.value("certificate", false);
    f.record.overlay = p.value("overlay", false);
    f.record.tight_slack = p.value("tight_slack", false);
    f.record.motifs_planted = p.value("motifs", 0);
    f.record.suspicious_imports = p.value("suspicious_imports", 0);
    f.record.suspicious_section_names = p.value("suspicious_section_names", 0);
    f.record.time_date_stamp = p.value("time_date_stamp", 0u);
    f.record.checksum_zero = p.value("checksum_zero", false);
    f.bytes = read_file((fs::path(dir) / j.at("path").get<std::string>()).string());
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace amg::corpus
