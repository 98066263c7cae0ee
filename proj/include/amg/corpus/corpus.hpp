#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amg/bytes.hpp"

namespace amg::corpus {

enum class Label { Benign, Malicious };

const char* to_string(Label label);

/// Per-label inclusion probabilities for optional PE structures.
struct LabelProfile {
  double p_imports = 1.0;
  double p_debug = 0.5;
  double p_certificate = 0.3;
  double p_overlay = 0.3;
};

struct CorpusSpec {
  std::size_t malicious_count = 400;
  std::size_t benign_count = 400;
  std::uint64_t seed = 1;
  int min_sections = 1;
  int max_sections = 5;
  LabelProfile benign{1.0, 0.7, 0.5, 0.25};
  LabelProfile malicious{0.95, 0.2, 0.1, 0.5};
  /// Mean number of planted motif occurrences per malicious file.
  int motifs_per_malicious = 3;
  /// Fraction of files whose header table leaves fewer than 40 spare bytes.
  double p_tight_slack = 0.3;

  void validate() const;  // throws std::invalid_argument
};

/// Ground truth recorded for each generated file.
struct GenerationRecord {
  std::uint64_t seed = 0;
  int sections = 0;
  bool imports = false;
  bool debug = false;
  bool certificate = false;
  bool overlay = false;
  bool tight_slack = false;
  int motifs_planted = 0;
  int suspicious_imports = 0;
  int suspicious_section_names = 0;
  std::uint32_t time_date_stamp = 0;
  bool checksum_zero = false;
};

struct CorpusFile {
  std::string id;
  Label label = Label::Benign;
  Bytes bytes;
  GenerationRecord record;
};

/// Deterministic in `spec`: equal specs produce byte-identical files.
std::vector<CorpusFile> generate(const CorpusSpec& spec);

/// One file, deterministic in (label, seed, spec profile).
CorpusFile generate_file(const CorpusSpec& spec, Label label, std::uint64_t seed, const std::string& id);

/// Writes `<dir>/<id>.exe` per file plus `<dir>/manifest.jsonl`.
void write_corpus(const std::vector<CorpusFile>& files, const std::string& dir);

/// Reads a directory written by write_corpus.
std::vector<CorpusFile> read_corpus(const std::string& dir);

std::string manifest_line(const CorpusFile& file, const std::string& path);

}  // namespace amg::corpus
