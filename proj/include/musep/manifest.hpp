#pragma once

#include "musep/seqdata.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace musep {

/// One subject's entry in a corpus manifest. Paths are relative to the
/// manifest's directory unless absolute.
struct SubjectRecord {
  std::string id;
  Role role = Role::Train;
  std::map<std::string, std::filesystem::path> features;  // modality -> csv
  std::map<Dimension, std::filesystem::path> labels;
  std::map<std::string, std::filesystem::path> signals;   // ecg, resp, bpm, ecg2hz
};

/// Text manifest, one record per line:
///
///     subject <id> <train|dev|test>
///     feature <id> <modality> <path>
///     label   <id> <arousal|valence> <path>
///     signal  <id> <ecg|resp|bpm|ecg2hz> <path>
///
/// Blank lines and lines starting with '#' are ignored. Subjects keep the
/// order of their `subject` lines.
struct Manifest {
  std::filesystem::path base_dir;
  std::vector<SubjectRecord> subjects;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  const SubjectRecord& subject(const std::string& id) const;
  std::vector<std::string> modality_names() const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

using Corpus = std::vector<AlignedSample>;

/// Loads and aligns every subject with the named modalities (in that order)
/// and all its labels.
Corpus load_corpus(const Manifest& manifest, std::span<const std::string> modalities);

Corpus select_role(const Corpus& corpus, Role role);

}  // namespace musep
