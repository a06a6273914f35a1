#include "musep/manifest.hpp"

#include "musep/error.hpp"

#include <algorithm>
#include <fstream>

namespace musep {

std::filesystem::path Manifest::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

const SubjectRecord& Manifest::subject(const std::string& id) const {
  const auto it = std::find_if(subjects.begin(), subjects.end(),
                               [&](const SubjectRecord& s) { return s.id == id; });
  if (it == subjects.end()) fail(ErrorCode::MalformedManifest, "unknown subject '" + id + "'");
  return *it;
}

std::vector<std::string> Manifest::modality_names() const {
  std::vector<std::string> names;
  for (const auto& s : subjects) {
    for (const auto& [name, path] : s.features) {
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    }
  }
  return names;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open manifest " + path.string());
  Manifest manifest;
  manifest.base_dir = path.parent_path();

  auto find = [&](std::string_view id, std::size_t line_no) -> SubjectRecord& {
    for (auto& s : manifest.subjects) {
      if (s.id == id) return s;
    }
    fail(ErrorCode::MalformedManifest, path.string() + ":" + std::to_string(line_no) +
                                           ": subject '" + std::string(id) + "' not declared");
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<std::string_view> f;
    for (auto tok : split_view(t, ' ')) {
      if (!tok.empty()) f.push_back(tok);
    }
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f[0] == "subject" && f.size() == 3) {
      for (const auto& s : manifest.subjects) {
        if (s.id == f[1]) fail(ErrorCode::MalformedManifest, where + ": duplicate subject");
      }
      SubjectRecord rec;
      rec.id = std::string(f[1]);
      try {
        rec.role = parse_role(f[2]);
      } catch (const Error&) {
        fail(ErrorCode::MalformedManifest, where + ": bad role '" + std::string(f[2]) + "'");
      }
      manifest.subjects.push_back(std::move(rec));
    } else if (f[0] == "feature" && f.size() == 4) {
      find(f[1], line_no).features[std::string(f[2])] = std::string(f[3]);
    } else if (f[0] == "label" && f.size() == 4) {
      Dimension d{};
      try {
        d = parse_dimension(f[2]);
      } catch (const Error&) {
        fail(ErrorCode::MalformedManifest, where + ": bad dimension '" + std::string(f[2]) + "'");
      }
      find(f[1], line_no).labels[d] = std::string(f[3]);
    } else if (f[0] == "signal" && f.size() == 4) {
      find(f[1], line_no).signals[std::string(f[2])] = std::string(f[3]);
    } else {
      fail(ErrorCode::MalformedManifest, where + ": unrecognised record");
    }
  }
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << "# musep corpus manifest v1\n";
  for (const auto& s : manifest.subjects) out << "subject " << s.id << ' ' << to_string(s.role) << '\n';
  for (const auto& s : manifest.subjects) {
    for (const auto& [name, p] : s.features) out << "feature " << s.id << ' ' << name << ' ' << p.generic_string() << '\n';
    for (const auto& [dim, p] : s.labels) out << "label " << s.id << ' ' << to_string(dim) << ' ' << p.generic_string() << '\n';
    for (const auto& [name, p] : s.signals) out << "signal " << s.id << ' ' << name << ' ' << p.generic_string() << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

Corpus load_corpus(const Manifest& manifest, std::span<const std::string> modalities) {
  Corpus corpus;
  for (const auto& rec : manifest.subjects) {
    std::vector<FeatureSequence> features;
    for (const auto& name : modalities) {
      const auto it = rec.features.find(name);
      if (it == rec.features.end()) {
        fail(ErrorCode::LayoutMismatch, rec.id + ": manifest has no '" + name + "' features");
      }
      features.push_back(load_feature_csv(manifest.resolve(it->second), std::nullopt, rec.id, name));
    }
    std::vector<LabelSequence> labels;
    for (const auto& [dim, p] : rec.labels) labels.push_back(load_label_csv(manifest.resolve(p), dim, rec.id));
    corpus.push_back(align_and_label(features, labels, rec.role));
  }
  return corpus;
}

Corpus select_role(const Corpus& corpus, Role role) {
  Corpus out;
  std::copy_if(corpus.begin(), corpus.end(), std::back_inserter(out),
               [&](const AlignedSample& s) { return s.role == role; });
  return out;
}

}  // namespace musep
