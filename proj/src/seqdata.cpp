#include "musep/seqdata.hpp"

#include "musep/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace musep {

std::string_view to_string(Dimension d) {
  return d == Dimension::Arousal ? "arousal" : "valence";
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::Train: return "train";
    case Role::Dev: return "dev";
    case Role::Test: return "test";
  }
  return "train";
}

Dimension parse_dimension(std::string_view s) {
  if (s == "arousal") return Dimension::Arousal;
  if (s == "valence") return Dimension::Valence;
  fail(ErrorCode::TypeError, "unknown dimension '" + std::string(s) + "'");
}

Role parse_role(std::string_view s) {
  if (s == "train") return Role::Train;
  if (s == "dev") return Role::Dev;
  if (s == "test") return Role::Test;
  fail(ErrorCode::TypeError, "unknown role '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// text helpers

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_view(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

std::string format_double(double v) {
  // Shortest representation that parses back to the same bits.
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::optional<double> try_parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> try_parse_int(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  std::int64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

namespace {

struct NumericTable {
  std::vector<std::string> header;
  std::vector<TimestampMs> timestamps;
  std::vector<double> values;  // row-major, header.size()-1 per row
};

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

NumericTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());

  NumericTable table;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::MalformedCsv, path.string() + ": empty file");
  for (auto col : split_view(line, ',')) table.header.emplace_back(col);
  if (table.header.size() < 2 || table.header[0] != "timestamp") {
    fail(ErrorCode::MalformedCsv, where(path, 1) + ": header must start with 'timestamp'");
  }
  const std::size_t width = table.header.size() - 1;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_view(line, ',');
    if (cells.size() != table.header.size()) {
      fail(ErrorCode::MalformedCsv, where(path, line_no) + ": expected " +
                                        std::to_string(table.header.size()) + " fields, got " +
                                        std::to_string(cells.size()));
    }
    const auto ts = try_parse_int(cells[0]);
    if (!ts) fail(ErrorCode::MalformedCsv, where(path, line_no) + ": bad timestamp");
    if (!table.timestamps.empty() && *ts <= table.timestamps.back()) {
      fail(ErrorCode::NonMonotoneTimestamps,
           where(path, line_no) + ": timestamp " + std::to_string(*ts) + " does not increase");
    }
    table.timestamps.push_back(*ts);
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = try_parse_double(cells[c + 1]);
      if (!v) {
        fail(ErrorCode::MalformedCsv, where(path, line_no) + ": column " + table.header[c + 1] +
                                          " is not a number");
      }
      if (!std::isfinite(*v)) {
        fail(ErrorCode::NonFiniteValue, where(path, line_no) + ": row " +
                                            std::to_string(table.timestamps.size() - 1) +
                                            " column " + table.header[c + 1]);
      }
      table.values.push_back(*v);
    }
  }
  return table;
}

void check_grid(const std::vector<TimestampMs>& ts, const std::string& what) {
  if (ts.size() < 2) fail(ErrorCode::MalformedCsv, what + ": need at least 2 steps");
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (ts[i] <= ts[i - 1]) {
      fail(ErrorCode::NonMonotoneTimestamps, what + ": step " + std::to_string(i));
    }
    if (ts[i] - ts[i - 1] != kStepMs) {
      fail(ErrorCode::NonMonotoneTimestamps,
           what + ": step " + std::to_string(i) + " is not on the 500 ms grid");
    }
  }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// validation

void validate(const FeatureSequence& seq) {
  const std::string what = seq.subject_id + "/" + seq.modality;
  check_grid(seq.timestamps, what);
  if (static_cast<std::size_t>(seq.values.rows()) != seq.steps()) {
    fail(ErrorCode::DimensionMismatch, what + ": values rows != timestamps");
  }
  for (Eigen::Index r = 0; r < seq.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < seq.values.cols(); ++c) {
      if (!std::isfinite(seq.values(r, c))) {
        fail(ErrorCode::NonFiniteValue,
             what + ": row " + std::to_string(r) + " column " + std::to_string(c));
      }
    }
  }
}

void validate(const LabelSequence& seq) {
  const std::string what = seq.subject_id + "/" + std::string(to_string(seq.dimension));
  check_grid(seq.timestamps, what);
  if (seq.values.size() != seq.steps()) fail(ErrorCode::DimensionMismatch, what + ": length");
  for (std::size_t i = 0; i < seq.values.size(); ++i) {
    if (!std::isfinite(seq.values[i])) {
      fail(ErrorCode::NonFiniteValue, what + ": row " + std::to_string(i));
    }
  }
}

// ---------------------------------------------------------------------------
// CSV

FeatureSequence load_feature_csv(const std::filesystem::path& path,
                                 std::optional<std::size_t> expected_dim, std::string subject_id,
                                 std::string modality) {
  NumericTable table = read_table(path);
  const std::size_t width = table.header.size() - 1;
  for (std::size_t c = 0; c < width; ++c) {
    if (table.header[c + 1] != "f_" + std::to_string(c)) {
      fail(ErrorCode::MalformedCsv, path.string() + ": header column " + std::to_string(c + 1) +
                                        " should be f_" + std::to_string(c));
    }
  }
  if (expected_dim && *expected_dim != width) {
    fail(ErrorCode::DimensionMismatch, path.string() + ": expected " +
                                           std::to_string(*expected_dim) + " dims, found " +
                                           std::to_string(width));
  }
  FeatureSequence seq;
  seq.subject_id = std::move(subject_id);
  seq.modality = std::move(modality);
  seq.timestamps = std::move(table.timestamps);
  seq.values = Eigen::Map<const Matrix>(table.values.data(),
                                        static_cast<Eigen::Index>(seq.timestamps.size()),
                                        static_cast<Eigen::Index>(width));
  check_grid(seq.timestamps, path.string());
  return seq;
}

void write_feature_csv(const std::filesystem::path& path, const FeatureSequence& seq) {
  auto out = open_for_write(path);
  out << "timestamp";
  for (std::size_t c = 0; c < seq.dims(); ++c) out << ",f_" << c;
  out << '\n';
  for (std::size_t r = 0; r < seq.steps(); ++r) {
    out << seq.timestamps[r];
    for (std::size_t c = 0; c < seq.dims(); ++c) {
      out << ',' << format_double(seq.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

LabelSequence load_label_csv(const std::filesystem::path& path, Dimension dimension,
                             std::string subject_id) {
  NumericTable table = read_table(path);
  if (table.header.size() != 2 || table.header[1] != "value") {
    fail(ErrorCode::MalformedCsv, path.string() + ": label header must be 'timestamp,value'");
  }
  LabelSequence seq;
  seq.subject_id = std::move(subject_id);
  seq.dimension = dimension;
  seq.timestamps = std::move(table.timestamps);
  seq.values = std::move(table.values);
  check_grid(seq.timestamps, path.string());
  return seq;
}

void write_label_csv(const std::filesystem::path& path, const LabelSequence& seq) {
  auto out = open_for_write(path);
  out << "timestamp,value\n";
  for (std::size_t i = 0; i < seq.steps(); ++i) {
    out << seq.timestamps[i] << ',' << format_double(seq.values[i]) << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// AlignedSample

const std::vector<TimestampMs>& AlignedSample::timestamps() const {
  if (!modalities.empty()) return modalities.front().timestamps;
  if (!labels.empty()) return labels.begin()->second.timestamps;
  static const std::vector<TimestampMs> empty;
  return empty;
}

std::size_t AlignedSample::total_width() const {
  std::size_t n = 0;
  for (const auto& m : modalities) n += m.dims();
  return n;
}

std::vector<std::string> AlignedSample::modality_names() const {
  std::vector<std::string> names;
  names.reserve(modalities.size());
  for (const auto& m : modalities) names.push_back(m.modality);
  return names;
}

const LabelSequence& AlignedSample::label(Dimension d) const {
  const auto it = labels.find(d);
  if (it == labels.end()) {
    fail(ErrorCode::MissingPrediction,
         subject_id + ": no " + std::string(to_string(d)) + " labels");
  }
  return it->second;
}

Matrix AlignedSample::concat_features() const {
  Matrix x(static_cast<Eigen::Index>(steps()), static_cast<Eigen::Index>(total_width()));
  Eigen::Index col = 0;
  for (const auto& m : modalities) {
    x.middleCols(col, m.values.cols()) = m.values;
    col += m.values.cols();
  }
  return x;
}

AlignedSample align_and_label(const std::vector<FeatureSequence>& features,
                              const std::vector<LabelSequence>& labels, Role role) {
  if (features.empty() && labels.empty()) {
    fail(ErrorCode::EmptyIntersection, "nothing to align");
  }
  const std::string& subject =
      features.empty() ? labels.front().subject_id : features.front().subject_id;
  for (const auto& f : features) {
    if (f.subject_id != subject) {
      fail(ErrorCode::SubjectMismatch, "feature " + f.modality + " belongs to '" + f.subject_id +
                                           "', expected '" + subject + "'");
    }
  }
  for (const auto& l : labels) {
    if (l.subject_id != subject) {
      fail(ErrorCode::SubjectMismatch, "label belongs to '" + l.subject_id + "', expected '" +
                                           subject + "'");
    }
  }

  std::vector<TimestampMs> grid;
  bool first = true;
  auto intersect = [&](const std::vector<TimestampMs>& ts) {
    if (first) {
      grid = ts;
      first = false;
      return;
    }
    std::vector<TimestampMs> out;
    std::set_intersection(grid.begin(), grid.end(), ts.begin(), ts.end(), std::back_inserter(out));
    grid = std::move(out);
  };
  for (const auto& f : features) intersect(f.timestamps);
  for (const auto& l : labels) intersect(l.timestamps);
  if (grid.empty()) fail(ErrorCode::EmptyIntersection, subject + ": no common timestamps");

  auto index_of = [](const std::vector<TimestampMs>& ts, TimestampMs t) {
    return static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), t) - ts.begin());
  };

  AlignedSample out;
  out.subject_id = subject;
  out.role = role;
  for (const auto& f : features) {
    FeatureSequence g;
    g.subject_id = f.subject_id;
    g.modality = f.modality;
    g.timestamps = grid;
    g.values.resize(static_cast<Eigen::Index>(grid.size()), f.values.cols());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      g.values.row(static_cast<Eigen::Index>(i)) =
          f.values.row(static_cast<Eigen::Index>(index_of(f.timestamps, grid[i])));
    }
    out.modalities.push_back(std::move(g));
  }
  for (const auto& l : labels) {
    LabelSequence g;
    g.subject_id = l.subject_id;
    g.dimension = l.dimension;
    g.timestamps = grid;
    g.values.reserve(grid.size());
    for (const TimestampMs t : grid) g.values.push_back(l.values[index_of(l.timestamps, t)]);
    out.labels[l.dimension] = std::move(g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// normalization

NormStats fit_norm_stats(std::span<const AlignedSample> train_samples) {
  if (train_samples.empty()) fail(ErrorCode::EmptyCorpus, "fit_norm_stats: no training samples");
  const AlignedSample& ref = train_samples.front();
  NormStats stats;
  for (std::size_t m = 0; m < ref.modalities.size(); ++m) {
    const auto& ref_mod = ref.modalities[m];
    const Eigen::Index n = ref_mod.values.cols();
    Vector sum = Vector::Zero(n);
    double count = 0.0;
    for (const auto& s : train_samples) {
      if (s.modalities.size() != ref.modalities.size() || s.modalities[m].modality != ref_mod.modality ||
          s.modalities[m].values.cols() != n) {
        fail(ErrorCode::DimensionMismatch, s.subject_id + ": modality layout differs from " +
                                               ref.subject_id);
      }
      sum += s.modalities[m].values.colwise().sum().transpose();
      count += static_cast<double>(s.modalities[m].values.rows());
    }
    const Vector mean = sum / count;
    Vector sq = Vector::Zero(n);
    for (const auto& s : train_samples) {
      sq += (s.modalities[m].values.rowwise() - mean.transpose()).array().square().matrix()
                .colwise()
                .sum()
                .transpose();
    }
    ModalityStats ms;
    ms.name = ref_mod.modality;
    ms.mean = mean;
    ms.std = (sq / count).array().sqrt().max(kStdFloor).matrix();
    stats.modalities.push_back(std::move(ms));
  }
  return stats;
}

AlignedSample apply_norm(const AlignedSample& sample, const NormStats& stats) {
  if (sample.modalities.size() != stats.modalities.size()) {
    fail(ErrorCode::DimensionMismatch, sample.subject_id + ": " +
                                           std::to_string(sample.modalities.size()) +
                                           " modalities vs " +
                                           std::to_string(stats.modalities.size()) + " in stats");
  }
  AlignedSample out = sample;
  for (std::size_t m = 0; m < out.modalities.size(); ++m) {
    auto& values = out.modalities[m].values;
    const auto& ms = stats.modalities[m];
    if (values.cols() != ms.mean.size() || out.modalities[m].modality != ms.name) {
      fail(ErrorCode::DimensionMismatch,
           sample.subject_id + ": modality " + out.modalities[m].modality + " does not match stats '" +
               ms.name + "'");
    }
    values = ((values.rowwise() - ms.mean.transpose()).array().rowwise() /
              ms.std.transpose().array())
                 .matrix();
  }
  return out;
}

// ---------------------------------------------------------------------------
// splits

SubjectSplit make_subject_split(const AlignedSample& sample, std::size_t segment_steps) {
  const std::size_t t = sample.steps();
  SubjectSplit split;
  split.subject_id = sample.subject_id;
  const std::size_t a = std::min(segment_steps, t);
  const std::size_t b = std::min(2 * segment_steps, t);
  split.personal_train = {0, a};
  split.personal_dev = {a, b};
  split.personal_test = {b, t};
  return split;
}

AlignedSample slice(const AlignedSample& sample, StepRange range) {
  if (range.end > sample.steps() || range.begin > range.end) {
    fail(ErrorCode::ShapeMismatch, sample.subject_id + ": slice out of range");
  }
  const auto b = static_cast<Eigen::Index>(range.begin);
  const auto n = static_cast<Eigen::Index>(range.size());
  AlignedSample out;
  out.subject_id = sample.subject_id;
  out.role = sample.role;
  for (const auto& m : sample.modalities) {
    FeatureSequence f;
    f.subject_id = m.subject_id;
    f.modality = m.modality;
    f.timestamps.assign(m.timestamps.begin() + b, m.timestamps.begin() + b + n);
    f.values = m.values.middleRows(b, n);
    out.modalities.push_back(std::move(f));
  }
  for (const auto& [dim, l] : sample.labels) {
    LabelSequence s;
    s.subject_id = l.subject_id;
    s.dimension = dim;
    s.timestamps.assign(l.timestamps.begin() + b, l.timestamps.begin() + b + n);
    s.values.assign(l.values.begin() + b, l.values.begin() + b + n);
    out.labels[dim] = std::move(s);
  }
  return out;
}

AlignedSample select_modalities(const AlignedSample& sample, std::span<const std::string> names) {
  AlignedSample out;
  out.subject_id = sample.subject_id;
  out.role = sample.role;
  out.labels = sample.labels;
  for (const auto& name : names) {
    const auto it = std::find_if(sample.modalities.begin(), sample.modalities.end(),
                                 [&](const FeatureSequence& f) { return f.modality == name; });
    if (it == sample.modalities.end()) {
      fail(ErrorCode::LayoutMismatch, sample.subject_id + ": modality '" + name + "' not present");
    }
    out.modalities.push_back(*it);
  }
  return out;
}

}  // namespace musep
