#include "musep/ensemble.hpp"

#include "musep/error.hpp"
#include "musep/objective.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace musep {

std::string PredictionSequence::member_name() const {
  std::string name;
  for (const auto& p : provenance) {
    name += p.combo + "#" + std::to_string(p.seed) + "#" + p.checkpoint + ";";
  }
  return name;
}

std::filesystem::path prediction_path(const std::filesystem::path& dir, Dimension d, const std::string& subject) {
  return dir / std::string(to_string(d)) / (subject + ".csv");
}

void write_prediction_csv(const std::filesystem::path& path, const PredictionSequence& pred) {
  LabelSequence as_label;
  as_label.subject_id = pred.subject_id;
  as_label.dimension = pred.dimension;
  as_label.timestamps = pred.timestamps;
  as_label.values = pred.values;
  write_label_csv(path, as_label);
}

PredictionSequence load_prediction_csv(const std::filesystem::path& path, std::string subject_id,
                                       Dimension dimension) {
  LabelSequence l = load_label_csv(path, dimension, std::move(subject_id));
  PredictionSequence p;
  p.subject_id = std::move(l.subject_id);
  p.dimension = dimension;
  p.timestamps = std::move(l.timestamps);
  p.values = std::move(l.values);
  p.provenance.push_back({path.parent_path().parent_path().filename().string(), 0, path.string()});
  return p;
}

PredictionSequence ensemble_mean(const std::vector<PredictionSequence>& members) {
  if (members.empty()) fail(ErrorCode::EmptyEnsemble, "ensemble needs at least one member");
  const auto& first = members.front();
  for (const auto& m : members) {
    if (m.subject_id != first.subject_id || m.dimension != first.dimension) {
      fail(ErrorCode::GridMismatch, "ensemble members disagree on subject or dimension");
    }
    if (m.timestamps != first.timestamps || m.values.size() != first.values.size()) {
      fail(ErrorCode::GridMismatch, first.subject_id + ": ensemble members are on different grids");
    }
  }

  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return members[a].member_name() < members[b].member_name();
  });

  PredictionSequence out;
  out.subject_id = first.subject_id;
  out.dimension = first.dimension;
  out.timestamps = first.timestamps;
  out.values.assign(first.values.size(), 0.0);
  for (const std::size_t k : order) {
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += members[k].values[i];
    out.provenance.insert(out.provenance.end(), members[k].provenance.begin(), members[k].provenance.end());
  }
  const auto n = static_cast<double>(members.size());
  for (double& v : out.values) v /= n;
  return out;
}

EvaluationReport summarize_scores(std::vector<SubjectScore> rows) {
  EvaluationReport report;
  report.rows = std::move(rows);
  std::map<Dimension, std::pair<double, std::size_t>> acc;
  for (const auto& r : report.rows) {
    acc[r.dimension].first += r.ccc;
    acc[r.dimension].second += 1;
  }
  for (const auto& [dim, sum_count] : acc) {
    report.dimension_means[dim] = sum_count.first / static_cast<double>(sum_count.second);
  }
  const auto a = report.dimension_means.find(Dimension::Arousal);
  const auto v = report.dimension_means.find(Dimension::Valence);
  if (a != report.dimension_means.end() && v != report.dimension_means.end()) {
    report.combined = combined_score(a->second, v->second);
  }
  return report;
}

EvaluationReport evaluate_corpus(const std::vector<PredictionSequence>& preds, const Corpus& labels,
                                 const EvalOptions& options) {
  std::vector<SubjectScore> rows;
  for (const Dimension dim : options.dimensions) {
    for (const auto& sample : labels) {
      const auto lit = sample.labels.find(dim);
      if (lit == sample.labels.end()) continue;
      const LabelSequence& label = lit->second;

      const PredictionSequence* match = nullptr;
      for (const auto& p : preds) {
        if (p.subject_id != sample.subject_id || p.dimension != dim) continue;
        if (match) {
          fail(ErrorCode::MissingPrediction, sample.subject_id + ": more than one " +
                                                 std::string(to_string(dim)) + " prediction");
        }
        match = &p;
      }
      if (!match) {
        fail(ErrorCode::MissingPrediction,
             "no " + std::string(to_string(dim)) + " prediction for subject " + sample.subject_id);
      }
      if (match->timestamps != label.timestamps || match->values.size() != label.values.size()) {
        fail(ErrorCode::GridMismatch, sample.subject_id + ": prediction grid differs from labels");
      }
      std::span<const double> x(match->values);
      std::span<const double> y(label.values);
      if (options.personal_test_only) {
        const StepRange r = make_subject_split(sample).personal_test;
        if (r.size() < 2) fail(ErrorCode::EmptySegment, sample.subject_id + ": personal_test segment too short");
        x = x.subspan(r.begin, r.size());
        y = y.subspan(r.begin, r.size());
      }
      rows.push_back({sample.subject_id, dim, ccc(x, y).ccc});
    }
  }
  return summarize_scores(std::move(rows));
}

void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << "subject,dimension,ccc\n";
  for (const auto& r : report.rows) out << r.subject_id << ',' << to_string(r.dimension) << ',' << format_double(r.ccc) << '\n';
  for (const auto& [dim, mean] : report.dimension_means) out << "mean," << to_string(dim) << ',' << format_double(mean) << '\n';
  if (report.combined) out << "combined,all," << format_double(*report.combined) << '\n';
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace musep
