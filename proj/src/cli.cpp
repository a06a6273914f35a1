#include "musep/cli.hpp"

#include "musep/checkpoint.hpp"
#include "musep/config.hpp"
#include "musep/ecg.hpp"
#include "musep/ensemble.hpp"
#include "musep/manifest.hpp"
#include "musep/synth.hpp"
#include "musep/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace fs = std::filesystem;

namespace musep {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownKey:
    case ErrorCode::MissingRequiredKey:
    case ErrorCode::TypeError:
    case ErrorCode::PathError:
    case ErrorCode::InvalidConfig:
      return kExitUsage;
    case ErrorCode::NumericFailure:
    case ErrorCode::Degenerate:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

namespace {

// Run directory layout below output_dir:
//   run.lock                                      resolved configuration
//   <dim>/stage1/model.ckpt, report.csv           global model and its epochs
//   <dim>/personalised/<subject>/<seed>.ckpt      one model per sweep seed
//   <dim>/personalised/<subject>/sweep.csv        seed,dev_ccc,best_epoch
//   <dim>/personalised/selection.csv              subject,seed,dev_ccc
//   predictions/<stage>/<dim>/<subject>.csv       timestamp,value
//   <name>/evaluation.csv                         `evaluate --out <run>/<name>`
//   ablation_<dim>.csv                            layers,model_dim,rnn_bi,dev_ccc,test_ccc
fs::path stage1_dir(const fs::path& out, Dimension d) { return out / std::string(to_string(d)) / "stage1"; }
fs::path personal_dir(const fs::path& out, Dimension d) {
  return out / std::string(to_string(d)) / "personalised";
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot write " + path.string());
  f << text;
  if (!f) fail(ErrorCode::IoError, "write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_lock(const fs::path& out, const std::string& subcommand, const std::string& body) {
  write_text(out / "run.lock", "# musep " + subcommand + "\n" + body);
}

fs::path default_out(const std::string& leaf) {
  const char* root = std::getenv("MUSEP_OUT");
  return (root && *root ? fs::path(root) : fs::path("runs")) / leaf;
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  for (const auto part : split_view(s, ',')) {
    if (!trim(part).empty()) out.emplace_back(trim(part));
  }
  return out;
}

std::vector<Dimension> parse_dimensions(const std::string& s) {
  if (s == "both") return {Dimension::Arousal, Dimension::Valence};
  std::vector<Dimension> dims;
  for (const auto& d : split_csv_list(s)) dims.push_back(parse_dimension(d));
  if (dims.empty()) fail(ErrorCode::TypeError, "no dimension given");
  return dims;
}

struct LoadedRun {
  RunConfig config;
  Corpus corpus;

  Corpus role(Role r) const { return select_role(corpus, r); }
  ModelConfig model_config() const {
    if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "manifest lists no subjects");
    std::vector<std::size_t> dims;
    for (const auto& m : corpus.front().modalities) dims.push_back(static_cast<std::size_t>(m.dims()));
    return config.model_config(dims);
  }
};

LoadedRun load_run(const std::string& config_path, const std::string& out_override, std::size_t jobs,
                   std::ostream& err) {
  LoadedRun run;
  run.config = parse_config(config_path);
  if (!out_override.empty()) run.config.output_dir = out_override;
  if (jobs) run.config.train.jobs = jobs;
  for (const auto& w : run.config.warnings) err << "warning: " << w << '\n';
  run.config.train.log = &err;
  run.corpus = load_corpus(read_manifest(run.config.manifest), run.config.modalities);
  return run;
}

const AlignedSample& find_subject(const Corpus& corpus, const std::string& id) {
  for (const auto& s : corpus) {
    if (s.subject_id == id) return s;
  }
  fail(ErrorCode::MissingPrediction, "unknown subject " + id);
}

// --- subcommands ------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 0;
  std::size_t subjects = 0;
  std::size_t n_train = 8, n_dev = 3, n_test = 3;
  double duration = 300.0;
  double noise = 0.1;
  double offset = 0.0;
  bool no_ecg = false;
  std::string modalities = "audio:16,video:12";
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthSpec spec;
  if (a.subjects) {
    spec.n_dev = spec.n_test = std::max<std::size_t>(1, a.subjects / 4);
    if (a.subjects < 2 * spec.n_dev + 1) fail(ErrorCode::InvalidSpec, "--subjects must be at least 3");
    spec.n_train = a.subjects - 2 * spec.n_dev;
  } else {
    spec.n_train = a.n_train;
    spec.n_dev = a.n_dev;
    spec.n_test = a.n_test;
  }
  spec.duration_s = a.duration;
  spec.noise = a.noise;
  spec.subject_offset = a.offset;
  spec.with_ecg = !a.no_ecg;
  spec.modalities.clear();
  for (const auto& item : split_csv_list(a.modalities)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      if (item != "phys") fail(ErrorCode::TypeError, "modality '" + item + "' needs a width (name:dims)");
      spec.modalities.push_back({item, kPhysDims});
      continue;
    }
    const auto dims = try_parse_int(std::string_view(item).substr(colon + 1));
    if (!dims || *dims <= 0) fail(ErrorCode::TypeError, "bad modality width in '" + item + "'");
    spec.modalities.push_back({item.substr(0, colon), static_cast<std::size_t>(*dims)});
  }

  const fs::path dir = a.out.empty() ? default_out("synth") : fs::path(a.out);
  const SynthCorpus corpus = generate_synthetic_corpus(spec, a.seed);
  write_synthetic_corpus(corpus, dir);

  std::ostringstream lock;
  lock << "seed = " << a.seed << "\nn_train = " << spec.n_train << "\nn_dev = " << spec.n_dev
       << "\nn_test = " << spec.n_test << "\nduration_s = " << format_double(spec.duration_s)
       << "\nnoise = " << format_double(spec.noise) << "\nsubject_offset = " << format_double(spec.subject_offset)
       << "\nwith_ecg = " << (spec.with_ecg ? "true" : "false") << "\nmodalities = " << a.modalities << '\n';
  write_lock(dir, "synth", lock.str());
  out << "wrote " << corpus.subjects.size() << " subjects to " << (dir / "manifest.txt").string() << '\n';
  return kExitOk;
}

int cmd_extract_hrv(const std::string& manifest_path, const std::string& out_dir, std::ostream& out) {
  const Manifest in = read_manifest(manifest_path);
  const fs::path dir = out_dir.empty() ? default_out("phys") : fs::path(out_dir);
  Manifest result;
  result.base_dir = dir;
  std::size_t n = 0;
  for (const auto& rec : in.subjects) {
    SubjectRecord copy = rec;
    for (auto& [name, p] : copy.features) p = fs::absolute(in.resolve(p)).lexically_normal();
    for (auto& [dim, p] : copy.labels) p = fs::absolute(in.resolve(p)).lexically_normal();
    for (auto& [name, p] : copy.signals) p = fs::absolute(in.resolve(p)).lexically_normal();

    static constexpr const char* kSignals[] = {"ecg", "resp", "bpm", "ecg2hz"};
    const bool complete = std::all_of(std::begin(kSignals), std::end(kSignals),
                                      [&](const char* s) { return rec.signals.contains(s); });
    if (complete) {
      try {
        FeatureSequence phys = extract_phys_sequence(
            load_signal_csv(copy.signals.at("ecg")), load_signal_csv(copy.signals.at("resp")),
            load_signal_csv(copy.signals.at("bpm")), load_signal_csv(copy.signals.at("ecg2hz")));
        phys.subject_id = rec.id;
        const fs::path rel = fs::path("features") / "phys" / (rec.id + ".csv");
        write_feature_csv(dir / rel, phys);
        copy.features["phys"] = rel;
        ++n;
      } catch (const Error& e) {
        fail(e.code(), rec.id + ": " + e.what());
      }
    }
    result.subjects.push_back(std::move(copy));
  }
  write_manifest(dir / "manifest.txt", result);
  write_lock(dir, "extract-hrv", "manifest = " + fs::absolute(manifest_path).lexically_normal().string() + "\n");
  out << "extracted phys features for " << n << " subjects; manifest " << (dir / "manifest.txt").string() << '\n';
  return kExitOk;
}

int cmd_pretrain(const LoadedRun& run, std::ostream& out) {
  const auto& cfg = run.config;
  write_lock(cfg.output_dir, "pretrain", render_config(cfg));
  const Corpus train = run.role(Role::Train);
  const Corpus dev = run.role(Role::Dev);
  for (const Dimension d : cfg.dimensions) {
    const PretrainResult r = pretrain(train, dev, run.model_config(), cfg.train, d);
    const fs::path dir = stage1_dir(cfg.output_dir, d);
    save_checkpoint(r.checkpoint.model, r.checkpoint.stats, dir / "model.ckpt");
    write_train_report_csv(dir / "report.csv", r.report);
    out << to_string(d) << ": best dev CCC " << format_double(r.report.best_dev_ccc) << " at epoch "
        << r.report.best_epoch << " (" << r.report.epochs.size() << " epochs)\n";
  }
  return kExitOk;
}

int cmd_personalise(const LoadedRun& run, const std::string& subjects, std::ostream& out) {
  const auto& cfg = run.config;
  write_lock(cfg.output_dir, "personalise", render_config(cfg));
  Corpus targets;
  if (subjects.empty()) {
    targets = run.role(Role::Test);
  } else {
    for (const auto& id : split_csv_list(subjects)) targets.push_back(find_subject(run.corpus, id));
  }
  for (const Dimension d : cfg.dimensions) {
    const Checkpoint pre = load_checkpoint(stage1_dir(cfg.output_dir, d) / "model.ckpt");
    std::ostringstream selection;
    selection << "subject,seed,dev_ccc\n";
    for (const auto& s : targets) {
      const PersonaliseResult res = personalise(pre, s, make_subject_split(s), cfg.train, d);
      const fs::path dir = personal_dir(cfg.output_dir, d) / s.subject_id;
      std::ostringstream sweep;
      sweep << "seed,dev_ccc,best_epoch\n";
      for (std::size_t k = 0; k < res.sweep.size(); ++k) {
        save_checkpoint(res.models[k], pre.stats, dir / (std::to_string(res.sweep[k].seed) + ".ckpt"));
        sweep << res.sweep[k].seed << ',' << format_double(res.sweep[k].dev_ccc) << ','
              << res.sweep[k].report.best_epoch << '\n';
      }
      write_text(dir / "sweep.csv", sweep.str());
      selection << s.subject_id << ',' << res.seed << ',' << format_double(res.dev_ccc) << '\n';
      out << to_string(d) << ' ' << s.subject_id << ": seed " << res.seed << ", personal_dev CCC "
          << format_double(res.dev_ccc) << '\n';
    }
    write_text(personal_dir(cfg.output_dir, d) / "selection.csv", selection.str());
  }
  return kExitOk;
}

std::map<std::string, std::uint64_t> read_selection(const fs::path& path) {
  std::map<std::string, std::uint64_t> sel;
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto cells = split_view(line, ',');
    if (cells.size() != 3) continue;
    const auto seed = try_parse_int(cells[1]);
    if (!seed) fail(ErrorCode::MalformedCsv, path.string() + ": bad seed");
    sel[std::string(cells[0])] = static_cast<std::uint64_t>(*seed);
  }
  return sel;
}

int cmd_predict(const LoadedRun& run, const std::string& stage, const std::string& role, std::ostream& out) {
  const auto& cfg = run.config;
  if (stage != "pretrained" && stage != "personalised") {
    fail(ErrorCode::TypeError, "--stage must be pretrained or personalised");
  }
  write_lock(cfg.output_dir, "predict", render_config(cfg));
  const Corpus targets = run.role(parse_role(role));
  const fs::path pred_dir = cfg.output_dir / "predictions" / stage;
  for (const Dimension d : cfg.dimensions) {
    const Checkpoint pre = load_checkpoint(stage1_dir(cfg.output_dir, d) / "model.ckpt");
    std::map<std::string, std::uint64_t> selection;
    if (stage == "personalised") selection = read_selection(personal_dir(cfg.output_dir, d) / "selection.csv");
    for (const auto& s : targets) {
      PredictionSequence p;
      if (stage == "pretrained") {
        p = predict_subject(pre, s, d);
        p.provenance = {{cfg.combo, cfg.seed, (stage1_dir(cfg.output_dir, d) / "model.ckpt").string()}};
      } else {
        const auto it = selection.find(s.subject_id);
        if (it == selection.end()) fail(ErrorCode::MissingPrediction, s.subject_id + ": not personalised");
        const fs::path ck = personal_dir(cfg.output_dir, d) / s.subject_id / (std::to_string(it->second) + ".ckpt");
        p = predict_subject(load_checkpoint(ck), s, d);
        p.provenance = {{cfg.combo, it->second, ck.string()}};
      }
      write_prediction_csv(prediction_path(pred_dir, d, s.subject_id), p);
    }
  }
  out << "wrote predictions to " << pred_dir.string() << '\n';
  return kExitOk;
}

// Labels only; features are not needed for scoring.
Corpus load_label_corpus(const Manifest& m, std::optional<Role> role) {
  Corpus corpus;
  for (const auto& rec : m.subjects) {
    if (role && rec.role != *role) continue;
    AlignedSample s;
    s.subject_id = rec.id;
    s.role = rec.role;
    for (const auto& [dim, p] : rec.labels) s.labels[dim] = load_label_csv(m.resolve(p), dim, rec.id);
    corpus.push_back(std::move(s));
  }
  return corpus;
}

void print_report(const EvaluationReport& r, std::ostream& out) {
  for (const auto& row : r.rows) {
    out << std::left << std::setw(12) << row.subject_id << std::setw(9) << to_string(row.dimension)
        << std::fixed << std::setprecision(4) << row.ccc << '\n';
  }
  for (const auto& [d, m] : r.dimension_means) {
    out << std::left << std::setw(12) << "mean" << std::setw(9) << to_string(d) << std::fixed
        << std::setprecision(4) << m << '\n';
  }
  if (r.combined) out << std::left << std::setw(21) << "combined" << std::fixed << std::setprecision(4) << *r.combined << '\n';
  out.unsetf(std::ios::floatfield);
}

struct EvaluateArgs {
  std::string manifest;
  std::string predictions;
  std::string out;
  std::string dimension = "both";
  std::string role = "test";
  bool personal_test_only = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const Manifest m = read_manifest(a.manifest);
  EvalOptions opt;
  opt.dimensions = parse_dimensions(a.dimension);
  opt.personal_test_only = a.personal_test_only;
  const Corpus labels = load_label_corpus(m, a.role == "all" ? std::nullopt : std::optional(parse_role(a.role)));

  std::vector<PredictionSequence> preds;
  for (const Dimension d : opt.dimensions) {
    for (const auto& s : labels) {
      const fs::path p = prediction_path(a.predictions, d, s.subject_id);
      if (!fs::exists(p)) {
        fail(ErrorCode::MissingPrediction,
             "no " + std::string(to_string(d)) + " prediction for subject " + s.subject_id + " (" + p.string() + ")");
      }
      preds.push_back(load_prediction_csv(p, s.subject_id, d));
    }
  }
  const EvaluationReport report = evaluate_corpus(preds, labels, opt);
  const fs::path dir = a.out.empty() ? default_out("evaluation") : fs::path(a.out);
  write_report_csv(dir / "evaluation.csv", report);
  write_lock(dir, "evaluate",
             "manifest = " + fs::absolute(a.manifest).lexically_normal().string() + "\npredictions = " +
                 fs::absolute(a.predictions).lexically_normal().string() + "\ndimension = " + a.dimension +
                 "\nrole = " + a.role + "\npersonal_test_only = " + (a.personal_test_only ? "true" : "false") + "\n");
  print_report(report, out);
  return kExitOk;
}

int cmd_ensemble(const std::string& members_arg, const std::string& out_dir, const std::string& dimension,
                 std::ostream& out) {
  const auto members = split_csv_list(members_arg);
  if (members.empty()) fail(ErrorCode::EmptyEnsemble, "--members lists no prediction directories");
  const fs::path dir = out_dir.empty() ? default_out("ensemble") : fs::path(out_dir);
  std::size_t written = 0;
  for (const Dimension d : parse_dimensions(dimension)) {
    const fs::path first = fs::path(members.front()) / std::string(to_string(d));
    if (!fs::is_directory(first)) continue;
    std::vector<std::string> subjects;
    for (const auto& e : fs::directory_iterator(first)) {
      if (e.path().extension() == ".csv") subjects.push_back(e.path().stem().string());
    }
    std::sort(subjects.begin(), subjects.end());
    for (const auto& id : subjects) {
      std::vector<PredictionSequence> seqs;
      for (const auto& m : members) {
        const fs::path p = prediction_path(m, d, id);
        if (!fs::exists(p)) fail(ErrorCode::MissingPrediction, "member " + m + " has no prediction for subject " + id);
        PredictionSequence s = load_prediction_csv(p, id, d);
        s.provenance = {{fs::path(m).lexically_normal().string(), 0, p.string()}};
        seqs.push_back(std::move(s));
      }
      write_prediction_csv(prediction_path(dir, d, id), ensemble_mean(seqs));
      ++written;
    }
  }
  std::string lock = "members = " + members_arg + "\ndimension = " + dimension + "\n";
  write_lock(dir, "ensemble", lock);
  out << "averaged " << members.size() << " members into " << written << " prediction files under " << dir.string()
      << '\n';
  return kExitOk;
}

int cmd_ablate(LoadedRun& run, std::ostream& out) {
  auto& cfg = run.config;
  write_lock(cfg.output_dir, "ablate", render_config(cfg));
  const Corpus train = run.role(Role::Train);
  const Corpus dev = run.role(Role::Dev);
  const Corpus test = run.role(Role::Test);
  for (const Dimension d : cfg.dimensions) {
    std::ostringstream csv;
    csv << "layers,model_dim,rnn_bi,dev_ccc,test_ccc\n";
    for (const std::size_t layers : {1, 2}) {
      for (const std::size_t dim : {128, 256}) {
        for (const bool bi : {true, false}) {
          RunConfig variant = cfg;
          variant.rnn_layers = layers;
          variant.model_dim = dim;
          variant.rnn_bi = bi;
          variant.head_hidden = 0;
          LoadedRun v{variant, {}};
          v.corpus = run.corpus;
          const PretrainResult r = pretrain(train, dev, v.model_config(), variant.train, d);
          double test_ccc = 0.0;
          for (const auto& s : test) {
            const PredictionSequence p = predict_subject(r.checkpoint, s, d);
            test_ccc += segment_ccc(p, s, d, {0, s.steps()});
          }
          if (!test.empty()) test_ccc /= static_cast<double>(test.size());
          csv << layers << ',' << dim << ',' << (bi ? 'Y' : 'N') << ',' << format_double(r.report.best_dev_ccc) << ','
              << format_double(test_ccc) << '\n';
        }
      }
    }
    const fs::path path = cfg.output_dir / ("ablation_" + std::string(to_string(d)) + ".csv");
    write_text(path, csv.str());
    out << "wrote " << path.string() << '\n';
  }
  return kExitOk;
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    for (const auto c : split_view(line, ',')) cells.emplace_back(trim(c));
    rows.push_back(std::move(cells));
  }
  return rows;
}

void print_table(const std::vector<std::vector<std::string>>& rows, std::ostream& out) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  for (const auto& r : rows) {
    out << "  ";
    for (std::size_t i = 0; i < r.size(); ++i) out << std::left << std::setw(static_cast<int>(width[i] + 2)) << r[i];
    out << '\n';
  }
}

int cmd_report(const std::string& run_dir, std::ostream& out) {
  const fs::path dir(run_dir);
  if (!fs::is_directory(dir)) fail(ErrorCode::PathError, "no run directory " + run_dir);
  out << "run " << dir.string() << '\n';
  bool any = false;
  for (const Dimension d : {Dimension::Arousal, Dimension::Valence}) {
    const fs::path rep = stage1_dir(dir, d) / "report.csv";
    if (fs::exists(rep)) {
      const auto rows = read_csv_rows(rep);
      std::size_t best_row = 0;
      double best = -2.0;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto v = try_parse_double(rows[i].at(2));
        if (v && *v > best) {
          best = *v;
          best_row = i;
        }
      }
      out << "\n" << to_string(d) << " pretraining: " << rows.size() - 1 << " epochs";
      if (best_row) out << ", best dev CCC " << rows[best_row][2] << " at epoch " << rows[best_row][0];
      out << '\n';
      any = true;
    }
    const fs::path sel = personal_dir(dir, d) / "selection.csv";
    if (fs::exists(sel)) {
      out << "\n" << to_string(d) << " personalisation:\n";
      print_table(read_csv_rows(sel), out);
      any = true;
    }
    const fs::path abl = dir / ("ablation_" + std::string(to_string(d)) + ".csv");
    if (fs::exists(abl)) {
      out << "\n" << to_string(d) << " ablation:\n";
      print_table(read_csv_rows(abl), out);
      any = true;
    }
  }
  std::vector<fs::path> evals;
  if (fs::exists(dir / "evaluation.csv")) evals.push_back(dir / "evaluation.csv");
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "evaluation.csv")) evals.push_back(e.path() / "evaluation.csv");
  }
  std::sort(evals.begin(), evals.end());
  for (const auto& eval : evals) {
    out << "\nevaluation " << fs::relative(eval, dir).string() << ":\n";
    print_table(read_csv_rows(eval), out);
    any = true;
  }
  if (!any) out << "(no reports found)\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continuous valence/arousal regression: synthetic data, training, personalisation, evaluation",
               "musep"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic corpus and manifest");
  c_synth->add_option("--out", synth.out, "Output directory (default $MUSEP_OUT/synth)");
  c_synth->add_option("--seed", synth.seed, "Corpus seed");
  c_synth->add_option("--subjects", synth.subjects, "Total subjects; a quarter each go to dev and test");
  c_synth->add_option("--train", synth.n_train, "Train subjects")->excludes("--subjects");
  c_synth->add_option("--dev", synth.n_dev, "Dev subjects")->excludes("--subjects");
  c_synth->add_option("--test", synth.n_test, "Test subjects")->excludes("--subjects");
  c_synth->add_option("--duration", synth.duration, "Seconds per subject");
  c_synth->add_option("--noise", synth.noise, "Feature noise std");
  c_synth->add_option("--offset", synth.offset, "Std of the per-subject feature offset");
  c_synth->add_option("--modalities", synth.modalities, "name:dims list; 'phys' is extracted from ECG");
  c_synth->add_flag("--no-ecg", synth.no_ecg, "Skip raw physiological signals");

  std::string manifest, out_dir, config, stage = "personalised", role = "test", subjects, members,
                                           dimension = "both", run_dir;
  std::size_t jobs = 0;
  auto* c_hrv = app.add_subcommand("extract-hrv", "Compute 21-d phys features from raw ECG/RESP/BPM signals");
  c_hrv->add_option("--manifest", manifest, "Input manifest")->required();
  c_hrv->add_option("--out", out_dir, "Output directory (default $MUSEP_OUT/phys)");

  auto add_config = [&](CLI::App* c) {
    c->add_option("--config", config, "Run configuration file")->required();
    c->add_option("--out", out_dir, "Override output_dir");
    c->add_option("--jobs", jobs, "Worker threads (default from config)");
  };
  auto* c_pre = app.add_subcommand("pretrain", "Stage-1 training on all train subjects");
  add_config(c_pre);
  auto* c_pers = app.add_subcommand("personalise", "Stage-2 per-subject fine-tuning with a seed sweep");
  add_config(c_pers);
  c_pers->add_option("--subjects", subjects, "Comma list of subject ids (default: test subjects)");
  auto* c_pred = app.add_subcommand("predict", "Full-sequence predictions for one role");
  add_config(c_pred);
  c_pred->add_option("--stage", stage, "pretrained | personalised");
  c_pred->add_option("--role", role, "train | dev | test");

  EvaluateArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "Score prediction files against manifest labels");
  c_eval->add_option("--manifest", eval.manifest, "Corpus manifest")->required();
  c_eval->add_option("--predictions", eval.predictions, "Prediction directory (<dim>/<subject>.csv)")->required();
  c_eval->add_option("--out", eval.out, "Report directory (default $MUSEP_OUT/evaluation)");
  c_eval->add_option("--dimension", eval.dimension, "arousal | valence | both");
  c_eval->add_option("--role", eval.role, "train | dev | test | all");
  c_eval->add_flag("--personal-test-only", eval.personal_test_only, "Score only steps after the first 120 s");

  auto* c_ens = app.add_subcommand("ensemble", "Average prediction directories element-wise");
  c_ens->add_option("--members", members, "Comma list of prediction directories")->required();
  c_ens->add_option("--out", out_dir, "Output prediction directory (default $MUSEP_OUT/ensemble)");
  c_ens->add_option("--dimension", dimension, "arousal | valence | both");

  auto* c_abl = app.add_subcommand("ablate", "Layers x model_dim x rnn_bi grid of pretraining runs");
  add_config(c_abl);

  auto* c_rep = app.add_subcommand("report", "Summarise a run directory");
  c_rep->add_option("--run", run_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_synth->parsed()) return cmd_synth(synth, out);
    if (c_hrv->parsed()) return cmd_extract_hrv(manifest, out_dir, out);
    if (c_eval->parsed()) return cmd_evaluate(eval, out);
    if (c_ens->parsed()) return cmd_ensemble(members, out_dir, dimension, out);
    if (c_rep->parsed()) return cmd_report(run_dir, out);
    LoadedRun loaded = load_run(config, out_dir, jobs, err);
    if (c_pre->parsed()) return cmd_pretrain(loaded, out);
    if (c_pers->parsed()) return cmd_personalise(loaded, subjects, out);
    if (c_pred->parsed()) return cmd_predict(loaded, stage, role, out);
    if (c_abl->parsed()) return cmd_ablate(loaded, out);
  } catch (const Error& e) {
    err << "musep: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "musep: " << e.what() << '\n';
    return kExitData;
  } catch (const std::bad_alloc&) {
    err << "musep: out of memory\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace musep
