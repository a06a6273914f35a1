#include "musep/training.hpp"

#include "musep/adam.hpp"
#include "musep/error.hpp"
#include "musep/objective.hpp"
#include "musep/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

namespace musep {

void validate(const WindowingConfig& cfg) {
  if (cfg.win_steps < 2) fail(ErrorCode::InvalidConfig, "window must span at least 2 steps");
  if (cfg.hop_steps == 0 || cfg.hop_steps > cfg.win_steps) {
    fail(ErrorCode::InvalidConfig, "hop must be in [1, window]");
  }
}

std::vector<StepRange> window_ranges(std::size_t steps, const WindowingConfig& cfg) {
  validate(cfg);
  std::vector<StepRange> out;
  for (std::size_t start = 0; start < steps; start += cfg.hop_steps) {
    const StepRange r{start, std::min(start + cfg.win_steps, steps)};
    if (r.size() >= 2) out.push_back(r);
  }
  return out;
}

std::vector<Window> make_windows(const AlignedSample& sample, const WindowingConfig& cfg, Dimension dimension) {
  const Matrix x = sample.concat_features();
  const auto& y = sample.label(dimension).values;
  std::vector<Window> out;
  for (const StepRange r : window_ranges(sample.steps(), cfg)) {
    Window w;
    w.range = r;
    w.features = x.middleRows(static_cast<Eigen::Index>(r.begin), static_cast<Eigen::Index>(r.size()));
    w.labels.assign(y.begin() + static_cast<std::ptrdiff_t>(r.begin), y.begin() + static_cast<std::ptrdiff_t>(r.end));
    out.push_back(std::move(w));
  }
  return out;
}

void validate(const TrainConfig& cfg) {
  validate(cfg.stage1_window);
  validate(cfg.stage2_window);
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCode::InvalidConfig, std::string(what) + " must be positive");
  };
  positive(cfg.lr, "lr");
  positive(cfg.finetune_lr, "finetune_lr");
  if (cfg.batch_size == 0 || cfg.finetune_batch_size == 0) fail(ErrorCode::InvalidConfig, "batch size must be positive");
  if (cfg.max_epochs == 0) fail(ErrorCode::InvalidConfig, "max_epochs must be positive");
  if (cfg.seeds.empty()) fail(ErrorCode::InvalidConfig, "seed list is empty");
  if (cfg.jobs == 0) fail(ErrorCode::InvalidConfig, "jobs must be positive");
}

void write_train_report_csv(const std::filesystem::path& path, const TrainReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << "epoch,train_loss,dev_ccc\n";
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.dev_ccc) << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

namespace {

std::mutex log_mutex;

void log_line(std::ostream* log, const std::string& line) {
  if (!log) return;
  const std::lock_guard lock(log_mutex);
  *log << line << '\n' << std::flush;
}

std::vector<std::size_t> widths_of(const AlignedSample& s) {
  std::vector<std::size_t> w;
  for (const auto& m : s.modalities) w.push_back(static_cast<std::size_t>(m.dims()));
  return w;
}

void check_layout(const ModelConfig& config, const AlignedSample& s) {
  if (widths_of(s) != config.input_dims) {
    fail(ErrorCode::LayoutMismatch, s.subject_id + ": modality widths do not match the model inputs");
  }
}

void check_corpus_layout(const Corpus& corpus, const std::vector<std::string>& names, const ModelConfig& config) {
  for (const auto& s : corpus) {
    if (s.modality_names() != names) {
      fail(ErrorCode::LayoutMismatch, s.subject_id + ": modality layout differs from the first train subject");
    }
    check_layout(config, s);
  }
}

struct LoopSettings {
  std::size_t batch_size = 1;
  double lr = 1e-3;
  std::size_t max_epochs = 0;
  std::size_t patience = 0;
  std::uint64_t shuffle_seed = 0;
  std::uint64_t shuffle_stream = 0;
  std::string tag;
  std::ostream* log = nullptr;
};

// Mean-over-windows CCC loss of one mini-batch, its gradient, and one Adam
// step. Windows are grouped by length so each group is a single batched pass.
double train_batch(Model& model, AdamState& adam, const std::vector<Window>& windows,
                   std::span<const std::size_t> batch) {
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (const std::size_t k : batch) groups[windows[k].range.size()].push_back(k);

  ParamSet grads = zeros_like(model.params);
  const auto scale = 1.0 / static_cast<double>(batch.size());
  double loss_sum = 0.0;
  for (const auto& [len, members] : groups) {
    std::vector<Matrix> xs;
    xs.reserve(members.size());
    for (const std::size_t k : members) xs.push_back(windows[k].features);
    ForwardResult fr = forward_batch(model, xs);

    Matrix d_pred(fr.predictions.rows(), fr.predictions.cols());
    for (std::size_t b = 0; b < members.size(); ++b) {
      const auto col = static_cast<Eigen::Index>(b);
      const Vector pred = fr.predictions.col(col);
      const LossAndGrad lg = ccc_training_loss(std::span<const double>(pred.data(), len), windows[members[b]].labels);
      loss_sum += lg.loss;
      for (std::size_t t = 0; t < len; ++t) d_pred(static_cast<Eigen::Index>(t), col) = lg.grad[t] * scale;
    }
    const Gradients g = backward(model, fr.cache, d_pred);
    for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += g.params[i];
  }
  const double loss = loss_sum * scale;
  if (!std::isfinite(loss)) fail(ErrorCode::NumericFailure, "non-finite training loss");
  adam_step(model, grads, adam);
  return loss;
}

// Shared epoch loop with best-on-dev selection and patience. Only trained
// epochs compete; with max_epochs == 0 the starting model is returned.
std::pair<Model, TrainReport> train_loop(const Model& start, const std::vector<Window>& windows,
                                         const LoopSettings& s, const std::function<double(const Model&)>& dev_score) {
  const auto t0 = std::chrono::steady_clock::now();
  Model model = start;
  Model best = start;
  TrainReport report;
  if (s.max_epochs == 0) report.best_dev_ccc = dev_score(start);

  AdamState adam = make_adam_state(model, s.lr);
  std::vector<std::size_t> order(windows.size());
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= s.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(s.shuffle_seed, s.shuffle_stream + epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += s.batch_size) {
      const std::size_t n = std::min(s.batch_size, order.size() - b0);
      loss_sum += train_batch(model, adam, windows, std::span<const std::size_t>(order).subspan(b0, n));
      ++n_batches;
    }
    const double dev = dev_score(model);
    if (!std::isfinite(dev)) fail(ErrorCode::NumericFailure, "non-finite dev CCC");
    report.epochs.push_back({epoch, loss_sum / static_cast<double>(n_batches), dev});

    if (epoch == 1 || dev > report.best_dev_ccc) {
      report.best_dev_ccc = dev;
      report.best_epoch = epoch;
      best = model;
      stale = 0;
    } else {
      ++stale;
    }
    log_line(s.log, s.tag + " epoch " + std::to_string(epoch) + " train_loss=" +
                        format_double(report.epochs.back().train_loss) + " dev_ccc=" + format_double(dev) +
                        " best=" + format_double(report.best_dev_ccc));
    if (stale > s.patience) break;
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(best), std::move(report)};
}

double safe_ccc(std::span<const double> x, std::span<const double> y) {
  try {
    return ccc(x, y).ccc;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Degenerate) return 0.0;
    throw;
  }
}

}  // namespace

PredictionSequence predict_full(const Model& model, const AlignedSample& sample, Dimension dimension) {
  check_layout(model.config, sample);
  const ForwardResult fr = forward(model, sample.concat_features());
  PredictionSequence p;
  p.subject_id = sample.subject_id;
  p.dimension = dimension;
  p.timestamps = sample.timestamps();
  p.values.resize(p.timestamps.size());
  for (std::size_t t = 0; t < p.values.size(); ++t) p.values[t] = fr.predictions(static_cast<Eigen::Index>(t), 0);
  return p;
}

PredictionSequence predict_subject(const Checkpoint& checkpoint, const AlignedSample& sample, Dimension dimension) {
  return predict_full(checkpoint.model, apply_norm(sample, checkpoint.stats), dimension);
}

double segment_ccc(const PredictionSequence& pred, const AlignedSample& sample, Dimension dimension,
                   StepRange range) {
  const auto& y = sample.label(dimension).values;
  if (range.end > y.size() || range.end > pred.values.size() || range.size() < 2) {
    fail(ErrorCode::EmptySegment, sample.subject_id + ": segment out of range or shorter than 2 steps");
  }
  return safe_ccc(std::span<const double>(pred.values).subspan(range.begin, range.size()),
                  std::span<const double>(y).subspan(range.begin, range.size()));
}

PretrainResult pretrain(const Corpus& train, const Corpus& dev, const ModelConfig& model_cfg,
                        const TrainConfig& train_cfg, Dimension dimension) {
  if (train.empty()) fail(ErrorCode::EmptyCorpus, "no train subjects");
  if (dev.empty()) fail(ErrorCode::EmptyCorpus, "no dev subjects");
  validate(model_cfg);
  validate(train_cfg);
  const auto names = train.front().modality_names();
  check_corpus_layout(train, names, model_cfg);
  check_corpus_layout(dev, names, model_cfg);

  const NormStats stats = fit_norm_stats(train);
  std::vector<Window> windows;
  for (const auto& s : train) {
    auto w = make_windows(apply_norm(s, stats), train_cfg.stage1_window, dimension);
    windows.insert(windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  if (windows.empty()) fail(ErrorCode::EmptyCorpus, "train subjects yield no windows");
  Corpus dev_norm;
  for (const auto& s : dev) dev_norm.push_back(apply_norm(s, stats));

  const auto dev_score = [&](const Model& m) {
    double sum = 0.0;
    for (const auto& s : dev_norm) {
      sum += safe_ccc(predict_full(m, s, dimension).values, s.label(dimension).values);
    }
    return sum / static_cast<double>(dev_norm.size());
  };

  LoopSettings ls;
  ls.batch_size = train_cfg.batch_size;
  ls.lr = train_cfg.lr;
  ls.max_epochs = train_cfg.max_epochs;
  ls.patience = train_cfg.patience;
  ls.shuffle_seed = train_cfg.shuffle_seed;
  ls.shuffle_stream = 1'000'000;
  ls.tag = "[pretrain " + std::string(to_string(dimension)) + "]";
  ls.log = train_cfg.log;
  auto [best, report] = train_loop(init_model(model_cfg), windows, ls, dev_score);
  best.revision = 0;
  return {Checkpoint{std::move(best), stats}, std::move(report)};
}

PersonaliseResult personalise(const Checkpoint& pretrained, const AlignedSample& sample, const SubjectSplit& split,
                              const TrainConfig& train_cfg, Dimension dimension) {
  validate(train_cfg);
  check_layout(pretrained.model.config, sample);
  if (split.personal_train.size() < 2 || split.personal_dev.size() < 2 ||
      split.personal_dev.end > sample.steps()) {
    fail(ErrorCode::EmptySegment, sample.subject_id + ": personal_train and personal_dev need at least 2 steps each");
  }

  const AlignedSample normed = apply_norm(sample, pretrained.stats);
  const auto windows = make_windows(slice(normed, split.personal_train), train_cfg.stage2_window, dimension);
  // Dev CCC is read off a full-sequence pass so the recurrent state entering
  // the dev segment is the same as at evaluation time.
  const auto dev_score = [&](const Model& m) {
    return segment_ccc(predict_full(m, normed, dimension), normed, dimension, split.personal_dev);
  };

  const std::size_t n = train_cfg.seeds.size();
  std::vector<SeedOutcome> outcomes(n);
  std::vector<Model> models(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        LoopSettings ls;
        ls.batch_size = train_cfg.finetune_batch_size;
        ls.lr = train_cfg.finetune_lr;
        ls.max_epochs = train_cfg.finetune_max_epochs;
        ls.patience = train_cfg.finetune_patience;
        ls.shuffle_seed = train_cfg.seeds[k];
        ls.shuffle_stream = 2'000'000;
        ls.tag = "[personalise " + sample.subject_id + " " + std::string(to_string(dimension)) + " seed " +
                 std::to_string(train_cfg.seeds[k]) + "]";
        ls.log = train_cfg.log;
        auto [m, report] = train_loop(pretrained.model, windows, ls, dev_score);
        m.revision = 0;
        outcomes[k] = {train_cfg.seeds[k], report.best_dev_ccc, std::move(report)};
        models[k] = std::move(m);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(train_cfg.jobs, n);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::size_t chosen = 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (outcomes[k].dev_ccc > outcomes[chosen].dev_ccc) chosen = k;
  }
  PersonaliseResult result;
  result.checkpoint = Checkpoint{models[chosen], pretrained.stats};
  result.seed = outcomes[chosen].seed;
  result.dev_ccc = outcomes[chosen].dev_ccc;
  result.sweep = std::move(outcomes);
  result.models = std::move(models);
  return result;
}

}  // namespace musep
