#include "musep/config.hpp"

#include "musep/error.hpp"
#include "musep/manifest.hpp"
#include "musep/seqdata.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace musep {

ModelConfig RunConfig::model_config(std::vector<std::size_t> input_dims) const {
  ModelConfig c = make_model_config(std::move(input_dims), model_dim, rnn_layers, rnn_bi, seed);
  if (head_hidden != 0) c.head_hidden = head_hidden;
  return c;
}

namespace {

[[noreturn]] void type_error(const std::string& key, std::string_view value, const char* expected) {
  fail(ErrorCode::TypeError, "key '" + key + "': expected " + expected + ", got '" + std::string(value) + "'");
}

std::size_t as_count(const std::string& key, std::string_view v) {
  const auto n = try_parse_int(v);
  if (!n || *n < 0) type_error(key, v, "a non-negative integer");
  return static_cast<std::size_t>(*n);
}

std::size_t as_positive(const std::string& key, std::string_view v) {
  const std::size_t n = as_count(key, v);
  if (n == 0) type_error(key, v, "a positive integer");
  return n;
}

double as_rate(const std::string& key, std::string_view v) {
  const auto x = try_parse_double(v);
  if (!x || !(*x > 0.0) || !std::isfinite(*x)) type_error(key, v, "a positive number");
  return *x;
}

bool as_bool(const std::string& key, std::string_view v) {
  if (v == "true" || v == "yes" || v == "1" || v == "Y") return true;
  if (v == "false" || v == "no" || v == "0" || v == "N") return false;
  type_error(key, v, "a boolean");
}

std::vector<std::string> split_list(std::string_view v, char sep) {
  std::vector<std::string> out;
  for (const auto part : split_view(v, sep)) {
    const auto t = trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) s += sep;
    s += parts[i];
  }
  return s;
}

}  // namespace

RunConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir, std::string_view stem) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::TypeError, "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(t.substr(0, eq)));
    const std::string value(trim(t.substr(eq + 1)));
    if (key.empty()) fail(ErrorCode::TypeError, "line " + std::to_string(line_no) + ": empty key");
    kv[key] = value;
  }

  RunConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"manifest", [&](const auto&, const auto& v) { c.manifest = base_dir / v; }},
      {"combo", [&](const auto& k, const auto& v) {
         c.combo = v;
         c.modalities = split_list(v, '+');
         if (c.modalities.empty()) type_error(k, v, "'+'-joined modality names");
       }},
      {"dimension", [&](const auto& k, const auto& v) {
         if (v == "both") {
           c.dimensions = {Dimension::Arousal, Dimension::Valence};
           return;
         }
         c.dimensions.clear();
         for (const auto& d : split_list(v, ',')) {
           try {
             c.dimensions.push_back(parse_dimension(d));
           } catch (const Error&) {
             type_error(k, v, "arousal, valence or both");
           }
         }
         if (c.dimensions.empty()) type_error(k, v, "arousal, valence or both");
       }},
      {"output_dir", [&](const auto&, const auto& v) { c.output_dir = base_dir / v; }},
      {"seed", [&](const auto& k, const auto& v) {
         c.seed = as_count(k, v);
         c.train.shuffle_seed = c.seed;
       }},
      {"jobs", [&](const auto& k, const auto& v) { c.train.jobs = as_positive(k, v); }},
      {"model_dim", [&](const auto& k, const auto& v) { c.model_dim = as_positive(k, v); }},
      {"rnn_layers", [&](const auto& k, const auto& v) { c.rnn_layers = as_positive(k, v); }},
      {"rnn_bi", [&](const auto& k, const auto& v) { c.rnn_bi = as_bool(k, v); }},
      {"head_hidden", [&](const auto& k, const auto& v) { c.head_hidden = as_positive(k, v); }},
      {"pretrain.lr", [&](const auto& k, const auto& v) { c.train.lr = as_rate(k, v); }},
      {"pretrain.batch_size", [&](const auto& k, const auto& v) { c.train.batch_size = as_positive(k, v); }},
      {"pretrain.max_epochs", [&](const auto& k, const auto& v) { c.train.max_epochs = as_positive(k, v); }},
      {"pretrain.patience", [&](const auto& k, const auto& v) { c.train.patience = as_count(k, v); }},
      {"pretrain.win_steps", [&](const auto& k, const auto& v) { c.train.stage1_window.win_steps = as_positive(k, v); }},
      {"pretrain.hop_steps", [&](const auto& k, const auto& v) { c.train.stage1_window.hop_steps = as_positive(k, v); }},
      {"finetune.lr", [&](const auto& k, const auto& v) { c.train.finetune_lr = as_rate(k, v); }},
      {"finetune.batch_size", [&](const auto& k, const auto& v) { c.train.finetune_batch_size = as_positive(k, v); }},
      {"finetune.max_epochs", [&](const auto& k, const auto& v) { c.train.finetune_max_epochs = as_count(k, v); }},
      {"finetune.patience", [&](const auto& k, const auto& v) { c.train.finetune_patience = as_count(k, v); }},
      {"finetune.win_steps", [&](const auto& k, const auto& v) { c.train.stage2_window.win_steps = as_positive(k, v); }},
      {"finetune.hop_steps", [&](const auto& k, const auto& v) { c.train.stage2_window.hop_steps = as_positive(k, v); }},
      {"finetune.seeds", [&](const auto& k, const auto& v) {
         c.train.seeds.clear();
         for (const auto& s : split_list(v, ',')) c.train.seeds.push_back(as_count(k, s));
         if (c.train.seeds.empty()) type_error(k, v, "a comma-separated list of seeds");
       }},
  };

  for (const auto& [key, value] : kv) {
    if (!setters.contains(key)) fail(ErrorCode::UnknownKey, "unknown key '" + key + "'");
  }
  for (const char* required : {"manifest", "combo", "dimension"}) {
    if (!kv.contains(required)) fail(ErrorCode::MissingRequiredKey, std::string("missing required key '") + required + "'");
  }
  for (const auto& [key, value] : kv) setters.at(key)(key, value);

  if (c.output_dir.empty()) {
    const char* root = std::getenv("MUSEP_OUT");
    c.output_dir = (root && *root ? std::filesystem::path(root) : base_dir / "runs") / std::string(stem);
  }
  c.manifest = c.manifest.lexically_normal();
  c.output_dir = c.output_dir.lexically_normal();

  if (!std::filesystem::is_regular_file(c.manifest)) {
    fail(ErrorCode::PathError, "key 'manifest': no such file " + c.manifest.string());
  }
  const auto available = read_manifest(c.manifest).modality_names();
  for (const auto& m : c.modalities) {
    if (std::find(available.begin(), available.end(), m) == available.end()) {
      fail(ErrorCode::PathError, "key 'combo': modality '" + m + "' is not in " + c.manifest.string());
    }
  }

  try {
    validate(c.train);
  } catch (const Error& e) {
    fail(ErrorCode::TypeError, e.what());
  }
  if (c.model_dim != 128 && c.model_dim != 256) {
    c.warnings.push_back("model_dim = " + std::to_string(c.model_dim) +
                         " is outside the reference grid {128, 256}");
  }
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::PathError, "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  RunConfig c = parse_config_text(text.str(), base, path.stem().string());
  c.source = path;
  return c;
}

std::string render_config(const RunConfig& c) {
  std::vector<std::string> dims;
  for (const auto d : c.dimensions) dims.emplace_back(to_string(d));
  std::vector<std::string> seeds;
  for (const auto s : c.train.seeds) seeds.push_back(std::to_string(s));
  const auto& t = c.train;

  std::ostringstream out;
  out << "manifest = " << std::filesystem::absolute(c.manifest).lexically_normal().string() << '\n'
      << "combo = " << join(c.modalities, '+') << '\n'
      << "dimension = " << join(dims, ',') << '\n'
      << "output_dir = " << std::filesystem::absolute(c.output_dir).lexically_normal().string() << '\n'
      << "seed = " << c.seed << '\n'
      << "jobs = " << t.jobs << '\n'
      << "model_dim = " << c.model_dim << '\n'
      << "rnn_layers = " << c.rnn_layers << '\n'
      << "rnn_bi = " << (c.rnn_bi ? "true" : "false") << '\n'
      << "head_hidden = " << (c.head_hidden ? c.head_hidden : c.model_dim / 2) << '\n'
      << "pretrain.lr = " << format_double(t.lr) << '\n'
      << "pretrain.batch_size = " << t.batch_size << '\n'
      << "pretrain.max_epochs = " << t.max_epochs << '\n'
      << "pretrain.patience = " << t.patience << '\n'
      << "pretrain.win_steps = " << t.stage1_window.win_steps << '\n'
      << "pretrain.hop_steps = " << t.stage1_window.hop_steps << '\n'
      << "finetune.lr = " << format_double(t.finetune_lr) << '\n'
      << "finetune.batch_size = " << t.finetune_batch_size << '\n'
      << "finetune.max_epochs = " << t.finetune_max_epochs << '\n'
      << "finetune.patience = " << t.finetune_patience << '\n'
      << "finetune.win_steps = " << t.stage2_window.win_steps << '\n'
      << "finetune.hop_steps = " << t.stage2_window.hop_steps << '\n'
      << "finetune.seeds = " << join(seeds, ',') << '\n';
  return out.str();
}

}  // namespace musep
