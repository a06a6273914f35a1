#include "oracles.hpp"

#include "musep/cli.hpp"
#include "musep/manifest.hpp"

#include <doctest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace musep;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome musep_cmd(std::vector<std::string> args) {
  args.insert(args.begin(), "musep");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  o.code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every regular file below `dir`, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return files;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace

TEST_CASE("cli: synth is deterministic for a seed") {
  const auto dir = testutil::scratch_dir("cli_synth");
  const auto a = musep_cmd({"synth", "--out", (dir / "a").string(), "--subjects", "12", "--seed", "7", "--duration", "20"});
  const auto b = musep_cmd({"synth", "--out", (dir / "b").string(), "--subjects", "12", "--seed", "7", "--duration", "20"});
  const auto c = musep_cmd({"synth", "--out", (dir / "c").string(), "--subjects", "12", "--seed", "8", "--duration", "20"});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  REQUIRE(c.code == kExitOk);
  const auto ta = tree(dir / "a");
  CHECK(ta == tree(dir / "b"));
  CHECK(ta != tree(dir / "c"));
  const Manifest m = read_manifest(dir / "a" / "manifest.txt");
  CHECK(m.subjects.size() == 12);
  CHECK(ta.count("run.lock") == 1);
}

TEST_CASE("cli: usage errors exit with the usage status") {
  CHECK(musep_cmd({}).code == kExitUsage);
  CHECK(musep_cmd({"frobnicate"}).code == kExitUsage);
  CHECK(musep_cmd({"evaluate", "--manifest", "x"}).code == kExitUsage);
  CHECK(musep_cmd({"synth", "--subjects", "4", "--train", "2"}).code == kExitUsage);
  CHECK(musep_cmd({"--help"}).code == kExitOk);
  const auto dir = testutil::scratch_dir("cli_usage");
  std::ofstream(dir / "bad.cfg") << "manifest = nowhere.txt\ncombo = audio\ndimension = arousal\n";
  const auto r = musep_cmd({"pretrain", "--config", (dir / "bad.cfg").string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("manifest") != std::string::npos);
  CHECK(musep_cmd({"report", "--run", (dir / "missing").string()}).code != kExitOk);
}

TEST_CASE("cli: full pipeline on a tiny corpus") {
  const auto dir = testutil::scratch_dir("cli_pipeline");
  const fs::path corpus = dir / "corpus";
  REQUIRE(musep_cmd({"synth", "--out", corpus.string(), "--train", "2", "--dev", "1", "--test", "2", "--duration",
                     "150", "--modalities", "audio:3,video:2,phys", "--offset", "0.5", "--seed", "3"})
              .code == kExitOk);

  // Recomputing phys features from the raw signals reproduces a usable manifest.
  const auto hrv = musep_cmd({"extract-hrv", "--manifest", (corpus / "manifest.txt").string(), "--out",
                              (dir / "hrv").string()});
  REQUIRE(hrv.code == kExitOk);
  const Manifest extracted = read_manifest(dir / "hrv" / "manifest.txt");
  CHECK(extracted.subjects.size() == 5);
  CHECK(fs::exists(dir / "hrv" / "features" / "phys"));

  std::ofstream(dir / "run.cfg") << "manifest = corpus/manifest.txt\ncombo = audio+video+phys\ndimension = both\n"
                                    "output_dir = run\nmodel_dim = 8\npretrain.max_epochs = 2\n"
                                    "pretrain.win_steps = 40\npretrain.hop_steps = 20\nfinetune.max_epochs = 2\n"
                                    "finetune.seeds = 0,1\n";
  const std::string cfg = (dir / "run.cfg").string();
  const fs::path run_dir = dir / "run";

  auto pre = musep_cmd({"pretrain", "--config", cfg});
  REQUIRE_MESSAGE(pre.code == kExitOk, pre.err);
  CHECK(pre.err.find("[pretrain arousal] epoch 2") != std::string::npos);
  CHECK(fs::exists(run_dir / "arousal" / "stage1" / "model.ckpt"));
  CHECK(fs::exists(run_dir / "valence" / "stage1" / "report.csv"));
  CHECK(slurp(run_dir / "run.lock").rfind("# musep pretrain\n", 0) == 0);

  auto pers = musep_cmd({"personalise", "--config", cfg, "--jobs", "2"});
  REQUIRE_MESSAGE(pers.code == kExitOk, pers.err);
  const auto selection = lines(slurp(run_dir / "arousal" / "personalised" / "selection.csv"));
  CHECK(selection.size() == 3);  // header + two test subjects
  CHECK(selection[0] == "subject,seed,dev_ccc");

  for (const std::string stage : {"pretrained", "personalised"}) {
    auto pred = musep_cmd({"predict", "--config", cfg, "--stage", stage, "--role", "test"});
    REQUIRE_MESSAGE(pred.code == kExitOk, pred.err);
    auto ev = musep_cmd({"evaluate", "--manifest", (corpus / "manifest.txt").string(), "--predictions",
                         (run_dir / "predictions" / stage).string(), "--out", (run_dir / stage).string(),
                         "--personal-test-only"});
    REQUIRE_MESSAGE(ev.code == kExitOk, ev.err);
    CHECK(ev.out.find("combined") != std::string::npos);
    const auto rows = lines(slurp(run_dir / stage / "evaluation.csv"));
    CHECK(rows.size() == 1 + 4 + 2 + 1);
  }

  auto ens = musep_cmd({"ensemble", "--members",
                        (run_dir / "predictions" / "pretrained").string() + "," +
                            (run_dir / "predictions" / "personalised").string(),
                        "--out", (dir / "ens").string()});
  REQUIRE_MESSAGE(ens.code == kExitOk, ens.err);
  CHECK(fs::exists(dir / "ens" / "valence"));

  // A missing prediction is a data error naming the subject.
  const Manifest m = read_manifest(corpus / "manifest.txt");
  std::string victim;
  for (const auto& s : m.subjects) {
    if (s.role == Role::Test) victim = s.id;
  }
  fs::remove(dir / "ens" / "arousal" / (victim + ".csv"));
  auto ev = musep_cmd({"evaluate", "--manifest", (corpus / "manifest.txt").string(), "--predictions",
                       (dir / "ens").string(), "--out", (dir / "ens_eval").string()});
  CHECK(ev.code == kExitData);
  CHECK(ev.err.find(victim) != std::string::npos);

  auto rep = musep_cmd({"report", "--run", run_dir.string()});
  REQUIRE_MESSAGE(rep.code == kExitOk, rep.err);
  CHECK(rep.out.find("personalisation") != std::string::npos);
  CHECK(rep.out.find("evaluation personalised/evaluation.csv") != std::string::npos);
}

TEST_CASE("cli: ablation grid") {
  const auto dir = testutil::scratch_dir("cli_ablate");
  REQUIRE(musep_cmd({"synth", "--out", (dir / "corpus").string(), "--train", "1", "--dev", "1", "--test", "1",
                     "--duration", "30", "--modalities", "audio:3", "--no-ecg"})
              .code == kExitOk);
  std::ofstream(dir / "abl.cfg") << "manifest = corpus/manifest.txt\ncombo = audio\ndimension = arousal\n"
                                    "output_dir = runs/abl\npretrain.max_epochs = 1\npretrain.win_steps = 30\npretrain.hop_steps = 30\n";
  const auto r = musep_cmd({"ablate", "--config", (dir / "abl.cfg").string()});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  const auto rows = lines(slurp(dir / "runs" / "abl" / "ablation_arousal.csv"));
  REQUIRE(rows.size() == 9);
  CHECK(rows[0] == "layers,model_dim,rnn_bi,dev_ccc,test_ccc");
  std::set<std::string> keys;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::size_t cut = 0;
    for (int k = 0; k < 3; ++k) cut = rows[i].find(',', cut) + 1;
    keys.insert(rows[i].substr(0, cut));
  }
  CHECK(keys.size() == 8);
  CHECK(slurp(dir / "runs" / "abl" / "run.lock").rfind("# musep ablate\n", 0) == 0);
}
