#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cli.h"
#include "doctest.h"
#include "json.hpp"
#include "run_config.h"
#include "sqdr/dataset.h"
#include "sqdr/signal_io.h"
#include "sqdr/vad_model.h"
#include "support.h"

using namespace sqdr;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run Cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = RunCli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string Slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void Put(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << text;
}

size_t Lines(const std::string& s) { return static_cast<size_t>(std::count(s.begin(), s.end(), '\n')); }

const char* kSmallConfig =
    "# tiny run\n"
    "data.train = synthetic:n=16,seed=1,speech_frac=0.5\n"
    "data.val = synthetic:n=8,seed=2,speech_frac=0.5\n"
    "model.channels = 16\n"
    "model.groups = 4\n"
    "model.n_encoders = 1\n"
    "train.epochs = 2\n"
    "train.batch_size = 8\n"
    "train.seed = 3\n";

// Trains the tiny configuration once per process and returns its directory.
const fs::path& TrainedDir() {
  static const fs::path dir = [] {
    const fs::path d = test::ScratchDir("cli_trained");
    Put(d / "run.cfg", kSmallConfig);
    const Run r = Cli({"train", (d / "run.cfg").string(), (d / "out").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return d / "out";
  }();
  return dir;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("run config parsing") {
  const RunConfig rc = ParseRunConfig(kSmallConfig, "t.cfg");
  CHECK(rc.model.channels == 16);
  CHECK(rc.train.epochs == 2);
  CHECK(rc.train.seed == 3);
  CHECK(rc.train_data == "synthetic:n=16,seed=1,speech_frac=0.5");
  CHECK(rc.train.lambda == 0.25);

  auto message = [](const std::string& text) {
    try {
      ParseRunConfig(text, "t.cfg");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kInvalidConfig);
      return std::string(e.what());
    }
    FAIL("expected kInvalidConfig");
    return std::string();
  };
  const std::string unknown = message("data.train = x\n\ntrain.sed = 4\n");
  CHECK(unknown.find("t.cfg:3") != std::string::npos);
  CHECK(unknown.find("train.sed") != std::string::npos);
  CHECK(message("data.train = x\ndata.train = y\n").find("t.cfg:2") != std::string::npos);
  CHECK(message("data.train = x\ntrain.epochs = many\n").find("train.epochs") != std::string::npos);
  CHECK(message("train.epochs = 3\n").find("data.train") != std::string::npos);
  CHECK(message("data.train = x\njust words\n").find("t.cfg:2") != std::string::npos);
}

TEST_CASE("synth writes clips and a manifest") {
  const fs::path d = test::ScratchDir("cli_synth");
  const Run r = Cli({"synth", "--n", "10", "--seed", "4", (d / "set").string()});
  REQUIRE(r.code == 0);
  CHECK(Lines(Slurp(d / "set" / "manifest.tsv")) == 10);
  const auto back = ImportDataset(d / "set");
  REQUIRE(back.size() == 10);
  CHECK(std::count_if(back.begin(), back.end(), [](const auto& c) { return c.label == 1; }) == 5);
  CHECK(Cli({"synth", "--n", "0", (d / "x").string()}).code == kExitConfig);
}

TEST_CASE("train writes checkpoints and a byte-stable log") {
  const fs::path& out = TrainedDir();
  CHECK(fs::exists(out / "best.sqdr"));
  CHECK(fs::exists(out / "final.sqdr"));
  const std::string log = Slurp(out / "trainlog.csv");
  CHECK(log.rfind("epoch,lr,total,bce,qdr,val_auroc,val_f2,seconds\n", 0) == 0);
  CHECK(Lines(log) == 3);

  const fs::path d = test::ScratchDir("cli_train_again");
  Put(d / "run.cfg", kSmallConfig);
  setenv("SQDR_THREADS", "3", 1);
  const Run r = Cli({"train", (d / "run.cfg").string(), (d / "out").string()});
  unsetenv("SQDR_THREADS");
  REQUIRE(r.code == 0);
  CHECK(Slurp(d / "out" / "trainlog.csv") == log);
  CHECK(Slurp(d / "out" / "final.sqdr") == Slurp(out / "final.sqdr"));
  CHECK(Slurp(d / "out" / "best.sqdr") == Slurp(out / "best.sqdr"));
}

TEST_CASE("train error exit codes") {
  const fs::path d = test::ScratchDir("cli_train_errors");
  Put(d / "unknown.cfg", "data.train = synthetic:n=4\nmodel.colour = red\n");
  Run r = Cli({"train", (d / "unknown.cfg").string(), (d / "o1").string()});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find(":2") != std::string::npos);
  CHECK(r.err.find("model.colour") != std::string::npos);

  Put(d / "nodata.cfg", "data.train = " + (d / "missing").string() + "\n");
  r = Cli({"train", (d / "nodata.cfg").string(), (d / "o2").string()});
  CHECK(r.code == kExitData);
  CHECK(r.err.find((d / "missing").string()) != std::string::npos);

  fs::create_directories(d / "empty");
  Put(d / "nomanifest.cfg", "data.train = " + (d / "empty").string() + "\n");
  r = Cli({"train", (d / "nomanifest.cfg").string(), (d / "o3").string()});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("manifest") != std::string::npos);

  Put(d / "odd.cfg", "data.train = synthetic:n=4\nmodel.channels = 47\n");
  CHECK(Cli({"train", (d / "odd.cfg").string(), (d / "o4").string()}).code == kExitConfig);
  CHECK(Cli({"train", (d / "absent.cfg").string(), (d / "o5").string()}).code == kExitConfig);

  setenv("SQDR_THREADS", "zero", 1);
  CHECK(Cli({"train", (d / "odd.cfg").string(), (d / "o6").string()}).code == kExitConfig);
  unsetenv("SQDR_THREADS");
  CHECK(Cli({"bogus"}).code == kExitUsage);
  CHECK(Cli({}).code == kExitUsage);
}

TEST_CASE("eval prints a json report") {
  const fs::path ckpt = TrainedDir() / "best.sqdr";
  const Run r = Cli({"eval", "--checkpoint", ckpt.string(), "--data",
                     "synthetic:n=6,seed=9,speech_frac=0.5"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["n_pos"].get<int>() + j["n_neg"].get<int>() == 18);
  CHECK(j["threshold"] == 0.5);
  CHECK(j["conditions"].contains("clean"));
  const Run s = Cli({"eval", "--checkpoint", ckpt.string(), "--data",
                     "synthetic:n=6,seed=9,speech_frac=0.5", "--smooth"});
  CHECK(s.code == 0);
  CHECK(Cli({"eval", "--checkpoint", "/nonexistent.sqdr", "--data", "synthetic:n=2"}).code ==
        kExitData);
}

TEST_CASE("snr sweep csv has one row per level plus the average") {
  const fs::path d = test::ScratchDir("cli_sweep");
  const fs::path ckpt = TrainedDir() / "best.sqdr";
  const Run r = Cli({"eval", "--checkpoint", ckpt.string(), "--data",
                     "synthetic:n=6,seed=9,speech_frac=0.5", "--snr-sweep", "10,5,0,-5,-10",
                     "--csv", (d / "sweep.csv").string()});
  REQUIRE(r.code == 0);
  const std::string csv = Slurp(d / "sweep.csv");
  CHECK(Lines(csv) == 7);
  CHECK(csv.find("\nAvg.,") != std::string::npos);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["conditions"].size() == 6);

  ExportDataset(SynthDataset(5, 3, 0.0), d / "noise");
  const Run n = Cli({"eval", "--checkpoint", ckpt.string(), "--data", "synthetic:n=4",
                     "--snr-sweep", "0", "--noise-dir", (d / "noise").string()});
  CHECK(n.code == 0);
  CHECK(Cli({"eval", "--checkpoint", ckpt.string(), "--data", "synthetic:n=4", "--snr-sweep",
             "0,x"})
            .code == kExitConfig);
}

TEST_CASE("infer prints one row per window") {
  const fs::path d = test::ScratchDir("cli_infer");
  const fs::path ckpt = TrainedDir() / "final.sqdr";
  Rng rng(6);
  AudioClip ten;
  ten.samples = test::RandomVector(rng, 160000, -0.2, 0.2);
  WriteWav(ten, d / "ten.wav");
  Run r = Cli({"infer", ckpt.string(), (d / "ten.wav").string()});
  REQUIRE(r.code == 0);
  CHECK(Lines(r.out) == 63);

  const Model m = LoadCheckpoint(ckpt).model;
  const auto expect = PredictWindows(m, ReadWav(d / "ten.wav"), 0.63, 0.15);
  std::istringstream rows(r.out);
  for (const auto& [offset, score] : expect) {
    double o = 0, s = 0;
    int dec = 0;
    rows >> o >> s >> dec;
    CHECK(o == offset);
    CHECK(s == score);
    CHECK(dec == (score >= 0.5 ? 1 : 0));
  }
  r = Cli({"infer", ckpt.string(), (d / "ten.wav").string(), "--smooth", "--threshold", "0.3"});
  CHECK(r.code == 0);
  CHECK(Lines(r.out) == 63);

  Put(d / "junk.wav", "not audio at all");
  CHECK(Cli({"infer", ckpt.string(), (d / "junk.wav").string()}).code == kExitData);
}

TEST_CASE("mix matches the library byte for byte") {
  const fs::path d = test::ScratchDir("cli_mix");
  const auto items = SynthDataset(7, 2, 0.5);
  WriteWav(items[0].clip, d / "speech.wav");
  WriteWav(items[1].clip, d / "noise.wav");
  const Run r = Cli({"mix", (d / "speech.wav").string(), (d / "noise.wav").string(),
                     (d / "out.wav").string(), "--snr", "0", "--seed", "3"});
  REQUIRE(r.code == 0);
  WriteWav(MixAtSnr(ReadWav(d / "speech.wav"), ReadWav(d / "noise.wav"), {0.0, 3}),
           d / "lib.wav");
  CHECK(Slurp(d / "out.wav") == Slurp(d / "lib.wav"));
}

TEST_CASE("inspect-filters dumps band edges and responses") {
  const fs::path d = test::ScratchDir("cli_inspect");
  const Run r = Cli({"inspect-filters", (TrainedDir() / "final.sqdr").string(),
                     (d / "f").string()});
  REQUIRE(r.code == 0);
  const std::string params = Slurp(d / "f_params.csv");
  CHECK(params.rfind("index,f_low_hz,f_high_hz,gain\n", 0) == 0);
  CHECK(Lines(params) == 65);
  CHECK(Lines(Slurp(d / "f_response.csv")) == 1 + 64 * 2049);
}

}  // TEST_SUITE
