#include "cli.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "CLI11.hpp"
#include "run_config.h"
#include "sqdr/dataset.h"
#include "sqdr/trainer.h"
#include "sqdr/vad_model.h"

namespace sqdr {

namespace {

int ThreadsFromEnv() {
  const char* v = std::getenv("SQDR_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) {
    throw Error(ErrorKind::kInvalidConfig, std::string("SQDR_THREADS must be 1..1024, got ") + v);
  }
  return static_cast<int>(n);
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorKind::kIo, "short write to " + path.string());
}

void EnsureDir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

struct TrainArgs {
  std::string config;
  std::string out_dir;
};

int CmdTrain(const TrainArgs& a, std::ostream& err) {
  RunConfig rc = LoadRunConfig(a.config);
  rc.train.threads = ThreadsFromEnv();
  const auto train_set = LoadDataset(rc.train_data);
  const auto val_set = rc.val_data.empty() ? std::vector<LabeledClip>{} : LoadDataset(rc.val_data);
  const TrainResult r = Train(train_set, val_set, rc.model, rc.train);
  if (r.log.single_class) {
    err << "warning: training set holds one class; QDR term was 0 in every batch\n";
  }
  const std::filesystem::path dir(a.out_dir);
  EnsureDir(dir);
  SaveCheckpoint(r.best, dir / "best.sqdr",
                 {static_cast<uint64_t>(r.best_epoch > 0 ? r.best_epoch : rc.train.epochs),
                  rc.train.seed});
  SaveCheckpoint(r.final_model, dir / "final.sqdr",
                 {static_cast<uint64_t>(rc.train.epochs), rc.train.seed});
  WriteText(dir / "trainlog.csv", r.log.ToCsv());
  const auto& last = r.log.records.back();
  err << "trained " << rc.train.epochs << " epochs; final loss " << last.total
      << ", best epoch " << r.best_epoch << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  bool smooth = false;
  std::string snr_sweep;
  std::string noise_dir;
  std::string csv;
  uint64_t seed = 0;
  double window_s = 0.63;
  double stride_s = 0.15;
  double threshold = 0.5;
};

int CmdEval(const EvalArgs& a, std::ostream& out) {
  const Model model = LoadCheckpoint(a.checkpoint).model;
  const auto items = LoadDataset(a.data);
  EvalOptions opt;
  opt.window_s = a.window_s;
  opt.stride_s = a.stride_s;
  opt.smooth = a.smooth;
  opt.threshold = a.threshold;
  opt.threads = ThreadsFromEnv();
  EvalReport report;
  if (!a.snr_sweep.empty()) {
    const auto snrs = ParseSnrList(a.snr_sweep);
    const auto noise = a.noise_dir.empty() ? SynthNoise(a.seed, 32) : LoadNoiseDir(a.noise_dir);
    report = SnrSweep(model, items, noise, snrs, a.seed, opt);
  } else {
    report = Evaluate(model, items, opt);
    report.conditions.push_back({"clean", report.auroc, report.f2});
  }
  out << ReportToJson(report) << "\n";
  if (!a.csv.empty()) WriteText(a.csv, ReportToCsv(report));
  return kExitOk;
}

struct InferArgs {
  std::string checkpoint;
  std::string wav;
  double window_s = 0.63;
  double stride_s = 0.15;
  bool smooth = false;
  double threshold = 0.5;
};

int CmdInfer(const InferArgs& a, std::ostream& out) {
  const Model model = LoadCheckpoint(a.checkpoint).model;
  const AudioClip clip = ReadWav(a.wav);
  const auto windows = PredictWindows(model, clip, a.window_s, a.stride_s);
  std::vector<double> scores;
  for (const auto& w : windows) scores.push_back(w.second);
  if (a.smooth && !scores.empty()) scores = MedianSmooth(scores);
  out << std::setprecision(17);
  for (size_t i = 0; i < windows.size(); ++i) {
    out << windows[i].first << '\t' << scores[i] << '\t' << (scores[i] >= a.threshold ? 1 : 0)
        << '\n';
  }
  return kExitOk;
}

struct MixArgs {
  std::string speech;
  std::string noise;
  std::string out;
  double snr_db = 0.0;
  uint64_t seed = 0;
};

int CmdMix(const MixArgs& a) {
  WriteWav(MixAtSnr(ReadWav(a.speech), ReadWav(a.noise), {a.snr_db, a.seed}), a.out);
  return kExitOk;
}

struct SynthArgs {
  int n = 0;
  uint64_t seed = 0;
  double speech_frac = 0.5;
  std::string out_dir;
};

int CmdSynth(const SynthArgs& a) {
  if (a.n < 1) throw Error(ErrorKind::kInvalidConfig, "--n must be >= 1");
  if (a.speech_frac < 0.0 || a.speech_frac > 1.0) {
    throw Error(ErrorKind::kInvalidConfig, "--speech-frac must lie in [0, 1]");
  }
  EnsureDir(a.out_dir);
  ExportDataset(SynthDataset(a.seed, a.n, a.speech_frac), a.out_dir);
  return kExitOk;
}

struct InspectArgs {
  std::string checkpoint;
  std::string prefix;
};

int CmdInspect(const InspectArgs& a) {
  const Model model = LoadCheckpoint(a.checkpoint).model;
  const FrontendConfig& fc = model.config().frontend;
  const SincParams p = model.frontend_params();
  const FilterBank bank = Materialize(p, fc);
  const int n_fft = 4096;

  std::ostringstream params, response;
  params << "index,f_low_hz,f_high_hz,gain\n" << std::setprecision(17);
  response << "index,freq_hz,mag_db\n" << std::setprecision(17);
  for (int i = 0; i < bank.n_filters; ++i) {
    const Cutoffs c = ComputeCutoffs(p.theta1[i], p.theta2[i], fc.sample_rate);
    params << i << ',' << RadToHz(c.low, fc.sample_rate) << ','
           << RadToHz(c.high, fc.sample_rate) << ',' << p.gain[i] << '\n';
    const auto db = MagnitudeResponseDb(bank.filter(i), n_fft);
    for (size_t k = 0; k < db.size(); ++k) {
      response << i << ',' << static_cast<double>(k) * fc.sample_rate / n_fft << ',' << db[k]
               << '\n';
    }
  }
  WriteText(a.prefix + "_params.csv", params.str());
  WriteText(a.prefix + "_response.csv", response.str());
  return kExitOk;
}

}  // namespace

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidConfig:
    case ErrorKind::kOutOfRange:
    case ErrorKind::kIndivisibleChannels:
      return kExitConfig;
    case ErrorKind::kNumericAbort:
      return kExitNumeric;
    case ErrorKind::kNotAWav:
    case ErrorKind::kUnsupportedEncoding:
    case ErrorKind::kTruncatedFile:
    case ErrorKind::kIo:
    case ErrorKind::kSampleRateMismatch:
    case ErrorKind::kZeroEnergy:
    case ErrorKind::kWindowTooLong:
    case ErrorKind::kClipTooShort:
    case ErrorKind::kEmptyInput:
    case ErrorKind::kBadMagic:
    case ErrorKind::kVersionMismatch:
    case ErrorKind::kSingleClass:
    case ErrorKind::kData:
      return kExitData;
    default:
      return kExitUsage;
  }
}

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sinc front-end voice activity detector"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train and write best.sqdr, final.sqdr, trainlog.csv");
  c_train->add_option("config", train.config)->required();
  c_train->add_option("out-dir", train.out_dir)->required();

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Print an evaluation report as JSON");
  c_eval->add_option("--checkpoint", eval.checkpoint)->required();
  c_eval->add_option("--data", eval.data, "Directory with manifest.tsv or synthetic: spec")
      ->required();
  c_eval->add_flag("--smooth", eval.smooth);
  c_eval->add_option("--snr-sweep", eval.snr_sweep, "Comma-separated SNRs in dB");
  c_eval->add_option("--noise-dir,--noise", eval.noise_dir);
  c_eval->add_option("--csv", eval.csv);
  c_eval->add_option("--seed", eval.seed);
  c_eval->add_option("--window", eval.window_s);
  c_eval->add_option("--stride", eval.stride_s);
  c_eval->add_option("--threshold", eval.threshold);

  InferArgs infer;
  auto* c_infer = app.add_subcommand("infer", "Per-window scores as offset_s, score, decision");
  c_infer->add_option("checkpoint", infer.checkpoint)->required();
  c_infer->add_option("wav", infer.wav)->required();
  c_infer->add_option("--window", infer.window_s);
  c_infer->add_option("--stride", infer.stride_s);
  c_infer->add_flag("--smooth", infer.smooth);
  c_infer->add_option("--threshold", infer.threshold);

  MixArgs mix;
  auto* c_mix = app.add_subcommand("mix", "Mix noise into speech at a target SNR");
  c_mix->add_option("speech", mix.speech)->required();
  c_mix->add_option("noise", mix.noise)->required();
  c_mix->add_option("out", mix.out)->required();
  c_mix->add_option("--snr", mix.snr_db)->required();
  c_mix->add_option("--seed", mix.seed);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic labeled dataset");
  c_synth->add_option("--n", synth.n)->required();
  c_synth->add_option("--seed", synth.seed);
  c_synth->add_option("--speech-frac", synth.speech_frac);
  c_synth->add_option("out-dir", synth.out_dir)->required();

  InspectArgs inspect;
  auto* c_inspect = app.add_subcommand("inspect-filters", "Dump learned band edges and responses");
  c_inspect->add_option("checkpoint", inspect.checkpoint)->required();
  c_inspect->add_option("out-prefix", inspect.prefix)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (c_train->parsed()) return CmdTrain(train, err);
    if (c_eval->parsed()) return CmdEval(eval, out);
    if (c_infer->parsed()) return CmdInfer(infer, out);
    if (c_mix->parsed()) return CmdMix(mix);
    if (c_synth->parsed()) return CmdSynth(synth);
    if (c_inspect->parsed()) return CmdInspect(inspect);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace sqdr
