// Copyright 2026 The Specmetric Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <charconv>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "specmetric/audio_io.hpp"
#include "specmetric/degrade.hpp"
#include "specmetric/error.hpp"
#include "specmetric/eval.hpp"
#include "specmetric/fitting.hpp"
#include "specmetric/metrics.hpp"
#include "specmetric/nlp.hpp"
#include "specmetric/spectrogram.hpp"

namespace {

using namespace specmetric;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::string format_score(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, end);
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
    s += ".0";
  }
  return s;
}

std::string default_params_path() {
  return std::string(SPECMETRIC_DATA_DIR) + "/nlp_image_default.json";
}

// Spectrogram front-end flags shared by the audio-consuming subcommands.
// Resolution order: defaults, then --spec-config file, then explicit flags.
struct SpecFlags {
  SpectrogramConfig flag_values;
  std::string config_path;
  std::string scale_name = "log_power";
  CLI::Option* n_fft = nullptr;
  CLI::Option* hop = nullptr;
  CLI::Option* mels = nullptr;
  CLI::Option* rate = nullptr;
  CLI::Option* fmin = nullptr;
  CLI::Option* fmax = nullptr;
  CLI::Option* scale = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--spec-config", config_path,
                    "key=value file with spectrogram settings");
    n_fft = cmd->add_option("--n-fft", flag_values.n_fft,
                            "STFT window size (default 2048)");
    hop = cmd->add_option("--hop", flag_values.hop_length,
                          "STFT hop length (default 64)");
    mels = cmd->add_option("--mels", flag_values.n_mels,
                           "mel band count (default 512)");
    rate = cmd->add_option("--rate", flag_values.sample_rate,
                           "working sample rate in Hz (default 16050)");
    fmin = cmd->add_option("--fmin", flag_values.fmin,
                           "lowest mel frequency (default 0)");
    fmax = cmd->add_option("--fmax", flag_values.fmax,
                           "highest mel frequency (default rate/2)");
    scale = cmd->add_option("--scale", scale_name,
                            "spectrogram scale: power or log_power")
                ->check(CLI::IsMember({"power", "log_power"}));
  }

  SpectrogramConfig resolve() const {
    SpectrogramConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw DataError("cannot open spec config: " + config_path);
      std::stringstream ss;
      ss << in.rdbuf();
      cfg = parse_spectrogram_config(ss.str());
    }
    if (n_fft->count() > 0) cfg.n_fft = flag_values.n_fft;
    if (hop->count() > 0) cfg.hop_length = flag_values.hop_length;
    if (mels->count() > 0) cfg.n_mels = flag_values.n_mels;
    if (rate->count() > 0) cfg.sample_rate = flag_values.sample_rate;
    if (fmin->count() > 0) cfg.fmin = flag_values.fmin;
    if (fmax->count() > 0) cfg.fmax = flag_values.fmax;
    if (scale->count() > 0) {
      cfg.scale = scale_name == "power" ? SpectrogramScale::kPower
                                        : SpectrogramScale::kLogPower;
    }
    cfg.validate();
    return cfg;
  }
};

MelSpectrogram load_clip(const std::string& path,
                         const SpectrogramConfig& cfg) {
  Waveform w = decode_wav_file(path);
  if (w.sample_rate != cfg.sample_rate) w = resample(w, cfg.sample_rate);
  return mel_spectrogram(w, cfg);
}

std::vector<std::string> split_list(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

MetricBinding make_metric_binding(const std::string& name,
                                  const std::string& params_path) {
  if (name == "mse") {
    return {name, [](const MelSpectrogram& a, const MelSpectrogram& b) {
              return mse(a, b);
            }};
  }
  if (name == "ssim") {
    return {name, [](const MelSpectrogram& a, const MelSpectrogram& b) {
              return ssim(a, b);
            }};
  }
  if (name == "msssim") {
    return {name, [](const MelSpectrogram& a, const MelSpectrogram& b) {
              return ms_ssim(a, b);
            }};
  }
  if (name == "nsim") {
    return {name, [](const MelSpectrogram& a, const MelSpectrogram& b) {
              return nsim(a, b);
            }};
  }
  if (name == "nlpd") {
    const std::string path =
        params_path.empty() ? default_params_path() : params_path;
    NlpParams params = load_nlp_params(path);
    return {name, [params](const MelSpectrogram& a, const MelSpectrogram& b) {
              return nlpd(a, b, params);
            }};
  }
  throw DataError("unknown metric '" + name +
                  "' (expected nlpd, msssim, ssim, nsim or mse)");
}

// Reference clips of the training split, ordered and deduplicated by path.
std::vector<std::string> train_reference_paths(
    const std::vector<RatingRecord>& records,
    std::vector<std::string>* warnings) {
  SplitResult split = split_train_test(records);
  if (warnings != nullptr) *warnings = split.warnings;
  std::set<std::string> unique;
  for (const RatingRecord& r : split.train) unique.insert(r.reference_path);
  return {unique.begin(), unique.end()};
}

int run_compare(const std::string& ref_path, const std::string& deg_path,
                const std::string& metric_list,
                const std::string& params_path, const SpecFlags& spec) {
  const SpectrogramConfig cfg = spec.resolve();
  std::vector<MetricBinding> bindings;
  for (const std::string& name : split_list(metric_list)) {
    bindings.push_back(make_metric_binding(name, params_path));
  }
  if (bindings.empty()) throw DataError("no metric given");
  const MelSpectrogram a = load_clip(ref_path, cfg);
  const MelSpectrogram b = load_clip(deg_path, cfg);
  for (const MetricBinding& binding : bindings) {
    std::cout << binding.name << "\t" << format_score(binding.fn(a, b))
              << "\n";
  }
  return kExitOk;
}

int run_degrade(const std::string& in_path, const std::string& kind,
                double intensity, std::uint64_t seed,
                const std::string& out_path) {
  DegradationSpec spec;
  spec.kind = degradation_kind_from_name(kind);
  spec.intensity = intensity;
  spec.seed = seed;
  const Waveform in = decode_wav_file(in_path);
  write_wav_16bit_file(apply(in, spec), out_path);
  return kExitOk;
}

int run_fit_statistical(const std::string& manifest, const std::string& out,
                        const AdamConfig& opt, int stages,
                        const std::string& trace_path,
                        const SpecFlags& spec) {
  const SpectrogramConfig cfg = spec.resolve();
  std::cerr << "fit-statistical: lr=" << opt.learning_rate
            << " epochs=" << opt.epochs << " batch=" << opt.batch_size
            << " seed=" << opt.seed << " stages=" << stages << "\n";
  std::vector<std::string> warnings;
  const std::vector<std::string> paths =
      train_reference_paths(load_dataset(manifest), &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  if (paths.empty()) {
    throw DataError("manifest holds no training reference clips");
  }
  std::cerr << "fit-statistical: " << paths.size()
            << " training reference clips\n";

  std::vector<MelSpectrogram> train;
  train.reserve(paths.size());
  for (const std::string& p : paths) train.push_back(load_clip(p, cfg));

  NlpParams base = NlpParams::none(stages);
  const FitTrace trace = fit_statistical(train, base, opt);
  save_nlp_params(trace.final_params, out);
  if (!trace_path.empty()) write_fit_trace_csv(trace, trace_path);
  std::cerr << "fit-statistical: final objective "
            << trace.epoch_objectives.back() << ", params written to " << out
            << "\n";
  return kExitOk;
}

int run_fit_perceptual(const std::string& manifest, const std::string& init,
                       const std::string& out, const AdamConfig& opt,
                       bool freeze_sigma, const std::string& rating_sense,
                       const std::string& trace_path, const SpecFlags& spec) {
  const SpectrogramConfig cfg = spec.resolve();
  std::cerr << "fit-perceptual: lr=" << opt.learning_rate
            << " epochs=" << opt.epochs << " seed=" << opt.seed
            << " init=" << init << "\n";
  const NlpParams base = load_nlp_params(init);

  SplitResult split = split_train_test(load_dataset(manifest));
  for (const std::string& w : split.warnings) {
    std::cerr << "warning: " << w << "\n";
  }
  std::vector<PerceptualPair> pairs;
  for (const RatingRecord& r : split.train) {
    if (r.degradation == "reference") continue;
    PerceptualPair p;
    p.reference = load_clip(r.reference_path, cfg);
    p.degraded = load_clip(r.degraded_path, cfg);
    p.rating = r.rating;
    p.degradation = r.degradation;
    pairs.push_back(std::move(p));
  }
  if (pairs.empty()) throw DataError("manifest holds no training pairs");
  std::cerr << "fit-perceptual: " << pairs.size() << " training pairs\n";

  PerceptualOptions popt;
  popt.train_sigma = !freeze_sigma;
  popt.ratings_are_quality = rating_sense == "quality";
  const FitTrace trace = fit_perceptual(pairs, base, opt, popt);
  save_nlp_params(trace.final_params, out);
  if (!trace_path.empty()) write_fit_trace_csv(trace, trace_path);
  std::cerr << "fit-perceptual: final objective "
            << trace.epoch_objectives.back() << ", params written to " << out
            << "\n";
  return kExitOk;
}

int run_evaluate(const std::string& manifest, const std::string& metric_list,
                 const std::string& out, const std::string& split_name,
                 int jobs, const std::string& params_path,
                 const SpecFlags& spec) {
  EvalOptions opts;
  opts.spec_config = spec.resolve();
  opts.split = split_name == "test" ? EvalSplit::kTestOnly : EvalSplit::kAll;
  opts.jobs = jobs;

  std::vector<MetricBinding> bindings;
  for (const std::string& name : split_list(metric_list)) {
    bindings.push_back(make_metric_binding(name, params_path));
  }
  const std::vector<RatingRecord> records = load_dataset(manifest);
  const EvalReport report = evaluate(records, bindings, opts);
  for (const std::string& f : report.failures) {
    std::cerr << "warning: skipped " << f << "\n";
  }
  write_report_csv(report, out);
  std::cout << format_report_table(report);
  std::cerr << "evaluate: " << report.scored_count << " pairs scored, report "
            << "written to " << out << "\n";
  return kExitOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Perceptual audio quality metrics over mel spectrograms"};
  app.require_subcommand(1);
  app.set_config("--config")->envname("SPECMETRIC_CONFIG");

  // compare
  auto* compare = app.add_subcommand(
      "compare", "Score a degraded clip against its reference");
  std::string ref_path, deg_path, metric = "nlpd", params_path;
  compare->add_option("--ref", ref_path, "reference WAV")->required();
  compare->add_option("--deg", deg_path, "degraded WAV")->required();
  compare->add_option("--metric", metric,
                      "metric name or comma list: nlpd, msssim, ssim, nsim, "
                      "mse");
  compare->add_option("--params", params_path,
                      "NLPD parameter file (default: bundled image fit)");
  SpecFlags compare_spec;
  compare_spec.attach(compare);

  // degrade
  auto* degrade = app.add_subcommand("degrade", "Synthesize a degraded clip");
  std::string in_path, kind, out_path;
  double intensity = 0.0;
  std::uint64_t seed = 0;
  degrade->add_option("--in", in_path, "input WAV")->required();
  degrade->add_option("--kind", kind,
                      "waveshape, lowpass, limiter or noise")->required();
  degrade->add_option("--intensity", intensity, "severity in [0, 1]")
      ->required();
  degrade->add_option("--seed", seed, "noise seed");
  degrade->add_option("--out", out_path, "output WAV")->required();

  // fit-statistical
  auto* fit_stat = app.add_subcommand(
      "fit-statistical",
      "Fit normalization filters to predict coefficients from neighbours");
  std::string stat_manifest, stat_out, stat_trace;
  AdamConfig stat_opt = AdamConfig::statistical_defaults();
  int stat_stages = 6;
  fit_stat->add_option("--train-manifest", stat_manifest, "dataset CSV")
      ->required();
  fit_stat->add_option("--out", stat_out, "output params JSON")->required();
  fit_stat->add_option("--lr", stat_opt.learning_rate, "learning rate");
  fit_stat->add_option("--epochs", stat_opt.epochs, "epochs");
  fit_stat->add_option("--batch", stat_opt.batch_size, "batch size");
  fit_stat->add_option("--seed", stat_opt.seed, "shuffle seed");
  fit_stat->add_option("--stages", stat_stages, "pyramid stages");
  fit_stat->add_option("--trace", stat_trace, "write fit trace CSV here");
  SpecFlags stat_spec;
  stat_spec.attach(fit_stat);

  // fit-perceptual
  auto* fit_perc = app.add_subcommand(
      "fit-perceptual",
      "Fit normalization parameters to maximize rating correlation");
  std::string perc_manifest, perc_init, perc_out, perc_trace;
  std::string rating_sense = "quality";
  AdamConfig perc_opt = AdamConfig::perceptual_defaults();
  bool freeze_sigma = false;
  fit_perc->add_option("--train-manifest", perc_manifest, "dataset CSV")
      ->required();
  fit_perc->add_option("--init", perc_init, "initial params JSON")
      ->required();
  fit_perc->add_option("--out", perc_out, "output params JSON")->required();
  fit_perc->add_option("--lr", perc_opt.learning_rate, "learning rate");
  fit_perc->add_option("--epochs", perc_opt.epochs, "epochs");
  fit_perc->add_option("--seed", perc_opt.seed, "shuffle seed");
  fit_perc->add_flag("--freeze-sigma", freeze_sigma,
                     "keep per-stage constants at their initialization");
  fit_perc->add_option("--rating-sense", rating_sense,
                       "quality (larger = better, default) or distance")
      ->check(CLI::IsMember({"quality", "distance"}));
  fit_perc->add_option("--trace", perc_trace, "write fit trace CSV here");
  SpecFlags perc_spec;
  perc_spec.attach(fit_perc);

  // evaluate
  auto* evaluate_cmd = app.add_subcommand(
      "evaluate", "Correlation tables over a rated dataset");
  std::string eval_manifest, eval_metrics, eval_out, eval_params;
  std::string eval_split = "all";
  int eval_jobs = 1;
  evaluate_cmd->add_option("--manifest", eval_manifest, "dataset CSV")
      ->required();
  evaluate_cmd->add_option("--metrics", eval_metrics,
                           "comma list of metrics")->required();
  evaluate_cmd->add_option("--out", eval_out, "report CSV path")->required();
  evaluate_cmd->add_option("--split", eval_split, "all or test")
      ->check(CLI::IsMember({"all", "test"}));
  evaluate_cmd->add_option("--jobs", eval_jobs, "parallel scoring threads");
  evaluate_cmd->add_option("--params", eval_params,
                           "NLPD parameter file (default: bundled image "
                           "fit)");
  SpecFlags eval_spec;
  eval_spec.attach(evaluate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (compare->parsed()) {
      return run_compare(ref_path, deg_path, metric, params_path,
                         compare_spec);
    }
    if (degrade->parsed()) {
      return run_degrade(in_path, kind, intensity, seed, out_path);
    }
    if (fit_stat->parsed()) {
      return run_fit_statistical(stat_manifest, stat_out, stat_opt,
                                 stat_stages, stat_trace, stat_spec);
    }
    if (fit_perc->parsed()) {
      return run_fit_perceptual(perc_manifest, perc_init, perc_out, perc_opt,
                                freeze_sigma, rating_sense, perc_trace,
                                perc_spec);
    }
    if (evaluate_cmd->parsed()) {
      return run_evaluate(eval_manifest, eval_metrics, eval_out, eval_split,
                          eval_jobs, eval_params, eval_spec);
    }
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
