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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <numbers>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "specmetric/audio_io.hpp"
#include "specmetric/degrade.hpp"
#include "specmetric/error.hpp"
#include "specmetric/eval.hpp"
#include "specmetric/metrics.hpp"
#include "specmetric/rng.hpp"

using namespace specmetric;

namespace {

// O(n^2) average ranks: the tie-handling oracle.
std::vector<double> brute_force_ranks(const std::vector<double>& xs) {
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::size_t less = 0, equal = 0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      if (xs[j] < xs[i]) ++less;
      if (xs[j] == xs[i]) ++equal;  // includes self
    }
    ranks[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
  }
  return ranks;
}

double two_pass_pearson(const std::vector<double>& xs,
                        const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = xs[i] - mx;
    const double b = ys[i] - my;
    num += a * b;
    dx += a * a;
    dy += b * b;
  }
  return num / std::sqrt(dx * dy);
}

std::vector<double> random_vector(std::size_t n, CounterRng& rng,
                                  bool with_ties) {
  std::vector<double> v(n);
  for (double& x : v) {
    x = with_ties ? std::floor(rng.next_uniform(0.0, 10.0))
                  : rng.next_gaussian();
  }
  return v;
}

std::string manifest_header() {
  return "clip_id,genre,song,degradation,rating,reference_path,"
         "degraded_path\n";
}

// PMQD-shaped manifest: genres x songs x clips, each clip rated for the
// reference and all four degradations.
std::string pmqd_shaped_manifest(int genres, int songs, int clips) {
  std::ostringstream os;
  os << manifest_header();
  const std::vector<std::string> kinds = {"reference", "waveshape", "lowpass",
                                          "limiter", "noise"};
  for (int g = 0; g < genres; ++g) {
    for (int s = 0; s < songs; ++s) {
      for (int c = 0; c < clips; ++c) {
        for (const std::string& kind : kinds) {
          os << "g" << g << "_s" << s << "_c" << c << "_" << kind << ","
             << "genre" << g << ",song" << s << ","
             << kind << ",3.0,ref.wav,deg.wav\n";
        }
      }
    }
  }
  return os.str();
}

Waveform tone_clip(int rate, double seconds, std::uint64_t seed) {
  Waveform w;
  w.sample_rate = rate;
  CounterRng rng(seed);
  const double f0 = 100.0 + 40.0 * static_cast<double>(rng.next_below(8));
  const std::size_t n = static_cast<std::size_t>(seconds * rate);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    w.samples.push_back(0.4 * std::sin(2.0 * std::numbers::pi * f0 * t) +
                        0.2 * std::sin(2.0 * std::numbers::pi * 2 * f0 * t) +
                        0.05 * rng.next_gaussian());
  }
  return w;
}

struct TempDataset {
  std::filesystem::path dir;
  std::string manifest_path;
  std::vector<RatingRecord> records;

  ~TempDataset() { std::filesystem::remove_all(dir); }
};

// Builds a small on-disk dataset whose ratings increase exactly with the
// measured spectrogram MSE, so the expected Spearman column is +1.
TempDataset build_disk_dataset(const SpectrogramConfig& cfg) {
  static int dataset_counter = 0;
  TempDataset ds;
  ds.dir = std::filesystem::temp_directory_path() /
           ("specmetric_eval_" + std::to_string(::getpid()) + "_" +
            std::to_string(dataset_counter++));
  std::filesystem::create_directories(ds.dir);

  const std::vector<std::string> kinds = {"noise", "lowpass"};
  struct Row {
    std::string clip_id, genre, song, kind;
    std::string ref, deg;
    double score;
  };
  std::vector<Row> rows;
  int clip_index = 0;
  for (int g = 0; g < 2; ++g) {
    for (int s = 0; s < 2; ++s) {
      const Waveform ref = tone_clip(cfg.sample_rate, 0.25,
                                     100 + clip_index);
      const std::string ref_path =
          (ds.dir / ("ref" + std::to_string(clip_index) + ".wav")).string();
      write_wav_16bit_file(ref, ref_path);
      const MelSpectrogram ref_mel =
          mel_spectrogram(decode_wav_file(ref_path), cfg);
      for (std::size_t k = 0; k < kinds.size(); ++k) {
        DegradationSpec dspec;
        dspec.kind = degradation_kind_from_name(kinds[k]);
        dspec.intensity = 0.3 + 0.15 * static_cast<double>(clip_index % 4);
        dspec.seed = 7;
        const Waveform deg = apply(decode_wav_file(ref_path), dspec);
        const std::string deg_path =
            (ds.dir / ("deg" + std::to_string(clip_index) + "_" + kinds[k] +
                       ".wav"))
                .string();
        write_wav_16bit_file(deg, deg_path);
        const MelSpectrogram deg_mel =
            mel_spectrogram(decode_wav_file(deg_path), cfg);
        Row row;
        row.clip_id = "clip" + std::to_string(clip_index) + "_" + kinds[k];
        row.genre = "genre" + std::to_string(g);
        row.song = "song" + std::to_string(s);
        row.kind = kinds[k];
        row.ref = ref_path;
        row.deg = deg_path;
        row.score = mse(ref_mel, deg_mel);
        rows.push_back(row);
      }
      ++clip_index;
    }
  }

  // Ratings strictly increasing with the measured score within each kind
  // and overall: rank-map scores into [1, 5].
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&rows](std::size_t a, std::size_t b) {
    return rows[a].score < rows[b].score;
  });
  std::ostringstream os;
  os << manifest_header();
  std::vector<double> ratings(rows.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    ratings[order[r]] =
        1.0 + 4.0 * static_cast<double>(r) /
                  static_cast<double>(order.size() - 1);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << rows[i].clip_id << "," << rows[i].genre << "," << rows[i].song
       << "," << rows[i].kind << "," << ratings[i] << "," << rows[i].ref
       << "," << rows[i].deg << "\n";
  }
  ds.manifest_path = (ds.dir / "manifest.csv").string();
  std::ofstream out(ds.manifest_path);
  out << os.str();
  out.close();
  ds.records = load_dataset(ds.manifest_path);
  return ds;
}

}  // namespace

TEST_CASE("manifest parsing validates rows and names offenders") {
  const std::string good = manifest_header() +
                           "a,rock,s1,noise,3.5,r.wav,d.wav\n"
                           "b,rock,s1,reference,4.0,r.wav,r.wav\n";
  const std::vector<RatingRecord> records = parse_dataset_csv(good, "m");
  REQUIRE(records.size() == 2);
  CHECK(records[0].clip_id == "a");
  CHECK(records[0].rating == 3.5);

  CHECK_THROWS_WITH_AS(
      parse_dataset_csv(manifest_header() + "a,rock,s1,noise,6.0,r,d\n",
                        "m"),
      doctest::Contains("row 2"), DataError);
  CHECK_THROWS_WITH_AS(
      parse_dataset_csv(manifest_header() + "a,rock,s1,noise,3,r,d\n" +
                            "a,rock,s1,lowpass,3,r,d\n",
                        "m"),
      doctest::Contains("duplicate"), DataError);
  CHECK_THROWS_WITH_AS(
      parse_dataset_csv(manifest_header() + "a,rock,s1,flanger,3,r,d\n",
                        "m"),
      doctest::Contains("flanger"), DataError);
  CHECK_THROWS_WITH_AS(
      parse_dataset_csv(manifest_header() + "a,rock,s1,noise,xyz,r,d\n",
                        "m"),
      doctest::Contains("rating"), DataError);
  CHECK_THROWS_WITH_AS(
      parse_dataset_csv("clip_id,genre,song,degradation,rating,"
                        "reference_path\n",
                        "m"),
      doctest::Contains("columns"), DataError);
  CHECK_THROWS_WITH_AS(
      parse_dataset_csv("clip,genre,song,degradation,rating,reference_path,"
                        "degraded_path\na,r,s,noise,3,r,d\n",
                        "m"),
      doctest::Contains("clip_id"), DataError);
}

TEST_CASE("quoted CSV fields carry commas and escaped quotes") {
  const std::string text =
      manifest_header() +
      "a,\"rock, classic\",s1,noise,3.5,\"/tmp/a \"\"x\"\".wav\",d.wav\n";
  const std::vector<RatingRecord> records = parse_dataset_csv(text, "m");
  REQUIRE(records.size() == 1);
  CHECK(records[0].genre == "rock, classic");
  CHECK(records[0].reference_path == "/tmp/a \"x\".wav");
}

TEST_CASE("PMQD-shaped manifest parses to 975 records and splits 80-20") {
  const std::vector<RatingRecord> records =
      parse_dataset_csv(pmqd_shaped_manifest(13, 5, 3), "pmqd");
  CHECK(records.size() == 975);

  const SplitResult split = split_train_test(records);
  CHECK(split.warnings.empty());
  // Last song in each genre: 13 genres x 3 clips x 5 rows.
  CHECK(split.test.size() == 195);
  std::size_t degraded = 0;
  for (const RatingRecord& r : split.test) {
    if (r.degradation != "reference") ++degraded;
  }
  CHECK(degraded == 156);
  CHECK(split.train.size() + split.test.size() == records.size());
  for (const RatingRecord& r : split.test) CHECK(r.song == "song4");
}

TEST_CASE("split keeps single-song genres in train with a warning") {
  const std::string text = manifest_header() +
                           "a,solo,only,noise,3,r,d\n"
                           "b,duo,s1,noise,3,r,d\n"
                           "c,duo,s2,noise,3,r,d\n";
  const SplitResult split = split_train_test(parse_dataset_csv(text, "m"));
  REQUIRE(split.warnings.size() == 1);
  CHECK(split.warnings[0].find("solo") != std::string::npos);
  REQUIRE(split.test.size() == 1);
  CHECK(split.test[0].clip_id == "c");
  CHECK(split.train.size() == 2);
}

TEST_CASE("split of empty input is empty") {
  const SplitResult split = split_train_test({});
  CHECK(split.train.empty());
  CHECK(split.test.empty());
}

TEST_CASE("spearman on monotone data") {
  CHECK(spearman({1, 2, 3}, {10, 20, 30}) == 1.0);
  CHECK(spearman({1, 2, 3}, {3, 2, 1}) == -1.0);
}

TEST_CASE("spearman matches the brute-force rank oracle exactly") {
  CounterRng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const bool ties = trial % 2 == 0;
    const std::size_t n = 5 + rng.next_below(40);
    const std::vector<double> xs = random_vector(n, rng, ties);
    const std::vector<double> ys = random_vector(n, rng, ties);
    const std::vector<double> rx = brute_force_ranks(xs);
    const std::vector<double> ry = brute_force_ranks(ys);
    // Degenerate draws (all equal) are skipped the way the harness does.
    bool degenerate = true;
    for (double v : rx) degenerate &= v == rx[0];
    bool deg_y = true;
    for (double v : ry) deg_y &= v == ry[0];
    if (degenerate || deg_y) continue;

    const std::vector<double> lib_rx = average_ranks(xs);
    for (std::size_t i = 0; i < n; ++i) CHECK(lib_rx[i] == rx[i]);
    CHECK(spearman(xs, ys) == two_pass_pearson(rx, ry));
  }
}

TEST_CASE("tied example matches the average-rank computation") {
  const std::vector<double> xs = {1, 1, 2, 3};
  const std::vector<double> ys = {2, 1, 4, 3};
  const std::vector<double> rx = brute_force_ranks(xs);
  CHECK(rx[0] == 1.5);
  CHECK(rx[1] == 1.5);
  CHECK(rx[2] == 3.0);
  CHECK(rx[3] == 4.0);
  CHECK(spearman(xs, ys) ==
        two_pass_pearson(rx, brute_force_ranks(ys)));
}

TEST_CASE("spearman is invariant under strictly increasing transforms") {
  CounterRng rng(2);
  const std::vector<double> xs = random_vector(30, rng, false);
  const std::vector<double> ys = random_vector(30, rng, false);
  const double base = spearman(xs, ys);
  std::vector<double> ex(xs.size()), ay(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ex[i] = std::exp(xs[i]);
    ay[i] = 3.0 * ys[i] + 11.0;
  }
  CHECK(spearman(ex, ys) == base);
  CHECK(spearman(xs, ay) == base);
}

TEST_CASE("spearman equals pearson on pre-ranked tie-free data") {
  CounterRng rng(3);
  std::vector<double> xs(20), ys(20);
  for (std::size_t i = 0; i < 20; ++i) {
    xs[i] = static_cast<double>(i + 1);
    ys[i] = static_cast<double>((i * 7 + 3) % 20 + 1);
  }
  rng.shuffle(xs);
  CHECK(spearman(xs, ys) == pearson(average_ranks(xs), average_ranks(ys)));
  CHECK(spearman(xs, ys) == pearson(xs, ys));
}

TEST_CASE("pearson basics and the two-pass oracle") {
  std::vector<double> xs = {1, 2, 3, 4};
  std::vector<double> ys;
  for (double x : xs) ys.push_back(3.0 * x + 1.0);
  CHECK(pearson(xs, ys) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(std::fabs(pearson({1, -1, 1, -1}, {1, 1, -1, -1})) <= 1e-12);

  CounterRng rng(4);
  const std::vector<double> a = random_vector(100, rng, false);
  const std::vector<double> b = random_vector(100, rng, false);
  CHECK(pearson(a, b) ==
        doctest::Approx(two_pass_pearson(a, b)).epsilon(1e-12));
}

TEST_CASE("degenerate correlations raise errors") {
  CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), NumericError);
  CHECK_THROWS_AS(spearman({2, 2, 2}, {1, 2, 3}), NumericError);
  CHECK_THROWS_AS(spearman({1, 2}, {1, 2}), DataError);
  CHECK_THROWS_AS(pearson({1}, {1}), DataError);
}

TEST_CASE("evaluate scores a synthetic dataset with known rank structure") {
  SpectrogramConfig cfg;
  cfg.n_fft = 256;
  cfg.hop_length = 64;
  cfg.n_mels = 32;
  cfg.sample_rate = 4000;
  const TempDataset ds = build_disk_dataset(cfg);

  std::vector<MetricBinding> metrics;
  metrics.push_back({"mse", [](const MelSpectrogram& a,
                               const MelSpectrogram& b) {
                       return mse(a, b);
                     }});
  metrics.push_back({"nsim", [](const MelSpectrogram& a,
                                const MelSpectrogram& b) {
                       return nsim(a, b);
                     }});
  EvalOptions opts;
  opts.spec_config = cfg;

  const EvalReport report = evaluate(ds.records, metrics, opts);
  CHECK(report.failures.empty());
  CHECK(report.scored_count == 8);
  // 2 metrics x (2 kinds + all).
  CHECK(report.cells.size() == 6);

  // Ratings were constructed to increase with the mse scores.
  for (const EvalCell& cell : report.cells) {
    if (cell.metric == "mse") {
      REQUIRE(cell.spearman.has_value());
      CHECK(*cell.spearman == doctest::Approx(1.0));
      if (cell.degradation == "all") CHECK(cell.n == 8);
    }
  }

  // Per-degradation cells agree with independently computed subsets.
  std::vector<double> noise_scores, noise_ratings;
  for (const RatingRecord& r : ds.records) {
    if (r.degradation != "noise") continue;
    const MelSpectrogram a =
        mel_spectrogram(decode_wav_file(r.reference_path), cfg);
    const MelSpectrogram b =
        mel_spectrogram(decode_wav_file(r.degraded_path), cfg);
    noise_scores.push_back(mse(a, b));
    noise_ratings.push_back(r.rating);
  }
  for (const EvalCell& cell : report.cells) {
    if (cell.metric == "mse" && cell.degradation == "noise") {
      CHECK(*cell.spearman ==
            doctest::Approx(spearman(noise_scores, noise_ratings)));
      CHECK(cell.n == noise_scores.size());
    }
  }

  // Input order and parallelism do not change the report.
  std::vector<RatingRecord> shuffled = ds.records;
  CounterRng rng(9);
  rng.shuffle(shuffled);
  EvalOptions jobs_opts = opts;
  jobs_opts.jobs = 3;
  const EvalReport again = evaluate(shuffled, metrics, jobs_opts);
  REQUIRE(again.cells.size() == report.cells.size());
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    CHECK(again.cells[i].metric == report.cells[i].metric);
    CHECK(again.cells[i].degradation == report.cells[i].degradation);
    CHECK(again.cells[i].spearman.value_or(-9) ==
          report.cells[i].spearman.value_or(-9));
  }

  // Report CSV shape.
  const std::string report_path = (ds.dir / "report.csv").string();
  write_report_csv(report, report_path);
  std::ifstream in(report_path);
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# spectrogram: ", 0) == 0);
  std::getline(in, line);
  CHECK(line == "metric,degradation,n,spearman,pearson");

  const std::string table = format_report_table(report);
  CHECK(table.find("mse") != std::string::npos);
  CHECK(table.find("all") != std::string::npos);
}

TEST_CASE("evaluate tolerates isolated failures and aborts on mass failure") {
  SpectrogramConfig cfg;
  cfg.n_fft = 256;
  cfg.hop_length = 64;
  cfg.n_mels = 32;
  cfg.sample_rate = 4000;
  const TempDataset ds = build_disk_dataset(cfg);

  std::vector<MetricBinding> metrics;
  metrics.push_back({"mse", [](const MelSpectrogram& a,
                               const MelSpectrogram& b) {
                       return mse(a, b);
                     }});
  EvalOptions opts;
  opts.spec_config = cfg;

  // Break one record out of twelve (8 degraded in the manifest + 4 below):
  // that stays under the 10% threshold only if the denominator is right, so
  // pad with extra good rows first.
  std::vector<RatingRecord> records = ds.records;
  std::vector<RatingRecord> extra = ds.records;
  for (std::size_t i = 0; i < 4; ++i) {
    RatingRecord r = extra[i];
    r.clip_id += "_dup";
    records.push_back(r);
  }
  RatingRecord broken = records[0];
  broken.clip_id = "broken";
  broken.degraded_path = (ds.dir / "missing.wav").string();
  records.push_back(broken);

  const EvalReport report = evaluate(records, metrics, opts);
  CHECK(report.failures.size() == 1);
  CHECK(report.scored_count == 12);

  // All records broken: far beyond the tolerated fraction.
  std::vector<RatingRecord> all_broken = ds.records;
  for (RatingRecord& r : all_broken) {
    r.degraded_path = (ds.dir / "missing.wav").string();
  }
  CHECK_THROWS_WITH_AS(evaluate(all_broken, metrics, opts),
                       doctest::Contains("10%"), DataError);
}
