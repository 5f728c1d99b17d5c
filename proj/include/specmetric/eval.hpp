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
//
// Rating-dataset ingestion, train/test splitting, rank correlations and the
// correlation-table harness that scores every metric over reference/degraded
// pairs.

#ifndef SPECMETRIC_EVAL_HPP_
#define SPECMETRIC_EVAL_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "specmetric/spectrogram.hpp"

namespace specmetric {

struct RatingRecord {
  std::string clip_id;
  std::string genre;
  std::string song;
  std::string degradation;  // one of the four kinds, or "reference"
  double rating = 0.0;      // in [1, 5]
  std::string reference_path;
  std::string degraded_path;
};

// Parses and validates the manifest CSV. Header must be exactly
// clip_id,genre,song,degradation,rating,reference_path,degraded_path.
// Errors name the offending line.
std::vector<RatingRecord> parse_dataset_csv(const std::string& text,
                                            const std::string& origin);
std::vector<RatingRecord> load_dataset(const std::string& csv_path);

struct SplitResult {
  std::vector<RatingRecord> train;
  std::vector<RatingRecord> test;
  std::vector<std::string> warnings;
};

// Per genre, every record of the lexicographically last song goes to test.
// Genres with fewer than two songs stay wholly in train, with a warning.
SplitResult split_train_test(const std::vector<RatingRecord>& records);

// Average ranks (1-based); ties get the mean of the positions they span.
std::vector<double> average_ranks(const std::vector<double>& xs);

// Product-moment correlation; throws NumericError when either side has no
// variance.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Pearson correlation of average ranks; needs length >= 3 and two distinct
// values on each side.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

struct MetricBinding {
  std::string name;
  std::function<double(const MelSpectrogram&, const MelSpectrogram&)> fn;
};

enum class EvalSplit { kAll, kTestOnly };

struct EvalCell {
  std::string metric;
  std::string degradation;  // a kind, or "all"
  std::size_t n = 0;
  std::optional<double> spearman;
  std::optional<double> pearson;
};

struct EvalReport {
  std::vector<EvalCell> cells;  // metric-major, degradations in kind order
  std::string spectrogram_fingerprint;
  std::vector<std::string> failures;
  std::size_t scored_count = 0;
};

struct EvalOptions {
  EvalSplit split = EvalSplit::kAll;
  int jobs = 1;
  SpectrogramConfig spec_config;
};

// Scores every degraded record with every metric (spectrograms are computed
// once per unique path and shared), then fills the per-degradation and
// all-data correlation cells. Records whose audio cannot be read are
// excluded and reported; more than 10% failures aborts.
EvalReport evaluate(const std::vector<RatingRecord>& records,
                    const std::vector<MetricBinding>& metrics,
                    const EvalOptions& opts);

// CSV: metric,degradation,n,spearman,pearson with '#' fingerprint comments.
void write_report_csv(const EvalReport& report, const std::string& path);

// Text table: one metric per row, one degradation per column plus all-data.
std::string format_report_table(const EvalReport& report);

}  // namespace specmetric

#endif  // SPECMETRIC_EVAL_HPP_
