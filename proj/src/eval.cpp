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

#include "specmetric/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "specmetric/audio_io.hpp"
#include "specmetric/error.hpp"

namespace specmetric {

namespace {

const std::vector<std::string> kManifestColumns = {
    "clip_id", "genre",  "song",
    "degradation", "rating", "reference_path",
    "degraded_path"};

const std::vector<std::string> kDegradationOrder = {"waveshape", "lowpass",
                                                    "limiter", "noise"};

bool is_known_degradation(const std::string& d) {
  return d == "reference" ||
         std::find(kDegradationOrder.begin(), kDegradationOrder.end(), d) !=
             kDegradationOrder.end();
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

// RFC-4180-style rows: quoted fields may contain commas, doubled quotes and
// newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        row_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_started || !field.empty() || !row.empty()) {
          row.push_back(std::move(field));
          field.clear();
          rows.push_back(std::move(row));
          row.clear();
          row_started = false;
        }
        break;
      default:
        field.push_back(c);
        row_started = true;
        break;
    }
  }
  if (row_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

}  // namespace

std::vector<RatingRecord> parse_dataset_csv(const std::string& text,
                                            const std::string& origin) {
  const std::vector<std::vector<std::string>> rows = parse_csv(text);
  if (rows.empty()) {
    throw DataError(origin + ": empty manifest");
  }
  const std::vector<std::string>& header = rows[0];
  if (header.size() != kManifestColumns.size()) {
    throw DataError(origin + ": expected " +
                    std::to_string(kManifestColumns.size()) +
                    " columns, got " + std::to_string(header.size()));
  }
  for (std::size_t i = 0; i < kManifestColumns.size(); ++i) {
    if (header[i] != kManifestColumns[i]) {
      throw DataError(origin + ": header column " + std::to_string(i + 1) +
                      " must be '" + kManifestColumns[i] + "', got '" +
                      header[i] + "'");
    }
  }

  std::vector<RatingRecord> records;
  std::set<std::string> seen_ids;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string where = origin + ": row " + std::to_string(r + 1);
    const std::vector<std::string>& row = rows[r];
    if (row.size() != kManifestColumns.size()) {
      throw DataError(where + ": expected " +
                      std::to_string(kManifestColumns.size()) +
                      " fields, got " + std::to_string(row.size()));
    }
    RatingRecord rec;
    rec.clip_id = row[0];
    rec.genre = row[1];
    rec.song = row[2];
    rec.degradation = row[3];
    rec.reference_path = row[5];
    rec.degraded_path = row[6];
    if (rec.clip_id.empty()) throw DataError(where + ": empty clip_id");
    if (!seen_ids.insert(rec.clip_id).second) {
      throw DataError(where + ": duplicate clip_id '" + rec.clip_id + "'");
    }
    if (!is_known_degradation(rec.degradation)) {
      throw DataError(where + ": unknown degradation '" + rec.degradation +
                      "'");
    }
    try {
      std::size_t used = 0;
      rec.rating = std::stod(row[4], &used);
      if (used != row[4].size()) {
        throw std::invalid_argument(row[4]);
      }
    } catch (const std::exception&) {
      throw DataError(where + ": cannot parse rating '" + row[4] + "'");
    }
    if (!(rec.rating >= 1.0 && rec.rating <= 5.0)) {
      throw DataError(where + ": rating out of range [1, 5]: " + row[4]);
    }
    if (rec.reference_path.empty() || rec.degraded_path.empty()) {
      throw DataError(where + ": empty audio path");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<RatingRecord> load_dataset(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open manifest: " + csv_path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_dataset_csv(ss.str(), csv_path);
}

SplitResult split_train_test(const std::vector<RatingRecord>& records) {
  SplitResult result;
  std::map<std::string, std::set<std::string>> songs_by_genre;
  for (const RatingRecord& r : records) {
    songs_by_genre[r.genre].insert(r.song);
  }
  std::map<std::string, std::string> test_song;
  for (const auto& [genre, songs] : songs_by_genre) {
    if (songs.size() < 2) {
      result.warnings.push_back("genre '" + genre +
                                "' has fewer than two songs; kept in train");
      continue;
    }
    test_song[genre] = *songs.rbegin();
  }
  for (const RatingRecord& r : records) {
    const auto it = test_song.find(r.genre);
    if (it != test_song.end() && it->second == r.song) {
      result.test.push_back(r);
    } else {
      result.train.push_back(r);
    }
  }
  return result;
}

std::vector<double> average_ranks(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&xs](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    // Positions i..j (0-based) share the mean 1-based rank.
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    throw DataError("pearson: length mismatch: " + std::to_string(xs.size()) +
                    " vs " + std::to_string(ys.size()));
  }
  const std::size_t n = xs.size();
  if (n < 2) throw DataError("pearson: need at least 2 samples");
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
  if (dx <= 0.0 || dy <= 0.0) {
    throw NumericError("pearson: undefined correlation, zero variance");
  }
  return num / std::sqrt(dx * dy);
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    throw DataError("spearman: length mismatch: " +
                    std::to_string(xs.size()) + " vs " +
                    std::to_string(ys.size()));
  }
  if (xs.size() < 3) throw DataError("spearman: need at least 3 samples");
  return pearson(average_ranks(xs), average_ranks(ys));
}

EvalReport evaluate(const std::vector<RatingRecord>& records,
                    const std::vector<MetricBinding>& metrics,
                    const EvalOptions& opts) {
  if (metrics.empty()) throw DataError("evaluate: no metrics configured");
  opts.spec_config.validate();

  std::vector<RatingRecord> selected;
  if (opts.split == EvalSplit::kTestOnly) {
    selected = split_train_test(records).test;
  } else {
    selected = records;
  }
  std::erase_if(selected, [](const RatingRecord& r) {
    return r.degradation == "reference";
  });
  std::sort(selected.begin(), selected.end(),
            [](const RatingRecord& a, const RatingRecord& b) {
              return a.clip_id < b.clip_id;
            });

  EvalReport report;
  report.spectrogram_fingerprint = opts.spec_config.fingerprint();
  if (selected.empty()) return report;

  // Spectrograms are computed once per unique path and shared across
  // records and metrics.
  std::vector<std::string> paths;
  {
    std::set<std::string> unique;
    for (const RatingRecord& r : selected) {
      unique.insert(r.reference_path);
      unique.insert(r.degraded_path);
    }
    paths.assign(unique.begin(), unique.end());
  }

  std::vector<std::optional<MelSpectrogram>> specs(paths.size());
  std::vector<std::string> spec_errors(paths.size());
  const int jobs = std::max(1, opts.jobs);
  {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= paths.size()) return;
        try {
          Waveform w = decode_wav_file(paths[i]);
          if (w.sample_rate != opts.spec_config.sample_rate) {
            w = resample(w, opts.spec_config.sample_rate);
          }
          specs[i] = mel_spectrogram(w, opts.spec_config);
        } catch (const Error& e) {
          spec_errors[i] = e.what();
        }
      }
    };
    if (jobs == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }
  }
  std::map<std::string, std::size_t> path_index;
  for (std::size_t i = 0; i < paths.size(); ++i) path_index[paths[i]] = i;

  // Score records; failures are excluded from the correlations.
  struct Scored {
    bool ok = false;
    std::vector<double> scores;  // one per metric
  };
  std::vector<Scored> scored(selected.size());
  {
    std::atomic<std::size_t> next{0};
    std::vector<std::string> record_errors(selected.size());
    auto worker = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= selected.size()) return;
        const RatingRecord& rec = selected[i];
        const std::size_t ri = path_index[rec.reference_path];
        const std::size_t di = path_index[rec.degraded_path];
        if (!specs[ri].has_value()) {
          record_errors[i] = rec.clip_id + ": " + spec_errors[ri];
          continue;
        }
        if (!specs[di].has_value()) {
          record_errors[i] = rec.clip_id + ": " + spec_errors[di];
          continue;
        }
        try {
          Scored s;
          s.scores.reserve(metrics.size());
          for (const MetricBinding& m : metrics) {
            s.scores.push_back(m.fn(*specs[ri], *specs[di]));
          }
          s.ok = true;
          scored[i] = std::move(s);
        } catch (const Error& e) {
          record_errors[i] = rec.clip_id + ": " + e.what();
        }
      }
    };
    if (jobs == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }
    for (const std::string& err : record_errors) {
      if (!err.empty()) report.failures.push_back(err);
    }
  }

  const double failure_fraction =
      static_cast<double>(report.failures.size()) /
      static_cast<double>(selected.size());
  if (failure_fraction > 0.10) {
    throw DataError("evaluate: " + std::to_string(report.failures.size()) +
                    " of " + std::to_string(selected.size()) +
                    " records failed (over 10%); aborting");
  }

  std::vector<std::string> present_kinds;
  for (const std::string& kind : kDegradationOrder) {
    for (const RatingRecord& r : selected) {
      if (r.degradation == kind) {
        present_kinds.push_back(kind);
        break;
      }
    }
  }

  for (std::size_t m = 0; m < metrics.size(); ++m) {
    std::vector<std::string> groups = present_kinds;
    groups.push_back("all");
    for (const std::string& group : groups) {
      EvalCell cell;
      cell.metric = metrics[m].name;
      cell.degradation = group;
      std::vector<double> scores, ratings;
      for (std::size_t i = 0; i < selected.size(); ++i) {
        if (!scored[i].ok) continue;
        if (group != "all" && selected[i].degradation != group) continue;
        scores.push_back(scored[i].scores[m]);
        ratings.push_back(selected[i].rating);
      }
      cell.n = scores.size();
      try {
        cell.spearman = spearman(scores, ratings);
      } catch (const Error&) {
        cell.spearman = std::nullopt;
      }
      try {
        cell.pearson = scores.size() >= 2
                           ? std::optional<double>(pearson(scores, ratings))
                           : std::nullopt;
      } catch (const Error&) {
        cell.pearson = std::nullopt;
      }
      report.cells.push_back(std::move(cell));
    }
  }
  report.scored_count =
      static_cast<std::size_t>(std::count_if(scored.begin(), scored.end(),
                                             [](const Scored& s) {
                                               return s.ok;
                                             }));
  return report;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open report file for writing: " + path);
  out << "# spectrogram: " << report.spectrogram_fingerprint << "\n";
  if (!report.failures.empty()) {
    out << "# failures: " << report.failures.size() << "\n";
  }
  out << "metric,degradation,n,spearman,pearson\n";
  for (const EvalCell& c : report.cells) {
    out << csv_escape(c.metric) << "," << c.degradation << "," << c.n << ",";
    if (c.spearman.has_value()) out << format_double(*c.spearman);
    out << ",";
    if (c.pearson.has_value()) out << format_double(*c.pearson);
    out << "\n";
  }
  if (!out) throw DataError("failed writing report file: " + path);
}

std::string format_report_table(const EvalReport& report) {
  std::vector<std::string> columns;
  for (const EvalCell& c : report.cells) {
    if (std::find(columns.begin(), columns.end(), c.degradation) ==
        columns.end()) {
      columns.push_back(c.degradation);
    }
  }
  std::vector<std::string> metric_names;
  for (const EvalCell& c : report.cells) {
    if (std::find(metric_names.begin(), metric_names.end(), c.metric) ==
        metric_names.end()) {
      metric_names.push_back(c.metric);
    }
  }

  std::ostringstream os;
  os << "Spearman correlation vs human ratings\n";
  os << std::left << std::setw(10) << "metric";
  for (const std::string& col : columns) {
    os << std::right << std::setw(11) << col;
  }
  os << "\n";
  for (const std::string& name : metric_names) {
    os << std::left << std::setw(10) << name;
    for (const std::string& col : columns) {
      double value = 0.0;
      bool found = false;
      for (const EvalCell& c : report.cells) {
        if (c.metric == name && c.degradation == col &&
            c.spearman.has_value()) {
          value = *c.spearman;
          found = true;
        }
      }
      if (found) {
        os << std::right << std::setw(11) << std::fixed
           << std::setprecision(3) << value;
        os.unsetf(std::ios::fixed);
      } else {
        os << std::right << std::setw(11) << "n/a";
      }
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace specmetric
